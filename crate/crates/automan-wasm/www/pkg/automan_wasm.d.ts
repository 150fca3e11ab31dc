/* tslint:disable */
/* eslint-disable */

/**
 * Interactive Gaussian-sum fit of a 1-D corpus target.
 */
export class GaussFitDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Individual component curves, flattened row-major (k x grid length).
     */
    component_curves(): Float64Array;
    fitted_curve(): Float64Array;
    grid(): Float64Array;
    half_width(): number;
    /**
     * `target` is one of: sin, abs-smooth, step-smooth.
     */
    constructor(target: string, k: number, seed: bigint);
    /**
     * Run `n` optimization steps; returns the latest grid MSE.
     */
    step(n: number): number;
    target_curve(): Float64Array;
    /**
     * Max deviation over the display grid (same resolution as the fit).
     */
    uniform_error(): number;
}

/**
 * Temporal-lag recovery on the noise-free lag-2 task: watch the temporal
 * mask place its weight on the true offset.
 */
export class LagRecoveryDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Rendered provenance of the kept columns (look for the lag entry).
     */
    kept_provenance(): string[];
    /**
     * Lag-mask probabilities indexed by offset from the window end
     * (offset 0 = current step). The generator's true offset is 2.
     */
    lag_probs_by_offset(): Float64Array;
    constructor(seed: bigint);
    step(n: number): number;
    steps_done(): number;
    test_mae(): number;
}

/**
 * Mask learning on the synthetic product+log task: watch the multiplicative
 * aggregation's local mask concentrate on the two product features.
 */
export class ProductLogDemo {
    free(): void;
    [Symbol.dispose](): void;
    baseline_mae(): number;
    feature_names(): string[];
    /**
     * Rendered provenance of the globally kept columns.
     */
    kept_provenance(): string[];
    /**
     * Softmax probabilities of the logarithm transform's local mask.
     */
    log_mask_probs(): Float64Array;
    /**
     * Softmax probabilities of the multiplicative aggregation's local mask,
     * one per input feature.
     */
    mult_mask_probs(): Float64Array;
    constructor(seed: bigint);
    step(n: number): number;
    steps_done(): number;
    test_mae(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_gaussfitdemo_free: (a: number, b: number) => void;
    readonly __wbg_lagrecoverydemo_free: (a: number, b: number) => void;
    readonly __wbg_productlogdemo_free: (a: number, b: number) => void;
    readonly gaussfitdemo_component_curves: (a: number) => [number, number];
    readonly gaussfitdemo_fitted_curve: (a: number) => [number, number];
    readonly gaussfitdemo_grid: (a: number) => [number, number];
    readonly gaussfitdemo_half_width: (a: number) => number;
    readonly gaussfitdemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly gaussfitdemo_step: (a: number, b: number) => [number, number, number];
    readonly gaussfitdemo_target_curve: (a: number) => [number, number];
    readonly gaussfitdemo_uniform_error: (a: number) => number;
    readonly lagrecoverydemo_kept_provenance: (a: number) => [number, number, number, number];
    readonly lagrecoverydemo_lag_probs_by_offset: (a: number) => [number, number];
    readonly lagrecoverydemo_new: (a: bigint) => [number, number, number];
    readonly lagrecoverydemo_step: (a: number, b: number) => [number, number, number];
    readonly lagrecoverydemo_steps_done: (a: number) => number;
    readonly lagrecoverydemo_test_mae: (a: number) => [number, number, number];
    readonly productlogdemo_baseline_mae: (a: number) => number;
    readonly productlogdemo_feature_names: (a: number) => [number, number];
    readonly productlogdemo_kept_provenance: (a: number) => [number, number, number, number];
    readonly productlogdemo_log_mask_probs: (a: number) => [number, number];
    readonly productlogdemo_mult_mask_probs: (a: number) => [number, number];
    readonly productlogdemo_new: (a: bigint) => [number, number, number];
    readonly productlogdemo_step: (a: number, b: number) => [number, number, number];
    readonly productlogdemo_steps_done: (a: number) => number;
    readonly productlogdemo_test_mae: (a: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
