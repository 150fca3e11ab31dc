/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_gaussfitdemo_free: (a: number, b: number) => void;
export const __wbg_lagrecoverydemo_free: (a: number, b: number) => void;
export const __wbg_productlogdemo_free: (a: number, b: number) => void;
export const gaussfitdemo_component_curves: (a: number) => [number, number];
export const gaussfitdemo_fitted_curve: (a: number) => [number, number];
export const gaussfitdemo_grid: (a: number) => [number, number];
export const gaussfitdemo_half_width: (a: number) => number;
export const gaussfitdemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const gaussfitdemo_step: (a: number, b: number) => [number, number, number];
export const gaussfitdemo_target_curve: (a: number) => [number, number];
export const gaussfitdemo_uniform_error: (a: number) => number;
export const lagrecoverydemo_kept_provenance: (a: number) => [number, number, number, number];
export const lagrecoverydemo_lag_probs_by_offset: (a: number) => [number, number];
export const lagrecoverydemo_new: (a: bigint) => [number, number, number];
export const lagrecoverydemo_step: (a: number, b: number) => [number, number, number];
export const lagrecoverydemo_steps_done: (a: number) => number;
export const lagrecoverydemo_test_mae: (a: number) => [number, number, number];
export const productlogdemo_baseline_mae: (a: number) => number;
export const productlogdemo_feature_names: (a: number) => [number, number];
export const productlogdemo_kept_provenance: (a: number) => [number, number, number, number];
export const productlogdemo_log_mask_probs: (a: number) => [number, number];
export const productlogdemo_mult_mask_probs: (a: number) => [number, number];
export const productlogdemo_new: (a: bigint) => [number, number, number];
export const productlogdemo_step: (a: number, b: number) => [number, number, number];
export const productlogdemo_steps_done: (a: number) => number;
export const productlogdemo_test_mae: (a: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
