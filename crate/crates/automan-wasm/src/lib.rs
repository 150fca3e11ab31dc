//! Browser bindings for three interactive views: Gaussian-sum curve fitting,
//! mask learning on the product+log task, and temporal-lag recovery.
//!
//! Each demo owns its state and exposes `step` plus typed getters; the page
//! drives the loop from `requestAnimationFrame` and draws on canvases.

use wasm_bindgen::prelude::*;

use automan_core::data::{fit_statistics, synthesize, Split};
use automan_core::gaussian::{corpus_target, FitOptions, GaussianFitter};
use automan_core::pipeline::PipelineModel;
use automan_core::trainer::{evaluate, train_raw_mlp_baseline, TrainConfig, Trainer};

fn to_js_err(err: automan_core::Error) -> JsValue {
    JsValue::from_str(&err.to_string())
}

/// Interactive Gaussian-sum fit of a 1-D corpus target.
#[wasm_bindgen]
pub struct GaussFitDemo {
    fitter: GaussianFitter,
    target_values: Vec<f64>,
    display_grid: Vec<f64>,
    n_half: f64,
}

#[wasm_bindgen]
impl GaussFitDemo {
    /// `target` is one of: sin, abs-smooth, step-smooth.
    #[wasm_bindgen(constructor)]
    pub fn new(target: &str, k: usize, seed: u64) -> Result<GaussFitDemo, JsValue> {
        let (dim, f) = corpus_target(target).map_err(to_js_err)?;
        if dim != 1 {
            return Err(JsValue::from_str("the browser demo draws 1-D targets only"));
        }
        let n_half = 3.0;
        let opts = FitOptions::for_dim(1);
        let fitter = GaussianFitter::new(f.as_ref(), k, n_half, 1, seed, &opts).map_err(to_js_err)?;

        let resolution = 256;
        let display_grid: Vec<f64> = (0..resolution)
            .map(|i| -n_half + 2.0 * n_half * i as f64 / (resolution - 1) as f64)
            .collect();
        let target_values: Vec<f64> = display_grid.iter().map(|&x| f(&[x])).collect();
        Ok(GaussFitDemo { fitter, target_values, display_grid, n_half })
    }

    /// Run `n` optimization steps; returns the latest grid MSE.
    pub fn step(&mut self, n: usize) -> Result<f64, JsValue> {
        let mut loss = self.fitter.last_loss;
        for _ in 0..n {
            loss = self.fitter.step().map_err(to_js_err)?;
        }
        Ok(loss)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.display_grid.clone()
    }

    pub fn target_curve(&self) -> Vec<f64> {
        self.target_values.clone()
    }

    pub fn fitted_curve(&self) -> Vec<f64> {
        let sum = self.fitter.current();
        self.display_grid.iter().map(|&x| sum.eval(&[x])).collect()
    }

    /// Individual component curves, flattened row-major (k x grid length).
    pub fn component_curves(&self) -> Vec<f64> {
        let sum = self.fitter.current();
        let mut out = Vec::with_capacity(sum.components.len() * self.display_grid.len());
        for comp in &sum.components {
            for &x in &self.display_grid {
                out.push(comp.eval(&[x]));
            }
        }
        out
    }

    /// Max deviation over the display grid (same resolution as the fit).
    pub fn uniform_error(&self) -> f64 {
        let sum = self.fitter.current();
        self.display_grid
            .iter()
            .zip(&self.target_values)
            .map(|(&x, &t)| (t - sum.eval(&[x])).abs())
            .fold(0.0, f64::max)
    }

    pub fn half_width(&self) -> f64 {
        self.n_half
    }
}

/// Mask learning on the synthetic product+log task: watch the multiplicative
/// aggregation's local mask concentrate on the two product features.
#[wasm_bindgen]
pub struct ProductLogDemo {
    trainer: Trainer,
    baseline_mae: f64,
}

#[wasm_bindgen]
impl ProductLogDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<ProductLogDemo, JsValue> {
        let mut dataset = synthesize("product+log", 900, 3, seed).map_err(to_js_err)?;
        dataset.split((0.7, 0.15, 0.15), seed).map_err(to_js_err)?;
        let config = TrainConfig { steps: 3000, seed, ..TrainConfig::default() };
        let stats = fit_statistics(&dataset).map_err(to_js_err)?;
        let model = PipelineModel::new(&dataset, stats, config.pipeline_config(), seed)
            .map_err(to_js_err)?;
        let baseline = train_raw_mlp_baseline(
            &dataset,
            &TrainConfig { steps: 600, ..config.clone() },
        )
        .map_err(to_js_err)?;
        let trainer = Trainer::new(model, dataset, config).map_err(to_js_err)?;
        Ok(ProductLogDemo { trainer, baseline_mae: baseline.test_metric })
    }

    pub fn step(&mut self, n: usize) -> Result<f64, JsValue> {
        let mut loss = 0.0;
        for _ in 0..n {
            loss = self.trainer.step().map_err(to_js_err)?;
        }
        Ok(loss)
    }

    pub fn steps_done(&self) -> usize {
        self.trainer.steps_done
    }

    /// Softmax probabilities of the multiplicative aggregation's local mask,
    /// one per input feature.
    pub fn mult_mask_probs(&self) -> Vec<f64> {
        softmax_of(self.trainer.model.params.get("mask/local/MultAgg").map(|t| t.data()))
    }

    /// Softmax probabilities of the logarithm transform's local mask.
    pub fn log_mask_probs(&self) -> Vec<f64> {
        softmax_of(self.trainer.model.params.get("mask/local/Logarithm").map(|t| t.data()))
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.trainer.model.numeric_feature_names().to_vec()
    }

    pub fn test_mae(&self) -> Result<f64, JsValue> {
        evaluate(&self.trainer.model, &self.trainer.dataset, Split::Test).map_err(to_js_err)
    }

    pub fn baseline_mae(&self) -> f64 {
        self.baseline_mae
    }

    /// Rendered provenance of the globally kept columns.
    pub fn kept_provenance(&self) -> Result<Vec<String>, JsValue> {
        let rows = self.trainer.dataset.rows_in(Split::Test);
        let eng = self.trainer.model.apply(&self.trainer.dataset, &rows).map_err(to_js_err)?;
        Ok(eng.provenance.iter().map(|p| p.render()).collect())
    }
}

/// Temporal-lag recovery on the noise-free lag-2 task: watch the temporal
/// mask place its weight on the true offset.
#[wasm_bindgen]
pub struct LagRecoveryDemo {
    trainer: Trainer,
}

#[wasm_bindgen]
impl LagRecoveryDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<LagRecoveryDemo, JsValue> {
        let mut dataset = synthesize("lag2", 600, 0, seed).map_err(to_js_err)?;
        dataset.split((0.7, 0.15, 0.15), seed).map_err(to_js_err)?;
        let config = TrainConfig { steps: 3000, seed, ..TrainConfig::default() };
        let stats = fit_statistics(&dataset).map_err(to_js_err)?;
        let model = PipelineModel::new(&dataset, stats, config.pipeline_config(), seed)
            .map_err(to_js_err)?;
        let trainer = Trainer::new(model, dataset, config).map_err(to_js_err)?;
        Ok(LagRecoveryDemo { trainer })
    }

    pub fn step(&mut self, n: usize) -> Result<f64, JsValue> {
        let mut loss = 0.0;
        for _ in 0..n {
            loss = self.trainer.step().map_err(to_js_err)?;
        }
        Ok(loss)
    }

    pub fn steps_done(&self) -> usize {
        self.trainer.steps_done
    }

    /// Lag-mask probabilities indexed by offset from the window end
    /// (offset 0 = current step). The generator's true offset is 2.
    pub fn lag_probs_by_offset(&self) -> Vec<f64> {
        let probs = softmax_of(
            self.trainer.model.params.get("mask/temporal/0/TemporalLag").map(|t| t.data()),
        );
        probs.into_iter().rev().collect()
    }

    pub fn test_mae(&self) -> Result<f64, JsValue> {
        evaluate(&self.trainer.model, &self.trainer.dataset, Split::Test).map_err(to_js_err)
    }

    /// Rendered provenance of the kept columns (look for the lag entry).
    pub fn kept_provenance(&self) -> Result<Vec<String>, JsValue> {
        let rows = self.trainer.dataset.rows_in(Split::Test);
        let eng = self.trainer.model.apply(&self.trainer.dataset, &rows).map_err(to_js_err)?;
        Ok(eng.provenance.iter().map(|p| p.render()).collect())
    }
}

fn softmax_of(logits: Option<&[f64]>) -> Vec<f64> {
    let Some(logits) = logits else { return Vec::new() };
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
