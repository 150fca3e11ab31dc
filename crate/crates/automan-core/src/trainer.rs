//! The optimization loop: minibatch Adam over all learnable leaves,
//! periodic validation with best-parameter restoration, evaluation metrics,
//! feature export with a provenance manifest, checkpoints, and the scaling
//! benchmark harness.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::data::{fit_statistics, Dataset, Labels, Split, TaskKind};
use crate::error::{Error, Result};
use crate::pipeline::{ParamSet, PipelineConfig, PipelineModel, MLP_HIDDEN_WIDTH};
use crate::rng::Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of optimization steps T.
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Local mask selection width.
    pub h: usize,
    /// Global mask selection width.
    pub h_glb: usize,
    /// Validation metric cadence, in steps.
    pub check_interval: usize,
    /// Early stop after this many intervals without improvement.
    pub patience: usize,
    /// Decoupled weight decay applied to the prediction head only. Keeping
    /// the head small pushes representational scale into the masks and
    /// transforms, which is what makes selection weights interpretable.
    pub head_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 3000,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            h: 5,
            h_glb: 16,
            check_interval: 50,
            patience: 10,
            head_decay: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0
            || self.batch_size == 0
            || self.learning_rate <= 0.0
            || self.h == 0
            || self.h_glb == 0
            || self.check_interval == 0
            || self.patience == 0
            || self.head_decay < 0.0
        {
            return Err(Error::invalid("TrainConfig", "all fields must be positive"));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig { h: self.h, h_glb: self.h_glb, hidden: MLP_HIDDEN_WIDTH }
    }
}

/// Training curves and outcome. Wall-clock is measured but kept out of the
/// serialized report so identical seeds produce byte-identical files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// (step, minibatch loss) at every check interval.
    pub loss_curve: Vec<(usize, f64)>,
    /// (step, validation metric) at every check interval.
    pub val_curve: Vec<(usize, f64)>,
    /// Metric of the restored (best-validation) parameters.
    pub final_metric: f64,
    pub best_step: usize,
    pub stopped_early: bool,
    #[serde(skip)]
    pub wall_clock_secs: f64,
    /// Rendered provenance of the globally kept columns.
    pub provenance: Vec<String>,
    pub global_weights: Vec<f64>,
}

#[cfg(not(target_arch = "wasm32"))]
fn now_secs() -> f64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[cfg(target_arch = "wasm32")]
fn now_secs() -> f64 {
    0.0
}

// ── Adam ────────────────────────────────────────────────────────────────

/// Adaptive-moment first-order updates with the standard decay constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    /// Decoupled decay per parameter (zero for most).
    decay: Vec<f64>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Self::with_decay(params, lr, vec![0.0; params.len()])
    }

    pub fn with_decay(params: &ParamSet, lr: f64, decay: Vec<f64>) -> Self {
        let m = params.values().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        let v = params.values().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m, v, decay }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, params: &mut ParamSet, leaves: &[Var], grads: &Gradients) -> Result<()> {
        self.t += 1;
        let bias1 = 1.0 - self.beta1.powi(self.t as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let grad = grads
                .get(leaves[i])
                .ok_or_else(|| Error::invalid("Adam::step", "missing gradient"))?;
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let theta = params.value_mut(i).data_mut();
            let decay = self.decay[i];
            for c in 0..theta.len() {
                let g = grad.data()[c];
                m[c] = self.beta1 * m[c] + (1.0 - self.beta1) * g;
                v[c] = self.beta2 * v[c] + (1.0 - self.beta2) * g * g;
                let m_hat = m[c] / bias1;
                let v_hat = v[c] / bias2;
                theta[c] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + decay * theta[c]);
            }
        }
        Ok(())
    }
}

// ── Trainer ─────────────────────────────────────────────────────────────

/// Owns one model during optimization. `step` advances one minibatch so
/// interactive front ends can drive training incrementally; `train` runs the
/// full loop with validation tracking and best-parameter restoration.
pub struct Trainer {
    pub model: PipelineModel,
    pub dataset: Dataset,
    pub config: TrainConfig,
    adam: Adam,
    rng: Rng,
    train_rows: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
    pub steps_done: usize,
}

impl Trainer {
    pub fn new(model: PipelineModel, dataset: Dataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let train_rows = dataset.rows_in(Split::Train);
        if train_rows.is_empty() {
            return Err(Error::invalid("Trainer", "training split is empty"));
        }
        let decay = (0..model.params.len())
            .map(|i| {
                if model.params.name(i).starts_with("mlp/") {
                    config.head_decay
                } else {
                    0.0
                }
            })
            .collect();
        let adam = Adam::with_decay(&model.params, config.learning_rate, decay);
        let mut rng = Rng::new(config.seed ^ 0x7261696e);
        let mut order: Vec<usize> = (0..train_rows.len()).collect();
        rng.shuffle(&mut order);
        Ok(Trainer {
            model,
            dataset,
            config,
            adam,
            rng,
            train_rows,
            order,
            cursor: 0,
            steps_done: 0,
        })
    }

    fn next_batch_rows(&mut self) -> Vec<usize> {
        let b = self.config.batch_size.min(self.train_rows.len());
        let mut rows = Vec::with_capacity(b);
        for _ in 0..b {
            if self.cursor >= self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.cursor = 0;
            }
            rows.push(self.train_rows[self.order[self.cursor]]);
            self.cursor += 1;
        }
        rows
    }

    /// One minibatch forward/backward/update. Returns the batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let rows = self.next_batch_rows();
        let batch = self.model.batch(&self.dataset, &rows)?;
        let mut tape = Tape::new();
        let leaves = self.model.params.insert_leaves(&mut tape);
        let loss = self.model.batch_loss(&mut tape, &leaves, &batch)?;
        let loss_value = tape.value(loss).scalar_value()?;
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at step {}",
                self.steps_done + 1
            )));
        }
        let grads = tape.backward(loss)?;
        self.adam.step(&mut self.model.params, &leaves, &grads)?;
        self.steps_done += 1;
        Ok(loss_value)
    }

    /// Metric on a split under the current parameters.
    pub fn evaluate(&self, split: Split) -> Result<f64> {
        evaluate(&self.model, &self.dataset, split)
    }

    /// Full loop: T steps with validation every `check_interval`, early stop
    /// after `patience` stale intervals, best-validation parameters restored
    /// at the end. Falls back to the training split when no validation rows
    /// exist.
    pub fn train(mut self) -> Result<(PipelineModel, TrainReport)> {
        let started = now_secs();
        let val_split = if self.dataset.rows_in(Split::Validation).is_empty() {
            Split::Train
        } else {
            Split::Validation
        };
        let higher_is_better = matches!(self.model.task, TaskKind::Classification);

        let mut loss_curve = Vec::new();
        let mut val_curve = Vec::new();
        let mut best_metric = if higher_is_better { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut best_step = 0;
        let mut best_params: Option<Vec<Tensor>> = None;
        let mut stale_intervals = 0;
        let mut stopped_early = false;

        let mut last_loss = f64::NAN;
        for step in 1..=self.config.steps {
            last_loss = self.step()?;
            if step % self.config.check_interval == 0 || step == self.config.steps {
                let metric = self.evaluate(val_split)?;
                loss_curve.push((step, last_loss));
                val_curve.push((step, metric));
                let improved = if higher_is_better { metric > best_metric } else { metric < best_metric };
                if improved {
                    best_metric = metric;
                    best_step = step;
                    best_params = Some(self.model.params.values().to_vec());
                    stale_intervals = 0;
                } else {
                    stale_intervals += 1;
                    if stale_intervals >= self.config.patience {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
        let _ = last_loss;

        if let Some(best) = best_params {
            self.model.params.set_values(best)?;
        }

        let eng = self.model.apply(&self.dataset, &self.dataset.rows_in(Split::Train))?;
        let report = TrainReport {
            loss_curve,
            val_curve,
            final_metric: best_metric,
            best_step,
            stopped_early,
            wall_clock_secs: now_secs() - started,
            provenance: eng.provenance.iter().map(|p| p.render()).collect(),
            global_weights: eng.global_weights,
        };
        Ok((self.model, report))
    }
}

// ── Evaluation ──────────────────────────────────────────────────────────

/// Accuracy in percent for classification, mean absolute error for
/// regression, computed on the named split only.
pub fn evaluate(model: &PipelineModel, dataset: &Dataset, split: Split) -> Result<f64> {
    let rows = dataset.rows_in(split);
    if rows.is_empty() {
        return Err(Error::invalid("evaluate", format!("split {split:?} is empty")));
    }
    let predictions = model.predict(dataset, &rows)?;
    evaluate_predictions(&predictions, &dataset.labels_for(&rows))
}

/// Metric of raw predictions against labels; the split-independent core of
/// `evaluate`, usable with any predictor.
pub fn evaluate_predictions(predictions: &Tensor, labels: &Labels) -> Result<f64> {
    match labels {
        Labels::Classes { values, .. } => {
            let n = values.len();
            let classes = predictions.cols();
            let mut correct = 0usize;
            for (r, &y) in values.iter().enumerate() {
                let mut arg = 0;
                let mut best = f64::NEG_INFINITY;
                for c in 0..classes {
                    let v = predictions.at(r, c);
                    if v > best {
                        best = v;
                        arg = c;
                    }
                }
                if arg == y {
                    correct += 1;
                }
            }
            Ok(100.0 * correct as f64 / n as f64)
        }
        Labels::Values(values) => {
            let n = values.len();
            let mae = values
                .iter()
                .enumerate()
                .map(|(r, &y)| (predictions.at(r, 0) - y).abs())
                .sum::<f64>()
                / n as f64;
            Ok(mae)
        }
    }
}

// ── Feature export ──────────────────────────────────────────────────────

/// Write engineered features per split (`features_<split>.csv`, one column
/// per kept slot named by provenance slug) plus `manifest.txt` describing
/// every kept column. Re-exporting without retraining is byte-identical.
pub fn export_features(model: &PipelineModel, dataset: &Dataset, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest_written = false;
    for (split, label) in [
        (Split::Train, "train"),
        (Split::Validation, "validation"),
        (Split::Test, "test"),
    ] {
        let rows = dataset.rows_in(split);
        if rows.is_empty() {
            continue;
        }
        let eng = model.apply(dataset, &rows)?;
        let mut csv = String::new();
        let slugs: Vec<String> =
            eng.provenance.iter().enumerate().map(|(i, p)| p.slug(i)).collect();
        csv.push_str(&slugs.join(","));
        csv.push('\n');
        for r in 0..rows.len() {
            for c in 0..eng.matrix.cols() {
                if c > 0 {
                    csv.push(',');
                }
                let _ = write!(csv, "{}", eng.matrix.at(r, c));
            }
            csv.push('\n');
        }
        std::fs::write(out_dir.join(format!("features_{label}.csv")), csv)?;

        if !manifest_written {
            std::fs::write(out_dir.join("manifest.txt"), render_manifest(&eng))?;
            manifest_written = true;
        }
    }
    Ok(())
}

/// One line per kept column: descriptor, transform kind, weighted inputs,
/// learned constants, and the global mask weight (4 significant digits).
pub fn render_manifest(eng: &crate::pipeline::EngineeredFeatureSet) -> String {
    use crate::transforms::format_const;
    let mut out = String::new();
    for (i, p) in eng.provenance.iter().enumerate() {
        let inputs = p
            .inputs
            .iter()
            .map(|(name, w)| format!("{name}:{}", format_const(*w)))
            .collect::<Vec<_>>()
            .join(", ");
        let constants = if p.constants.is_empty() {
            "-".to_string()
        } else {
            p.constants
                .iter()
                .map(|(name, v)| format!("{name}={}", format_const(*v)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(
            out,
            "column {i}: {} | transform={} | inputs=[{inputs}] | constants=[{constants}] | global_weight={}",
            p.render(),
            p.transform,
            format_const(eng.global_weights[i]),
        );
    }
    out
}

/// Serialize the training curves; floats use shortest round-trip form so the
/// file is a pure function of the seed.
pub fn render_report_csv(report: &TrainReport) -> String {
    let mut out = String::from("step,train_loss,val_metric\n");
    for ((step, loss), (_, metric)) in report.loss_curve.iter().zip(&report.val_curve) {
        let _ = writeln!(out, "{step},{loss},{metric}");
    }
    out
}

// ── Checkpoints ─────────────────────────────────────────────────────────

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    schema_json: String,
    schema_digest: u64,
    classes: usize,
    config: PipelineConfig,
    code_tables: Vec<Vec<String>>,
    stats: crate::data::FittedStats,
    param_names: Vec<String>,
    param_values: Vec<Tensor>,
    seed: u64,
}

/// Write a versioned textual checkpoint: every parameter tensor, the fitted
/// statistics, and the schema digest.
pub fn save_checkpoint(model: &PipelineModel, seed: u64, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        schema_json: model.schema.to_json(),
        schema_digest: model.schema.digest(),
        classes: model.classes,
        config: model.config,
        code_tables: model.train_code_tables().to_vec(),
        stats: model.stats.clone(),
        param_names: (0..model.params.len())
            .map(|i| model.params.name(i).to_string())
            .collect(),
        param_values: model.params.values().to_vec(),
        seed,
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Rebuild a model from a checkpoint. Refuses mismatched versions or a
/// schema whose digest differs from the stored one.
pub fn load_checkpoint(path: &Path) -> Result<PipelineModel> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("parse: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} unsupported (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let schema = crate::data::Schema::from_json(&file.schema_json)?;
    if schema.digest() != file.schema_digest {
        return Err(Error::Checkpoint("schema digest mismatch".into()));
    }
    let mut model = PipelineModel::construct(
        schema,
        file.code_tables,
        file.classes,
        file.stats,
        file.config,
        file.seed,
    )?;
    // Parameter layout must agree exactly with the reconstruction.
    if file.param_names.len() != model.params.len() {
        return Err(Error::Checkpoint("parameter count mismatch".into()));
    }
    for (i, name) in file.param_names.iter().enumerate() {
        if model.params.name(i) != name {
            return Err(Error::Checkpoint(format!("parameter order mismatch at {name}")));
        }
    }
    model.params.set_values(file.param_values)?;
    Ok(model)
}

// ── Raw-feature baseline ────────────────────────────────────────────────

/// Train a plain two-layer MLP on the raw routed features (numeric columns,
/// scaled categorical codes, temporal last steps) with the same optimizer,
/// budget, and early-stop policy as the pipeline. This is the reference
/// point engineered features are judged against.
pub fn train_raw_mlp_baseline(dataset: &Dataset, config: &TrainConfig) -> Result<RawBaseline> {
    config.validate()?;
    let train_rows = dataset.rows_in(Split::Train);
    if train_rows.is_empty() {
        return Err(Error::invalid("baseline", "training split is empty"));
    }
    let val_rows = {
        let v = dataset.rows_in(Split::Validation);
        if v.is_empty() { train_rows.clone() } else { v }
    };

    let width = raw_width(dataset);
    let out_width = match dataset.schema.task {
        TaskKind::Classification => dataset.classes(),
        TaskKind::Regression => 1,
    };
    let mut rng = Rng::new(config.seed ^ 0x62617365);
    let mut params = ParamSet::new();
    params.register("w1", xavier_like(width, MLP_HIDDEN_WIDTH, &mut rng));
    params.register("b1", Tensor::zeros(vec![MLP_HIDDEN_WIDTH]));
    params.register("w2", xavier_like(MLP_HIDDEN_WIDTH, out_width, &mut rng));
    params.register("b2", Tensor::zeros(vec![out_width]));
    let mut adam = Adam::with_decay(
        &params,
        config.learning_rate,
        vec![config.head_decay; params.len()],
    );

    let forward = |tape: &mut Tape, leaves: &[Var], x: Tensor| -> Result<Var> {
        let xv = tape.constant(x);
        let a1 = tape.matmul(xv, leaves[0])?;
        let z1 = tape.add_row(a1, leaves[1])?;
        let hidden = tape.softplus(z1);
        let a2 = tape.matmul(hidden, leaves[2])?;
        tape.add_row(a2, leaves[3])
    };

    let metric_of = |params: &ParamSet, rows: &[usize]| -> Result<f64> {
        let mut tape = Tape::new();
        let leaves = params.insert_leaves(&mut tape);
        let pred = forward(&mut tape, &leaves, raw_matrix(dataset, rows))?;
        evaluate_predictions(tape.value(pred), &dataset.labels_for(rows))
    };

    let higher_is_better = matches!(dataset.schema.task, TaskKind::Classification);
    let mut best_metric = if higher_is_better { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut best_params: Option<Vec<Tensor>> = None;
    let mut stale = 0;

    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    rng.shuffle(&mut order);
    let mut cursor = 0usize;
    let b = config.batch_size.min(train_rows.len());

    for step in 1..=config.steps {
        let mut rows = Vec::with_capacity(b);
        for _ in 0..b {
            if cursor >= order.len() {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            rows.push(train_rows[order[cursor]]);
            cursor += 1;
        }

        let mut tape = Tape::new();
        let leaves = params.insert_leaves(&mut tape);
        let pred = forward(&mut tape, &leaves, raw_matrix(dataset, &rows))?;
        let loss = match dataset.labels_for(&rows) {
            Labels::Classes { values, .. } => tape.cross_entropy_mean(pred, &values)?,
            Labels::Values(values) => {
                let y = tape.constant(Tensor::matrix(values.len(), 1, values)?);
                let diff = tape.sub(pred, y)?;
                let abs = tape.abs(diff);
                tape.mean_all(abs)
            }
        };
        if !tape.value(loss).scalar_value()?.is_finite() {
            return Err(Error::Numeric(format!("baseline: non-finite loss at step {step}")));
        }
        let grads = tape.backward(loss)?;
        adam.step(&mut params, &leaves, &grads)?;

        if step % config.check_interval == 0 || step == config.steps {
            let metric = metric_of(&params, &val_rows)?;
            let improved = if higher_is_better { metric > best_metric } else { metric < best_metric };
            if improved {
                best_metric = metric;
                best_params = Some(params.values().to_vec());
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    if let Some(best) = best_params {
        params.set_values(best)?;
    }

    let test_rows = dataset.rows_in(Split::Test);
    let test_metric = if test_rows.is_empty() { best_metric } else { metric_of(&params, &test_rows)? };
    Ok(RawBaseline { val_metric: best_metric, test_metric })
}

pub struct RawBaseline {
    pub val_metric: f64,
    pub test_metric: f64,
}

/// Width of the raw routed feature block.
pub fn raw_width(dataset: &Dataset) -> usize {
    dataset.numeric_width() + dataset.categorical_width() + dataset.temporal_width()
}

/// Raw routed features: numeric columns, categorical codes scaled to [0,1],
/// and the last window step of each temporal feature.
pub fn raw_matrix(dataset: &Dataset, rows: &[usize]) -> Tensor {
    let width = raw_width(dataset);
    let mut data = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        for j in 0..dataset.numeric_width() {
            data.push(dataset.numeric_at(r, j));
        }
        for c in 0..dataset.categorical_width() {
            let levels = dataset.code_tables[c].len();
            let code = dataset.cat_code_at(r, c);
            data.push(if levels <= 1 { 0.0 } else { code as f64 / (levels - 1) as f64 });
        }
        for f in 0..dataset.temporal_width() {
            data.push(*dataset.window_at(f, r).last().expect("lookback >= 2"));
        }
    }
    Tensor::matrix(rows.len(), width, data).expect("sized data")
}

fn xavier_like(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.range(-limit, limit)).collect())
        .expect("sized data")
}

// ── Scaling benchmark ───────────────────────────────────────────────────

/// One measured configuration of the scaling benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub axis: String,
    pub size: usize,
    pub median_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Median of per-run ratios for paired measurements, keyed
    /// "axis:from->to". Interleaving both sizes inside one run cancels
    /// machine-load drift that would skew a ratio of independent medians.
    pub paired_ratios: Vec<(String, f64)>,
}

impl ScalingReport {
    /// Median per-run ratio along one axis when paired measurements exist,
    /// otherwise the ratio of the median times.
    pub fn ratio(&self, axis: &str, from: usize, to: usize) -> Option<f64> {
        let key = format!("{axis}:{from}->{to}");
        if let Some((_, r)) = self.paired_ratios.iter().find(|(k, _)| *k == key) {
            return Some(*r);
        }
        let find = |size: usize| {
            self.rows
                .iter()
                .find(|r| r.axis == axis && r.size == size)
                .map(|r| r.median_secs)
        };
        Some(find(to)? / find(from)?)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("axis,size,median_secs\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{},{:.6}", row.axis, row.size, row.median_secs);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Steps timed per measurement.
    pub steps: usize,
    /// Repetitions per configuration; the median is reported.
    pub repeats: usize,
    pub seed: u64,
    /// Samples for the feature-count axis.
    pub n_for_d: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { steps: 150, repeats: 7, seed: 7, n_for_d: 1000 }
    }
}

/// Config for benchmark timing runs. The measurement isolates the
/// feature-engineering cost (masks and transforms scale with d and k; the
/// predictor head does not), so the head is kept narrow: at the shipped
/// 256-wide head its fixed cost drowns the signal being measured at desk
/// scale. These sizes affect timing runs only.
#[cfg(not(target_arch = "wasm32"))]
fn bench_train_config(seed: u64, batch_size: usize) -> TrainConfig {
    TrainConfig {
        steps: usize::MAX, // the bench drives steps manually
        batch_size,
        learning_rate: 1e-3,
        seed,
        h: 5,
        h_glb: 2,
        check_interval: 1_000_000,
        patience: 1_000_000,
        head_decay: 0.1,
    }
}

#[cfg(not(target_arch = "wasm32"))]
const BENCH_HEAD_WIDTH: usize = 16;

/// Batch for the d and k timing axes; large enough that the per-step cost is
/// dominated by the O(batch x d) mask weighting being measured.
#[cfg(not(target_arch = "wasm32"))]
const BENCH_BATCH: usize = 136;

#[cfg(not(target_arch = "wasm32"))]
fn time_steps(
    dataset: &Dataset,
    steps: usize,
    seed: u64,
    batch_size: usize,
    bank_limit: Option<usize>,
) -> Result<f64> {
    let stats = fit_statistics(dataset)?;
    let config = bench_train_config(seed, batch_size);
    let mut pc = config.pipeline_config();
    pc.hidden = BENCH_HEAD_WIDTH;
    let model =
        PipelineModel::construct_with_bank_limit(dataset, stats, pc, seed, bank_limit)?;
    let mut trainer = Trainer::new(model, dataset.clone(), config)?;
    // Warm-up steps outside the timed region.
    for _ in 0..5 {
        trainer.step()?;
    }
    let start = std::time::Instant::now();
    for _ in 0..steps {
        trainer.step()?;
    }
    Ok(start.elapsed().as_secs_f64())
}

#[cfg(not(target_arch = "wasm32"))]
fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs[xs.len() / 2]
}

/// Wall-clock of a fixed number of optimization steps across feature counts
/// d, across sample counts n (fixed steps-per-epoch accounting), and across
/// bank sizes k (full vs half). Each repeat measures both sides of every
/// comparison back-to-back and the reported ratio is the median per-run
/// ratio.
#[cfg(not(target_arch = "wasm32"))]
pub fn benchmark_scaling(d_sizes: &[usize], opts: &BenchOptions) -> Result<ScalingReport> {
    use crate::data::synthesize;
    let mut report = ScalingReport::default();

    // Feature-count axis: fixed steps, growing d, all sizes inside one run.
    let mut times_by_size: Vec<Vec<f64>> = vec![Vec::new(); d_sizes.len()];
    for rep in 0..opts.repeats {
        for (i, &d) in d_sizes.iter().enumerate() {
            let dataset = synthesize("scaling", opts.n_for_d, d, opts.seed + rep as u64)?;
            times_by_size[i].push(time_steps(
                &dataset,
                2 * opts.steps,
                opts.seed + rep as u64,
                BENCH_BATCH,
                None,
            )?);
        }
    }
    for (i, &d) in d_sizes.iter().enumerate() {
        report.rows.push(ScalingRow {
            axis: "d".into(),
            size: d,
            median_secs: median(times_by_size[i].clone()),
        });
    }
    for pair in (0..d_sizes.len()).collect::<Vec<_>>().windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let ratios: Vec<f64> = times_by_size[a]
            .iter()
            .zip(&times_by_size[b])
            .map(|(x, y)| y / x)
            .collect();
        report
            .paired_ratios
            .push((format!("d:{}->{}", d_sizes[a], d_sizes[b]), median(ratios)));
    }

    // Sample-count axis: a fixed number of epochs each, so the timed step
    // count grows with n.
    let mut n_times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for rep in 0..opts.repeats {
        for (i, &n) in [1000usize, 2000].iter().enumerate() {
            let dataset = synthesize("scaling", n, 20, opts.seed + 31 + rep as u64)?;
            let steps_per_epoch = n / 64;
            n_times[i].push(time_steps(
                &dataset,
                4 * steps_per_epoch,
                opts.seed + rep as u64,
                64,
                None,
            )?);
        }
    }
    for (i, &n) in [1000usize, 2000].iter().enumerate() {
        report.rows.push(ScalingRow {
            axis: "n".into(),
            size: n,
            median_secs: median(n_times[i].clone()),
        });
    }
    let n_ratios: Vec<f64> = n_times[0].iter().zip(&n_times[1]).map(|(x, y)| y / x).collect();
    report.paired_ratios.push(("n:1000->2000".into(), median(n_ratios)));

    // Bank-size axis: full bank vs its first half at fixed d.
    let d = d_sizes.first().copied().unwrap_or(100);
    let full_bank_len = crate::transforms::tabular_bank(true, false).len();
    let limits = [(full_bank_len, None), (full_bank_len / 2, Some(full_bank_len / 2))];
    let mut k_times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for rep in 0..opts.repeats {
        for (i, (_, limit)) in limits.iter().enumerate() {
            let dataset = synthesize("scaling", opts.n_for_d, d, opts.seed + 61 + rep as u64)?;
            k_times[i].push(time_steps(
                &dataset,
                opts.steps,
                opts.seed + rep as u64,
                BENCH_BATCH,
                *limit,
            )?);
        }
    }
    for (i, (label, _)) in limits.iter().enumerate() {
        report.rows.push(ScalingRow {
            axis: "k".into(),
            size: *label,
            median_secs: median(k_times[i].clone()),
        });
    }
    let k_ratios: Vec<f64> = k_times[0].iter().zip(&k_times[1]).map(|(x, y)| y / x).collect();
    report
        .paired_ratios
        .push((format!("k:{}->{}", full_bank_len, full_bank_len / 2), median(k_ratios)));

    Ok(report)
}

// ── Seed sweep ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub metrics: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Train `trials` models with consecutive seeds and report the mean and
/// standard deviation of the test metric (validation metric when no test
/// split exists).
pub fn seed_sweep(dataset: &Dataset, config: &TrainConfig, trials: usize) -> Result<SweepReport> {
    if trials == 0 {
        return Err(Error::invalid("seed_sweep", "trials must be positive"));
    }
    let mut metrics = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(trial as u64);
        let stats = fit_statistics(dataset)?;
        let model = PipelineModel::new(dataset, stats, cfg.pipeline_config(), cfg.seed)?;
        let trainer = Trainer::new(model, dataset.clone(), cfg)?;
        let (model, report) = trainer.train()?;
        let metric = if dataset.rows_in(Split::Test).is_empty() {
            report.final_metric
        } else {
            evaluate(&model, dataset, Split::Test)?
        };
        metrics.push(metric);
    }
    let mean = metrics.iter().sum::<f64>() / trials as f64;
    let var = metrics.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / trials as f64;
    Ok(SweepReport { metrics, mean, std_dev: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;

    fn quick_config(steps: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            steps,
            batch_size: 16,
            learning_rate: 1e-3,
            seed,
            h: 5,
            h_glb: 8,
            check_interval: 10,
            patience: 50,
            head_decay: 0.1,
        }
    }

    fn small_model(dataset: &Dataset, config: &TrainConfig) -> PipelineModel {
        let stats = fit_statistics(dataset).unwrap();
        let mut pc = config.pipeline_config();
        pc.hidden = 32;
        PipelineModel::new(dataset, stats, pc, config.seed).unwrap()
    }

    #[test]
    fn single_step_updates_exactly_the_nonzero_gradient_parameters() {
        let mut ds = synthesize("product+log", 60, 6, 5).unwrap();
        ds.split((0.8, 0.2, 0.0), 1).unwrap();
        let config = quick_config(1, 5);
        let model = small_model(&ds, &config);
        let before: Vec<Tensor> = model.params.values().to_vec();

        // Recompute the first batch's gradients independently of the update.
        let mut probe = Trainer::new(model.clone(), ds.clone(), config.clone()).unwrap();
        let rows = probe.next_batch_rows();
        let batch = probe.model.batch(&ds, &rows).unwrap();
        let mut tape = Tape::new();
        let leaves = probe.model.params.insert_leaves(&mut tape);
        let loss = probe.model.batch_loss(&mut tape, &leaves, &batch).unwrap();
        let grads = tape.backward(loss).unwrap();
        let nonzero: Vec<bool> = leaves
            .iter()
            .map(|&v| grads.get(v).unwrap().data().iter().any(|&g| g != 0.0))
            .collect();

        let mut trainer = Trainer::new(model, ds, config).unwrap();
        trainer.step().unwrap();
        let after = trainer.model.params.values();

        for ((b, a), has_grad) in before.iter().zip(after).zip(&nonzero) {
            let changed = b.data() != a.data();
            assert_eq!(changed, *has_grad);
        }
        assert!(nonzero.iter().filter(|&&g| g).count() > before.len() / 2);
        assert_eq!(trainer.steps_done, 1);
    }

    #[test]
    fn every_leaf_sees_gradient_during_first_epoch_with_full_coverage() {
        // With the global width covering the whole concatenation, every leaf
        // is wired into the loss; accumulate gradient magnitudes over one
        // epoch and check nothing stays silent.
        let mut ds = synthesize("product+log", 64, 4, 23).unwrap();
        ds.split((1.0, 0.0, 0.0), 1).unwrap();
        let mut config = quick_config(4, 23);
        config.batch_size = 16;
        config.h_glb = 64; // capped to the concat width at construction
        let model = small_model(&ds, &config);
        let n_params = model.params.len();
        let mut trainer = Trainer::new(model, ds.clone(), config).unwrap();

        let mut saw_grad = vec![false; n_params];
        for _ in 0..4 {
            let rows = trainer.next_batch_rows();
            let batch = trainer.model.batch(&ds, &rows).unwrap();
            let mut tape = Tape::new();
            let leaves = trainer.model.params.insert_leaves(&mut tape);
            let loss = trainer.model.batch_loss(&mut tape, &leaves, &batch).unwrap();
            let grads = tape.backward(loss).unwrap();
            for (i, &v) in leaves.iter().enumerate() {
                if grads.get(v).unwrap().data().iter().any(|&g| g.abs() > 0.0) {
                    saw_grad[i] = true;
                }
            }
            trainer.step().unwrap();
        }
        for (i, saw) in saw_grad.iter().enumerate() {
            assert!(saw, "leaf {} never received gradient", trainer.model.params.name(i));
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let run = || {
            let mut ds = synthesize("product+log", 80, 4, 9).unwrap();
            ds.split((0.75, 0.25, 0.0), 3).unwrap();
            let config = quick_config(40, 11);
            let model = small_model(&ds, &config);
            let trainer = Trainer::new(model, ds, config).unwrap();
            let (model, report) = trainer.train().unwrap();
            (model.params.values().to_vec(), report.loss_curve, report.val_curve)
        };
        let (params_a, loss_a, val_a) = run();
        let (params_b, loss_b, val_b) = run();
        assert_eq!(loss_a, loss_b);
        assert_eq!(val_a, val_b);
        for (a, b) in params_a.iter().zip(&params_b) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn loss_decreases_on_learnable_task() {
        let mut ds = synthesize("product+log", 200, 4, 13).unwrap();
        ds.split((0.8, 0.2, 0.0), 2).unwrap();
        let config = quick_config(50, 3);
        let model = small_model(&ds, &config);
        let mut trainer = Trainer::new(model, ds, config).unwrap();
        let mut first = 0.0;
        let mut last = 0.0;
        for step in 0..50 {
            let loss = trainer.step().unwrap();
            if step == 0 {
                first = loss;
            }
            last = loss;
        }
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn best_restoration_final_metric_is_curve_optimum() {
        let mut ds = synthesize("product+log", 120, 4, 21).unwrap();
        ds.split((0.7, 0.3, 0.0), 8).unwrap();
        let config = quick_config(60, 17);
        let model = small_model(&ds, &config);
        let trainer = Trainer::new(model, ds.clone(), config).unwrap();
        let (model, report) = trainer.train().unwrap();
        let best_in_curve = report
            .val_curve
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.final_metric, best_in_curve);
        // Restored parameters reproduce the reported metric exactly.
        let again = evaluate(&model, &ds, Split::Validation).unwrap();
        assert_eq!(again, report.final_metric);
    }

    #[test]
    fn evaluate_constant_median_oracle() {
        // A constant-median predictor's MAE equals mean |y - median|.
        let ys = vec![1.0, 2.0, 4.0, 7.0, 11.0];
        let median = 4.0;
        let labels = Labels::Values(ys.clone());
        let preds = Tensor::matrix(5, 1, vec![median; 5]).unwrap();
        let metric = evaluate_predictions(&preds, &labels).unwrap();
        let oracle = ys.iter().map(|y| (y - median).abs()).sum::<f64>() / ys.len() as f64;
        assert_eq!(metric, oracle);
    }

    #[test]
    fn evaluate_perfect_classification_is_100() {
        let labels = Labels::Classes { values: vec![0, 1, 1, 0], classes: 2 };
        let preds = Tensor::matrix(4, 2, vec![5.0, 0.0, 0.0, 5.0, -1.0, 3.0, 9.0, 2.0]).unwrap();
        assert_eq!(evaluate_predictions(&preds, &labels).unwrap(), 100.0);
    }

    #[test]
    fn evaluate_empty_split_errors() {
        let mut ds = synthesize("product+log", 20, 3, 1).unwrap();
        ds.split((1.0, 0.0, 0.0), 1).unwrap();
        let config = quick_config(1, 1);
        let model = small_model(&ds, &config);
        assert!(evaluate(&model, &ds, Split::Test).is_err());
    }

    #[test]
    fn checkpoint_round_trip_preserves_everything() {
        let mut ds = synthesize("product+log", 60, 4, 33).unwrap();
        ds.split((0.8, 0.2, 0.0), 5).unwrap();
        let config = quick_config(15, 7);
        let model = small_model(&ds, &config);
        let trainer = Trainer::new(model, ds.clone(), config).unwrap();
        let (model, _) = trainer.train().unwrap();

        let dir = std::env::temp_dir().join("automan_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_checkpoint(&model, 7, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        let a = model.apply(&ds, &ds.all_rows()).unwrap();
        let b = loaded.apply(&ds, &ds.all_rows()).unwrap();
        assert_eq!(a.matrix.data(), b.matrix.data());
        assert_eq!(a.provenance, b.provenance);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn checkpoint_refuses_schema_mismatch() {
        let ds = synthesize("product+log", 30, 4, 1).unwrap();
        let config = quick_config(1, 1);
        let model = small_model(&ds, &config);
        let dir = std::env::temp_dir().join("automan_ckpt_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_checkpoint(&model, 1, &path).unwrap();

        // Tamper with the digest.
        let mut text = std::fs::read_to_string(&path).unwrap();
        let digest = model.schema.digest();
        text = text.replace(&format!("\"schema_digest\":{digest}"), "\"schema_digest\":12345");
        std::fs::write(&path, text).unwrap();
        assert!(load_checkpoint(&path).is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn export_is_reproducible_and_sized() {
        let mut ds = synthesize("product+log", 50, 4, 2).unwrap();
        ds.split((0.6, 0.2, 0.2), 4).unwrap();
        let config = quick_config(10, 3);
        let model = small_model(&ds, &config);
        let trainer = Trainer::new(model, ds.clone(), config).unwrap();
        let (model, _) = trainer.train().unwrap();

        let dir = std::env::temp_dir().join("automan_export_test");
        std::fs::remove_dir_all(&dir).ok();
        export_features(&model, &ds, &dir).unwrap();
        let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert_eq!(manifest.lines().count(), model.h_glb);
        let features = std::fs::read_to_string(dir.join("features_train.csv")).unwrap();
        let header_cols = features.lines().next().unwrap().split(',').count();
        assert_eq!(header_cols, model.h_glb);
        assert_eq!(features.lines().count() - 1, ds.rows_in(Split::Train).len());

        // Re-export without retraining: byte-identical.
        let before = std::fs::read(dir.join("features_test.csv")).unwrap();
        export_features(&model, &ds, &dir).unwrap();
        let after = std::fs::read(dir.join("features_test.csv")).unwrap();
        assert_eq!(before, after);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn non_finite_loss_reports_step_number() {
        let mut ds = synthesize("product+log", 40, 4, 3).unwrap();
        ds.split((0.9, 0.1, 0.0), 1).unwrap();
        let mut config = quick_config(5, 1);
        config.learning_rate = 1e200; // force overflow within a few steps
        let model = small_model(&ds, &config);
        let mut trainer = Trainer::new(model, ds, config).unwrap();
        let mut saw_numeric_error = false;
        for _ in 0..5 {
            match trainer.step() {
                Err(Error::Numeric(msg)) => {
                    assert!(msg.contains("step"), "{msg}");
                    saw_numeric_error = true;
                    break;
                }
                Err(Error::NonFinite { .. }) => {
                    saw_numeric_error = true;
                    break;
                }
                _ => {}
            }
        }
        assert!(saw_numeric_error, "divergence was not detected");
    }

    #[test]
    fn seed_sweep_reports_moments() {
        let mut ds = synthesize("product+log", 60, 4, 6).unwrap();
        ds.split((0.7, 0.15, 0.15), 2).unwrap();
        let config = quick_config(10, 100);
        // Use the tiny hidden width through the sweep by training directly.
        let report = seed_sweep(&ds, &config, 2).unwrap();
        assert_eq!(report.metrics.len(), 2);
        assert!(report.std_dev >= 0.0);
        let mean = report.metrics.iter().sum::<f64>() / 2.0;
        assert!((report.mean - mean).abs() < 1e-12);
    }
}
