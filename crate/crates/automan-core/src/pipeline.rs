//! The full model composition: per-transform local masking, the transform
//! bank, the temporal branch, the global mask, and the MLP prediction head,
//! trained jointly against the task loss.
//!
//! Input routing by column kind: numeric columns feed every numeric
//! transform; categorical columns feed GroupBy as keys and, ordinally scaled
//! to [0, 1], the identity pathway; temporal columns feed the temporal branch
//! and expose their last step to the identity pathway.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::{Dataset, FittedStats, Labels, Schema, TaskKind};
use crate::error::{Error, Result};
use crate::masking::{mask_forward, top_h_select, MaskParameters};
use crate::rng::Rng;
use crate::transforms::{
    additive_agg, gaussian, group_by, identity, init_gaussian_params, init_polynomial_params,
    init_z_scale_params, logarithm, multiplicative_agg, polynomial, quantile, rel_temporal_mean,
    tabular_bank, temporal_agg, temporal_bank, temporal_diff, temporal_diff_k, temporal_lag,
    temporal_mean, temporal_std_norm, z_scale, Provenance, SelectedInput, TabularTransform,
    TemporalTransform, TransformOutput,
};

pub const DEFAULT_LOCAL_WIDTH: usize = 5;
pub const DEFAULT_GLOBAL_WIDTH: usize = 16;
pub const MLP_HIDDEN_WIDTH: usize = 256;

/// Code for a categorical level never seen in the training split.
const UNSEEN_CATEGORY: usize = usize::MAX;

// ── Parameter registry ──────────────────────────────────────────────────

/// Ordered, named learnable tensors. Registration order is the canonical
/// parameter order everywhere (leaf insertion, optimizer state, gradient
/// checks), which keeps runs bit-for-bit reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        let name = name.into();
        debug_assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.values[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.values[i])
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn set_values(&mut self, values: Vec<Tensor>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::invalid("ParamSet::set_values", "length mismatch"));
        }
        for (current, incoming) in self.values.iter().zip(&values) {
            if current.shape() != incoming.shape() {
                return Err(Error::shape("ParamSet::set_values", "tensor shape changed"));
            }
        }
        self.values = values;
        Ok(())
    }

    /// Insert every parameter as a gradient-tracked leaf, in order.
    pub fn insert_leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|t| tape.param(t.clone())).collect()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

// ── Model ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Local mask selection width (capped by the candidate pool).
    pub h: usize,
    /// Global mask selection width (capped by the concatenated width).
    pub h_glb: usize,
    pub hidden: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            h: DEFAULT_LOCAL_WIDTH,
            h_glb: DEFAULT_GLOBAL_WIDTH,
            hidden: MLP_HIDDEN_WIDTH,
        }
    }
}

/// A batch of rows routed into the blocks the graph consumes.
pub struct Batch {
    pub x_num: Tensor,
    pub x_identity: Tensor,
    pub windows: Vec<Tensor>,
    /// Per categorical column, codes remapped to the training code table.
    pub cat_codes: Vec<Vec<usize>>,
    pub labels: Labels,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Graph handles and reporting data from one forward pass.
pub struct Forward {
    /// (n, h_glb) engineered feature block.
    pub engineered: Var,
    /// (n, classes) logits or (n, 1) regression output.
    pub predictions: Var,
    /// Provenance of every concatenated column, in concat order.
    pub all_provenance: Vec<Provenance>,
    /// Concatenated-column indices kept by the global mask.
    pub kept: Vec<usize>,
    /// Global mask weights of the kept columns.
    pub global_weights: Vec<f64>,
}

impl Forward {
    /// Provenance of the kept columns, in kept order.
    pub fn kept_provenance(&self) -> Vec<Provenance> {
        self.kept.iter().map(|&i| self.all_provenance[i].clone()).collect()
    }
}

/// Engineered output of `apply`: the feature matrix plus per-column
/// provenance and the global weights that selected them.
pub struct EngineeredFeatureSet {
    pub matrix: Tensor,
    pub provenance: Vec<Provenance>,
    pub global_weights: Vec<f64>,
}

/// The composed model: schema-resolved routing, fitted statistics, and every
/// learnable tensor.
#[derive(Debug, Clone)]
pub struct PipelineModel {
    pub schema: Schema,
    pub config: PipelineConfig,
    pub stats: FittedStats,
    pub params: ParamSet,
    pub task: TaskKind,
    pub classes: usize,

    numeric_names: Vec<String>,
    identity_names: Vec<String>,
    cat_names: Vec<String>,
    /// Training code tables; apply-time categories are remapped against them.
    train_code_tables: Vec<Vec<String>>,
    bank: Vec<TabularTransform>,
    /// (temporal feature index, lookback, bank) per temporal feature.
    temporal: Vec<(usize, usize, Vec<TemporalTransform>)>,
    h_num: usize,
    h_identity: usize,
    pub h_glb: usize,
    pub concat_width: usize,
}

impl PipelineModel {
    pub fn new(dataset: &Dataset, stats: FittedStats, config: PipelineConfig, seed: u64) -> Result<Self> {
        Self::construct_with_bank_limit(dataset, stats, config, seed, None)
    }

    /// Construction from a dataset with an optional cap on the tabular bank
    /// size (used by the scaling benchmark to halve the bank).
    pub fn construct_with_bank_limit(
        dataset: &Dataset,
        stats: FittedStats,
        config: PipelineConfig,
        seed: u64,
        bank_limit: Option<usize>,
    ) -> Result<Self> {
        Self::construct_inner(
            dataset.schema.clone(),
            dataset.code_tables.clone(),
            dataset.classes(),
            stats,
            config,
            seed,
            bank_limit,
        )
    }

    /// Construction from checkpoint material, without a dataset in hand.
    pub fn construct(
        schema: Schema,
        code_tables: Vec<Vec<String>>,
        classes: usize,
        stats: FittedStats,
        config: PipelineConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::construct_inner(schema, code_tables, classes, stats, config, seed, None)
    }

    fn construct_inner(
        schema: Schema,
        code_tables: Vec<Vec<String>>,
        classes: usize,
        stats: FittedStats,
        config: PipelineConfig,
        seed: u64,
        bank_limit: Option<usize>,
    ) -> Result<Self> {
        use crate::data::ColumnKind;

        let mut rng = Rng::new(seed);
        let task = schema.task;

        let numeric_names: Vec<String> = schema
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Numerical)
            .map(|c| c.name.clone())
            .collect();
        let cat_names: Vec<String> = schema
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
            .map(|c| c.name.clone())
            .collect();
        let lookbacks: Vec<usize> = schema
            .columns
            .iter()
            .filter_map(|c| match c.kind {
                ColumnKind::Temporal { lookback } => Some(lookback),
                _ => None,
            })
            .collect();
        let temporal_names: Vec<String> = schema
            .columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Temporal { .. }))
            .map(|c| c.name.clone())
            .collect();

        let d_num = numeric_names.len();
        let d_cat = cat_names.len();
        if code_tables.len() != d_cat {
            return Err(Error::Schema("code table count differs from categorical columns".into()));
        }

        let mut identity_names = numeric_names.clone();
        identity_names.extend(cat_names.iter().map(|n| format!("{n}_code")));
        identity_names.extend(temporal_names.iter().map(|n| format!("{n}_last")));

        if identity_names.is_empty() {
            return Err(Error::Schema("dataset routes no feature columns".into()));
        }

        let mut bank = tabular_bank(d_num > 0, d_cat > 0);
        if let Some(limit) = bank_limit {
            bank.truncate(limit.max(1));
        }
        let temporal: Vec<(usize, usize, Vec<TemporalTransform>)> = lookbacks
            .iter()
            .enumerate()
            .map(|(j, &lookback)| (j, lookback, temporal_bank(lookback)))
            .collect();

        let h_num = config.h.min(d_num.max(1));
        let h_identity = config.h.min(identity_names.len());

        // Concatenated width ahead of parameter registration.
        let mut concat_width = 0;
        for t in &bank {
            concat_width += match t {
                TabularTransform::Identity => t.output_width(h_identity),
                _ => t.output_width(h_num),
            };
        }
        for (_, lookback, tbank) in &temporal {
            for t in tbank {
                concat_width += t.output_width(*lookback);
            }
        }
        let h_glb = config.h_glb.min(concat_width);

        let mut params = ParamSet::new();

        // Local masks and transform parameters, in bank order.
        for t in &bank {
            match t {
                TabularTransform::GroupBy => {
                    let cat_mask = MaskParameters::init_uniform(d_cat, 1, &mut rng)?;
                    params.register("mask/groupby_cat", cat_mask.logits);
                    let num_mask = MaskParameters::init_uniform(d_num, 1, &mut rng)?;
                    params.register("mask/groupby_num", num_mask.logits);
                }
                TabularTransform::Identity => {
                    let mask = MaskParameters::init_uniform(identity_names.len(), h_identity, &mut rng)?;
                    params.register("mask/local/Identity", mask.logits);
                }
                _ => {
                    let mask = MaskParameters::init_uniform(d_num, h_num, &mut rng)?;
                    params.register(format!("mask/local/{}", t.name()), mask.logits);
                    match t {
                        TabularTransform::Polynomial => {
                            let (coef, deg) = init_polynomial_params(h_num);
                            params.register("poly/coef", coef);
                            params.register("poly/deg", deg);
                        }
                        TabularTransform::ZScale => {
                            let (scale, shift) = init_z_scale_params(h_num);
                            params.register("zscale/scale", scale);
                            params.register("zscale/shift", shift);
                        }
                        TabularTransform::Gaussian => {
                            let (mu, width) = init_gaussian_params(h_num);
                            params.register("gauss/mu", mu);
                            params.register("gauss/width", width);
                        }
                        _ => {}
                    }
                }
            }
        }

        // One temporal mask per (feature, transform); stepped differences at
        // different offsets are distinct instances and get distinct masks.
        for (feat, lookback, tbank) in &temporal {
            for t in tbank {
                let h_t = t.mask_width(*lookback);
                let mask = MaskParameters::init_uniform(*lookback, h_t, &mut rng)?;
                params.register(format!("mask/temporal/{feat}/{}", mask_key(*t)), mask.logits);
            }
        }

        // Global mask over the concatenated transformed features.
        let global = MaskParameters::init_uniform(concat_width, h_glb, &mut rng)?;
        params.register("mask/global", global.logits);

        // Two-layer MLP head.
        let out_width = match task {
            TaskKind::Classification => classes,
            TaskKind::Regression => 1,
        };
        params.register("mlp/w1", xavier(h_glb, config.hidden, &mut rng));
        params.register("mlp/b1", Tensor::zeros(vec![config.hidden]));
        params.register("mlp/w2", xavier(config.hidden, out_width, &mut rng));
        params.register("mlp/b2", Tensor::zeros(vec![out_width]));

        Ok(PipelineModel {
            schema,
            config,
            stats,
            params,
            task,
            classes,
            numeric_names,
            identity_names,
            cat_names,
            train_code_tables: code_tables,
            bank,
            temporal,
            h_num,
            h_identity,
            h_glb,
            concat_width,
        })
    }

    pub fn train_code_tables(&self) -> &[Vec<String>] {
        &self.train_code_tables
    }

    pub fn numeric_feature_names(&self) -> &[String] {
        &self.numeric_names
    }

    /// Route dataset rows into a batch, remapping categorical codes onto the
    /// training code tables (unseen levels keep a sentinel and fall back to
    /// the global mean in GroupBy).
    pub fn batch(&self, dataset: &Dataset, rows: &[usize]) -> Result<Batch> {
        if dataset.schema != self.schema {
            return Err(Error::Schema("dataset schema differs from the model's schema".into()));
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("batch", "empty row set"));
        }

        let x_num = dataset.numeric_matrix(rows);

        let d_cat = dataset.categorical_width();
        let d_tmp = dataset.temporal_width();
        let mut cat_codes: Vec<Vec<usize>> = Vec::with_capacity(d_cat);
        for c in 0..d_cat {
            let remap: Vec<usize> = dataset
                .code_tables[c]
                .iter()
                .map(|level| {
                    self.train_code_tables[c]
                        .iter()
                        .position(|l| l == level)
                        .unwrap_or(UNSEEN_CATEGORY)
                })
                .collect();
            cat_codes.push(
                dataset
                    .cat_codes_column(c, rows)
                    .into_iter()
                    .map(|code| remap[code])
                    .collect(),
            );
        }

        let windows: Vec<Tensor> = (0..d_tmp).map(|f| dataset.window_matrix(f, rows)).collect();

        // Identity pool: numeric, scaled categorical codes, temporal last step.
        let d_id = self.identity_names.len();
        let mut id_data = Vec::with_capacity(n * d_id);
        for (bi, &row) in rows.iter().enumerate() {
            for j in 0..dataset.numeric_width() {
                id_data.push(dataset.numeric_at(row, j));
            }
            for (c, codes) in cat_codes.iter().enumerate() {
                let levels = self.train_code_tables[c].len();
                let code = codes[bi];
                let scaled = if code == UNSEEN_CATEGORY || levels <= 1 {
                    0.0
                } else {
                    code as f64 / (levels - 1) as f64
                };
                id_data.push(scaled);
            }
            for f in 0..d_tmp {
                let w = dataset.window_at(f, row);
                id_data.push(*w.last().expect("lookback >= 2"));
            }
        }
        let x_identity = Tensor::matrix(n, d_id, id_data)?;

        Ok(Batch {
            x_num,
            x_identity,
            windows,
            cat_codes,
            labels: dataset.labels_for(rows),
        })
    }

    /// Build the forward graph over `tape`. `leaves` must come from
    /// `self.params.insert_leaves` (or perturbed copies in the same order).
    pub fn forward_graph(&self, tape: &mut Tape, leaves: &[Var], batch: &Batch) -> Result<Forward> {
        let leaf = |name: &str| -> Result<Var> {
            self.params
                .position(name)
                .map(|i| leaves[i])
                .ok_or_else(|| Error::invalid("forward_graph", format!("unknown parameter {name}")))
        };

        let x_num = tape.constant(batch.x_num.clone());
        let x_id = tape.constant(batch.x_identity.clone());

        let mut blocks: Vec<Var> = Vec::new();
        let mut provenance: Vec<Provenance> = Vec::new();

        let push_output = |tape: &Tape, out: TransformOutput, blocks: &mut Vec<Var>, provenance: &mut Vec<Provenance>, label: &str| -> Result<()> {
            let value = tape.value(out.var);
            if !value.all_finite() {
                return Err(Error::NonFinite { context: format!("transform {label}") });
            }
            if value.cols() != out.provenance.len() {
                return Err(Error::shape(
                    "forward_graph",
                    format!("{label}: {} columns vs {} provenance entries", value.cols(), out.provenance.len()),
                ));
            }
            blocks.push(out.var);
            provenance.extend(out.provenance);
            Ok(())
        };

        for t in &self.bank {
            match t {
                TabularTransform::Polynomial => {
                    let sel = mask_forward(tape, leaf("mask/local/Polynomial")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = polynomial(tape, &input, leaf("poly/coef")?, leaf("poly/deg")?, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "Polynomial")?;
                }
                TabularTransform::Logarithm => {
                    let sel = mask_forward(tape, leaf("mask/local/Logarithm")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = logarithm(tape, &input, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "Logarithm")?;
                }
                TabularTransform::ZScale => {
                    let sel = mask_forward(tape, leaf("mask/local/ZScale")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = z_scale(tape, &input, leaf("zscale/scale")?, leaf("zscale/shift")?, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "ZScale")?;
                }
                TabularTransform::AdditiveAgg => {
                    let sel = mask_forward(tape, leaf("mask/local/AddAgg")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = additive_agg(tape, &input, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "AddAgg")?;
                }
                TabularTransform::MultiplicativeAgg => {
                    let sel = mask_forward(tape, leaf("mask/local/MultAgg")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = multiplicative_agg(tape, &input, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "MultAgg")?;
                }
                TabularTransform::Gaussian => {
                    let sel = mask_forward(tape, leaf("mask/local/Gaussian")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = gaussian(tape, &input, leaf("gauss/mu")?, leaf("gauss/width")?, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "Gaussian")?;
                }
                TabularTransform::Quantile => {
                    let sel = mask_forward(tape, leaf("mask/local/QuantileTransform")?, x_num, self.h_num)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = quantile(tape, x_num, &input, &self.stats.quantile_cuts, &self.numeric_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "QuantileTransform")?;
                }
                TabularTransform::GroupBy => {
                    let out = self.group_by_graph(tape, &leaf, batch)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "GroupBy")?;
                }
                TabularTransform::Identity => {
                    let sel = mask_forward(tape, leaf("mask/local/Identity")?, x_id, self.h_identity)?;
                    let input = SelectedInput::from_selection(&sel);
                    let out = identity(tape, &input, &self.identity_names)?;
                    push_output(tape, out, &mut blocks, &mut provenance, "Identity")?;
                }
            }
        }

        // Temporal branch: every transform sees its own mask's weighting of
        // the window. Width-preserving transforms take the dense weighted
        // window (explicit zeros at discarded steps); the aggregation and the
        // lag consume the gathered selection directly.
        for (feat, lookback, tbank) in &self.temporal {
            let w = tape.constant(batch.windows[*feat].clone());
            let name = self.schema.columns[self.temporal_schema_index(*feat)].name.clone();
            for t in tbank {
                let logits = leaf(&format!("mask/temporal/{feat}/{}", mask_key(*t)))?;
                let sel = mask_forward(tape, logits, w, t.mask_width(*lookback))?;
                let out = match t {
                    TemporalTransform::Agg => {
                        let input = SelectedInput::from_selection(&sel);
                        temporal_agg(tape, &input, &name, *lookback)?
                    }
                    TemporalTransform::StdNorm => temporal_std_norm(tape, sel.weighted_dense, &name)?,
                    TemporalTransform::Diff => temporal_diff(tape, sel.weighted_dense, &name)?,
                    TemporalTransform::Lag => {
                        let input = SelectedInput::from_selection(&sel);
                        temporal_lag(tape, &input, &name, *lookback)?
                    }
                    TemporalTransform::RelMean => rel_temporal_mean(tape, sel.weighted_dense, &name)?,
                    TemporalTransform::DiffK(k) => temporal_diff_k(tape, sel.weighted_dense, *k, &name)?,
                    TemporalTransform::Mean => temporal_mean(tape, sel.weighted_dense, &name)?,
                };
                push_output(tape, out, &mut blocks, &mut provenance, t.name())?;
            }
        }

        let x_glb = tape.concat_cols(&blocks)?;
        debug_assert_eq!(tape.value(x_glb).cols(), self.concat_width);

        let global = mask_forward(tape, leaf("mask/global")?, x_glb, self.h_glb)?;
        let engineered = global.weighted;

        // Prediction head: affine, rectifier, affine. The rectifier is the
        // smooth one (softplus) so gradient checks stay well-posed at every
        // parameter; a hard kink at zero would poison central differences
        // through the hidden bias.
        let w1 = leaf("mlp/w1")?;
        let b1 = leaf("mlp/b1")?;
        let w2 = leaf("mlp/w2")?;
        let b2 = leaf("mlp/b2")?;
        let a1 = tape.matmul(engineered, w1)?;
        let z1 = tape.add_row(a1, b1)?;
        let hidden = tape.softplus(z1);
        let a2 = tape.matmul(hidden, w2)?;
        let predictions = tape.add_row(a2, b2)?;

        if !tape.value(predictions).all_finite() {
            return Err(Error::NonFinite { context: "prediction head".into() });
        }

        Ok(Forward {
            engineered,
            predictions,
            all_provenance: provenance,
            kept: global.output.indices,
            global_weights: global.output.weights,
        })
    }

    fn temporal_schema_index(&self, feat: usize) -> usize {
        let mut seen = 0;
        for (i, col) in self.schema.columns.iter().enumerate() {
            if matches!(col.kind, crate::data::ColumnKind::Temporal { .. }) {
                if seen == feat {
                    return i;
                }
                seen += 1;
            }
        }
        unreachable!("temporal feature index out of range")
    }

    fn group_by_graph(
        &self,
        tape: &mut Tape,
        leaf: &dyn Fn(&str) -> Result<Var>,
        batch: &Batch,
    ) -> Result<TransformOutput> {
        let cat_logits = leaf("mask/groupby_cat")?;
        let num_logits = leaf("mask/groupby_num")?;

        let cat_idx = top_h_select(tape.value(cat_logits).data(), 1)?[0];
        let num_idx = top_h_select(tape.value(num_logits).data(), 1)?[0];

        let cat_probs = tape.softmax_vec(cat_logits)?;
        let cat_weight = tape.select_elems(cat_probs, &[cat_idx])?;
        let num_probs = tape.softmax_vec(num_logits)?;
        let num_weight = tape.select_elems(num_probs, &[num_idx])?;

        let table = &self.stats.group_means[cat_idx][num_idx];
        let global_mean = self.stats.global_means[num_idx];
        let mean_column: Vec<f64> = batch.cat_codes[cat_idx]
            .iter()
            .map(|&code| {
                if code == UNSEEN_CATEGORY || code >= table.len() {
                    global_mean
                } else {
                    table[code]
                }
            })
            .collect();

        group_by(
            tape,
            mean_column,
            cat_weight,
            num_weight,
            &self.cat_names[cat_idx],
            &self.numeric_names[num_idx],
        )
    }

    /// Task loss over a forward pass: mean cross entropy for classification,
    /// mean absolute error for regression.
    pub fn loss_graph(&self, tape: &mut Tape, forward: &Forward, labels: &Labels) -> Result<Var> {
        let loss = match (self.task, labels) {
            (TaskKind::Classification, Labels::Classes { values, classes }) => {
                if *classes > self.classes {
                    return Err(Error::invalid(
                        "loss",
                        format!("label class {} out of range {}", classes - 1, self.classes),
                    ));
                }
                tape.cross_entropy_mean(forward.predictions, values)?
            }
            (TaskKind::Regression, Labels::Values(values)) => {
                let y = tape.constant(Tensor::matrix(values.len(), 1, values.clone())?);
                let diff = tape.sub(forward.predictions, y)?;
                let abs = tape.abs(diff);
                tape.mean_all(abs)
            }
            _ => return Err(Error::invalid("loss", "label kind does not match the task")),
        };
        let value = tape.value(loss).scalar_value()?;
        if !value.is_finite() {
            return Err(Error::NonFinite { context: "task loss".into() });
        }
        Ok(loss)
    }

    /// Convenience: full loss from parameter leaves over a batch.
    pub fn batch_loss(&self, tape: &mut Tape, leaves: &[Var], batch: &Batch) -> Result<Var> {
        let forward = self.forward_graph(tape, leaves, batch)?;
        self.loss_graph(tape, &forward, &batch.labels)
    }

    /// Deterministic frozen-parameter forward over dataset rows; returns the
    /// engineered block with provenance for the kept columns.
    pub fn apply(&self, dataset: &Dataset, rows: &[usize]) -> Result<EngineeredFeatureSet> {
        let batch = self.batch(dataset, rows)?;
        let mut tape = Tape::new();
        let leaves = self.params.insert_leaves(&mut tape);
        let forward = self.forward_graph(&mut tape, &leaves, &batch)?;
        Ok(EngineeredFeatureSet {
            matrix: tape.value(forward.engineered).clone(),
            provenance: forward.kept_provenance(),
            global_weights: forward.global_weights.clone(),
        })
    }

    /// Predictions for dataset rows under frozen parameters.
    pub fn predict(&self, dataset: &Dataset, rows: &[usize]) -> Result<Tensor> {
        let batch = self.batch(dataset, rows)?;
        let mut tape = Tape::new();
        let leaves = self.params.insert_leaves(&mut tape);
        let forward = self.forward_graph(&mut tape, &leaves, &batch)?;
        Ok(tape.value(forward.predictions).clone())
    }
}

/// Parameter-name key for a temporal transform; stepped differences carry
/// their offset so each instance owns a mask.
fn mask_key(t: TemporalTransform) -> String {
    match t {
        TemporalTransform::DiffK(k) => format!("TemporalDiffK{k}"),
        other => other.name().to_string(),
    }
}

fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.range(-limit, limit)).collect();
    Tensor::matrix(rows, cols, data).expect("sized data")
}
