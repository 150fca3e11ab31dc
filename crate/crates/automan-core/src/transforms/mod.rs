//! The curated bank of candidate transform functions.
//!
//! Each transform consumes the weighted h-column selection produced by its
//! local mask (or a lookback window for the temporal family), applies a
//! differentiable rule — possibly with learnable parameters or statistics
//! fitted on the training split — and reports provenance for every output
//! column. Domain guards (epsilon offsets, softplus divisors) keep every
//! output finite for finite input.

mod tabular;
mod temporal;

pub use tabular::*;
pub use temporal::*;

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;

/// Epsilon inside the sign-preserving power of the polynomial transform.
pub const POLY_EPS: f64 = 1e-8;
/// Domain guard for the logarithm transform.
pub const LOG_EPS: f64 = 1e-6;
/// Floor added to every softplus-positive divisor or width.
pub const DIV_EPS: f64 = 1e-6;

/// Non-temporal transform kinds, in bank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TabularTransform {
    Polynomial,
    Logarithm,
    ZScale,
    AdditiveAgg,
    MultiplicativeAgg,
    Gaussian,
    Quantile,
    GroupBy,
    Identity,
}

impl TabularTransform {
    pub fn name(self) -> &'static str {
        match self {
            TabularTransform::Polynomial => "Polynomial",
            TabularTransform::Logarithm => "Logarithm",
            TabularTransform::ZScale => "ZScale",
            TabularTransform::AdditiveAgg => "AddAgg",
            TabularTransform::MultiplicativeAgg => "MultAgg",
            TabularTransform::Gaussian => "Gaussian",
            TabularTransform::Quantile => "QuantileTransform",
            TabularTransform::GroupBy => "GroupBy",
            TabularTransform::Identity => "Identity",
        }
    }

    /// Output column count given the local selection width h.
    pub fn output_width(self, h: usize) -> usize {
        match self {
            TabularTransform::AdditiveAgg
            | TabularTransform::MultiplicativeAgg
            | TabularTransform::GroupBy => 1,
            _ => h,
        }
    }
}

/// Temporal transform kinds, in bank order. `DiffK` is instantiated once per
/// fixed step offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemporalTransform {
    Agg,
    StdNorm,
    Diff,
    Lag,
    RelMean,
    DiffK(usize),
    Mean,
}

/// Fixed offsets for the stepped temporal difference: adjacent, short, and
/// weekly-style lags.
pub const TEMPORAL_DIFF_OFFSETS: [usize; 3] = [1, 2, 7];

impl TemporalTransform {
    pub fn name(self) -> &'static str {
        match self {
            TemporalTransform::Agg => "TemporalAgg",
            TemporalTransform::StdNorm => "TemporalStdNorm",
            TemporalTransform::Diff => "TemporalDiff",
            TemporalTransform::Lag => "TemporalLag",
            TemporalTransform::RelMean => "RelTemporalMean",
            TemporalTransform::DiffK(_) => "TemporalDiffK",
            TemporalTransform::Mean => "TemporalMean",
        }
    }

    /// Selection width of this transform's temporal mask: 1 for the lag,
    /// 5 (capped by the window) for everything else. Width-preserving
    /// transforms consume the dense weighted window, so their selection
    /// shows up as explicit zeros at the discarded steps.
    pub fn mask_width(self, lookback: usize) -> usize {
        match self {
            TemporalTransform::Lag => 1,
            _ => 5.min(lookback),
        }
    }

    pub fn output_width(self, lookback: usize) -> usize {
        match self {
            TemporalTransform::StdNorm | TemporalTransform::Diff => lookback,
            _ => 1,
        }
    }
}

/// Non-temporal bank for a dataset's capabilities. GroupBy needs at least one
/// categorical and one numeric column; the purely numeric transforms need a
/// numeric column; identity accepts every routed column so it is always in.
pub fn tabular_bank(has_numeric: bool, has_categorical: bool) -> Vec<TabularTransform> {
    let mut bank = Vec::new();
    if has_numeric {
        bank.extend([
            TabularTransform::Polynomial,
            TabularTransform::Logarithm,
            TabularTransform::ZScale,
            TabularTransform::AdditiveAgg,
            TabularTransform::MultiplicativeAgg,
            TabularTransform::Gaussian,
            TabularTransform::Quantile,
        ]);
        if has_categorical {
            bank.push(TabularTransform::GroupBy);
        }
    }
    bank.push(TabularTransform::Identity);
    bank
}

/// Temporal bank for one feature. Stepped differences whose offset does not
/// fit in the window are excluded at construction.
pub fn temporal_bank(lookback: usize) -> Vec<TemporalTransform> {
    let mut bank = vec![
        TemporalTransform::Agg,
        TemporalTransform::StdNorm,
        TemporalTransform::Diff,
        TemporalTransform::Lag,
        TemporalTransform::RelMean,
    ];
    for k in TEMPORAL_DIFF_OFFSETS {
        if k < lookback {
            bank.push(TemporalTransform::DiffK(k));
        }
    }
    bank.push(TemporalTransform::Mean);
    bank
}

// ── Provenance ──────────────────────────────────────────────────────────

/// How an engineered column was produced: the transform, the selected input
/// features with their mask weights, and any learned constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub transform: String,
    /// (feature name, local mask weight).
    pub inputs: Vec<(String, f64)>,
    /// (constant name, value).
    pub constants: Vec<(String, f64)>,
}

impl Provenance {
    pub fn new(transform: &str, inputs: Vec<(String, f64)>, constants: Vec<(String, f64)>) -> Self {
        Provenance { transform: transform.to_string(), inputs, constants }
    }

    /// Human-readable descriptor: `Name(feat_1, ..., feat_h[, const])`.
    /// Constants render with 4 significant digits; integral constants render
    /// as plain integers (`TemporalLag(sales, 2)`).
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = self.inputs.iter().map(|(name, _)| name.clone()).collect();
        for (_, value) in &self.constants {
            parts.push(format_const(*value));
        }
        format!("{}({})", self.transform, parts.join(", "))
    }

    /// CSV-header-safe identifier for the column.
    pub fn slug(&self, position: usize) -> String {
        let feats: Vec<String> = self
            .inputs
            .iter()
            .map(|(name, _)| name.replace([' ', ',', '(', ')'], "_"))
            .collect();
        format!("f{position}_{}_{}", self.transform, feats.join("_"))
    }
}

/// 4 significant digits, integral values as integers.
pub fn format_const(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.fract() == 0.0 && v.abs() < 1e12 {
        return format!("{}", v as i64);
    }
    let exponent = v.abs().log10().floor() as i32;
    if !(-3..4).contains(&exponent) {
        return format!("{v:.3e}");
    }
    let decimals = (3 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Masked input to a transform: kept column indices of the candidate pool,
/// the (h,) weight node, and the (rows, h) weighted column node.
pub struct SelectedInput<'a> {
    pub indices: &'a [usize],
    pub weights: Var,
    pub weighted: Var,
}

impl<'a> SelectedInput<'a> {
    pub fn from_selection(sel: &'a crate::masking::MaskedSelection) -> Self {
        SelectedInput { indices: &sel.indices, weights: sel.weights, weighted: sel.weighted }
    }
}
