//! Temporal transforms over per-feature lookback windows of length L
//! (shape samples x L). The aggregation and the lag consume a temporal-mask
//! selection of window steps; the rest operate on the raw window. Transforms
//! that would shorten the window zero-pad to preserve length L.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::tabular::TransformOutput;
use super::{Provenance, SelectedInput, DIV_EPS};

fn window_len(tape: &Tape, w: Var, op: &'static str) -> Result<(usize, usize)> {
    let t = tape.value(w);
    if t.rank() != 2 {
        return Err(Error::shape(op, format!("expected window matrix, got {:?}", t.shape())));
    }
    Ok((t.rows(), t.cols()))
}

/// Sum over the mask-selected, weighted window steps.
pub fn temporal_agg(
    tape: &mut Tape,
    input: &SelectedInput,
    feature: &str,
    lookback: usize,
) -> Result<TransformOutput> {
    let out = tape.row_sum(input.weighted)?;
    let weights = tape.value(input.weights).data();
    let inputs = input
        .indices
        .iter()
        .zip(weights)
        .map(|(&step, &w)| (format!("{feature}[t-{}]", lookback - 1 - step), w))
        .collect();
    let provenance = vec![Provenance::new("TemporalAgg", inputs, vec![])];
    Ok(TransformOutput { var: out, provenance })
}

/// Per-row standardization over the window axis with population std:
/// `(w - mean) / (std + 1e-6)`.
pub fn temporal_std_norm(tape: &mut Tape, w: Var, feature: &str) -> Result<TransformOutput> {
    let (_, lookback) = window_len(tape, w, "temporal_std_norm")?;
    let mean = tape.row_mean(w)?;
    let centered = tape.sub_col(w, mean)?;
    let sq = tape.mul(centered, centered)?;
    let var = tape.row_mean(sq)?;
    // Tiny offset under the root keeps the gradient finite on constant windows.
    let var_guarded = tape.add_scalar(var, 1e-12);
    let std = tape.sqrt(var_guarded);
    let divisor = tape.add_scalar(std, DIV_EPS);
    let out = tape.div_col(centered, divisor)?;

    let provenance = (0..lookback)
        .map(|step| {
            Provenance::new(
                "TemporalStdNorm",
                vec![(feature.to_string(), 1.0)],
                vec![("offset".into(), (lookback - 1 - step) as f64)],
            )
        })
        .collect();
    Ok(TransformOutput { var: out, provenance })
}

/// Adjacent-step differences, zero-padded at the window start:
/// `out[0] = 0, out[t] = w[t] - w[t-1]`.
pub fn temporal_diff(tape: &mut Tape, w: Var, feature: &str) -> Result<TransformOutput> {
    let (rows, lookback) = window_len(tape, w, "temporal_diff")?;
    let later: Vec<usize> = (1..lookback).collect();
    let earlier: Vec<usize> = (0..lookback - 1).collect();
    let hi = tape.select_cols(w, &later)?;
    let lo = tape.select_cols(w, &earlier)?;
    let diff = tape.sub(hi, lo)?;
    let zeros = tape.constant(Tensor::zeros(vec![rows, 1]));
    let out = tape.concat_cols(&[zeros, diff])?;

    let provenance = (0..lookback)
        .map(|step| {
            Provenance::new(
                "TemporalDiff",
                vec![(feature.to_string(), 1.0)],
                vec![("offset".into(), (lookback - 1 - step) as f64)],
            )
        })
        .collect();
    Ok(TransformOutput { var: out, provenance })
}

/// The single step chosen by a top-1 temporal mask, weighted by its softmax
/// probability. Provenance reports the learned offset from the window end.
pub fn temporal_lag(
    tape: &mut Tape,
    input: &SelectedInput,
    feature: &str,
    lookback: usize,
) -> Result<TransformOutput> {
    if input.indices.len() != 1 {
        return Err(Error::invalid(
            "temporal_lag",
            format!("expects a top-1 selection, got {}", input.indices.len()),
        ));
    }
    let out = input.weighted;
    let offset = lookback - 1 - input.indices[0];
    let weight = tape.value(input.weights).data()[0];
    let provenance = vec![Provenance::new(
        "TemporalLag",
        vec![(feature.to_string(), weight)],
        vec![("offset".into(), offset as f64)],
    )];
    Ok(TransformOutput { var: out, provenance })
}

/// Mean of the standardized window. Analytically zero; kept as a composition
/// for graph consistency and bank parity.
pub fn rel_temporal_mean(tape: &mut Tape, w: Var, feature: &str) -> Result<TransformOutput> {
    let normalized = temporal_std_norm(tape, w, feature)?;
    let out = tape.row_mean(normalized.var)?;
    let provenance = vec![Provenance::new(
        "RelTemporalMean",
        vec![(feature.to_string(), 1.0)],
        vec![],
    )];
    Ok(TransformOutput { var: out, provenance })
}

/// Difference across a fixed number of steps: `w[L-1] - w[L-1-k]`.
pub fn temporal_diff_k(tape: &mut Tape, w: Var, k: usize, feature: &str) -> Result<TransformOutput> {
    let (_, lookback) = window_len(tape, w, "temporal_diff_k")?;
    if k >= lookback {
        return Err(Error::invalid(
            "temporal_diff_k",
            format!("offset {k} does not fit lookback {lookback}"),
        ));
    }
    let last = tape.select_cols(w, &[lookback - 1])?;
    let back = tape.select_cols(w, &[lookback - 1 - k])?;
    let out = tape.sub(last, back)?;
    let provenance = vec![Provenance::new(
        "TemporalDiffK",
        vec![(feature.to_string(), 1.0)],
        vec![("offset".into(), k as f64)],
    )];
    Ok(TransformOutput { var: out, provenance })
}

/// Row-wise mean of the raw window.
pub fn temporal_mean(tape: &mut Tape, w: Var, feature: &str) -> Result<TransformOutput> {
    window_len(tape, w, "temporal_mean")?;
    let out = tape.row_mean(w)?;
    let provenance = vec![Provenance::new(
        "TemporalMean",
        vec![(feature.to_string(), 1.0)],
        vec![],
    )];
    Ok(TransformOutput { var: out, provenance })
}
