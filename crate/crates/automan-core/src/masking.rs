//! Learnable importance masks: softmax over all logits, keep the top-h
//! probabilities, discard the rest without renormalizing.
//!
//! The same mechanics serve three roles. Local masks pick which input
//! features feed each transform, temporal masks pick lookback steps inside a
//! window, and the global mask picks which transformed columns reach the
//! predictor. Because the softmax runs over the full logit vector before the
//! cut, every logit keeps receiving gradient through the normalizer, so
//! non-selected candidates are still explored continuously. The kept width is
//! fixed at h, which holds the predictor input size constant across training.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Learnable logits plus the selection width h.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskParameters {
    pub logits: Tensor,
    pub h: usize,
}

impl MaskParameters {
    pub fn new(logits: Tensor, h: usize) -> Result<Self> {
        if logits.rank() != 1 {
            return Err(Error::shape("MaskParameters", format!("logits must be rank 1, got {:?}", logits.shape())));
        }
        if h == 0 || h > logits.len() {
            return Err(Error::invalid(
                "MaskParameters",
                format!("h = {h} outside 1..={}", logits.len()),
            ));
        }
        if !logits.all_finite() {
            return Err(Error::NonFinite { context: "mask logits".into() });
        }
        Ok(MaskParameters { logits, h })
    }

    /// Near-uniform start: independent U[-0.01, 0.01] logits.
    pub fn init_uniform(len: usize, h: usize, rng: &mut Rng) -> Result<Self> {
        let logits = Tensor::vector((0..len).map(|_| rng.range(-0.01, 0.01)).collect());
        MaskParameters::new(logits, h.min(len))
    }
}

/// Concrete selection produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskOutput {
    /// Kept positions, strictly increasing.
    pub indices: Vec<usize>,
    /// Softmax probabilities at the kept positions (no renormalization),
    /// so they are strictly positive and sum to at most 1.
    pub weights: Vec<f64>,
}

/// Graph handles for a masked selection of matrix columns.
pub struct MaskedSelection {
    /// Kept column indices of the input matrix.
    pub indices: Vec<usize>,
    /// (h,) node: kept softmax probabilities.
    pub weights: Var,
    /// (rows, h) node: kept columns, each scaled by its weight.
    pub weighted: Var,
    /// (rows, d) node: the full-width weighted matrix with explicit zeros at
    /// non-kept columns; width-preserving consumers (temporal window
    /// transforms) read this form.
    pub weighted_dense: Var,
    /// Values snapshot for reporting.
    pub output: MaskOutput,
}

/// Indices of the h largest logits; ties broken toward the smaller index;
/// returned in ascending order.
pub fn top_h_select(logits: &[f64], h: usize) -> Result<Vec<usize>> {
    if h == 0 || h > logits.len() {
        return Err(Error::invalid(
            "top_h_select",
            format!("h = {h} outside 1..={}", logits.len()),
        ));
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| {
        logits[b]
            .partial_cmp(&logits[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order[..h].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Softmax over all logits, keep the top-h entries, weight the matching
/// columns of `x`. The dense weighting runs over the full feature width, as
/// one mask covers all features; the kept columns are then gathered so the
/// downstream transform sees exactly h columns.
pub fn mask_forward(tape: &mut Tape, logits: Var, x: Var, h: usize) -> Result<MaskedSelection> {
    let logit_values = tape.value(logits);
    if logit_values.rank() != 1 {
        return Err(Error::shape("mask_forward", format!("logits rank {:?}", logit_values.shape())));
    }
    let x_t = tape.value(x);
    if x_t.rank() != 2 || x_t.cols() != logit_values.len() {
        return Err(Error::shape(
            "mask_forward",
            format!("x {:?} vs {} logits", x_t.shape(), logit_values.len()),
        ));
    }

    let indices = top_h_select(logit_values.data(), h)?;
    let probs = tape.softmax_vec(logits)?;
    let dense = tape.keep_indices(probs, &indices)?;
    let weighted_full = tape.mul_row(x, dense)?;
    let weighted = tape.select_cols(weighted_full, &indices)?;
    let weights = tape.select_elems(probs, &indices)?;

    let output = MaskOutput {
        indices: indices.clone(),
        weights: tape.value(weights).data().to_vec(),
    };
    Ok(MaskedSelection { indices, weights, weighted, weighted_dense: weighted_full, output })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn top_h_basic() {
        assert_eq!(top_h_select(&[0.5, 0.1, 0.9], 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn top_h_ties_prefer_smaller_index() {
        assert_eq!(top_h_select(&[1.0, 1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn top_h_full_width() {
        assert_eq!(top_h_select(&[3.0, 1.0, 2.0], 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn top_h_rejects_oversized_h() {
        assert!(top_h_select(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn uniform_logits_give_uniform_kept_weights() {
        let mut tape = Tape::new();
        let logits = tape.param(Tensor::vector(vec![0.0; 4]));
        let x = tape.constant(matrix(3, 4, |r, c| (r * 4 + c) as f64));
        let sel = mask_forward(&mut tape, logits, x, 2).unwrap();
        assert_eq!(sel.output.indices, vec![0, 1]);
        for &w in &sel.output.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_logit_weight_matches_softmax_arithmetic() {
        let mut tape = Tape::new();
        let logits = tape.param(Tensor::vector(vec![2.0, 0.0, 0.0]));
        let x = tape.constant(matrix(2, 3, |_, c| c as f64 + 1.0));
        let sel = mask_forward(&mut tape, logits, x, 1).unwrap();
        assert_eq!(sel.output.indices, vec![0]);
        let expected = 2.0_f64.exp() / (2.0_f64.exp() + 2.0);
        assert!((sel.output.weights[0] - expected).abs() < 1e-12);
        assert!((sel.output.weights[0] - 0.7870).abs() < 5e-5);
    }

    #[test]
    fn non_selected_columns_do_not_affect_output() {
        let base = matrix(4, 5, |r, c| (r as f64 + 1.0) * (c as f64 - 2.0));
        let logits = Tensor::vector(vec![1.0, -1.0, 2.0, -2.0, 0.5]);

        let run = |x: &Tensor| {
            let mut tape = Tape::new();
            let l = tape.param(logits.clone());
            let xv = tape.constant(x.clone());
            let sel = mask_forward(&mut tape, l, xv, 2).unwrap();
            (sel.output.clone(), tape.value(sel.weighted).clone())
        };

        let (out_a, weighted_a) = run(&base);
        assert_eq!(out_a.indices, vec![0, 2]);

        // Perturb a non-selected column (index 3) arbitrarily.
        let mut perturbed = base.clone();
        for r in 0..4 {
            let idx = r * 5 + 3;
            perturbed.data_mut()[idx] = 999.0 + r as f64;
        }
        let (out_b, weighted_b) = run(&perturbed);
        assert_eq!(out_a, out_b);
        assert_eq!(weighted_a.data(), weighted_b.data());
    }

    #[test]
    fn output_width_is_h_regardless_of_logits() {
        for trial in 0..20 {
            let mut rng = Rng::new(trial);
            let logits = Tensor::vector((0..10).map(|_| rng.range(-3.0, 3.0)).collect());
            let mut tape = Tape::new();
            let l = tape.param(logits);
            let x = tape.constant(matrix(2, 10, |r, c| (r + c) as f64));
            let sel = mask_forward(&mut tape, l, x, 4).unwrap();
            assert_eq!(tape.value(sel.weighted).shape(), &[2, 4]);
            assert_eq!(sel.output.indices.len(), 4);
        }
    }

    #[test]
    fn gradient_reaches_non_selected_logits() {
        let mut rng = Rng::new(99);
        let params = MaskParameters::init_uniform(8, 3, &mut rng).unwrap();
        let mut tape = Tape::new();
        let l = tape.param(params.logits.clone());
        let x = tape.constant(matrix(4, 8, |r, c| ((r * 8 + c) as f64 * 0.37).sin() + 0.2));
        let sel = mask_forward(&mut tape, l, x, params.h).unwrap();
        let loss = tape.sum_all(sel.weighted);
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(l).unwrap();
        let non_selected_with_grad = (0..8)
            .filter(|i| !sel.output.indices.contains(i))
            .filter(|&i| g.data()[i].abs() > 1e-12)
            .count();
        assert!(non_selected_with_grad >= 8 - params.h, "only {non_selected_with_grad} non-selected logits saw gradient");
    }

    #[test]
    fn mask_forward_rejects_width_mismatch() {
        let mut tape = Tape::new();
        let l = tape.param(Tensor::vector(vec![0.0; 4]));
        let x = tape.constant(matrix(2, 5, |_, _| 1.0));
        assert!(mask_forward(&mut tape, l, x, 2).is_err());
    }

    #[test]
    fn determinism_same_inputs_same_output() {
        let logits = Tensor::vector(vec![0.3, -0.2, 0.9, 0.1]);
        let x = matrix(3, 4, |r, c| (r * c) as f64 * 0.5 - 1.0);
        let run = || {
            let mut tape = Tape::new();
            let l = tape.param(logits.clone());
            let xv = tape.constant(x.clone());
            mask_forward(&mut tape, l, xv, 2).unwrap().output
        };
        assert_eq!(run(), run());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn argmax_always_selected(
                logits in proptest::collection::vec(-10.0f64..10.0, 2..20),
                h_frac in 0.0f64..1.0,
            ) {
                let h = 1 + (h_frac * (logits.len() - 1) as f64).floor() as usize;
                let kept = top_h_select(&logits, h).unwrap();
                let argmax = logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                    .unwrap()
                    .0;
                prop_assert!(kept.contains(&argmax));
            }

            #[test]
            fn shift_invariance(
                logits in proptest::collection::vec(-5.0f64..5.0, 3..12),
                shift in -5.0f64..5.0,
            ) {
                let d = logits.len();
                let h = (d / 2).max(1);
                let run = |ls: Vec<f64>| {
                    let mut tape = Tape::new();
                    let l = tape.param(Tensor::vector(ls));
                    let x = tape.constant(Tensor::matrix(1, d, vec![1.0; d]).unwrap());
                    mask_forward(&mut tape, l, x, h).unwrap().output
                };
                let base = run(logits.clone());
                let shifted = run(logits.iter().map(|v| v + shift).collect());
                prop_assert_eq!(&base.indices, &shifted.indices);
                for (a, b) in base.weights.iter().zip(&shifted.weights) {
                    prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
                }
            }

            #[test]
            fn weights_positive_and_sum_below_one(
                logits in proptest::collection::vec(-8.0f64..8.0, 2..16),
            ) {
                let d = logits.len();
                let h = (d / 2).max(1);
                let mut tape = Tape::new();
                let l = tape.param(Tensor::vector(logits));
                let x = tape.constant(Tensor::matrix(1, d, vec![0.0; d]).unwrap());
                let sel = mask_forward(&mut tape, l, x, h).unwrap();
                let total: f64 = sel.output.weights.iter().sum();
                prop_assert!(total <= 1.0 + 1e-12);
                for &w in &sel.output.weights {
                    prop_assert!(w > 0.0);
                }
                let mut sorted = sel.output.indices.clone();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, sel.output.indices);
            }
        }
    }
}
