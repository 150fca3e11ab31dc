//! Gradient validation against central finite differences.
//!
//! The numeric side only ever runs forward passes, so it stays independent
//! of the backward implementation it is checking.

use crate::error::{Error, Result};

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Builds a scalar loss over a fresh tape from a list of parameter leaves.
/// The leaves are inserted by the harness in the same order as `thetas`.
pub trait LossBuilder {
    fn build(&self, tape: &mut Tape, params: &[Var]) -> Result<Var>;
}

impl<F> LossBuilder for F
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    fn build(&self, tape: &mut Tape, params: &[Var]) -> Result<Var> {
        self(tape, params)
    }
}

fn eval<B: LossBuilder>(builder: &B, thetas: &[Tensor]) -> Result<f64> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = thetas.iter().map(|t| tape.param(t.clone())).collect();
    let loss = builder.build(&mut tape, &vars)?;
    tape.value(loss).scalar_value()
}

/// Max over all coordinates of all parameter tensors of
/// `|analytic - central| / (|analytic| + |central| + 1e-12)`.
pub fn finite_difference_check_many<B: LossBuilder>(
    builder: &B,
    thetas: &[Tensor],
    eps: f64,
) -> Result<f64> {
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::invalid(
            "finite_difference_check",
            format!("eps {eps} outside [1e-6, 1e-4]"),
        ));
    }

    // Analytic side: one forward + one backward.
    let mut tape = Tape::new();
    let vars: Vec<Var> = thetas.iter().map(|t| tape.param(t.clone())).collect();
    let loss = builder.build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut perturbed: Vec<Tensor> = thetas.to_vec();
    for (pi, theta) in thetas.iter().enumerate() {
        let analytic = grads
            .get(vars[pi])
            .ok_or_else(|| Error::invalid("finite_difference_check", "missing gradient"))?
            .clone();
        for ci in 0..theta.len() {
            let orig = theta.data()[ci];

            perturbed[pi].data_mut()[ci] = orig + eps;
            let plus = eval(builder, &perturbed)?;
            perturbed[pi].data_mut()[ci] = orig - eps;
            let minus = eval(builder, &perturbed)?;
            perturbed[pi].data_mut()[ci] = orig;

            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("finite differences at parameter {pi}, coordinate {ci}"),
                });
            }
            let central = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[ci];
            let rel = (a - central).abs() / (a.abs() + central.abs() + 1e-12);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

/// Single-tensor convenience wrapper.
pub fn finite_difference_check<B: LossBuilder>(builder: &B, theta: &Tensor, eps: f64) -> Result<f64> {
    finite_difference_check_many(builder, std::slice::from_ref(theta), eps)
}
