//! Gaussian-sum function approximation on compact boxes.
//!
//! Fits finite weighted sums of isotropic Gaussians to continuous targets on
//! `[-N, N]^n` (n <= 2) by gradient descent on a dense evaluation grid, and
//! numerically verifies the algebra facts the construction rests on: the
//! pointwise product of two Gaussians is again a (scaled) Gaussian, Gaussians
//! vanish nowhere, and they separate points.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Width floor during fitting; keeps the exponent well-conditioned.
const WIDTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub coefficient: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

impl GaussianComponent {
    /// Unit-height Gaussian: `exp(-|x - center|^2 / (2 width^2))`, times the
    /// coefficient.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.center.len());
        let dist_sq: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.coefficient * (-dist_sq / (2.0 * self.width * self.width)).exp()
    }

    /// Closed-form pointwise product with another Gaussian (complete the
    /// square): `1/s^2 = 1/s1^2 + 1/s2^2`, the center is the
    /// precision-weighted mean, and the scale picks up
    /// `exp(-|c1 - c2|^2 / (2 (s1^2 + s2^2)))`.
    pub fn product(&self, other: &GaussianComponent) -> GaussianComponent {
        debug_assert_eq!(self.center.len(), other.center.len());
        let s1sq = self.width * self.width;
        let s2sq = other.width * other.width;
        let precision = 1.0 / s1sq + 1.0 / s2sq;
        let width = (1.0 / precision).sqrt();
        let center: Vec<f64> = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a / s1sq + b / s2sq) / precision)
            .collect();
        let gap_sq: f64 = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let scale = (-gap_sq / (2.0 * (s1sq + s2sq))).exp();
        GaussianComponent {
            coefficient: self.coefficient * other.coefficient * scale,
            center,
            width,
        }
    }
}

/// Finite weighted sum of Gaussians over `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSum {
    pub dim: usize,
    pub components: Vec<GaussianComponent>,
}

impl GaussianSum {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.eval(x)).sum()
    }

    /// Componentwise closed-form expansion of the pointwise product of two
    /// sums; the algebra closure behind the approximation argument.
    pub fn product(&self, other: &GaussianSum) -> GaussianSum {
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for a in &self.components {
            for b in &other.components {
                components.push(a.product(b));
            }
        }
        GaussianSum { dim: self.dim, components }
    }
}

/// Per-K uniform errors of fits against one target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub target: String,
    pub half_width: f64,
    pub resolution: usize,
    /// (K, uniform error), K strictly increasing.
    pub errors: Vec<(usize, f64)>,
}

impl ApproximationReport {
    pub fn render_csv(&self) -> String {
        let mut out = String::from("target,half_width,resolution,components,uniform_error\n");
        for (k, err) in &self.errors {
            let _ = writeln!(
                out,
                "{},{},{},{k},{err:.6}",
                self.target, self.half_width, self.resolution
            );
        }
        out
    }
}

/// Evenly spaced grid over `[-n_half, n_half]^dim`, `resolution` points per
/// axis, endpoints included.
pub fn grid_points(n_half: f64, resolution: usize, dim: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..resolution)
        .map(|i| -n_half + 2.0 * n_half * i as f64 / (resolution - 1) as f64)
        .collect();
    match dim {
        1 => axis.into_iter().map(|x| vec![x]).collect(),
        2 => {
            let mut points = Vec::with_capacity(resolution * resolution);
            for &x in &axis {
                for &y in &axis {
                    points.push(vec![x, y]);
                }
            }
            points
        }
        _ => panic!("grid_points supports dim 1 or 2"),
    }
}

pub struct FitOptions {
    pub steps: usize,
    pub learning_rate: f64,
    /// Points per grid axis (>= 256 per the contract).
    pub resolution: usize,
}

impl FitOptions {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => FitOptions { steps: 2200, learning_rate: 0.05, resolution: 256 },
            _ => FitOptions { steps: 300, learning_rate: 0.08, resolution: 256 },
        }
    }
}

/// Incremental Adam fit of a K-component sum against target values sampled
/// on a fixed grid. Drives both the batch API and interactive front ends.
pub struct GaussianFitter {
    k: usize,
    dim: usize,
    grid: Tensor,
    target_col: Tensor,
    coef: Tensor,
    centers: Tensor,
    widths: Tensor,
    learning_rate: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps_done: u64,
    pub last_loss: f64,
}

impl GaussianFitter {
    pub fn new(
        target: &dyn Fn(&[f64]) -> f64,
        k: usize,
        n_half: f64,
        dim: usize,
        seed: u64,
        opts: &FitOptions,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("fit_gaussian_sum", "K must be at least 1"));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid("fit_gaussian_sum", "dim must be 1 or 2"));
        }
        if opts.resolution < 256 {
            return Err(Error::invalid(
                "fit_gaussian_sum",
                format!("grid needs >= 256 points per axis, got {}", opts.resolution),
            ));
        }

        let points = grid_points(n_half, opts.resolution, dim);
        let g = points.len();
        let mut flat = Vec::with_capacity(g * dim);
        let mut target_values = Vec::with_capacity(g);
        for p in &points {
            flat.extend_from_slice(p);
            target_values.push(target(p));
        }
        if target_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "target evaluation on the grid".into() });
        }

        let mut rng = Rng::new(seed);
        Ok(GaussianFitter {
            k,
            dim,
            grid: Tensor::matrix(g, dim, flat)?,
            target_col: Tensor::matrix(g, 1, target_values)?,
            coef: Tensor::zeros(vec![k]),
            centers: Tensor::vector((0..k * dim).map(|_| rng.range(-n_half, n_half)).collect()),
            widths: Tensor::full(vec![k], (2.0 * n_half / k as f64).max(WIDTH_FLOOR)),
            learning_rate: opts.learning_rate,
            m: vec![
                Tensor::zeros(vec![k]),
                Tensor::zeros(vec![k * dim]),
                Tensor::zeros(vec![k]),
            ],
            v: vec![
                Tensor::zeros(vec![k]),
                Tensor::zeros(vec![k * dim]),
                Tensor::zeros(vec![k]),
            ],
            steps_done: 0,
            last_loss: f64::NAN,
        })
    }

    /// One Adam step on the grid MSE; widths are floored afterwards.
    pub fn step(&mut self) -> Result<f64> {
        let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        self.steps_done += 1;

        let mut tape = Tape::new();
        let grid_var = tape.constant(self.grid.clone());
        let target_var = tape.constant(self.target_col.clone());
        let coef_var = tape.param(self.coef.clone());
        let centers_var = tape.param(self.centers.clone());
        let widths_var = tape.param(self.widths.clone());

        let pred = sum_graph(&mut tape, grid_var, coef_var, centers_var, widths_var, self.k, self.dim)?;
        let diff = tape.sub(pred, target_var)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean_all(sq);

        let loss_value = tape.value(loss).scalar_value()?;
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!(
                "gaussian fit diverged at step {}; try a smaller learning rate",
                self.steps_done
            )));
        }

        let grads = tape.backward(loss)?;
        let bias1 = 1.0 - beta1.powi(self.steps_done as i32);
        let bias2 = 1.0 - beta2.powi(self.steps_done as i32);
        for (slot, (theta, var)) in [
            (&mut self.coef, coef_var),
            (&mut self.centers, centers_var),
            (&mut self.widths, widths_var),
        ]
        .into_iter()
        .enumerate()
        {
            let grad = grads.get(var).expect("param gradient");
            let m = self.m[slot].data_mut();
            let v = self.v[slot].data_mut();
            let data = theta.data_mut();
            for c in 0..data.len() {
                let gval = grad.data()[c];
                m[c] = beta1 * m[c] + (1.0 - beta1) * gval;
                v[c] = beta2 * v[c] + (1.0 - beta2) * gval * gval;
                data[c] -= self.learning_rate * (m[c] / bias1) / ((v[c] / bias2).sqrt() + eps);
            }
        }
        for w in self.widths.data_mut() {
            if *w < WIDTH_FLOOR {
                *w = WIDTH_FLOOR;
            }
        }
        self.last_loss = loss_value;
        Ok(loss_value)
    }

    pub fn current(&self) -> GaussianSum {
        let components = (0..self.k)
            .map(|i| GaussianComponent {
                coefficient: self.coef.data()[i],
                center: self.centers.data()[i * self.dim..(i + 1) * self.dim].to_vec(),
                width: self.widths.data()[i],
            })
            .collect();
        GaussianSum { dim: self.dim, components }
    }
}

/// Fit a K-component Gaussian sum to `target` on `[-N, N]^dim` by Adam on
/// the mean squared grid error. Centers start uniform on the domain, widths
/// at `2N / K`, coefficients at zero.
pub fn fit_gaussian_sum(
    target: &dyn Fn(&[f64]) -> f64,
    k: usize,
    n_half: f64,
    dim: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<GaussianSum> {
    let mut fitter = GaussianFitter::new(target, k, n_half, dim, seed, opts)?;
    for _ in 0..opts.steps {
        fitter.step()?;
    }
    Ok(fitter.current())
}

fn sum_graph(
    tape: &mut Tape,
    grid: Var,
    coef: Var,
    centers: Var,
    widths: Var,
    k: usize,
    dim: usize,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for i in 0..k {
        let center_i = tape.select_elems(centers, &(i * dim..(i + 1) * dim).collect::<Vec<_>>())?;
        let width_i = tape.select_elems(widths, &[i])?;
        let coef_i = tape.select_elems(coef, &[i])?;

        let diff = tape.sub_row(grid, center_i)?;
        let sq = tape.mul(diff, diff)?;
        let dist_sq = tape.row_sum(sq)?;
        let w_sq = tape.mul(width_i, width_i)?;
        let two_w_sq = tape.mul_scalar(w_sq, 2.0);
        let ratio = tape.div_row(dist_sq, two_w_sq)?;
        let neg = tape.neg(ratio);
        let bell = tape.exp(neg);
        let scaled = tape.mul_row(bell, coef_i)?;
        total = Some(match total {
            None => scaled,
            Some(acc) => tape.add(acc, scaled)?,
        });
    }
    Ok(total.expect("k >= 1"))
}

/// Max absolute deviation between the target and the sum over the evaluation
/// grid.
pub fn uniform_error(
    target: &dyn Fn(&[f64]) -> f64,
    sum: &GaussianSum,
    n_half: f64,
    resolution: usize,
) -> f64 {
    grid_points(n_half, resolution, sum.dim)
        .iter()
        .map(|p| (target(p) - sum.eval(p)).abs())
        .fold(0.0, f64::max)
}

// ── Algebra checks ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraReport {
    /// Worst pointwise deviation of the closed-form product from the actual
    /// product of evaluations.
    pub product_max_deviation: f64,
    pub separation_ok: bool,
    pub positivity_ok: bool,
}

impl AlgebraReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.product_max_deviation < tol && self.separation_ok && self.positivity_ok
    }
}

/// Numeric verification with random parameters: (i) the closed-form product
/// of two Gaussians matches pointwise multiplication, (ii) a Gaussian
/// centered at x separates x from any y != x, (iii) Gaussians are strictly
/// positive everywhere tested.
pub fn verify_algebra(seed: u64) -> AlgebraReport {
    let mut rng = Rng::new(seed);
    let mut product_max_deviation: f64 = 0.0;
    let mut separation_ok = true;
    let mut positivity_ok = true;

    for trial in 0..200 {
        let dim = if trial % 2 == 0 { 1 } else { 2 };
        let random_component = |rng: &mut Rng| GaussianComponent {
            coefficient: rng.range(0.2, 2.0),
            center: (0..dim).map(|_| rng.range(-3.0, 3.0)).collect(),
            width: rng.range(0.3, 2.5),
        };
        let a = random_component(&mut rng);
        let b = random_component(&mut rng);
        let prod = a.product(&b);

        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| rng.range(-4.0, 4.0)).collect();
            let direct = a.eval(&x) * b.eval(&x);
            let closed = prod.eval(&x);
            product_max_deviation = product_max_deviation.max((direct - closed).abs());

            if a.eval(&x) <= 0.0 {
                positivity_ok = false;
            }
        }

        // Separation: a unit Gaussian centered at x takes value 1 there and
        // strictly less anywhere else.
        let x: Vec<f64> = (0..dim).map(|_| rng.range(-3.0, 3.0)).collect();
        let mut y = x.clone();
        y[0] += rng.range(0.1, 2.0); // guarantee y != x
        let f = GaussianComponent { coefficient: 1.0, center: x.clone(), width: rng.range(0.3, 2.0) };
        if f.eval(&x) <= f.eval(&y) {
            separation_ok = false;
        }
    }

    AlgebraReport { product_max_deviation, separation_ok, positivity_ok }
}

// ── Target corpus ───────────────────────────────────────────────────────

/// A boxed continuous target.
pub type TargetFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Named continuous targets used by the demo and the validation harness.
/// Returns (dimension, function).
pub fn corpus_target(name: &str) -> Result<(usize, TargetFn)> {
    match name {
        "sin" => Ok((1, Box::new(|x: &[f64]| x[0].sin()))),
        "abs-smooth" => Ok((1, Box::new(|x: &[f64]| (x[0] * x[0] + 0.1).sqrt()))),
        "step-smooth" => Ok((1, Box::new(|x: &[f64]| (3.0 * x[0]).tanh()))),
        "ripple" => Ok((2, Box::new(|x: &[f64]| x[0].sin() * x[1].cos()))),
        other => Err(Error::invalid("corpus_target", format!("unknown target '{other}'"))),
    }
}

pub const CORPUS: [&str; 4] = ["sin", "abs-smooth", "step-smooth", "ripple"];

/// Fit one target at several K values and report uniform errors.
pub fn approximation_report(
    name: &str,
    ks: &[usize],
    n_half: f64,
    seed: u64,
) -> Result<ApproximationReport> {
    let (dim, target) = corpus_target(name)?;
    let opts = FitOptions::for_dim(dim);
    let mut errors = Vec::with_capacity(ks.len());
    for &k in ks {
        let sum = fit_gaussian_sum(target.as_ref(), k, n_half, dim, seed, &opts)?;
        errors.push((k, uniform_error(target.as_ref(), &sum, n_half, opts.resolution)));
    }
    Ok(ApproximationReport { target: name.to_string(), half_width: n_half, resolution: opts.resolution, errors })
}
