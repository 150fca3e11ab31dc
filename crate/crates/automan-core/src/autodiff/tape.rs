//! Reverse-mode differentiation over a linear operation tape.
//!
//! A forward pass records one [`Node`] per operation in creation order, so a
//! single reverse sweep visits every node after all of its consumers and
//! accumulates parent gradients by the chain rule. Graphs are rebuilt per
//! step (define-by-run); parameters enter as leaves with `requires_grad`.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`]. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// Matrix (m,n) combined with a length-n vector broadcast across rows.
    AddRow(Var, Var),
    SubRow(Var, Var),
    MulRow(Var, Var),
    DivRow(Var, Var),
    /// Matrix (m,n) combined with an (m,1) column broadcast across columns.
    SubCol(Var, Var),
    DivCol(Var, Var),
    MatMul(Var, Var),
    Neg(Var),
    Exp(Var),
    Ln(Var),
    Abs(Var),
    Sqrt(Var),
    PowConst(Var, f64),
    Sigmoid(Var),
    Softplus(Var),
    Relu(Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    SumAll(Var),
    MeanAll(Var),
    RowSum(Var),
    RowMean(Var),
    RowProd(Var),
    /// Softmax over a rank-1 tensor (max-subtracted for stability).
    SoftmaxVec(Var),
    /// Keep the listed positions of a vector, zero the rest.
    KeepIndices(Var, Vec<usize>),
    /// Gather vector elements at fixed positions.
    SelectElems(Var, Vec<usize>),
    /// Gather matrix columns at fixed positions.
    SelectCols(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    /// Mean cross entropy of row logits against integer labels.
    CrossEntropyMean(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by one backward sweep, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `var`. Zero-filled for `requires_grad`
    /// leaves that did not participate in the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Insert a learnable leaf (receives a gradient from `backward`).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Insert a constant leaf (inputs, fitted statistics, labels-as-values).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node { value, op, requires_grad });
        Var(id)
    }

    fn push_op(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(value, op, requires)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn want_matrix(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let t = self.value(v);
        if t.rank() != 2 {
            return Err(Error::shape(op, format!("expected matrix, got {:?}", t.shape())));
        }
        Ok((t.rows(), t.cols()))
    }

    fn want_vector(&self, op: &'static str, v: Var) -> Result<usize> {
        let t = self.value(v);
        if t.rank() != 1 {
            return Err(Error::shape(op, format!("expected vector, got {:?}", t.shape())));
        }
        Ok(t.len())
    }

    // ── Elementwise binary ──────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push_op(data, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push_op(data, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push_op(data, Op::Mul(a, b), &[a, b]))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("div", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x / y);
        Ok(self.push_op(data, Op::Div(a, b), &[a, b]))
    }

    // ── Row / column broadcasts ─────────────────────────────────────────

    fn row_broadcast_check(&self, op: &'static str, m: Var, v: Var) -> Result<(usize, usize)> {
        let (rows, cols) = self.want_matrix(op, m)?;
        let n = self.want_vector(op, v)?;
        if n != cols {
            return Err(Error::shape(op, format!("matrix cols {cols} vs vector len {n}")));
        }
        Ok((rows, cols))
    }

    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = self.row_broadcast_check("add_row", m, v)?;
        let out = row_zip(self.value(m), self.value(v), rows, cols, |x, y| x + y);
        Ok(self.push_op(out, Op::AddRow(m, v), &[m, v]))
    }

    pub fn sub_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = self.row_broadcast_check("sub_row", m, v)?;
        let out = row_zip(self.value(m), self.value(v), rows, cols, |x, y| x - y);
        Ok(self.push_op(out, Op::SubRow(m, v), &[m, v]))
    }

    pub fn mul_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = self.row_broadcast_check("mul_row", m, v)?;
        let out = row_zip(self.value(m), self.value(v), rows, cols, |x, y| x * y);
        Ok(self.push_op(out, Op::MulRow(m, v), &[m, v]))
    }

    pub fn div_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = self.row_broadcast_check("div_row", m, v)?;
        let out = row_zip(self.value(m), self.value(v), rows, cols, |x, y| x / y);
        Ok(self.push_op(out, Op::DivRow(m, v), &[m, v]))
    }

    fn col_broadcast_check(&self, op: &'static str, m: Var, c: Var) -> Result<(usize, usize)> {
        let (rows, cols) = self.want_matrix(op, m)?;
        let (crows, ccols) = self.want_matrix(op, c)?;
        if crows != rows || ccols != 1 {
            return Err(Error::shape(
                op,
                format!("matrix ({rows},{cols}) vs column ({crows},{ccols})"),
            ));
        }
        Ok((rows, cols))
    }

    pub fn sub_col(&mut self, m: Var, c: Var) -> Result<Var> {
        let (rows, cols) = self.col_broadcast_check("sub_col", m, c)?;
        let out = col_zip(self.value(m), self.value(c), rows, cols, |x, y| x - y);
        Ok(self.push_op(out, Op::SubCol(m, c), &[m, c]))
    }

    pub fn div_col(&mut self, m: Var, c: Var) -> Result<Var> {
        let (rows, cols) = self.col_broadcast_check("div_col", m, c)?;
        let out = col_zip(self.value(m), self.value(c), rows, cols, |x, y| x / y);
        Ok(self.push_op(out, Op::DivCol(m, c), &[m, c]))
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.want_matrix("matmul", a)?;
        let (kb, n) = self.want_matrix("matmul", b)?;
        if ka != kb {
            return Err(Error::shape(
                "matmul",
                format!("({m},{ka}) x ({kb},{n}): inner dimensions differ"),
            ));
        }
        let out = matmul_values(self.value(a), self.value(b), m, ka, n);
        Ok(self.push_op(out, Op::MatMul(a, b), &[a, b]))
    }

    // ── Elementwise unary ───────────────────────────────────────────────

    pub fn neg(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| -x);
        self.push_op(out, Op::Neg(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::exp);
        self.push_op(out, Op::Exp(a), &[a])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::ln);
        self.push_op(out, Op::Ln(a), &[a])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::abs);
        self.push_op(out, Op::Abs(a), &[a])
    }

    /// Elementwise sign with sign(0) = 0. Piecewise constant, so the result
    /// is recorded as a constant leaf: no gradient flows through it.
    pub fn sign(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        self.constant(out)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::sqrt);
        self.push_op(out, Op::Sqrt(a), &[a])
    }

    pub fn pow_const(&mut self, a: Var, p: f64) -> Var {
        let out = map(self.value(a), |x| x.powf(p));
        self.push_op(out, Op::PowConst(a, p), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = map(self.value(a), sigmoid);
        self.push_op(out, Op::Sigmoid(a), &[a])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = map(self.value(a), softplus);
        self.push_op(out, Op::Softplus(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x.max(0.0));
        self.push_op(out, Op::Relu(a), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = map(self.value(a), |x| x + c);
        self.push_op(out, Op::AddScalar(a), &[a])
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = map(self.value(a), |x| x * c);
        self.push_op(out, Op::MulScalar(a, c), &[a])
    }

    // ── Reductions ──────────────────────────────────────────────────────

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push_op(Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push_op(Tensor::scalar(s), Op::MeanAll(a), &[a])
    }

    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.want_matrix("row_sum", a)?;
        let out = row_reduce(self.value(a), rows, cols, |acc, x| acc + x, 0.0);
        Ok(self.push_op(out, Op::RowSum(a), &[a]))
    }

    pub fn row_mean(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.want_matrix("row_mean", a)?;
        let mut out = row_reduce(self.value(a), rows, cols, |acc, x| acc + x, 0.0);
        for v in out.data_mut() {
            *v /= cols as f64;
        }
        Ok(self.push_op(out, Op::RowMean(a), &[a]))
    }

    pub fn row_prod(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.want_matrix("row_prod", a)?;
        let out = row_reduce(self.value(a), rows, cols, |acc, x| acc * x, 1.0);
        Ok(self.push_op(out, Op::RowProd(a), &[a]))
    }

    // ── Softmax and selection ───────────────────────────────────────────

    pub fn softmax_vec(&mut self, a: Var) -> Result<Var> {
        self.want_vector("softmax_vec", a)?;
        let out = Tensor::vector(softmax_values(self.value(a).data()));
        Ok(self.push_op(out, Op::SoftmaxVec(a), &[a]))
    }

    /// Zero a vector everywhere except the listed positions.
    pub fn keep_indices(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let n = self.want_vector("keep_indices", a)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::invalid("keep_indices", format!("index {bad} >= length {n}")));
        }
        let src = self.value(a).data();
        let mut data = vec![0.0; n];
        for &i in indices {
            data[i] = src[i];
        }
        let out = Tensor::vector(data);
        Ok(self.push_op(out, Op::KeepIndices(a, indices.to_vec()), &[a]))
    }

    pub fn select_elems(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let n = self.want_vector("select_elems", a)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::invalid("select_elems", format!("index {bad} >= length {n}")));
        }
        let src = self.value(a).data();
        let data: Vec<f64> = indices.iter().map(|&i| src[i]).collect();
        let out = Tensor::vector(data);
        Ok(self.push_op(out, Op::SelectElems(a, indices.to_vec()), &[a]))
    }

    pub fn select_cols(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = self.want_matrix("select_cols", a)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= cols) {
            return Err(Error::invalid("select_cols", format!("column {bad} >= width {cols}")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * indices.len());
        for r in 0..rows {
            let base = r * cols;
            for &c in indices {
                data.push(src[base + c]);
            }
        }
        let out = Tensor::matrix(rows, indices.len(), data)?;
        Ok(self.push_op(out, Op::SelectCols(a, indices.to_vec()), &[a]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_cols", "no inputs"));
        }
        let (rows, _) = self.want_matrix("concat_cols", parts[0])?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.want_matrix("concat_cols", p)?;
            if r != rows {
                return Err(Error::shape("concat_cols", format!("row counts {rows} vs {r}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.value(p).data();
                data.extend_from_slice(&src[r * w..(r + 1) * w]);
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        Ok(self.push_op(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Mean cross entropy over rows of `logits` against integer labels,
    /// normalized with a max-subtracted log-sum-exp.
    pub fn cross_entropy_mean(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (rows, cols) = self.want_matrix("cross_entropy_mean", logits)?;
        if labels.len() != rows {
            return Err(Error::shape(
                "cross_entropy_mean",
                format!("{rows} logit rows vs {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= cols) {
            return Err(Error::invalid(
                "cross_entropy_mean",
                format!("label {bad} out of range for {cols} classes"),
            ));
        }
        let t = self.value(logits);
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = &t.data()[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        let out = Tensor::scalar(total / rows as f64);
        Ok(self.push_op(out, Op::CrossEntropyMean(logits, labels.to_vec()), &[logits]))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. The tape itself is untouched, so
    /// repeated sweeps over the same graph give identical gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_t = self.value(loss);
        if !loss_t.is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", loss_t.shape()),
            ));
        }

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len())
            .map(|i| {
                if self.nodes[i].requires_grad {
                    Some(Tensor::zeros(self.nodes[i].value.shape().to_vec()))
                } else {
                    None
                }
            })
            .collect();

        if !self.nodes[loss.0].requires_grad {
            // Loss does not depend on any parameter; all gradients stay zero.
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::full(loss_t.shape().to_vec(), 1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate_parents(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        Ok(Gradients { grads })
    }

    fn accumulate_parents(&self, node: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let add_to = |grads: &mut [Option<Tensor>], v: Var, contrib: &[f64]| {
            if let Some(slot) = grads[v.0].as_mut() {
                for (dst, src) in slot.data_mut().iter_mut().zip(contrib) {
                    *dst += src;
                }
            }
        };

        match &self.nodes[node].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_to(grads, *a, g.data());
                add_to(grads, *b, g.data());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.data());
                let neg: Vec<f64> = g.data().iter().map(|v| -v).collect();
                add_to(grads, *b, &neg);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let ga: Vec<f64> = g.data().iter().zip(vb).map(|(g, y)| g * y).collect();
                let gb: Vec<f64> = g.data().iter().zip(va).map(|(g, x)| g * x).collect();
                add_to(grads, *a, &ga);
                add_to(grads, *b, &gb);
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let ga: Vec<f64> = g.data().iter().zip(vb).map(|(g, y)| g / y).collect();
                let gb: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(va.iter().zip(vb))
                    .map(|(g, (x, y))| -g * x / (y * y))
                    .collect();
                add_to(grads, *a, &ga);
                add_to(grads, *b, &gb);
            }
            Op::AddRow(m, v) => {
                add_to(grads, *m, g.data());
                add_to(grads, *v, &col_sums(g));
            }
            Op::SubRow(m, v) => {
                add_to(grads, *m, g.data());
                let neg: Vec<f64> = col_sums(g).iter().map(|v| -v).collect();
                add_to(grads, *v, &neg);
            }
            Op::MulRow(m, v) => {
                let (rows, cols) = (g.rows(), g.cols());
                let (vm, vv) = (self.value(*m).data(), self.value(*v).data());
                let mut gm = vec![0.0; rows * cols];
                let mut gv = vec![0.0; cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let idx = r * cols + c;
                        gm[idx] = g.data()[idx] * vv[c];
                        gv[c] += g.data()[idx] * vm[idx];
                    }
                }
                add_to(grads, *m, &gm);
                add_to(grads, *v, &gv);
            }
            Op::DivRow(m, v) => {
                let (rows, cols) = (g.rows(), g.cols());
                let (vm, vv) = (self.value(*m).data(), self.value(*v).data());
                let mut gm = vec![0.0; rows * cols];
                let mut gv = vec![0.0; cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let idx = r * cols + c;
                        gm[idx] = g.data()[idx] / vv[c];
                        gv[c] -= g.data()[idx] * vm[idx] / (vv[c] * vv[c]);
                    }
                }
                add_to(grads, *m, &gm);
                add_to(grads, *v, &gv);
            }
            Op::SubCol(m, c) => {
                add_to(grads, *m, g.data());
                let cols = g.cols();
                let mut gc = vec![0.0; g.rows()];
                for (r, slot) in gc.iter_mut().enumerate() {
                    for j in 0..cols {
                        *slot -= g.data()[r * cols + j];
                    }
                }
                add_to(grads, *c, &gc);
            }
            Op::DivCol(m, c) => {
                let (rows, cols) = (g.rows(), g.cols());
                let (vm, vc) = (self.value(*m).data(), self.value(*c).data());
                let mut gm = vec![0.0; rows * cols];
                let mut gc = vec![0.0; rows];
                for r in 0..rows {
                    for j in 0..cols {
                        let idx = r * cols + j;
                        gm[idx] = g.data()[idx] / vc[r];
                        gc[r] -= g.data()[idx] * vm[idx] / (vc[r] * vc[r]);
                    }
                }
                add_to(grads, *m, &gm);
                add_to(grads, *c, &gc);
            }
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                // gA = g · Bᵀ
                let mut ga = vec![0.0; m * k];
                for r in 0..m {
                    for kk in 0..k {
                        let mut acc = 0.0;
                        for c in 0..n {
                            acc += g.data()[r * n + c] * vb[kk * n + c];
                        }
                        ga[r * k + kk] = acc;
                    }
                }
                // gB = Aᵀ · g
                let mut gb = vec![0.0; k * n];
                for kk in 0..k {
                    for c in 0..n {
                        let mut acc = 0.0;
                        for r in 0..m {
                            acc += va[r * k + kk] * g.data()[r * n + c];
                        }
                        gb[kk * n + c] = acc;
                    }
                }
                add_to(grads, *a, &ga);
                add_to(grads, *b, &gb);
            }
            Op::Neg(a) => {
                let ga: Vec<f64> = g.data().iter().map(|v| -v).collect();
                add_to(grads, *a, &ga);
            }
            Op::Exp(a) => {
                let out = self.nodes[node].value.data();
                let ga: Vec<f64> = g.data().iter().zip(out).map(|(g, y)| g * y).collect();
                add_to(grads, *a, &ga);
            }
            Op::Ln(a) => {
                let va = self.value(*a).data();
                let ga: Vec<f64> = g.data().iter().zip(va).map(|(g, x)| g / x).collect();
                add_to(grads, *a, &ga);
            }
            Op::Abs(a) => {
                let va = self.value(*a).data();
                let ga: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(va)
                    .map(|(g, x)| g * if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 })
                    .collect();
                add_to(grads, *a, &ga);
            }
            Op::Sqrt(a) => {
                let out = self.nodes[node].value.data();
                let ga: Vec<f64> = g.data().iter().zip(out).map(|(g, y)| g / (2.0 * y)).collect();
                add_to(grads, *a, &ga);
            }
            Op::PowConst(a, p) => {
                let va = self.value(*a).data();
                let ga: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(va)
                    .map(|(g, x)| g * p * x.powf(p - 1.0))
                    .collect();
                add_to(grads, *a, &ga);
            }
            Op::Sigmoid(a) => {
                let out = self.nodes[node].value.data();
                let ga: Vec<f64> = g.data().iter().zip(out).map(|(g, s)| g * s * (1.0 - s)).collect();
                add_to(grads, *a, &ga);
            }
            Op::Softplus(a) => {
                let va = self.value(*a).data();
                let ga: Vec<f64> = g.data().iter().zip(va).map(|(g, x)| g * sigmoid(*x)).collect();
                add_to(grads, *a, &ga);
            }
            Op::Relu(a) => {
                let va = self.value(*a).data();
                let ga: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(va)
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                add_to(grads, *a, &ga);
            }
            Op::AddScalar(a) => add_to(grads, *a, g.data()),
            Op::MulScalar(a, c) => {
                let ga: Vec<f64> = g.data().iter().map(|v| v * c).collect();
                add_to(grads, *a, &ga);
            }
            Op::SumAll(a) => {
                let n = self.value(*a).len();
                let ga = vec![g.data()[0]; n];
                add_to(grads, *a, &ga);
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).len();
                let ga = vec![g.data()[0] / n as f64; n];
                add_to(grads, *a, &ga);
            }
            Op::RowSum(a) => {
                let (rows, cols) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        ga[r * cols + c] = g.data()[r];
                    }
                }
                add_to(grads, *a, &ga);
            }
            Op::RowMean(a) => {
                let (rows, cols) = (self.value(*a).rows(), self.value(*a).cols());
                let mut ga = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        ga[r * cols + c] = g.data()[r] / cols as f64;
                    }
                }
                add_to(grads, *a, &ga);
            }
            Op::RowProd(a) => {
                let (rows, cols) = (self.value(*a).rows(), self.value(*a).cols());
                let va = self.value(*a).data();
                let mut ga = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        // Leave-one-out product; robust to zeros in the row.
                        let mut prod = 1.0;
                        for k in 0..cols {
                            if k != c {
                                prod *= va[r * cols + k];
                            }
                        }
                        ga[r * cols + c] = g.data()[r] * prod;
                    }
                }
                add_to(grads, *a, &ga);
            }
            Op::SoftmaxVec(a) => {
                let s = self.nodes[node].value.data();
                let dot: f64 = g.data().iter().zip(s).map(|(g, p)| g * p).sum();
                let ga: Vec<f64> = g.data().iter().zip(s).map(|(g, p)| p * (g - dot)).collect();
                add_to(grads, *a, &ga);
            }
            Op::KeepIndices(a, indices) => {
                let mut ga = vec![0.0; self.value(*a).len()];
                for &i in indices {
                    ga[i] = g.data()[i];
                }
                add_to(grads, *a, &ga);
            }
            Op::SelectElems(a, indices) => {
                let mut ga = vec![0.0; self.value(*a).len()];
                for (t, &i) in indices.iter().enumerate() {
                    ga[i] += g.data()[t];
                }
                add_to(grads, *a, &ga);
            }
            Op::SelectCols(a, indices) => {
                let (rows, cols) = (self.value(*a).rows(), self.value(*a).cols());
                let h = indices.len();
                let mut ga = vec![0.0; rows * cols];
                for r in 0..rows {
                    for (t, &c) in indices.iter().enumerate() {
                        ga[r * cols + c] += g.data()[r * h + t];
                    }
                }
                add_to(grads, *a, &ga);
            }
            Op::ConcatCols(parts) => {
                let rows = self.nodes[node].value.rows();
                let total = self.nodes[node].value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut gp = vec![0.0; rows * w];
                    for r in 0..rows {
                        gp[r * w..(r + 1) * w]
                            .copy_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                    }
                    add_to(grads, p, &gp);
                    offset += w;
                }
            }
            Op::CrossEntropyMean(logits, labels) => {
                let (rows, cols) = (self.value(*logits).rows(), self.value(*logits).cols());
                let v = self.value(*logits).data();
                let scale = g.data()[0] / rows as f64;
                let mut gl = vec![0.0; rows * cols];
                for (r, &y) in labels.iter().enumerate() {
                    let row = &v[r * cols..(r + 1) * cols];
                    let probs = softmax_values(row);
                    for c in 0..cols {
                        let indicator = if c == y { 1.0 } else { 0.0 };
                        gl[r * cols + c] = scale * (probs[c] - indicator);
                    }
                }
                add_to(grads, *logits, &gl);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // max(x, 0) + ln(1 + e^{-|x|}) avoids overflow on both tails.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn softmax_values(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect()).expect("same shape")
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn row_zip(m: &Tensor, v: &Tensor, rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            data.push(f(m.data()[r * cols + c], v.data()[c]));
        }
    }
    Tensor::matrix(rows, cols, data).expect("shape checked")
}

fn col_zip(m: &Tensor, col: &Tensor, rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            data.push(f(m.data()[r * cols + c], col.data()[r]));
        }
    }
    Tensor::matrix(rows, cols, data).expect("shape checked")
}

fn row_reduce(m: &Tensor, rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64, init: f64) -> Tensor {
    let mut data = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut acc = init;
        for c in 0..cols {
            acc = f(acc, m.data()[r * cols + c]);
        }
        data.push(acc);
    }
    Tensor::matrix(rows, 1, data).expect("shape checked")
}

fn matmul_values(a: &Tensor, b: &Tensor, m: usize, k: usize, n: usize) -> Tensor {
    let (va, vb) = (a.data(), b.data());
    let mut data = vec![0.0; m * n];
    for r in 0..m {
        for kk in 0..k {
            let x = va[r * k + kk];
            let brow = &vb[kk * n..(kk + 1) * n];
            let drow = &mut data[r * n..(r + 1) * n];
            for (d, &y) in drow.iter_mut().zip(brow) {
                *d += x * y;
            }
        }
    }
    Tensor::matrix(m, n, data).expect("shape checked")
}

fn col_sums(g: &Tensor) -> Vec<f64> {
    let (rows, cols) = (g.rows(), g.cols());
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for (c, slot) in out.iter_mut().enumerate() {
            *slot += g.data()[r * cols + c];
        }
    }
    out
}
