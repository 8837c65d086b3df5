//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A tape is rebuilt for every forward pass; nodes are appended in
//! topological order, so backward is a single reverse sweep that visits
//! each node exactly once. All op outputs are checked for NaN/Inf at the
//! op boundary.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::tensor::Matrix;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
}

impl Var {
    pub fn id(&self) -> usize {
        self.id
    }
}

enum Op<T: Scalar> {
    Leaf,
    Constant,
    Matmul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    Scale(usize, T),
    LeakyRelu(usize, T),
    Logistic(usize),
    MaskedColSoftmax(usize, Matrix<T>),
    RowSum(usize),
    ConcatRows(Vec<usize>),
    /// Vertex embedding: value column i is the sum of the listed columns of
    /// the input matrix (one column index per attribute, offsets applied).
    Embed(usize, Vec<Vec<usize>>),
    Sum(usize),
    Mean(Vec<usize>),
    LogisticLoss(usize, T),
    CrossEntropy(usize, usize),
    SquaredError(usize, T),
}

struct Node<T: Scalar> {
    value: Matrix<T>,
    op: Op<T>,
    tracked: bool,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.id].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, tracked: bool, name: &'static str) -> Result<Var> {
        if let Some(index) = value.first_non_finite() {
            return Err(Error::NonFinite { op: name, index });
        }
        let id = self.nodes.len();
        self.nodes.push(Node { value, op, tracked });
        Ok(Var { id })
    }

    fn tracked(&self, id: usize) -> bool {
        self.nodes[id].tracked
    }

    /// Tracked input (a trainable parameter).
    pub fn leaf(&mut self, value: Matrix<T>) -> Result<Var> {
        self.push(value, Op::Leaf, true, "leaf")
    }

    /// Untracked input (data, masks).
    pub fn constant(&mut self, value: Matrix<T>) -> Result<Var> {
        self.push(value, Op::Constant, false, "constant")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.matmul(&self.nodes[b.id].value)?;
        let tracked = self.tracked(a.id) || self.tracked(b.id);
        self.push(value, Op::Matmul(a.id, b.id), tracked, "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.transpose();
        let tracked = self.tracked(a.id);
        self.push(value, Op::Transpose(a.id), tracked, "transpose")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.add(&self.nodes[b.id].value)?;
        let tracked = self.tracked(a.id) || self.tracked(b.id);
        self.push(value, Op::Add(a.id, b.id), tracked, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.sub(&self.nodes[b.id].value)?;
        let tracked = self.tracked(a.id) || self.tracked(b.id);
        self.push(value, Op::Sub(a.id, b.id), tracked, "sub")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.hadamard(&self.nodes[b.id].value)?;
        let tracked = self.tracked(a.id) || self.tracked(b.id);
        self.push(value, Op::Hadamard(a.id, b.id), tracked, "hadamard")
    }

    pub fn scale(&mut self, a: Var, s: T) -> Result<Var> {
        let value = self.nodes[a.id].value.scale(s);
        let tracked = self.tracked(a.id);
        self.push(value, Op::Scale(a.id, s), tracked, "scale")
    }

    /// Entrywise `max(alpha * z, z)`; subgradient at 0 is 1.
    pub fn leaky_relu(&mut self, a: Var, alpha: T) -> Result<Var> {
        let value = self.nodes[a.id]
            .value
            .map(|z| if z >= T::zero() { z } else { alpha * z });
        let tracked = self.tracked(a.id);
        self.push(value, Op::LeakyRelu(a.id, alpha), tracked, "leaky_relu")
    }

    pub fn logistic(&mut self, a: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.map(logistic_stable);
        let tracked = self.tracked(a.id);
        self.push(value, Op::Logistic(a.id), tracked, "logistic")
    }

    /// Column-wise softmax restricted to rows with `mask == 1`.
    /// A column whose mask is all zero yields an all-zero output column.
    pub fn masked_col_softmax(&mut self, z: Var, mask: &Matrix<T>) -> Result<Var> {
        let zv = &self.nodes[z.id].value;
        if zv.shape() != mask.shape() {
            return Err(Error::shape(
                "masked_col_softmax",
                zv.shape_str(),
                mask.shape_str(),
            ));
        }
        let value = masked_col_softmax_value(zv, mask);
        let tracked = self.tracked(z.id);
        self.push(
            value,
            Op::MaskedColSoftmax(z.id, mask.clone()),
            tracked,
            "masked_col_softmax",
        )
    }

    /// `r x m -> r x 1`: sum over columns (multiplication by ones).
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let value = self.nodes[a.id].value.row_sum();
        let tracked = self.tracked(a.id);
        self.push(value, Op::RowSum(a.id), tracked, "row_sum")
    }

    /// Vertical stack of column vectors.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        let mut tracked = false;
        for p in parts {
            let v = &self.nodes[p.id].value;
            if v.cols() != 1 {
                return Err(Error::shape("concat_rows", "column vector", v.shape_str()));
            }
            data.extend_from_slice(v.data());
            tracked |= self.tracked(p.id);
        }
        let rows = data.len();
        let value = Matrix::from_vec(rows, 1, data)?;
        let ids = parts.iter().map(|p| p.id).collect();
        self.push(value, Op::ConcatRows(ids), tracked, "concat_rows")
    }

    /// Column i of the output is the sum of `cols[i]`-indexed columns of `w`.
    pub fn embed(&mut self, w: Var, cols: Vec<Vec<usize>>) -> Result<Var> {
        let wv = &self.nodes[w.id].value;
        let r = wv.rows();
        let m = cols.len();
        let mut value = Matrix::zeros(r, m);
        for (i, selected) in cols.iter().enumerate() {
            for &j in selected {
                if j >= wv.cols() {
                    return Err(Error::Schema(format!(
                        "embedding column {} out of range ({} columns)",
                        j,
                        wv.cols()
                    )));
                }
                for row in 0..r {
                    value.set(row, i, value.get(row, i) + wv.get(row, j));
                }
            }
        }
        let tracked = self.tracked(w.id);
        self.push(value, Op::Embed(w.id, cols), tracked, "embed")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.nodes[a.id].value.sum());
        let tracked = self.tracked(a.id);
        self.push(value, Op::Sum(a.id), tracked, "sum")
    }

    /// Mean of scalar nodes.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("mean over empty set".into()));
        }
        let mut acc = T::zero();
        let mut tracked = false;
        for p in parts {
            let v = &self.nodes[p.id].value;
            if v.shape() != (1, 1) {
                return Err(Error::shape("mean", "1x1 scalar", v.shape_str()));
            }
            acc = acc + v.get(0, 0);
            tracked |= self.tracked(p.id);
        }
        let value = Matrix::scalar(acc / sc::<T>(parts.len() as f64));
        let ids = parts.iter().map(|p| p.id).collect();
        self.push(value, Op::Mean(ids), tracked, "mean")
    }

    /// Logistic loss `ln(1 + exp(-g*y))` on a scalar logit, label `y` in {-1,+1}.
    pub fn logistic_loss(&mut self, logit: Var, y: T) -> Result<Var> {
        let v = &self.nodes[logit.id].value;
        if v.shape() != (1, 1) {
            return Err(Error::shape("logistic_loss", "1x1 logit", v.shape_str()));
        }
        let value = Matrix::scalar(softplus(-v.get(0, 0) * y));
        let tracked = self.tracked(logit.id);
        self.push(value, Op::LogisticLoss(logit.id, y), tracked, "logistic_loss")
    }

    /// Cross-entropy with log-sum-exp stabilization; `logits` is `K x 1`.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let v = &self.nodes[logits.id].value;
        if v.cols() != 1 || class >= v.rows() {
            return Err(Error::Contract(format!(
                "cross_entropy: logits {} class {}",
                v.shape_str(),
                class
            )));
        }
        let z = v.col(0);
        let m = z.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = m + z
            .iter()
            .fold(T::zero(), |acc, &x| acc + (x - m).exp())
            .ln();
        let value = Matrix::scalar(lse - z[class]);
        let tracked = self.tracked(logits.id);
        self.push(value, Op::CrossEntropy(logits.id, class), tracked, "cross_entropy")
    }

    pub fn squared_error(&mut self, pred: Var, target: T) -> Result<Var> {
        let v = &self.nodes[pred.id].value;
        if v.shape() != (1, 1) {
            return Err(Error::shape("squared_error", "1x1 value", v.shape_str()));
        }
        let d = v.get(0, 0) - target;
        let value = Matrix::scalar(d * d);
        let tracked = self.tracked(pred.id);
        self.push(value, Op::SquaredError(pred.id, target), tracked, "squared_error")
    }

    /// Reverse accumulation from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.id].value.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got {}",
                self.nodes[loss.id].value.shape_str()
            )));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Matrix::scalar(T::one()));

        for id in (0..=loss.id).rev() {
            if !self.nodes[id].tracked {
                continue;
            }
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, id: usize, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let acc = |grads: &mut [Option<Matrix<T>>], target: usize, delta: Matrix<T>| {
            match &mut grads[target] {
                Some(existing) => {
                    *existing = existing.add(&delta).expect("gradient shapes");
                }
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[id].op {
            Op::Leaf | Op::Constant => {}
            Op::Matmul(a, b) => {
                if self.tracked(*a) {
                    let da = g.matmul_transposed(&self.nodes[*b].value).expect("matmul grad");
                    acc(grads, *a, da);
                }
                if self.tracked(*b) {
                    let db = self.nodes[*a].value.transposed_matmul(g).expect("matmul grad");
                    acc(grads, *b, db);
                }
            }
            Op::Transpose(a) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.transpose());
                }
            }
            Op::Add(a, b) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.tracked(*b) {
                    acc(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.tracked(*b) {
                    acc(grads, *b, g.scale(-T::one()));
                }
            }
            Op::Hadamard(a, b) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.hadamard(&self.nodes[*b].value).expect("shapes"));
                }
                if self.tracked(*b) {
                    acc(grads, *b, g.hadamard(&self.nodes[*a].value).expect("shapes"));
                }
            }
            Op::Scale(a, s) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.scale(*s));
                }
            }
            Op::LeakyRelu(a, alpha) => {
                if self.tracked(*a) {
                    let x = &self.nodes[*a].value;
                    let mut d = g.clone();
                    for (dv, &xv) in d.data_mut().iter_mut().zip(x.data().iter()) {
                        if xv < T::zero() {
                            *dv = *dv * *alpha;
                        }
                    }
                    acc(grads, *a, d);
                }
            }
            Op::Logistic(a) => {
                if self.tracked(*a) {
                    let y = &self.nodes[id].value;
                    let mut d = g.clone();
                    for (dv, &yv) in d.data_mut().iter_mut().zip(y.data().iter()) {
                        *dv = *dv * yv * (T::one() - yv);
                    }
                    acc(grads, *a, d);
                }
            }
            Op::MaskedColSoftmax(a, mask) => {
                if self.tracked(*a) {
                    let y = &self.nodes[id].value;
                    let (rows, cols) = y.shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for c in 0..cols {
                        let mut dot = T::zero();
                        for r in 0..rows {
                            if mask.get(r, c) != T::zero() {
                                dot = dot + g.get(r, c) * y.get(r, c);
                            }
                        }
                        for r in 0..rows {
                            if mask.get(r, c) != T::zero() {
                                let yv = y.get(r, c);
                                d.set(r, c, yv * (g.get(r, c) - dot));
                            }
                        }
                    }
                    acc(grads, *a, d);
                }
            }
            Op::RowSum(a) => {
                if self.tracked(*a) {
                    let (rows, cols) = self.nodes[*a].value.shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        let gv = g.get(r, 0);
                        for c in 0..cols {
                            d.set(r, c, gv);
                        }
                    }
                    acc(grads, *a, d);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let rows = self.nodes[*p].value.rows();
                    if self.tracked(*p) {
                        let mut d = Matrix::zeros(rows, 1);
                        for r in 0..rows {
                            d.set(r, 0, g.get(offset + r, 0));
                        }
                        acc(grads, *p, d);
                    }
                    offset += rows;
                }
            }
            Op::Embed(w, cols) => {
                if self.tracked(*w) {
                    let wv = &self.nodes[*w].value;
                    let mut d = Matrix::zeros(wv.rows(), wv.cols());
                    for (i, selected) in cols.iter().enumerate() {
                        for &j in selected {
                            for row in 0..wv.rows() {
                                d.set(row, j, d.get(row, j) + g.get(row, i));
                            }
                        }
                    }
                    acc(grads, *w, d);
                }
            }
            Op::Sum(a) => {
                if self.tracked(*a) {
                    let gv = g.get(0, 0);
                    let (rows, cols) = self.nodes[*a].value.shape();
                    acc(grads, *a, Matrix::zeros(rows, cols).map(|_| gv));
                }
            }
            Op::Mean(parts) => {
                let n = sc::<T>(parts.len() as f64);
                for p in parts {
                    if self.tracked(*p) {
                        acc(grads, *p, Matrix::scalar(g.get(0, 0) / n));
                    }
                }
            }
            Op::LogisticLoss(a, y) => {
                if self.tracked(*a) {
                    let gv = self.nodes[*a].value.get(0, 0);
                    let d = -*y * logistic_stable(-gv * *y) * g.get(0, 0);
                    acc(grads, *a, Matrix::scalar(d));
                }
            }
            Op::CrossEntropy(a, class) => {
                if self.tracked(*a) {
                    let z = self.nodes[*a].value.col(0);
                    let m = z.iter().fold(T::neg_infinity(), |x, &b| x.max(b));
                    let total = z.iter().fold(T::zero(), |acc2, &x| acc2 + (x - m).exp());
                    let gv = g.get(0, 0);
                    let mut d = Matrix::zeros(z.len(), 1);
                    for (k, &zk) in z.iter().enumerate() {
                        let p = (zk - m).exp() / total;
                        let indicator = if k == *class { T::one() } else { T::zero() };
                        d.set(k, 0, (p - indicator) * gv);
                    }
                    acc(grads, *a, d);
                }
            }
            Op::SquaredError(a, t) => {
                if self.tracked(*a) {
                    let p = self.nodes[*a].value.get(0, 0);
                    let d = (p - *t) * sc::<T>(2.0) * g.get(0, 0);
                    acc(grads, *a, Matrix::scalar(d));
                }
            }
        }
    }
}

pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for a node; zero (matching the node's shape) when the node
    /// was not reached from the loss.
    pub fn of(&self, v: Var, tape: &Tape<T>) -> Matrix<T> {
        match &self.grads[v.id()] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.value(v).shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

fn logistic_stable<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `ln(1 + exp(x))`.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn masked_col_softmax_value<T: Scalar>(z: &Matrix<T>, mask: &Matrix<T>) -> Matrix<T> {
    let (rows, cols) = z.shape();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut maxv = T::neg_infinity();
        let mut any = false;
        for r in 0..rows {
            if mask.get(r, c) != T::zero() {
                any = true;
                maxv = maxv.max(z.get(r, c));
            }
        }
        if !any {
            continue;
        }
        let mut total = T::zero();
        for r in 0..rows {
            if mask.get(r, c) != T::zero() {
                let e = (z.get(r, c) - maxv).exp();
                out.set(r, c, e);
                total = total + e;
            }
        }
        for r in 0..rows {
            if mask.get(r, c) != T::zero() {
                out.set(r, c, out.get(r, c) / total);
            }
        }
    }
    out
}

/// Max relative error between analytic gradients and central finite
/// differences, entrywise over every parameter.
///
/// The error at one entry is `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)`.
pub fn finite_diff_check<T: Scalar>(
    f: &dyn Fn(&[Matrix<T>]) -> Result<T>,
    params: &[Matrix<T>],
    analytic: &[Matrix<T>],
    h: f64,
) -> Result<f64> {
    if params.len() != analytic.len() {
        return Err(Error::Contract(
            "finite_diff_check: params/gradients length mismatch".into(),
        ));
    }
    let mut work: Vec<Matrix<T>> = params.to_vec();
    let mut max_err = 0.0f64;
    for p in 0..params.len() {
        if params[p].shape() != analytic[p].shape() {
            return Err(Error::Contract(format!(
                "finite_diff_check: gradient shape {} != parameter shape {}",
                analytic[p].shape_str(),
                params[p].shape_str()
            )));
        }
        for e in 0..params[p].len() {
            let orig = work[p].data()[e];
            work[p].data_mut()[e] = orig + sc::<T>(h);
            let up = f(&work)?.to_f64_lossy();
            work[p].data_mut()[e] = orig - sc::<T>(h);
            let down = f(&work)?.to_f64_lossy();
            work[p].data_mut()[e] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::Numerical(format!(
                    "finite_diff_check: non-finite evaluation at parameter {} entry {}",
                    p, e
                )));
            }
            let g_fd = (up - down) / (2.0 * h);
            let g_ad = analytic[p].data()[e].to_f64_lossy();
            let err = (g_ad - g_fd).abs() / f64::max(1e-8, g_ad.abs() + g_fd.abs());
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_sum_is_ones() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        let loss = tape.sum(x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(x, &tape).data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_hadamard_product_rule() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Matrix::from_rows(&[vec![1.0, 2.0]])).unwrap();
        let b = tape.leaf(Matrix::from_rows(&[vec![5.0, -3.0]])).unwrap();
        let prod = tape.hadamard(a, b).unwrap();
        let loss = tape.sum(prod).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(a, &tape).data(), &[5.0, -3.0]);
        assert_eq!(grads.of(b, &tape).data(), &[1.0, 2.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Matrix::scalar(1.0)).unwrap();
        let b = tape.leaf(Matrix::scalar(2.0)).unwrap();
        let loss = tape.sum(a).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(b, &tape).data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Matrix::zeros(2, 2)).unwrap();
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn leaky_relu_values() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Matrix::from_rows(&[vec![-2.0, 3.0, 0.0]])).unwrap();
        let y = tape.leaky_relu(x, 0.1).unwrap();
        assert_eq!(tape.value(y).data(), &[-0.2, 3.0, 0.0]);
        let id = tape.leaky_relu(x, 1.0).unwrap();
        assert_eq!(tape.value(id).data(), &[-2.0, 3.0, 0.0]);
        let relu = tape.leaky_relu(x, 0.0).unwrap();
        assert_eq!(tape.value(relu).data(), &[0.0, 3.0, 0.0]);
    }

    #[test]
    fn masked_softmax_columns() {
        let mut tape = Tape::<f64>::new();
        // Column 0: single masked-in entry -> 1.0. Column 1: two entries,
        // z = 0 -> 0.5 each. Column 2: all-zero mask -> zero column.
        let z = tape
            .constant(Matrix::from_rows(&[
                vec![7.0, 0.0, 1.0],
                vec![2.0, 0.0, 1.0],
                vec![1.0, 5.0, 1.0],
            ]))
            .unwrap();
        let mask = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let s = tape.masked_col_softmax(z, &mask).unwrap();
        let v = tape.value(s);
        assert_eq!(v.get(1, 0), 1.0);
        assert_eq!(v.get(0, 0), 0.0);
        assert!((v.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((v.get(1, 1) - 0.5).abs() < 1e-15);
        assert_eq!(v.col(2), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn masked_softmax_ln2_weights() {
        let mut tape = Tape::<f64>::new();
        let z = tape
            .constant(Matrix::from_rows(&[vec![2.0f64.ln()], vec![0.0]]))
            .unwrap();
        let mask = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let s = tape.masked_col_softmax(z, &mask).unwrap();
        let v = tape.value(s);
        assert!((v.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_columns_sum_to_one_or_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m = rng.gen_range(1..6);
            let mut tape = Tape::<f64>::new();
            let z = {
                let mut z = Matrix::zeros(m, m);
                for e in 0..z.len() {
                    z.data_mut()[e] = rng.gen_range(-4.0..4.0);
                }
                tape.constant(z).unwrap()
            };
            let mut mask = Matrix::zeros(m, m);
            for e in 0..mask.len() {
                mask.data_mut()[e] = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            }
            let s = tape.masked_col_softmax(z, &mask).unwrap();
            let v = tape.value(s);
            for c in 0..m {
                let masked: f64 = (0..m).map(|r| mask.get(r, c)).sum();
                let total: f64 = (0..m).map(|r| v.get(r, c)).sum();
                if masked == 0.0 {
                    assert_eq!(total, 0.0);
                } else {
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn finite_diff_quadratic() {
        // f(x) = x^T x, gradient 2x.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Matrix::zeros(4, 1);
        for e in 0..4 {
            x.data_mut()[e] = rng.gen_range(-1.0..1.0);
        }
        let f = |params: &[Matrix<f64>]| -> Result<f64> {
            let mut tape = Tape::new();
            let v = tape.leaf(params[0].clone())?;
            let sq = tape.hadamard(v, v)?;
            let loss = tape.sum(sq)?;
            Ok(tape.value(loss).get(0, 0))
        };
        let analytic = x.scale(2.0);
        let err = finite_diff_check(&f, &[x], &[analytic], 1e-5).unwrap();
        assert!(err <= 1e-7, "error {err}");
    }

    #[test]
    fn finite_diff_constant_function() {
        let x = Matrix::<f64>::zeros(3, 1);
        let f = |_: &[Matrix<f64>]| -> Result<f64> { Ok(5.0) };
        let zeros = x.clone();
        let err = finite_diff_check(&f, &[x], &[zeros], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn per_op_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // One scalar objective that routes through every differentiable op;
        // softmax inputs drawn away from mask boundaries.
        for trial in 0..5 {
            let m = 3 + trial % 2;
            let mut a = Matrix::zeros(m, m);
            let mut b = Matrix::zeros(m, m);
            for e in 0..a.len() {
                a.data_mut()[e] = rng.gen_range(-1.0..1.0);
                b.data_mut()[e] = rng.gen_range(-1.0..1.0);
            }
            let mut mask = Matrix::zeros(m, m);
            for c in 0..m {
                for r in 0..m {
                    if r != c {
                        mask.set(r, c, 1.0);
                    }
                }
            }
            let maskc = mask.clone();
            let f = move |params: &[Matrix<f64>]| -> Result<f64> {
                let mut tape = Tape::new();
                let a = tape.leaf(params[0].clone())?;
                let b = tape.leaf(params[1].clone())?;
                let prod = tape.matmul(a, b)?;
                let t = tape.transpose(prod)?;
                let act = tape.leaky_relu(t, 0.1)?;
                let sig = tape.logistic(act)?;
                let mix = tape.hadamard(sig, b)?;
                let sm = tape.masked_col_softmax(mix, &maskc)?;
                let plus = tape.add(sm, a)?;
                let minus = tape.sub(plus, b)?;
                let rs = tape.row_sum(minus)?;
                let cat = tape.concat_rows(&[rs])?;
                let sc1 = tape.scale(cat, 1.5)?;
                let sq = tape.hadamard(sc1, sc1)?;
                let loss = tape.sum(sq)?;
                Ok(tape.value(loss).get(0, 0))
            };
            let (analytic_a, analytic_b) = {
                let mut tape = Tape::new();
                let av = tape.leaf(a.clone()).unwrap();
                let bv = tape.leaf(b.clone()).unwrap();
                let prod = tape.matmul(av, bv).unwrap();
                let t = tape.transpose(prod).unwrap();
                let act = tape.leaky_relu(t, 0.1).unwrap();
                let sig = tape.logistic(act).unwrap();
                let mix = tape.hadamard(sig, bv).unwrap();
                let sm = tape.masked_col_softmax(mix, &mask).unwrap();
                let plus = tape.add(sm, av).unwrap();
                let minus = tape.sub(plus, bv).unwrap();
                let rs = tape.row_sum(minus).unwrap();
                let cat = tape.concat_rows(&[rs]).unwrap();
                let sc1 = tape.scale(cat, 1.5).unwrap();
                let sq = tape.hadamard(sc1, sc1).unwrap();
                let loss = tape.sum(sq).unwrap();
                let grads = tape.backward(loss).unwrap();
                (grads.of(av, &tape), grads.of(bv, &tape))
            };
            let err = finite_diff_check(&f, &[a, b], &[analytic_a, analytic_b], 1e-6).unwrap();
            assert!(err <= 1e-4, "trial {trial}: error {err}");
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        for &(kind, y) in &[(0usize, 1.0f64), (0, -1.0), (1, 0.0), (2, 0.7)] {
            let x0 = Matrix::from_rows(&[vec![0.3], vec![-0.8], vec![0.1]]);
            let f = move |params: &[Matrix<f64>]| -> Result<f64> {
                let mut tape = Tape::new();
                let x = tape.leaf(params[0].clone())?;
                let loss = match kind {
                    0 => {
                        let s = tape.sum(x)?;
                        tape.logistic_loss(s, y)?
                    }
                    1 => tape.cross_entropy(x, 1)?,
                    _ => {
                        let s = tape.sum(x)?;
                        tape.squared_error(s, y)?
                    }
                };
                Ok(tape.value(loss).get(0, 0))
            };
            let analytic = {
                let mut tape = Tape::new();
                let x = tape.leaf(x0.clone()).unwrap();
                let loss = match kind {
                    0 => {
                        let s = tape.sum(x).unwrap();
                        tape.logistic_loss(s, y).unwrap()
                    }
                    1 => tape.cross_entropy(x, 1).unwrap(),
                    _ => {
                        let s = tape.sum(x).unwrap();
                        tape.squared_error(s, y).unwrap()
                    }
                };
                let grads = tape.backward(loss).unwrap();
                grads.of(x, &tape)
            };
            let err = finite_diff_check(&f, &[x0], &[analytic], 1e-6).unwrap();
            assert!(err <= 1e-6, "kind {kind}: error {err}");
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let mut tape = Tape::<f64>::new();
            let a = tape.leaf(Matrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.7]])).unwrap();
            let b = tape.leaf(Matrix::from_rows(&[vec![1.1, 0.2], vec![-0.4, 0.9]])).unwrap();
            let p = tape.matmul(a, b).unwrap();
            let q = tape.leaky_relu(p, 0.1).unwrap();
            let loss = tape.sum(q).unwrap();
            let grads = tape.backward(loss).unwrap();
            (
                tape.value(loss).get(0, 0),
                grads.of(a, &tape).data().to_vec(),
            )
        };
        let (l1, g1) = run();
        let (l2, g2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1.len(), g2.len());
        for (x, y) in g1.iter().zip(g2.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_non_finite_at_op_boundary() {
        let mut tape = Tape::<f64>::new();
        assert!(tape.leaf(Matrix::scalar(f64::NAN)).is_err());
        let x = tape.leaf(Matrix::scalar(1e308)).unwrap();
        assert!(tape.hadamard(x, x).is_err());
    }
}
