//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every forward operation in topological order; a single
//! backward sweep accumulates gradients for all recorded nodes. Tapes are
//! confined to one thread and rebuilt every optimiser step.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// [m x n] + [1 x n], bias broadcast over rows.
    AddBias(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Abs(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>, usize),
    /// Per-segment softmax of a [m x 1] score column.
    SegmentSoftmax(Var, Vec<usize>, usize),
    /// Softmax of a [1 x n] row restricted to the mask; entries outside are 0.
    MaskedSoftmax(Var, Vec<usize>),
    /// Rows of the first input scaled by the [m x 1] second input.
    ScaleRows(Var, Var),
    /// [m x n] -> [m x 1] row sums.
    RowSum(Var),
    SumAll(Var),
    MeanAll(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by one backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `var`; zeros if the node did not
    /// contribute to the loss.
    pub fn get(&self, var: Var, like: &Tensor) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(like.rows(), like.cols()),
        }
    }

    pub fn try_get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Record an input tensor (parameter or data); no gradient flows past it.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        check_finite("matmul", &out)?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data().iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::from_rows_unchecked(ta.rows(), ta.cols(), data);
        check_finite(op_name, &out)?;
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a` is [m x n], `bias` is [1 x n]; the bias row is added to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || ta.cols() != tb.cols() {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for r in 0..ta.rows() {
            for c in 0..cols {
                data[r * cols + c] += tb.data()[c];
            }
        }
        let out = Tensor::from_rows_unchecked(ta.rows(), cols, data);
        check_finite("add_bias", &out)?;
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * s);
        check_finite("scale", &out)?;
        Ok(self.push(out, Op::Scale(a, s)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let out = self.value(a).map(|x| if x >= 0.0 { x } else { slope * x });
        check_finite("leaky_relu", &out)?;
        Ok(self.push(out, Op::LeakyRelu(a, slope)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        check_finite("sigmoid", &out)?;
        Ok(self.push(out, Op::Sigmoid(a)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        check_finite("tanh", &out)?;
        Ok(self.push(out, Op::Tanh(a)))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::abs);
        check_finite("abs", &out)?;
        Ok(self.push(out, Op::Abs(a)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x * x);
        check_finite("square", &out)?;
        Ok(self.push(out, Op::Square(a)))
    }

    /// Concatenate tensors with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty(), "concat_cols needs at least one input");
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.value(parts[0]).shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::from_rows_unchecked(rows, cols, data);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Stack tensors with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty(), "concat_rows needs at least one input");
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.value(parts[0]).shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_rows_unchecked(rows, cols, data);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Select rows `idx` of `a` (duplicates allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let cols = t.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            if i >= t.rows() {
                return Err(Error::SegmentOutOfRange { id: i, n: t.rows() });
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::from_rows_unchecked(idx.len(), cols, data);
        Ok(self.push(out, Op::GatherRows(a, idx.to_vec())))
    }

    /// Row `j` of the output is the sum of all rows of `a` whose segment id is
    /// `j`; empty segments are zero rows.
    pub fn segment_sum(&mut self, a: Var, segment_ids: &[usize], n_segments: usize) -> Result<Var> {
        let t = self.value(a);
        if segment_ids.len() != t.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_sum",
                lhs: t.shape().to_vec(),
                rhs: vec![segment_ids.len()],
            });
        }
        let cols = t.cols();
        let mut out = Tensor::zeros(n_segments, cols);
        for (r, &s) in segment_ids.iter().enumerate() {
            if s >= n_segments {
                return Err(Error::SegmentOutOfRange { id: s, n: n_segments });
            }
            for c in 0..cols {
                let v = out.get(s, c) + t.get(r, c);
                out.set(s, c, v);
            }
        }
        check_finite("segment_sum", &out)?;
        Ok(self.push(
            out,
            Op::SegmentSum(a, segment_ids.to_vec(), n_segments),
        ))
    }

    /// Softmax of a [m x 1] score column, normalised independently within each
    /// segment. Max-subtraction per segment for overflow safety.
    pub fn segment_softmax(
        &mut self,
        scores: Var,
        segment_ids: &[usize],
        n_segments: usize,
    ) -> Result<Var> {
        let t = self.value(scores);
        if t.cols() != 1 || segment_ids.len() != t.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_softmax",
                lhs: t.shape().to_vec(),
                rhs: vec![segment_ids.len(), 1],
            });
        }
        for &s in segment_ids {
            if s >= n_segments {
                return Err(Error::SegmentOutOfRange { id: s, n: n_segments });
            }
        }
        let mut seg_max = vec![f64::NEG_INFINITY; n_segments];
        for (r, &s) in segment_ids.iter().enumerate() {
            seg_max[s] = seg_max[s].max(t.data()[r]);
        }
        let mut exp = vec![0.0; t.rows()];
        let mut seg_sum = vec![0.0; n_segments];
        for (r, &s) in segment_ids.iter().enumerate() {
            exp[r] = (t.data()[r] - seg_max[s]).exp();
            seg_sum[s] += exp[r];
        }
        for (r, &s) in segment_ids.iter().enumerate() {
            exp[r] /= seg_sum[s];
        }
        let out = Tensor::from_rows_unchecked(t.rows(), 1, exp);
        check_finite("segment_softmax", &out)?;
        Ok(self.push(
            out,
            Op::SegmentSoftmax(scores, segment_ids.to_vec(), n_segments),
        ))
    }

    /// Softmax of a [1 x n] score row restricted to `mask`; entries outside
    /// the mask are exactly zero and the masked entries sum to one.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[usize]) -> Result<Var> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        let t = self.value(scores);
        if t.rows() != 1 {
            return Err(Error::ShapeMismatch {
                op: "masked_softmax",
                lhs: t.shape().to_vec(),
                rhs: vec![1, t.cols()],
            });
        }
        for &i in mask {
            if i >= t.cols() {
                return Err(Error::SegmentOutOfRange { id: i, n: t.cols() });
            }
        }
        let max = mask
            .iter()
            .map(|&i| t.data()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; t.cols()];
        let mut sum = 0.0;
        for &i in mask {
            out[i] = (t.data()[i] - max).exp();
            sum += out[i];
        }
        for &i in mask {
            out[i] /= sum;
        }
        let out = Tensor::from_rows_unchecked(1, t.cols(), out);
        check_finite("masked_softmax", &out)?;
        Ok(self.push(out, Op::MaskedSoftmax(scores, mask.to_vec())))
    }

    /// Scale each row of `a` [m x n] by the matching entry of `coeffs` [m x 1].
    pub fn scale_rows(&mut self, a: Var, coeffs: Var) -> Result<Var> {
        let (ta, tc) = (self.value(a), self.value(coeffs));
        if tc.cols() != 1 || tc.rows() != ta.rows() {
            return Err(Error::ShapeMismatch {
                op: "scale_rows",
                lhs: ta.shape().to_vec(),
                rhs: tc.shape().to_vec(),
            });
        }
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for r in 0..ta.rows() {
            let s = tc.data()[r];
            for c in 0..cols {
                data[r * cols + c] *= s;
            }
        }
        let out = Tensor::from_rows_unchecked(ta.rows(), cols, data);
        check_finite("scale_rows", &out)?;
        Ok(self.push(out, Op::ScaleRows(a, coeffs)))
    }

    /// [m x n] -> [m x 1] sums along each row.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let data = (0..t.rows())
            .map(|r| t.row_slice(r).iter().sum())
            .collect();
        let out = Tensor::from_rows_unchecked(t.rows(), 1, data);
        check_finite("row_sum", &out)?;
        Ok(self.push(out, Op::RowSum(a)))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s: f64 = self.value(a).data().iter().sum();
        if !s.is_finite() {
            return Err(Error::NonFinite { op: "sum_all" });
        }
        Ok(self.push(Tensor::scalar(s), Op::SumAll(a)))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = t.len().max(1) as f64;
        let s: f64 = t.data().iter().sum::<f64>() / n;
        if !s.is_finite() {
            return Err(Error::NonFinite { op: "mean_all" });
        }
        Ok(self.push(Tensor::scalar(s), Op::MeanAll(a)))
    }

    /// Reverse sweep from a scalar loss. Returns gradients for every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: lt.shape().to_vec(),
                rhs: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            if !g.is_finite() {
                return Err(Error::NonFinite { op: "backward" });
            }
            self.accumulate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
        match &mut grads[v.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn accumulate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = g.matmul(&tb.transpose())?;
                let db = ta.transpose().matmul(g)?;
                self.acc(grads, *a, da);
                self.acc(grads, *b, db);
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = zip_mul(g, tb);
                let db = zip_mul(g, ta);
                self.acc(grads, *a, da);
                self.acc(grads, *b, db);
            }
            Op::AddBias(a, bias) => {
                self.acc(grads, *a, g.clone());
                let cols = g.cols();
                let mut db = Tensor::zeros(1, cols);
                for r in 0..g.rows() {
                    for c in 0..cols {
                        let v = db.get(0, c) + g.get(r, c);
                        db.set(0, c, v);
                    }
                }
                self.acc(grads, *bias, db);
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.acc(grads, *a, g.map(|x| x * s));
            }
            Op::LeakyRelu(a, slope) => {
                let ta = self.value(*a);
                let slope = *slope;
                let da = zip_with(g, ta, |gv, x| if x >= 0.0 { gv } else { slope * gv });
                self.acc(grads, *a, da);
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[i].value;
                let da = zip_with(g, y, |gv, yv| gv * yv * (1.0 - yv));
                self.acc(grads, *a, da);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[i].value;
                let da = zip_with(g, y, |gv, yv| gv * (1.0 - yv * yv));
                self.acc(grads, *a, da);
            }
            Op::Abs(a) => {
                let ta = self.value(*a);
                let da = zip_with(g, ta, |gv, x| {
                    if x > 0.0 {
                        gv
                    } else if x < 0.0 {
                        -gv
                    } else {
                        0.0
                    }
                });
                self.acc(grads, *a, da);
            }
            Op::Square(a) => {
                let ta = self.value(*a);
                let da = zip_with(g, ta, |gv, x| 2.0 * x * gv);
                self.acc(grads, *a, da);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let t = self.value(p);
                    let cols = t.cols();
                    let mut dp = Tensor::zeros(t.rows(), cols);
                    for r in 0..t.rows() {
                        for c in 0..cols {
                            dp.set(r, c, g.get(r, offset + c));
                        }
                    }
                    offset += cols;
                    self.acc(grads, p, dp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let t = self.value(p);
                    let mut dp = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        for c in 0..t.cols() {
                            dp.set(r, c, g.get(offset + r, c));
                        }
                    }
                    offset += t.rows();
                    self.acc(grads, p, dp);
                }
            }
            Op::GatherRows(a, idx) => {
                let ta = self.value(*a);
                let cols = ta.cols();
                let mut da = Tensor::zeros(ta.rows(), cols);
                for (r, &src) in idx.iter().enumerate() {
                    for c in 0..cols {
                        let v = da.get(src, c) + g.get(r, c);
                        da.set(src, c, v);
                    }
                }
                self.acc(grads, *a, da);
            }
            Op::SegmentSum(a, ids, _n) => {
                let ta = self.value(*a);
                let cols = ta.cols();
                let mut da = Tensor::zeros(ta.rows(), cols);
                for (r, &s) in ids.iter().enumerate() {
                    for c in 0..cols {
                        da.set(r, c, g.get(s, c));
                    }
                }
                self.acc(grads, *a, da);
            }
            Op::SegmentSoftmax(scores, ids, n) => {
                let w = &self.nodes[i].value;
                // ds_r = w_r * (g_r - sum_{j in seg} w_j g_j)
                let mut seg_dot = vec![0.0; *n];
                for (r, &s) in ids.iter().enumerate() {
                    seg_dot[s] += w.data()[r] * g.data()[r];
                }
                let data = ids
                    .iter()
                    .enumerate()
                    .map(|(r, &s)| w.data()[r] * (g.data()[r] - seg_dot[s]))
                    .collect();
                let da = Tensor::from_rows_unchecked(w.rows(), 1, data);
                self.acc(grads, *scores, da);
            }
            Op::MaskedSoftmax(scores, mask) => {
                let w = &self.nodes[i].value;
                let dot: f64 = mask.iter().map(|&j| w.data()[j] * g.data()[j]).sum();
                let mut data = vec![0.0; w.cols()];
                for &j in mask {
                    data[j] = w.data()[j] * (g.data()[j] - dot);
                }
                let da = Tensor::from_rows_unchecked(1, w.cols(), data);
                self.acc(grads, *scores, da);
            }
            Op::ScaleRows(a, coeffs) => {
                let (ta, tc) = (self.value(*a), self.value(*coeffs));
                let cols = ta.cols();
                let mut da = Tensor::zeros(ta.rows(), cols);
                let mut dc = Tensor::zeros(ta.rows(), 1);
                for r in 0..ta.rows() {
                    let s = tc.data()[r];
                    let mut dot = 0.0;
                    for c in 0..cols {
                        da.set(r, c, s * g.get(r, c));
                        dot += ta.get(r, c) * g.get(r, c);
                    }
                    dc.set(r, 0, dot);
                }
                self.acc(grads, *a, da);
                self.acc(grads, *coeffs, dc);
            }
            Op::RowSum(a) => {
                let ta = self.value(*a);
                let cols = ta.cols();
                let mut da = Tensor::zeros(ta.rows(), cols);
                for r in 0..ta.rows() {
                    for c in 0..cols {
                        da.set(r, c, g.get(r, 0));
                    }
                }
                self.acc(grads, *a, da);
            }
            Op::SumAll(a) => {
                let ta = self.value(*a);
                let gv = g.item();
                self.acc(grads, *a, ta.map(|_| gv));
            }
            Op::MeanAll(a) => {
                let ta = self.value(*a);
                let gv = g.item() / ta.len().max(1) as f64;
                self.acc(grads, *a, ta.map(|_| gv));
            }
        }
        Ok(())
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_rows_unchecked(a.rows(), a.cols(), data)
}

fn zip_mul(a: &Tensor, b: &Tensor) -> Tensor {
    zip_with(a, b, |x, y| x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_forward_examples() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(1, 2, &[1.0, 2.0]));
        let b = tape.leaf(t(2, 1, &[3.0, 4.0]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).item(), 11.0);
    }

    #[test]
    fn matmul_backward_all_ones_sensitivity() {
        // d sum(A*B) / dA with B = [[1],[1]] is all ones.
        let mut tape = Tape::new();
        let a = tape.leaf(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(t(2, 1, &[1.0, 1.0]));
        let c = tape.matmul(a, b).unwrap();
        let loss = tape.sum_all(c).unwrap();
        let grads = tape.backward(loss).unwrap();
        let da = grads.try_get(a).unwrap();
        assert_eq!(da.data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn masked_softmax_uniform() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(1, 3, &[0.0, 0.0, 0.0]));
        let w = tape.masked_softmax(s, &[0, 1, 2]).unwrap();
        for &v in tape.value(w).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_softmax_ln2_gap() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(1, 2, &[0.0, 2.0f64.ln()]));
        let w = tape.masked_softmax(s, &[0, 1]).unwrap();
        let v = tape.value(w);
        assert!((v.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((v.data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn masked_softmax_single_element_mask() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(1, 3, &[5.0, 9.0, 2.0]));
        let w = tape.masked_softmax(s, &[0]).unwrap();
        assert_eq!(tape.value(w).data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn masked_softmax_empty_mask_errors() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(1, 3, &[0.0, 0.0, 0.0]));
        assert!(matches!(tape.masked_softmax(s, &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn masked_softmax_sums_to_one() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(1, 5, &[123.0, -55.0, 3.0, 700.0, 699.0]));
        let w = tape.masked_softmax(s, &[1, 3, 4]).unwrap();
        let v = tape.value(w);
        assert_eq!(v.data()[0], 0.0);
        assert_eq!(v.data()[2], 0.0);
        let sum: f64 = v.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(v.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn segment_sum_examples() {
        let mut tape = Tape::new();
        let v = tape.leaf(t(3, 1, &[1.0, 2.0, 3.0]));
        let s = tape.segment_sum(v, &[0, 0, 0], 1).unwrap();
        assert_eq!(tape.value(s).data(), &[6.0]);

        let v2 = tape.leaf(t(2, 1, &[1.0, 2.0]));
        let s2 = tape.segment_sum(v2, &[1, 1], 3).unwrap();
        assert_eq!(tape.value(s2).data(), &[0.0, 3.0, 0.0]);

        let empty = tape.leaf(Tensor::zeros(0, 1));
        let s3 = tape.segment_sum(empty, &[], 2).unwrap();
        assert_eq!(tape.value(s3).data(), &[0.0, 0.0]);
    }

    #[test]
    fn segment_sum_out_of_range() {
        let mut tape = Tape::new();
        let v = tape.leaf(t(1, 1, &[1.0]));
        assert!(matches!(
            tape.segment_sum(v, &[2], 2),
            Err(Error::SegmentOutOfRange { id: 2, n: 2 })
        ));
    }

    #[test]
    fn segment_softmax_normalises_per_segment() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(4, 1, &[1.0, 2.0, -1.0, 500.0]));
        let w = tape.segment_softmax(s, &[0, 0, 1, 1], 2).unwrap();
        let v = tape.value(w);
        assert!((v.data()[0] + v.data()[1] - 1.0).abs() < 1e-12);
        assert!((v.data()[2] + v.data()[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut tape = Tape::new();
            let a = tape.leaf(t(2, 2, &[0.3, -1.7, 2.9, 0.01]));
            let b = tape.leaf(t(2, 2, &[1.5, 0.2, -0.8, 0.9]));
            let c = tape.matmul(a, b).unwrap();
            let d = tape.sigmoid(c).unwrap();
            let l = tape.mean_all(d).unwrap();
            tape.value(l).item()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}

