//! Define-by-run reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Tape`] owns every value produced during one forward pass. Ops append
//! nodes in topological order; [`Tape::backward`] walks them in exact reverse
//! order and accumulates gradients additively. Every forward op checks its
//! output for non-finite values and fails instead of propagating `inf`/`NaN`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward already ran on this tape; call reset_grads first")]
    BackwardTwice,
    #[error("tensor data has {actual} values, shape {shape:?} needs {expected}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Row-major dense array.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.data)
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(AutodiffError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the last dimension (1 for scalars).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Number of rows when viewed as `[len / last_dim, last_dim]`.
    pub fn rows(&self) -> usize {
        self.len() / self.last_dim().max(1)
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Copies rows `[start, end)` of a 2-D tensor.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor {
        let w = self.last_dim();
        Tensor {
            shape: vec![end - start, w],
            data: self.data[start * w..end * w].to_vec(),
        }
    }

    /// Gathers the given rows of a 2-D tensor.
    pub fn gather_rows(&self, rows: &[usize]) -> Tensor {
        let w = self.last_dim();
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            data.extend_from_slice(&self.data[r * w..(r + 1) * w]);
        }
        Tensor {
            shape: vec![rows.len(), w],
            data,
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    ZeroMask(Var, usize, usize),
    Mean(Var),
    Sum(Var),
    Exp(Var),
    Ln(Var),
    Neg(Var),
    Softplus(Var),
    Recip(Var),
    ClampMax(Var, f64),
    LogSoftmax(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    is_param: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AutodiffError::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(AutodiffError::ShapeMismatch {
            op,
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
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

/// `out[m x n] += a[m x k] * b[k x n]`
fn gemm_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            is_param: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.0].is_param = true;
        v
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Copies `v` into a constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.node(v).value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).needs_grad
    }

    fn binary_same(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        same_shape(op_name, ta, tb)?;
        let data: Vec<f64> = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        check_finite(op_name, &data)?;
        let shape = ta.shape.clone();
        let needs = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape, data }, op, needs))
    }

    fn unary(&mut self, op_name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ta = &self.node(a).value;
        let data: Vec<f64> = ta.data.iter().map(|&x| f(x)).collect();
        check_finite(op_name, &data)?;
        let shape = ta.shape.clone();
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor { shape, data }, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    /// Adds a 1-D `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(bias).value);
        if tb.shape.len() != 1 || ta.last_dim() != tb.shape[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row",
                left: ta.shape.clone(),
                right: tb.shape.clone(),
            });
        }
        let w = tb.shape[0];
        let data: Vec<f64> = ta.data.iter().enumerate().map(|(i, &x)| x + tb.data[i % w]).collect();
        check_finite("add_row", &data)?;
        let shape = ta.shape.clone();
        let needs = self.any_grad(&[a, bias]);
        Ok(self.push(Tensor { shape, data }, Op::AddRow(a, bias), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("scale", a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("add_scalar", a, |x| x + c, Op::AddScalar(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        if ta.shape.len() != 2 || tb.shape.len() != 2 || ta.shape[1] != tb.shape[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: ta.shape.clone(),
                right: tb.shape.clone(),
            });
        }
        let (m, k, n) = (ta.shape[0], ta.shape[1], tb.shape[1]);
        let mut data = vec![0.0; m * n];
        gemm_nn(&ta.data, &tb.data, &mut data, m, k, n);
        check_finite("matmul", &data)?;
        let needs = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape: vec![m, n], data }, Op::MatMul(a, b), needs))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary("ln", a, f64::ln, Op::Ln(a))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary("neg", a, |x| -x, Op::Neg(a))
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary("softplus", a, softplus, Op::Softplus(a))
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        self.unary("recip", a, |x| 1.0 / x, Op::Recip(a))
    }

    /// `min(a, c)` elementwise; gradient passes only where `a < c`.
    pub fn clamp_max(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("clamp_max", a, |x| x.min(c), Op::ClampMax(a, c))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: f64 = self.node(a).value.data.iter().sum();
        check_finite("sum", &[s])?;
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::Sum(a), needs))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = &self.node(a).value;
        if t.is_empty() {
            return Err(AutodiffError::InvalidArgument {
                op: "mean",
                msg: "empty tensor".into(),
            });
        }
        let s = t.data.iter().sum::<f64>() / t.len() as f64;
        check_finite("mean", &[s])?;
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::Mean(a), needs))
    }

    /// Concatenates along the last dimension; leading dimensions must agree.
    pub fn concat_last_dim(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(AutodiffError::InvalidArgument {
            op: "concat_last_dim",
            msg: "no inputs".into(),
        })?;
        let lead = self.node(*first).value.shape[..self.node(*first).value.shape.len().saturating_sub(1)].to_vec();
        let rows = self.node(*first).value.rows();
        let mut width = 0;
        for p in parts {
            let t = &self.node(*p).value;
            if t.shape.len() != lead.len() + 1 || t.shape[..lead.len()] != lead[..] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_last_dim",
                    left: self.node(*first).value.shape.clone(),
                    right: t.shape.clone(),
                });
            }
            width += t.last_dim();
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for p in parts {
                let t = &self.node(*p).value;
                let w = t.last_dim();
                data.extend_from_slice(&t.data[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(width);
        let needs = self.any_grad(parts);
        Ok(self.push(Tensor { shape, data }, Op::Concat(parts.to_vec()), needs))
    }

    fn check_range(&self, op: &'static str, a: Var, start: usize, end: usize) -> Result<()> {
        let w = self.node(a).value.last_dim();
        if start >= end || end > w {
            return Err(AutodiffError::InvalidArgument {
                op,
                msg: format!("range {start}..{end} invalid for last dimension {w}"),
            });
        }
        Ok(())
    }

    /// Columns `[start, end)` of the last dimension.
    pub fn slice_last_dim(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.check_range("slice_last_dim", a, start, end)?;
        let t = &self.node(a).value;
        let w = t.last_dim();
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.data[r * w + start..r * w + end]);
        }
        let mut shape = t.shape.clone();
        *shape.last_mut().unwrap() = end - start;
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor { shape, data }, Op::Slice(a, start, end), needs))
    }

    /// Copy of `a` with columns `[start, end)` of the last dimension zeroed.
    pub fn zero_mask_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.check_range("zero_mask_slice", a, start, end)?;
        let t = &self.node(a).value;
        let w = t.last_dim();
        let mut data = t.data.clone();
        for r in 0..t.rows() {
            data[r * w + start..r * w + end].iter_mut().for_each(|v| *v = 0.0);
        }
        let shape = t.shape.clone();
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor { shape, data }, Op::ZeroMask(a, start, end), needs))
    }

    /// Log-softmax over the last dimension, max-shifted.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let t = &self.node(a).value;
        let w = t.last_dim();
        if t.shape.is_empty() || w < 2 {
            return Err(AutodiffError::InvalidArgument {
                op: "log_softmax",
                msg: format!("last dimension must be >= 2, shape {:?}", t.shape),
            });
        }
        check_finite("log_softmax", &t.data)?;
        let mut data = vec![0.0; t.len()];
        for r in 0..t.rows() {
            let row = &t.data[r * w..(r + 1) * w];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            for (o, &x) in data[r * w..(r + 1) * w].iter_mut().zip(row) {
                *o = x - lse;
            }
        }
        check_finite("log_softmax", &data)?;
        let shape = t.shape.clone();
        let needs = self.any_grad(&[a]);
        Ok(self.push(Tensor { shape, data }, Op::LogSoftmax(a), needs))
    }

    /// Mean over rows of `-log_softmax(logits)[label]`.
    pub fn cross_entropy_from_logits(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = &self.node(logits).value;
        let classes = t.last_dim();
        if t.rows() != labels.len() {
            return Err(AutodiffError::InvalidArgument {
                op: "cross_entropy_from_logits",
                msg: format!("{} rows but {} labels", t.rows(), labels.len()),
            });
        }
        let mut onehot = Tensor::zeros(t.shape.clone());
        for (r, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(AutodiffError::InvalidArgument {
                    op: "cross_entropy_from_logits",
                    msg: format!("label {y} out of range for {classes} classes"),
                });
            }
            onehot.data[r * classes + y] = 1.0;
        }
        let rows = labels.len() as f64;
        let lsm = self.log_softmax(logits)?;
        let mask = self.constant(onehot);
        let picked = self.mul(lsm, mask)?;
        let total = self.sum(picked)?;
        self.scale(total, -1.0 / rows)
    }

    /// Mean over rows of `KL(softmax(p) || softmax(q))`.
    pub fn kl_from_logits(&mut self, p_logits: Var, q_logits: Var) -> Result<Var> {
        same_shape("kl_from_logits", &self.node(p_logits).value, &self.node(q_logits).value)?;
        let rows = self.node(p_logits).value.rows() as f64;
        let lp = self.log_softmax(p_logits)?;
        let lq = self.log_softmax(q_logits)?;
        let p = self.exp(lp)?;
        let diff = self.sub(lp, lq)?;
        let terms = self.mul(p, diff)?;
        let total = self.sum(terms)?;
        self.scale(total, 1.0 / rows)
    }

    /// Populates gradients for every node reachable from `root`.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(AutodiffError::BackwardTwice);
        }
        let rv = &self.node(root).value;
        if rv.len() != 1 || !rv.shape.iter().all(|&d| d == 1) {
            return Err(AutodiffError::NotScalar(rv.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_param && grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.value.len()]);
            }
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    /// Clears gradients so `backward` may run again.
    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Gradient of the last backward root with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &self.nodes[idx].value;
        match self.nodes[idx].op.clone() {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(x, &d)| *x += d));
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d));
                self.accumulate(grads, bias, |gb| {
                    let w = gb.len();
                    for (i, &d) in g.iter().enumerate() {
                        gb[i % w] += d;
                    }
                });
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(x, &d)| *x -= d));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value.data, &self.nodes[b.0].value.data);
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * vb[i];
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * va[i];
                    }
                });
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x += c * d));
            }
            Op::AddScalar(a) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d));
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.shape[0], ta.shape[1], tb.shape[1]);
                // dA = G * B^T
                self.accumulate(grads, a, |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &tb.data[p * n..(p + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                // dB = A^T * G
                self.accumulate(grads, b, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ta.data[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (x, &d) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *x += av * d;
                            }
                        }
                    }
                });
            }
            Op::Relu(a) => {
                let va = &self.nodes[a.0].value.data;
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        if va[i] > 0.0 {
                            ga[i] += g[i];
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let rows = out.rows();
                let mut offset = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.last_dim();
                    let total = out.last_dim();
                    self.accumulate(grads, p, |gp| {
                        for r in 0..rows {
                            for j in 0..w {
                                gp[r * w + j] += g[r * total + offset + j];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Slice(a, start, end) => {
                let w = self.nodes[a.0].value.last_dim();
                let sw = end - start;
                self.accumulate(grads, a, |ga| {
                    for r in 0..out.rows() {
                        for j in 0..sw {
                            ga[r * w + start + j] += g[r * sw + j];
                        }
                    }
                });
            }
            Op::ZeroMask(a, start, end) => {
                let w = out.last_dim();
                self.accumulate(grads, a, |ga| {
                    for (i, x) in ga.iter_mut().enumerate() {
                        let col = i % w;
                        if col < start || col >= end {
                            *x += g[i];
                        }
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len() as f64;
                self.accumulate(grads, a, |ga| ga.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::Sum(a) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().for_each(|x| *x += g[0]));
            }
            Op::Exp(a) => {
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * out.data[i];
                    }
                });
            }
            Op::Ln(a) => {
                let va = &self.nodes[a.0].value.data;
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] / va[i];
                    }
                });
            }
            Op::Neg(a) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(x, &d)| *x -= d));
            }
            Op::Softplus(a) => {
                let va = &self.nodes[a.0].value.data;
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * sigmoid(va[i]);
                    }
                });
            }
            Op::Recip(a) => {
                let va = &self.nodes[a.0].value.data;
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] -= g[i] / (va[i] * va[i]);
                    }
                });
            }
            Op::ClampMax(a, c) => {
                let va = &self.nodes[a.0].value.data;
                self.accumulate(grads, a, |ga| {
                    for i in 0..ga.len() {
                        if va[i] < c {
                            ga[i] += g[i];
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let w = out.last_dim();
                self.accumulate(grads, a, |ga| {
                    for r in 0..out.rows() {
                        let gs: f64 = g[r * w..(r + 1) * w].iter().sum();
                        for j in 0..w {
                            let i = r * w + j;
                            ga[i] += g[i] - out.data[i].exp() * gs;
                        }
                    }
                });
            }
        }
    }
}
