//! Dynamic reverse-mode tape over dense matrices.
//!
//! Every value on the tape is a row-major `rows x cols` matrix; vectors are
//! `1 x n` (row) or `n x 1` (column). A fresh tape is built per forward pass.
//! Parameters are bound lazily with [`Tape::param`] so that a parameter used
//! in many places shares a single node and its adjoint is accumulated there.

use std::collections::HashMap;

use super::activation;
use super::tensor::{ParamId, ParamStore};
use crate::error::{CgflError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
pub enum Unary {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Exp,
    Log,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulScalar(Var, Var),
    Unary(Var, Unary),
    SoftmaxCols(Var),
    LogSoftmaxCols(Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    MeanRows(Var),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.adjoints.get(v.0).and_then(|a| a.as_deref())
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            grad_enabled: true,
        }
    }

    /// A tape on which parameters enter as constants. Used for stop-gradient
    /// evaluations; calling [`Tape::backward`] on it is an error.
    pub fn detached() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn is_detached(&self) -> bool {
        !self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        debug_assert!(
            value.iter().all(|v| v.is_finite()),
            "non-finite value produced by {op:?}"
        );
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Which side of zero every rectifier input lies on, in tape order. Two
    /// evaluations with equal patterns sit on the same linear piece.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Unary(a, Unary::Relu | Unary::LeakyRelu(_)) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.nodes[a.0].value.iter().map(|&x| x > 0.0))
            .collect()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// The value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.shape(v), (1, 1));
        self.nodes[v.0].value[0]
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len(), "constant shape mismatch");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn row(&mut self, value: &[f64]) -> Var {
        self.constant(1, value.len(), value.to_vec())
    }

    pub fn column(&mut self, value: &[f64]) -> Var {
        self.constant(value.len(), 1, value.to_vec())
    }

    pub fn scalar_const(&mut self, value: f64) -> Var {
        self.constant(1, 1, vec![value])
    }

    /// Copies the value of `v` into a new leaf that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let (r, c) = self.shape(v);
        let value = self.value(v).to_vec();
        self.constant(r, c, value)
    }

    /// Binds a parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let (r, c) = t.dims2();
        let op = if self.grad_enabled && t.requires_grad {
            Op::Param
        } else {
            Op::Leaf
        };
        let v = self.push(r, c, t.data().to_vec(), op);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimensions {m}x{k} * {k2}x{n}");
        let out = matmul_raw(self.value(a), self.value(b), m, k, n);
        self.push(m, n, out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = transpose_raw(self.value(a), r, c);
        self.push(c, r, out, Op::Transpose(a))
    }

    fn binary_same(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let sa = self.shape(a);
        assert_eq!(sa, self.shape(b), "elementwise shape mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(sa.0, sa.1, out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the `1 x cols` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let (rows, cols) = self.shape(a);
        assert_eq!(self.shape(r), (1, cols), "add_row expects a 1x{cols} row");
        let rv = self.value(r);
        let out = self
            .value(a)
            .chunks(cols)
            .flat_map(|row| row.iter().zip(rv).map(|(x, y)| x + y))
            .collect();
        self.push(rows, cols, out, Op::AddRow(a, r))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| x * k).collect();
        self.push(r, c, out, Op::Scale(a, k))
    }

    /// Multiplies every entry of `a` by the `1 x 1` node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let (r, c) = self.shape(a);
        let k = self.scalar(s);
        let out = self.value(a).iter().map(|x| x * k).collect();
        self.push(r, c, out, Op::MulScalar(a, s))
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Var {
        let (r, c) = self.shape(a);
        let out = self
            .value(a)
            .iter()
            .map(|&x| match f {
                Unary::Relu => activation::relu(x),
                Unary::LeakyRelu(s) => activation::leaky_relu(x, s),
                Unary::Tanh => x.tanh(),
                Unary::Sigmoid => activation::sigmoid(x),
                Unary::Exp => x.exp(),
                Unary::Log => x.ln(),
            })
            .collect();
        self.push(r, c, out, Op::Unary(a, f))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, Unary::LeakyRelu(slope))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Log)
    }

    /// Softmax down each column. A column vector gets an ordinary softmax.
    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let x = self.value(a);
        let mut out = vec![0.0; r * c];
        for j in 0..c {
            let col: Vec<f64> = (0..r).map(|i| x[i * c + j]).collect();
            let s = activation::softmax_unchecked(&col);
            for i in 0..r {
                out[i * c + j] = s[i];
            }
        }
        self.push(r, c, out, Op::SoftmaxCols(a))
    }

    pub fn log_softmax_cols(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let x = self.value(a);
        let mut out = vec![0.0; r * c];
        for j in 0..c {
            let col: Vec<f64> = (0..r).map(|i| x[i * c + j]).collect();
            let lse = activation::log_sum_exp(&col);
            for i in 0..r {
                out[i * c + j] = col[i] - lse;
            }
        }
        self.push(r, c, out, Op::LogSoftmaxCols(a))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let (r, c) = self.shape(a);
        let x = self.value(a);
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            assert!(i < r, "gather index {i} out of {r} rows");
            out.extend_from_slice(&x[i * c..(i + 1) * c]);
        }
        self.push(idx.len(), c, out, Op::GatherRows(a, idx.to_vec()))
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let c = self.shape(parts[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (pr, pc) = self.shape(p);
            assert_eq!(pc, c, "concat_rows column mismatch");
            rows += pr;
            out.extend_from_slice(self.value(p));
        }
        self.push(rows, c, out, Op::ConcatRows(parts.to_vec()))
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let r = self.shape(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pr, pc) = self.shape(p);
                assert_eq!(pr, r, "concat_cols row mismatch");
                pc
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; r * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let x = self.value(p);
            for i in 0..r {
                out[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&x[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        self.push(r, total, out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(r * c, rows * cols, "reshape size mismatch");
        let out = self.value(a).to_vec();
        self.push(rows, cols, out, Op::Reshape(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let x = self.value(a);
        let mut out = vec![0.0; c];
        for row in x.chunks(c) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        self.push(1, c, out, Op::MeanRows(a))
    }

    /// Squared Euclidean distance between two same-shape nodes.
    pub fn sq_dist(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let d2 = self.mul(d, d);
        self.sum(d2)
    }

    /// Reverse sweep from a `1 x 1` loss. Every trainable parameter in
    /// `store` gets its gradient overwritten: `dloss/dparam` when the
    /// parameter was bound on this tape, zero otherwise.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let grads = self.gradients(loss)?;
        store.zero_grads();
        for (&id, &v) in &self.params {
            if let Some(adj) = grads.get(v) {
                let t = store.get_mut(id);
                if t.requires_grad {
                    t.set_grad(adj.to_vec())?;
                }
            }
        }
        Ok(grads)
    }

    /// Computes adjoints of every node with respect to `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        if !self.grad_enabled {
            return Err(CgflError::invalid("backward called on a detached tape"));
        }
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(CgflError::invalid(format!(
                "backward needs a scalar loss, got a {r}x{c} value"
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = cols;
                // dA = G * B^T, dB = A^T * G
                let bt = transpose_raw(self.value(*b), k, n);
                let da = matmul_raw(g, &bt, m, n, k);
                let at = transpose_raw(self.value(*a), m, k);
                let db = matmul_raw(&at, g, k, m, n);
                accumulate(adj, *a, &da);
                accumulate(adj, *b, &db);
            }
            Op::Transpose(a) => {
                let ga = transpose_raw(g, rows, cols);
                accumulate(adj, *a, &ga);
            }
            Op::Add(a, b) => {
                accumulate(adj, *a, g);
                accumulate(adj, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                accumulate(adj, *b, &neg);
            }
            Op::Mul(a, b) => {
                let ga: Vec<f64> = g.iter().zip(self.value(*b)).map(|(x, y)| x * y).collect();
                let gb: Vec<f64> = g.iter().zip(self.value(*a)).map(|(x, y)| x * y).collect();
                accumulate(adj, *a, &ga);
                accumulate(adj, *b, &gb);
            }
            Op::AddRow(a, r) => {
                accumulate(adj, *a, g);
                let mut gr = vec![0.0; cols];
                for row in g.chunks(cols) {
                    for (o, v) in gr.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                accumulate(adj, *r, &gr);
            }
            Op::Scale(a, k) => {
                let ga: Vec<f64> = g.iter().map(|x| x * k).collect();
                accumulate(adj, *a, &ga);
            }
            Op::MulScalar(a, s) => {
                let k = self.scalar(*s);
                let ga: Vec<f64> = g.iter().map(|x| x * k).collect();
                let gs: f64 = g.iter().zip(self.value(*a)).map(|(x, y)| x * y).sum();
                accumulate(adj, *a, &ga);
                accumulate(adj, *s, &[gs]);
            }
            Op::Unary(a, f) => {
                let x = self.value(*a);
                let y = &node.value;
                let ga: Vec<f64> = g
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(gi, (&xi, &yi))| {
                        gi * match f {
                            Unary::Relu => {
                                if xi > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::LeakyRelu(s) => {
                                if xi > 0.0 {
                                    1.0
                                } else {
                                    *s
                                }
                            }
                            Unary::Tanh => 1.0 - yi * yi,
                            Unary::Sigmoid => yi * (1.0 - yi),
                            Unary::Exp => yi,
                            Unary::Log => 1.0 / xi,
                        }
                    })
                    .collect();
                accumulate(adj, *a, &ga);
            }
            Op::SoftmaxCols(a) => {
                let y = &node.value;
                let mut ga = vec![0.0; rows * cols];
                for j in 0..cols {
                    let dot: f64 = (0..rows).map(|i| g[i * cols + j] * y[i * cols + j]).sum();
                    for i in 0..rows {
                        let k = i * cols + j;
                        ga[k] = y[k] * (g[k] - dot);
                    }
                }
                accumulate(adj, *a, &ga);
            }
            Op::LogSoftmaxCols(a) => {
                let y = &node.value;
                let mut ga = vec![0.0; rows * cols];
                for j in 0..cols {
                    let gsum: f64 = (0..rows).map(|i| g[i * cols + j]).sum();
                    for i in 0..rows {
                        let k = i * cols + j;
                        ga[k] = g[k] - y[k].exp() * gsum;
                    }
                }
                accumulate(adj, *a, &ga);
            }
            Op::GatherRows(a, idx) => {
                let (ar, _) = self.shape(*a);
                let mut ga = vec![0.0; ar * cols];
                for (out_row, &src) in idx.iter().enumerate() {
                    for j in 0..cols {
                        ga[src * cols + j] += g[out_row * cols + j];
                    }
                }
                accumulate(adj, *a, &ga);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    accumulate(adj, p, &g[offset..offset + len]);
                    offset += len;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    let mut gp = Vec::with_capacity(rows * w);
                    for i in 0..rows {
                        gp.extend_from_slice(&g[i * cols + offset..i * cols + offset + w]);
                    }
                    accumulate(adj, p, &gp);
                    offset += w;
                }
            }
            Op::Reshape(a) => accumulate(adj, *a, g),
            Op::Sum(a) => {
                let n = self.value(*a).len();
                accumulate(adj, *a, &vec![g[0]; n]);
            }
            Op::MeanRows(a) => {
                let (ar, _) = self.shape(*a);
                let scale = 1.0 / ar as f64;
                let row: Vec<f64> = g.iter().map(|x| x * scale).collect();
                let ga: Vec<f64> = (0..ar).flat_map(|_| row.iter().copied()).collect();
                accumulate(adj, *a, &ga);
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}
