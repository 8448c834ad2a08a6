//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] owns every intermediate value produced during a forward pass.
//! Operations append nodes whose inputs are always earlier nodes, so a single
//! reverse sweep over the node list visits each node exactly once in a valid
//! topological order.

use std::collections::HashMap;

use super::tensor::{numel, Parameterized, Tensor, TensorId};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias { x: Var, bias: Var },
    Scale { x: Var, factor: f64 },
    MulScalar { x: Var, s: Var },
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Transpose { x: Var, rows: usize, cols: usize },
    Reshape(Var),
    Concat { inputs: Vec<Var>, outer: usize, chunks: Vec<usize> },
    SliceCols { x: Var, start: usize },
    GatherRows { table: Var, indices: Vec<usize> },
    GatherElements { x: Var, indices: Vec<usize> },
    ScatterSum { x: Var, index: Vec<usize> },
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    L2Normalize { x: Var, norms: Vec<f64> },
    MeanPool { x: Var, rows: Vec<usize> },
    LayerNorm { x: Var, gain: Var, bias: Var, normed: Vec<f64>, inv_std: Vec<f64> },
    Gaussian { x: Var, mu: Var, sigma: Var },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul { a, b, .. } | Add(a, b) | Sub(a, b) | Mul(a, b) => vec![*a, *b],
            AddBias { x, bias } => vec![*x, *bias],
            MulScalar { x, s } => vec![*x, *s],
            Scale { x, .. }
            | Transpose { x, .. }
            | SliceCols { x, .. }
            | GatherElements { x, .. }
            | ScatterSum { x, .. }
            | L2Normalize { x, .. }
            | MeanPool { x, .. } => vec![*x],
            Relu(x) | Exp(x) | Log(x) | Sum(x) | Reshape(x) | SoftmaxRows(x)
            | LogSoftmaxRows(x) => vec![*x],
            Concat { inputs, .. } => inputs.clone(),
            GatherRows { table, .. } => vec![*table],
            LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Gaussian { x, mu, sigma } => vec![*x, *mu, *sigma],
        }
    }
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// Norm below which [`Tape::l2_normalize`] refuses to divide.
pub const NORM_EPSILON: f64 = 1e-12;
const LAYER_NORM_EPSILON: f64 = 1e-5;

/// Recorded computation graph for one forward/backward cycle.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<TensorId, Var>,
    leaves: Vec<(TensorId, Var)>,
}

fn last_dim(shape: &[usize]) -> usize {
    shape.last().copied().unwrap_or(1)
}

fn dims2(op: &'static str, shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::Dimension {
            op,
            lhs: shape.to_vec(),
            rhs: vec![],
        }),
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

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let inputs = op.inputs();
        #[cfg(debug_assertions)]
        {
            let finite_in = inputs
                .iter()
                .all(|v| self.nodes[v.0].value.iter().all(|x| x.is_finite()));
            if finite_in {
                debug_assert!(
                    value.iter().all(|x| x.is_finite()),
                    "non-finite output from {op:?} on finite inputs"
                );
            }
        }
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        self.nodes.push(Node {
            shape,
            value,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds a tensor as a leaf. A trainable tensor is bound once per tape;
    /// later calls return the same node so its gradient sums every use.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        if t.requires_grad() {
            if let Some(&v) = self.bound.get(&t.id()) {
                return v;
            }
        }
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            op: Op::Leaf,
            tracked: t.requires_grad(),
        });
        let v = Var(self.nodes.len() - 1);
        if t.requires_grad() {
            self.bound.insert(t.id(), v);
            self.leaves.push((t.id(), v));
        }
        v
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        if numel(&shape) != data.len() {
            return Err(Error::Dimension {
                op: "constant",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        self.nodes.push(Node {
            shape,
            value: data,
            op: Op::Leaf,
            tracked: false,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Snapshot of a node as a detached tensor.
    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape is consistent")
    }

    pub fn scalar_value(&self, v: Var) -> Result<f64> {
        let n = &self.nodes[v.0];
        if n.value.len() != 1 {
            return Err(Error::contract(format!(
                "expected a scalar, got shape {:?}",
                n.shape
            )));
        }
        Ok(n.value[0])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Dimension {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2("matmul", self.shape(a))?;
        let (k2, n) = dims2("matmul", self.shape(b))?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, y) in row.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        Ok(self.push(vec![m, n], out, Op::MatMul { a, b, m, k, n }))
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        mk: impl FnOnce(Var, Var) -> Op,
    ) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, mk(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Adds a vector of length `C` to every row of an `R×C` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let c = last_dim(self.shape(x));
        if self.value(bias).len() != c {
            return Err(Error::Dimension {
                op: "add_bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let bv = self.value(bias);
        let out: Vec<f64> = self
            .value(x)
            .chunks(c)
            .flat_map(|row| row.iter().zip(bv).map(|(a, b)| a + b))
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, out, Op::AddBias { x, bias }))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).iter().map(|v| v * factor).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Scale { x, factor })
    }

    /// Multiplies every element of `x` by the single element of `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::Dimension {
                op: "mul_scalar",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(s).to_vec(),
            });
        }
        let sv = self.value(s)[0];
        let out = self.value(x).iter().map(|v| v * sv).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, out, Op::MulScalar { x, s }))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(x).iter().map(|v| f(*v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.map(x, f64::ln, Op::Log(x))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(vec![], vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len().max(1) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = dims2("transpose", self.shape(x))?;
        let xv = self.value(x);
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j * rows + i] = xv[i * cols + j];
            }
        }
        Ok(self.push(vec![cols, rows], out, Op::Transpose { x, rows, cols }))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != self.value(x).len() {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape,
            });
        }
        let out = self.value(x).to_vec();
        Ok(self.push(shape, out, Op::Reshape(x)))
    }

    /// Concatenates tensors of equal rank along `axis`.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::contract("concat of zero tensors"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Dimension {
                op: "concat",
                lhs: base,
                rhs: vec![axis],
            });
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut total = 0;
        let mut chunks = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::Dimension {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
            chunks.push(s[axis] * inner);
        }
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &c) in inputs.iter().zip(&chunks) {
                out.extend_from_slice(&self.value(v)[o * c..(o + 1) * c]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(self.push(
            shape,
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                chunks,
            },
        ))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = dims2("slice_cols", self.shape(x))?;
        if start + len > cols {
            return Err(Error::Dimension {
                op: "slice_cols",
                lhs: vec![rows, cols],
                rhs: vec![start, len],
            });
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&xv[r * cols + start..r * cols + start + len]);
        }
        Ok(self.push(vec![rows, len], out, Op::SliceCols { x, start }))
    }

    /// Row lookup into a `R×C` table, e.g. an embedding matrix.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = dims2("gather_rows", self.shape(table))?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::contract(format!(
                "gather index {bad} out of range for table with {rows} rows"
            )));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            out.extend_from_slice(&tv[i * cols..(i + 1) * cols]);
        }
        Ok(self.push(
            vec![indices.len(), cols],
            out,
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Picks individual elements by flat index.
    pub fn gather_elements(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let n = self.value(x).len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::contract(format!(
                "element index {bad} out of range for {n} elements"
            )));
        }
        let out = indices.iter().map(|&i| self.value(x)[i]).collect();
        Ok(self.push(
            vec![indices.len()],
            out,
            Op::GatherElements {
                x,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Sums row `e` of `x` into row `index[e]` of an `out_rows×C` result.
    pub fn scatter_sum(&mut self, x: Var, index: &[usize], out_rows: usize) -> Result<Var> {
        let (rows, cols) = dims2("scatter_sum", self.shape(x))?;
        if index.len() != rows {
            return Err(Error::Dimension {
                op: "scatter_sum",
                lhs: vec![rows, cols],
                rhs: vec![index.len()],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= out_rows) {
            return Err(Error::contract(format!(
                "scatter index {bad} out of range for {out_rows} rows"
            )));
        }
        let xv = self.value(x);
        let mut out = vec![0.0; out_rows * cols];
        for (e, &dst) in index.iter().enumerate() {
            for c in 0..cols {
                out[dst * cols + c] += xv[e * cols + c];
            }
        }
        Ok(self.push(
            vec![out_rows, cols],
            out,
            Op::ScatterSum {
                x,
                index: index.to_vec(),
            },
        ))
    }

    /// Softmax over the last axis, stabilized by subtracting the row max.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let c = last_dim(self.shape(x));
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(c) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::SoftmaxRows(x))
    }

    /// Log-softmax over the last axis via log-sum-exp.
    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let c = last_dim(self.shape(x));
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(c) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::LogSoftmaxRows(x))
    }

    /// Scales each last-axis slice to unit Euclidean norm.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let c = last_dim(self.shape(x));
        let mut out = self.value(x).to_vec();
        let mut norms = Vec::with_capacity(out.len() / c.max(1));
        for (r, row) in out.chunks_mut(c).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= NORM_EPSILON {
                return Err(Error::Degenerate(format!(
                    "row {r} has norm {norm:e}, cannot normalize"
                )));
            }
            row.iter_mut().for_each(|v| *v /= norm);
            norms.push(norm);
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, out, Op::L2Normalize { x, norms }))
    }

    /// Mean over the rows of an `N×D` matrix whose mask entry is `true`
    /// (all rows when `mask` is `None`).
    pub fn mean_pool(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (n, d) = dims2("mean_pool", self.shape(x))?;
        let rows: Vec<usize> = match mask {
            Some(m) => {
                if m.len() != n {
                    return Err(Error::Dimension {
                        op: "mean_pool",
                        lhs: vec![n, d],
                        rhs: vec![m.len()],
                    });
                }
                (0..n).filter(|&i| m[i]).collect()
            }
            None => (0..n).collect(),
        };
        if rows.is_empty() {
            return Err(Error::EmptyPool);
        }
        let xv = self.value(x);
        let mut out = vec![0.0; d];
        for &r in &rows {
            for (o, v) in out.iter_mut().zip(&xv[r * d..(r + 1) * d]) {
                *o += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(self.push(vec![d], out, Op::MeanPool { x, rows }))
    }

    /// Per-row layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let c = last_dim(self.shape(x));
        if self.value(gain).len() != c || self.value(bias).len() != c {
            return Err(Error::Dimension {
                op: "layer_norm",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(gain).to_vec(),
            });
        }
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut normed = Vec::with_capacity(xv.len());
        let mut inv_std = Vec::with_capacity(xv.len() / c);
        let mut out = Vec::with_capacity(xv.len());
        for row in xv.chunks(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LAYER_NORM_EPSILON).sqrt();
            inv_std.push(is);
            for (k, v) in row.iter().enumerate() {
                let nv = (v - mean) * is;
                normed.push(nv);
                out.push(nv * g[k] + b[k]);
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            shape,
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
        ))
    }

    /// Gaussian densities of every element of `x` (length `P`) under `K`
    /// kernels, giving a `P×K` matrix with entries
    /// `exp(-(x_p - mu_k)^2 / (2 sigma_k^2)) / (sigma_k sqrt(2 pi))`.
    pub fn gaussian_kernel(&mut self, x: Var, mu: Var, sigma: Var) -> Result<Var> {
        let k = self.value(mu).len();
        if self.value(sigma).len() != k {
            return Err(Error::Dimension {
                op: "gaussian_kernel",
                lhs: self.shape(mu).to_vec(),
                rhs: self.shape(sigma).to_vec(),
            });
        }
        if let Some(s) = self.value(sigma).iter().find(|s| !(**s > 0.0)) {
            return Err(Error::contract(format!(
                "gaussian kernel width must be positive, got {s}"
            )));
        }
        let p = self.value(x).len();
        let (xv, mv, sv) = (self.value(x), self.value(mu), self.value(sigma));
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let mut out = Vec::with_capacity(p * k);
        for &xp in xv {
            for j in 0..k {
                let z = (xp - mv[j]) / sv[j];
                out.push((-0.5 * z * z).exp() / (sv[j] * norm));
            }
        }
        Ok(self.push(vec![p, k], out, Op::Gaussian { x, mu, sigma }))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let n = &self.nodes[loss.0];
        if n.value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                n.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut by_tensor = HashMap::with_capacity(self.leaves.len());
        for &(id, v) in &self.leaves {
            let g = grads[v.0]
                .clone()
                .unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.len()]);
            by_tensor.insert(id, g);
        }
        Ok(Gradients {
            nodes: grads,
            by_tensor,
        })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: Var| self.nodes[v.0].value.as_slice();
        let tracked = |v: Var| self.nodes[v.0].tracked;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].tracked {
                return;
            }
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(buf);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                if tracked(*a) {
                    let bv = val(*b);
                    acc(*a, &mut |da| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                }
                if tracked(*b) {
                    let av = val(*a);
                    acc(*b, &mut |db| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let x = av[i * k + p];
                                if x == 0.0 {
                                    continue;
                                }
                                for (d, y) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *d += x * y;
                                }
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |d| {
                    for j in 0..d.len() {
                        d[j] += g[j] * bv[j];
                    }
                });
                acc(*b, &mut |d| {
                    for j in 0..d.len() {
                        d[j] += g[j] * av[j];
                    }
                });
            }
            Op::AddBias { x, bias } => {
                acc(*x, &mut |d| add_into(d, g));
                acc(*bias, &mut |d| {
                    let c = d.len();
                    for row in g.chunks(c) {
                        add_into(d, row);
                    }
                });
            }
            Op::Scale { x, factor } => {
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g * factor));
            }
            Op::MulScalar { x, s } => {
                let sv = val(*s)[0];
                let xv = val(*x);
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g * sv));
                acc(*s, &mut |d| d[0] += g.iter().zip(xv).map(|(g, x)| g * x).sum::<f64>());
            }
            Op::Relu(x) => {
                let xv = val(*x);
                acc(*x, &mut |d| {
                    for j in 0..d.len() {
                        if xv[j] > 0.0 {
                            d[j] += g[j];
                        }
                    }
                });
            }
            Op::Exp(x) => {
                let y = &node.value;
                acc(*x, &mut |d| {
                    for j in 0..d.len() {
                        d[j] += g[j] * y[j];
                    }
                });
            }
            Op::Log(x) => {
                let xv = val(*x);
                acc(*x, &mut |d| {
                    for j in 0..d.len() {
                        d[j] += g[j] / xv[j];
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Transpose { x, rows, cols } => {
                let (rows, cols) = (*rows, *cols);
                acc(*x, &mut |d| {
                    for i in 0..rows {
                        for j in 0..cols {
                            d[i * cols + j] += g[j * rows + i];
                        }
                    }
                });
            }
            Op::Reshape(x) => acc(*x, &mut |d| add_into(d, g)),
            Op::Concat {
                inputs,
                outer,
                chunks,
            } => {
                let stride: usize = chunks.iter().sum();
                let mut offset = 0;
                for (&v, &c) in inputs.iter().zip(chunks) {
                    acc(v, &mut |d| {
                        for o in 0..*outer {
                            let src = &g[o * stride + offset..o * stride + offset + c];
                            add_into(&mut d[o * c..(o + 1) * c], src);
                        }
                    });
                    offset += c;
                }
            }
            Op::SliceCols { x, start } => {
                let cols = self.nodes[x.0].shape[1];
                let len = node.shape[1];
                acc(*x, &mut |d| {
                    for (r, grow) in g.chunks(len).enumerate() {
                        add_into(&mut d[r * cols + start..r * cols + start + len], grow);
                    }
                });
            }
            Op::GatherRows { table, indices } => {
                let cols = node.shape[1];
                acc(*table, &mut |d| {
                    for (r, &i) in indices.iter().enumerate() {
                        add_into(&mut d[i * cols..(i + 1) * cols], &g[r * cols..(r + 1) * cols]);
                    }
                });
            }
            Op::GatherElements { x, indices } => {
                acc(*x, &mut |d| {
                    for (r, &i) in indices.iter().enumerate() {
                        d[i] += g[r];
                    }
                });
            }
            Op::ScatterSum { x, index } => {
                let cols = node.shape[1];
                acc(*x, &mut |d| {
                    for (e, &dst) in index.iter().enumerate() {
                        add_into(&mut d[e * cols..(e + 1) * cols], &g[dst * cols..(dst + 1) * cols]);
                    }
                });
            }
            Op::SoftmaxRows(x) => {
                let c = last_dim(&node.shape);
                let y = &node.value;
                acc(*x, &mut |d| {
                    for ((drow, yrow), grow) in d.chunks_mut(c).zip(y.chunks(c)).zip(g.chunks(c)) {
                        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            drow[j] += yrow[j] * (grow[j] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmaxRows(x) => {
                let c = last_dim(&node.shape);
                let y = &node.value;
                acc(*x, &mut |d| {
                    for ((drow, yrow), grow) in d.chunks_mut(c).zip(y.chunks(c)).zip(g.chunks(c)) {
                        let gsum: f64 = grow.iter().sum();
                        for j in 0..c {
                            drow[j] += grow[j] - yrow[j].exp() * gsum;
                        }
                    }
                });
            }
            Op::L2Normalize { x, norms } => {
                let c = last_dim(&node.shape);
                let y = &node.value;
                acc(*x, &mut |d| {
                    for (r, ((drow, yrow), grow)) in
                        d.chunks_mut(c).zip(y.chunks(c)).zip(g.chunks(c)).enumerate()
                    {
                        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            drow[j] += (grow[j] - yrow[j] * dot) / norms[r];
                        }
                    }
                });
            }
            Op::MeanPool { x, rows } => {
                let d_cols = node.shape[0];
                let inv = 1.0 / rows.len() as f64;
                acc(*x, &mut |d| {
                    for &r in rows {
                        for j in 0..d_cols {
                            d[r * d_cols + j] += g[j] * inv;
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            } => {
                let c = last_dim(&node.shape);
                let gv = val(*gain);
                acc(*x, &mut |d| {
                    for (r, drow) in d.chunks_mut(c).enumerate() {
                        let grow = &g[r * c..(r + 1) * c];
                        let nrow = &normed[r * c..(r + 1) * c];
                        let mut sum_dn = 0.0;
                        let mut sum_dn_n = 0.0;
                        for j in 0..c {
                            let dn = grow[j] * gv[j];
                            sum_dn += dn;
                            sum_dn_n += dn * nrow[j];
                        }
                        let cf = c as f64;
                        for j in 0..c {
                            let dn = grow[j] * gv[j];
                            drow[j] += inv_std[r] * (dn - sum_dn / cf - nrow[j] * sum_dn_n / cf);
                        }
                    }
                });
                acc(*gain, &mut |d| {
                    for (grow, nrow) in g.chunks(c).zip(normed.chunks(c)) {
                        for j in 0..c {
                            d[j] += grow[j] * nrow[j];
                        }
                    }
                });
                acc(*bias, &mut |d| {
                    for grow in g.chunks(c) {
                        add_into(d, grow);
                    }
                });
            }
            Op::Gaussian { x, mu, sigma } => {
                let k = node.shape[1];
                let (xv, mv, sv) = (val(*x), val(*mu), val(*sigma));
                let y = &node.value;
                // dG/dx = -G (x - mu) / sigma^2 and dG/dmu = -dG/dx.
                let mut dx = vec![0.0; xv.len()];
                let mut dmu = vec![0.0; k];
                let mut dsigma = vec![0.0; k];
                for (p, &xp) in xv.iter().enumerate() {
                    for j in 0..k {
                        let gy = g[p * k + j] * y[p * k + j];
                        let diff = xp - mv[j];
                        let s2 = sv[j] * sv[j];
                        dx[p] -= gy * diff / s2;
                        dmu[j] += gy * diff / s2;
                        dsigma[j] += gy * (diff * diff / (s2 * sv[j]) - 1.0 / sv[j]);
                    }
                }
                acc(*x, &mut |d| add_into(d, &dx));
                acc(*mu, &mut |d| add_into(d, &dmu));
                acc(*sigma, &mut |d| add_into(d, &dsigma));
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Result of [`Tape::backward`]: gradients of every tracked node plus a
/// per-tensor view of the bound parameters.
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    by_tensor: HashMap<TensorId, Vec<f64>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node, if the node lies on a
    /// tracked path.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn for_tensor(&self, t: &Tensor) -> Option<&[f64]> {
        self.by_tensor.get(&t.id()).map(|g| g.as_slice())
    }

    /// Adds this pass's gradient into `t.grad`. Returns `false` if `t` was
    /// never bound on the tape.
    pub fn accumulate_into(&self, t: &mut Tensor) -> Result<bool> {
        match self.by_tensor.get(&t.id()) {
            Some(g) => {
                t.accumulate_grad(g)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Accumulates into every parameter of `model` that was bound on the tape.
    pub fn accumulate(&self, model: &mut dyn Parameterized) -> Result<()> {
        let mut res = Ok(());
        model.visit_params_mut(&mut |_, t| {
            if res.is_ok() {
                if let Err(e) = self.accumulate_into(t) {
                    res = Err(e);
                }
            }
        });
        res
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matmul_identity_and_dot() {
        let mut t = Tape::new();
        let i = t.constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = t.constant(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = t.matmul(i, b).unwrap();
        assert_eq!(t.value(c), &[5.0, 6.0, 7.0, 8.0]);

        let r = t.constant(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let col = t.constant(vec![2, 1], vec![3.0, 4.0]).unwrap();
        let d = t.matmul(r, col).unwrap();
        assert_eq!(t.shape(d), &[1, 1]);
        assert_eq!(t.value(d), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let b = t.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn softmax_closed_forms() {
        let mut t = Tape::new();
        let x = t
            .constant(vec![3, 2], vec![0.0, 0.0, 1000.0, 1000.0, 0.0, 3f64.ln()])
            .unwrap();
        let y = t.softmax_rows(x);
        assert!(close(t.value(y), &[0.5, 0.5, 0.5, 0.5, 0.25, 0.75], 1e-12));
    }

    #[test]
    fn l2_normalize_cases() {
        let mut t = Tape::new();
        let x = t.constant(vec![2], vec![3.0, 4.0]).unwrap();
        let y = t.l2_normalize(x).unwrap();
        assert!(close(t.value(y), &[0.6, 0.8], 1e-12));
        let yy = t.l2_normalize(y).unwrap();
        assert!(close(t.value(yy), t.value(y), 1e-12));

        let z = t.constant(vec![2], vec![2e-13, 0.0]).unwrap();
        assert!(matches!(t.l2_normalize(z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mean_pool_cases() {
        let mut t = Tape::new();
        let x = t.constant(vec![2, 2], vec![1.0, 3.0, 3.0, 5.0]).unwrap();
        let p = t.mean_pool(x, None).unwrap();
        assert_eq!(t.value(p), &[2.0, 4.0]);

        let one = t.constant(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let p = t.mean_pool(one, None).unwrap();
        assert_eq!(t.value(p), &[1.0, 2.0, 3.0]);

        let m = t.constant(vec![2, 2], vec![1.0, 1.0, 5.0, 5.0]).unwrap();
        let p = t.mean_pool(m, Some(&[true, false])).unwrap();
        assert_eq!(t.value(p), &[1.0, 1.0]);
        assert!(matches!(
            t.mean_pool(m, Some(&[false, false])),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn backward_square_sum() {
        let x = Tensor::param(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut t = Tape::new();
        let xv = t.leaf(&x);
        let sq = t.mul(xv, xv).unwrap();
        let loss = t.sum(sq);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.for_tensor(&x).unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_without_path_gives_zero_grad() {
        let mut x = Tensor::param(vec![2], vec![1.0, 2.0]).unwrap();
        let mut t = Tape::new();
        let _xv = t.leaf(&x);
        let c = t.constant(vec![], vec![7.0]).unwrap();
        let loss = t.scale(c, 2.0);
        let g = t.backward(loss).unwrap();
        assert!(g.accumulate_into(&mut x).unwrap());
        assert_eq!(x.grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.constant(vec![2], vec![1.0, 2.0]).unwrap();
        let y = t.scale(x, 2.0);
        assert!(matches!(t.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut x = Tensor::param(vec![1], vec![3.0]).unwrap();
        let mut t = Tape::new();
        let xv = t.leaf(&x);
        let y = t.mul(xv, xv).unwrap();
        let loss = t.sum(y);
        for _ in 0..2 {
            t.backward(loss).unwrap().accumulate_into(&mut x).unwrap();
        }
        assert_eq!(x.grad().unwrap(), &[12.0]);
    }

    #[test]
    fn shared_subexpression_matches_expanded() {
        // y = (x + x) * x has dy/dx = 4x, same as 2x^2.
        let x = Tensor::param(vec![3], vec![0.5, -1.5, 2.0]).unwrap();
        let mut t = Tape::new();
        let xv = t.leaf(&x);
        let s = t.add(xv, xv).unwrap();
        let y = t.mul(s, xv).unwrap();
        let loss = t.sum(y);
        let g = t.backward(loss).unwrap();
        assert!(close(g.for_tensor(&x).unwrap(), &[2.0, -6.0, 8.0], 1e-15));
    }

    #[test]
    fn param_bound_once_per_tape() {
        let w = Tensor::param(vec![2], vec![1.0, 1.0]).unwrap();
        let mut t = Tape::new();
        let a = t.leaf(&w);
        let b = t.leaf(&w);
        assert_eq!(a, b);
        let c = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        let ca = t.leaf(&c);
        let cb = t.leaf(&c);
        assert_ne!(ca, cb);
    }

    #[test]
    fn concat_and_slice_shapes() {
        let mut t = Tape::new();
        let a = t.constant(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let b = t.constant(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.shape(c), &[2, 3]);
        assert_eq!(t.value(c), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let s = t.slice_cols(c, 1, 2).unwrap();
        assert_eq!(t.value(s), t.value(b));
        let r = t.concat(&[b, b], 0).unwrap();
        assert_eq!(t.shape(r), &[4, 2]);
    }

    #[test]
    fn gaussian_kernel_rejects_nonpositive_width() {
        let mut t = Tape::new();
        let x = t.constant(vec![1], vec![1.0]).unwrap();
        let mu = t.constant(vec![1], vec![0.0]).unwrap();
        let s = t.constant(vec![1], vec![0.0]).unwrap();
        assert!(matches!(t.gaussian_kernel(x, mu, s), Err(Error::Contract(_))));
    }
}
