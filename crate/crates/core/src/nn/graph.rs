use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::tensor::{matmul_at_into, matmul_bt_into, matmul_into};
use super::{ParamId, ParamStore, Real, Tensor};
use crate::features::SparseVector;
use crate::{Error, Result};

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Value<T> {
    Owned(Tensor<T>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Scale(NodeId, T),
    MulConst(NodeId, Tensor<T>),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Gelu(NodeId),
    Blend { new: NodeId, old: NodeId, keep_new: Vec<T> },
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize),
    GatherRows(NodeId, Vec<usize>),
    GatherElems(NodeId, Vec<usize>),
    MaskedSoftmax(NodeId, Vec<bool>),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Tensor<T>, inv_std: Vec<T> },
    MaxOver { inputs: Vec<NodeId>, argmax: Vec<usize> },
    SoftmaxCrossEntropy { logits: NodeId, targets: Vec<usize>, probs: Tensor<T> },
    SparseMatMul { rows: Vec<Vec<(usize, T)>>, w: NodeId },
    Sum(NodeId),
}

#[derive(Debug)]
struct Node<T> {
    value: Value<T>,
    op: Op<T>,
}

/// Parameter and node gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub(crate) params: Vec<Option<Tensor<T>>>,
    nodes: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a non-parameter node. Parameter nodes report through
    /// [`Gradients::param`].
    pub fn node(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }
}

/// Operation tape over rank-2 tensors. Parameter values are read from the
/// borrowed store without copying.
pub struct Graph<'s, T> {
    store: &'s ParamStore<T>,
    nodes: Vec<Node<T>>,
}

fn shape_err(msg: alloc::string::String) -> Error {
    Error::ShapeMismatch(msg)
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

// tanh approximation of GELU
fn gelu_parts<T: Real>(x: T) -> (T, T) {
    let c = T::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let a = T::from_f64(0.044_715);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let y = half * x * (T::one() + t);
    let dy = half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * a * x * x);
    (y, dy)
}

impl<'s, T: Real> Graph<'s, T> {
    pub fn new(store: &'s ParamStore<T>) -> Graph<'s, T> {
        Graph { store, nodes: Vec::new() }
    }

    pub fn store(&self) -> &'s ParamStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        match &self.nodes[id.0].value {
            Value::Owned(t) => t,
            Value::Param(p) => self.store.value(*p),
        }
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> T {
        self.value(id).data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value: Value::Owned(value), op });
        NodeId(self.nodes.len() - 1)
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        let v = self.value(id);
        (v.rows(), v.cols())
    }

    /// A constant (non-differentiated w.r.t. any parameter) input.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        let v = if value.shape().len() == 2 { value } else { Tensor::from_raw(value.rows(), value.cols(), value.into_data()) };
        self.push(v, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node { value: Value::Param(id), op: Op::Param(id) });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let ((r, k), (k2, c)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(shape_err(format!("matmul {r}x{k} by {k2}x{c}")));
        }
        let mut out = vec![T::zero(); r * c];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, r, k, c);
        Ok(self.push(Tensor::from_raw(r, c, out), Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).transpose();
        self.push(t, Op::Transpose(a))
    }

    fn zip_same(&mut self, a: NodeId, b: NodeId, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(shape_err(format!("{what} {da:?} vs {db:?}")));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_raw(da.0, da.1, data))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let t = self.zip_same(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let ((r, c), (br, bc)) = (self.dims(a), self.dims(row));
        if br != 1 || bc != c {
            return Err(shape_err(format!("add_row {r}x{c} with {br}x{bc}")));
        }
        let b = self.value(row).data();
        let data = self.value(a).data().chunks(c).flat_map(|x| x.iter().zip(b).map(|(&x, &y)| x + y)).collect();
        Ok(self.push(Tensor::from_raw(r, c, data), Op::AddRow(a, row)))
    }

    /// Scales row `i` of `a` by `col[i]` (`col` is `r x 1`).
    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        let ((r, c), (cr, cc)) = (self.dims(a), self.dims(col));
        if cc != 1 || cr != r {
            return Err(shape_err(format!("mul_col {r}x{c} with {cr}x{cc}")));
        }
        let s = self.value(col).data();
        let data = self.value(a).data().chunks(c).zip(s).flat_map(|(x, &k)| x.iter().map(move |&v| v * k)).collect();
        Ok(self.push(Tensor::from_raw(r, c, data), Op::MulCol(a, col)))
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        let t = self.value(a).map(|v| v * factor);
        self.push(t, Op::Scale(a, factor))
    }

    /// Element-wise product with a constant tensor.
    pub fn mul_const(&mut self, a: NodeId, c: Tensor<T>) -> Result<NodeId> {
        let (r, cols) = self.dims(a);
        if c.len() != r * cols {
            return Err(shape_err(format!("mul_const {r}x{cols} with {} values", c.len())));
        }
        let data = self.value(a).data().iter().zip(c.data()).map(|(&x, &y)| x * y).collect();
        Ok(self.push(Tensor::from_raw(r, cols, data), Op::MulConst(a, c)))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(Float::tanh);
        self.push(t, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(t, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(|v| gelu_parts(v).0);
        self.push(t, Op::Gelu(a))
    }

    /// Row-wise `m * new + (1 - m) * old` with a 0/1 mask per row.
    pub fn blend(&mut self, new: NodeId, old: NodeId, keep_new: &[bool]) -> Result<NodeId> {
        let (dn, dold) = (self.dims(new), self.dims(old));
        if dn != dold || keep_new.len() != dn.0 {
            return Err(shape_err(format!("blend {dn:?} vs {dold:?} with {} mask rows", keep_new.len())));
        }
        let c = dn.1;
        let mut data = Vec::with_capacity(dn.0 * c);
        for (i, &k) in keep_new.iter().enumerate() {
            let src = if k { self.value(new) } else { self.value(old) };
            data.extend_from_slice(src.row(i));
        }
        let keep_new = keep_new.iter().map(|&k| if k { T::one() } else { T::zero() }).collect();
        Ok(self.push(Tensor::from_raw(dn.0, c, data), Op::Blend { new, old, keep_new }))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = parts.first().map(|&p| self.dims(p).0).ok_or_else(|| shape_err("concat of nothing".into()))?;
        if parts.iter().any(|&p| self.dims(p).0 != rows) {
            return Err(shape_err("concat_cols row counts differ".into()));
        }
        let total: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Tensor::from_raw(rows, total, data), Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (r, c) = self.dims(a);
        if start + len > c || len == 0 {
            return Err(shape_err(format!("slice_cols [{start}, {}) of {c}", start + len)));
        }
        let v = self.value(a);
        let data = (0..r).flat_map(|i| v.row(i)[start..start + len].iter().copied()).collect();
        Ok(self.push(Tensor::from_raw(r, len, data), Op::SliceCols(a, start)))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let cols = parts.first().map(|&p| self.dims(p).1).ok_or_else(|| shape_err("concat of nothing".into()))?;
        if parts.iter().any(|&p| self.dims(p).1 != cols) {
            return Err(shape_err("concat_rows column counts differ".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rows = data.len() / cols;
        Ok(self.push(Tensor::from_raw(rows, cols, data), Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (r, c) = self.dims(a);
        if start + len > r || len == 0 {
            return Err(shape_err(format!("slice_rows [{start}, {}) of {r}", start + len)));
        }
        let data = self.value(a).data()[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::from_raw(len, c, data), Op::SliceRows(a, start)))
    }

    /// Row lookup (embedding gather); repeated indices allowed.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let (r, c) = self.dims(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= r) {
            return Err(shape_err(format!("row {bad} out of {r}")));
        }
        let v = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(v.row(i));
        }
        Ok(self.push(Tensor::from_raw(indices.len(), c, data), Op::GatherRows(table, indices.to_vec())))
    }

    /// Builds a `rows x cols` matrix whose entries are flat-indexed elements of `src`.
    pub fn gather_elems(&mut self, src: NodeId, indices: &[usize], rows: usize, cols: usize) -> Result<NodeId> {
        let n = self.value(src).len();
        if indices.len() != rows * cols || indices.iter().any(|&i| i >= n) {
            return Err(shape_err("gather_elems index table".into()));
        }
        let v = self.value(src).data();
        let data = indices.iter().map(|&i| v[i]).collect();
        Ok(self.push(Tensor::from_raw(rows, cols, data), Op::GatherElems(src, indices.to_vec())))
    }

    /// Row-wise softmax over unmasked entries (`mask[i*c + j]` true = keep).
    /// Masked entries get probability zero. Every row needs one kept entry.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &[bool]) -> Result<NodeId> {
        let (r, c) = self.dims(a);
        if mask.len() != r * c {
            return Err(shape_err(format!("mask of {} for {r}x{c}", mask.len())));
        }
        let v = self.value(a);
        let mut data = vec![T::zero(); r * c];
        for i in 0..r {
            let row = v.row(i);
            let keep = &mask[i * c..(i + 1) * c];
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .fold(None, |m: Option<T>, x| Some(m.map_or(x, |m| m.max(x))))
                .ok_or(Error::AllKeysMasked)?;
            let mut sum = T::zero();
            for j in 0..c {
                if keep[j] {
                    let e = (row[j] - max).exp();
                    data[i * c + j] = e;
                    sum += e;
                }
            }
            for x in &mut data[i * c..(i + 1) * c] {
                *x /= sum;
            }
        }
        Ok(self.push(Tensor::from_raw(r, c, data), Op::MaskedSoftmax(a, mask.to_vec())))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims(a);
        self.masked_softmax(a, &vec![true; r * c])
    }

    /// Row-wise `(x - mean) / sqrt(var + eps) * gamma + beta` with population variance.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let (r, c) = self.dims(x);
        if self.dims(gamma) != (1, c) || self.dims(beta) != (1, c) {
            return Err(shape_err(format!("layer_norm over {c} features")));
        }
        let n = T::from_usize(c);
        let eps = T::from_f64(eps);
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![T::zero(); r * c];
        let mut out = vec![T::zero(); r * c];
        let mut inv_std = vec![T::zero(); r];
        for i in 0..r {
            let row = self.value(x).row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..c {
                let h = (row[j] - mean) * inv;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g[j] + b[j];
            }
        }
        let xhat = Tensor::from_raw(r, c, xhat);
        Ok(self.push(Tensor::from_raw(r, c, out), Op::LayerNorm { x, gamma, beta, xhat, inv_std }))
    }

    /// Element-wise max across same-shaped inputs, where `valid[p * rows + i]`
    /// says whether input `p` may win in row `i`. Every row needs one valid input.
    pub fn max_over(&mut self, inputs: &[NodeId], valid: &[bool]) -> Result<NodeId> {
        let (r, c) = inputs.first().map(|&p| self.dims(p)).ok_or(Error::EmptySequence)?;
        if inputs.iter().any(|&p| self.dims(p) != (r, c)) || valid.len() != inputs.len() * r {
            return Err(shape_err("max_over shapes".into()));
        }
        let mut data = vec![T::zero(); r * c];
        let mut argmax = vec![usize::MAX; r * c];
        for (p, &node) in inputs.iter().enumerate() {
            let v = self.value(node).data();
            for i in 0..r {
                if !valid[p * r + i] {
                    continue;
                }
                for j in 0..c {
                    let k = i * c + j;
                    if argmax[k] == usize::MAX || v[k] > data[k] {
                        data[k] = v[k];
                        argmax[k] = p;
                    }
                }
            }
        }
        if argmax.contains(&usize::MAX) {
            return Err(Error::EmptySequence);
        }
        Ok(self.push(Tensor::from_raw(r, c, data), Op::MaxOver { inputs: inputs.to_vec(), argmax }))
    }

    /// Mean negative log-likelihood of `targets` under row softmax of
    /// `logits`. Returns the `1 x 1` loss node.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (r, c) = self.dims(logits);
        if targets.len() != r || r == 0 {
            return Err(shape_err(format!("{} targets for {r} rows", targets.len())));
        }
        if c < 2 {
            return Err(shape_err("softmax needs at least two classes".into()));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::TargetOutOfRange { target: t, classes: c });
        }
        let v = self.value(logits);
        let mut probs = vec![T::zero(); r * c];
        let mut loss = T::zero();
        for i in 0..r {
            let row = v.row(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = row.iter().map(|&x| (x - max).exp()).sum();
            let log_sum = sum.ln();
            for j in 0..c {
                probs[i * c + j] = (row[j] - max).exp() / sum;
            }
            loss += log_sum - (row[targets[i]] - max);
        }
        let loss = loss / T::from_usize(r);
        let probs = Tensor::from_raw(r, c, probs);
        Ok(self.push(
            Tensor::from_raw(1, 1, vec![loss]),
            Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec(), probs },
        ))
    }

    /// Class probabilities saved by a cross-entropy node.
    pub fn cross_entropy_probs(&self, loss: NodeId) -> Option<&Tensor<T>> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Sparse rows times a dense parameter matrix; only `w` receives gradient.
    pub fn sparse_matmul(&mut self, rows: &[SparseVector], w: NodeId) -> Result<NodeId> {
        let (k, c) = self.dims(w);
        if let Some(bad) = rows.iter().find(|r| r.dim() != k) {
            return Err(Error::DimensionMismatch { expected: k, found: bad.dim() });
        }
        let wv = self.value(w).data();
        let mut out = vec![T::zero(); rows.len() * c];
        let mut stored = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let dst = &mut out[i * c..(i + 1) * c];
            let entries: Vec<(usize, T)> = row.iter().map(|(j, v)| (j, T::from_f64(v))).collect();
            for &(j, v) in &entries {
                for (o, &x) in dst.iter_mut().zip(&wv[j * c..(j + 1) * c]) {
                    *o += v * x;
                }
            }
            stored.push(entries);
        }
        Ok(self.push(Tensor::from_raw(rows.len(), c, out), Op::SparseMatMul { rows: stored, w }))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::from_raw(1, 1, vec![s]), Op::Sum(a))
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`. Identity when `rng` is `None` or rate is 0.
    pub fn dropout<R: Rng>(&mut self, a: NodeId, rate: f64, rng: Option<&mut R>) -> Result<NodeId> {
        let Some(rng) = rng else { return Ok(a) };
        if rate <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.dims(a);
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mask = (0..r * c).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect();
        self.mul_const(a, Tensor::from_raw(r, c, mask))
    }

    /// Reverse pass from a `1 x 1` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if self.dims(loss) != (1, 1) {
            return Err(shape_err("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut param_grads: Vec<Option<Tensor<T>>> = (0..self.store.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_raw(1, 1, vec![T::one()]));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if let Op::Param(p) = node.op {
                // Moved, not copied: embedding and input-layer gradients are large.
                match &mut param_grads[p.0] {
                    Some(slot) => slot.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.propagate(&node.op, idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { params: param_grads, nodes: grads })
    }

    fn propagate(
        &self,
        op: &Op<T>,
        idx: usize,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) {
        let out = self.value(NodeId(idx));
        let gd = g.data();
        match op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (r, k, c) = (av.rows(), av.cols(), bv.cols());
                let ga = acc(grads, self, *a);
                matmul_bt_into(gd, bv.data(), ga, r, c, k);
                let gb = acc(grads, self, *b);
                matmul_at_into(av.data(), gd, gb, r, k, c);
            }
            Op::Transpose(a) => {
                let gt = g.transpose();
                add_into(acc(grads, self, *a), gt.data());
            }
            Op::Add(a, b) => {
                add_into(acc(grads, self, *a), gd);
                add_into(acc(grads, self, *b), gd);
            }
            Op::Sub(a, b) => {
                add_into(acc(grads, self, *a), gd);
                for (x, &y) in acc(grads, self, *b).iter_mut().zip(gd) {
                    *x -= y;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                for ((x, &gg), &y) in acc(grads, self, *a).iter_mut().zip(gd).zip(bv) {
                    *x += gg * y;
                }
                for ((x, &gg), &y) in acc(grads, self, *b).iter_mut().zip(gd).zip(av) {
                    *x += gg * y;
                }
            }
            Op::AddRow(a, row) => {
                add_into(acc(grads, self, *a), gd);
                let c = g.cols();
                let gr = acc(grads, self, *row);
                for chunk in gd.chunks(c) {
                    add_into(gr, chunk);
                }
            }
            Op::MulCol(a, col) => {
                let c = g.cols();
                let (av, cv) = (self.value(*a).data(), self.value(*col).data());
                for (i, (x, gg)) in acc(grads, self, *a).chunks_mut(c).zip(gd.chunks(c)).enumerate() {
                    for (x, &gg) in x.iter_mut().zip(gg) {
                        *x += gg * cv[i];
                    }
                }
                let gc = acc(grads, self, *col);
                for (i, (arow, grow)) in av.chunks(c).zip(gd.chunks(c)).enumerate() {
                    gc[i] += arow.iter().zip(grow).map(|(&x, &y)| x * y).sum::<T>();
                }
            }
            Op::Scale(a, f) => {
                for (x, &gg) in acc(grads, self, *a).iter_mut().zip(gd) {
                    *x += gg * *f;
                }
            }
            Op::MulConst(a, m) => {
                for ((x, &gg), &k) in acc(grads, self, *a).iter_mut().zip(gd).zip(m.data()) {
                    *x += gg * k;
                }
            }
            Op::Sigmoid(a) => {
                for ((x, &gg), &y) in acc(grads, self, *a).iter_mut().zip(gd).zip(out.data()) {
                    *x += gg * y * (T::one() - y);
                }
            }
            Op::Tanh(a) => {
                for ((x, &gg), &y) in acc(grads, self, *a).iter_mut().zip(gd).zip(out.data()) {
                    *x += gg * (T::one() - y * y);
                }
            }
            Op::Relu(a) => {
                let inp = self.value(*a).data();
                for ((x, &gg), &v) in acc(grads, self, *a).iter_mut().zip(gd).zip(inp) {
                    if v > T::zero() {
                        *x += gg;
                    }
                }
            }
            Op::Gelu(a) => {
                let inp = self.value(*a).data();
                for ((x, &gg), &v) in acc(grads, self, *a).iter_mut().zip(gd).zip(inp) {
                    *x += gg * gelu_parts(v).1;
                }
            }
            Op::Blend { new, old, keep_new } => {
                let c = g.cols();
                for (i, (x, gg)) in acc(grads, self, *new).chunks_mut(c).zip(gd.chunks(c)).enumerate() {
                    for (x, &gg) in x.iter_mut().zip(gg) {
                        *x += gg * keep_new[i];
                    }
                }
                for (i, (x, gg)) in acc(grads, self, *old).chunks_mut(c).zip(gd.chunks(c)).enumerate() {
                    for (x, &gg) in x.iter_mut().zip(gg) {
                        *x += gg * (T::one() - keep_new[i]);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.dims(p).1;
                    let gp = acc(grads, self, p);
                    for (i, row) in gp.chunks_mut(pc).enumerate() {
                        add_into(row, &gd[i * total + offset..i * total + offset + pc]);
                    }
                    offset += pc;
                }
            }
            Op::SliceCols(a, start) => {
                let ac = self.dims(*a).1;
                let len = g.cols();
                let ga = acc(grads, self, *a);
                for (i, grow) in gd.chunks(len).enumerate() {
                    add_into(&mut ga[i * ac + start..i * ac + start + len], grow);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    add_into(acc(grads, self, p), &gd[offset..offset + n]);
                    offset += n;
                }
            }
            Op::SliceRows(a, start) => {
                let c = g.cols();
                let ga = acc(grads, self, *a);
                add_into(&mut ga[start * c..start * c + gd.len()], gd);
            }
            Op::GatherRows(table, indices) => {
                let c = g.cols();
                let gt = acc(grads, self, *table);
                for (k, &i) in indices.iter().enumerate() {
                    add_into(&mut gt[i * c..(i + 1) * c], &gd[k * c..(k + 1) * c]);
                }
            }
            Op::GatherElems(src, indices) => {
                let gs = acc(grads, self, *src);
                for (&i, &gg) in indices.iter().zip(gd) {
                    gs[i] += gg;
                }
            }
            Op::MaskedSoftmax(a, mask) => {
                let c = g.cols();
                let y = out.data();
                let ga = acc(grads, self, *a);
                for i in 0..g.rows() {
                    let row = i * c..(i + 1) * c;
                    let dot: T = y[row.clone()].iter().zip(&gd[row.clone()]).map(|(&p, &q)| p * q).sum();
                    for j in row {
                        if mask[j] {
                            ga[j] += y[j] * (gd[j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let c = g.cols();
                let n = T::from_usize(c);
                let gamma_v = self.value(*gamma).data();
                {
                    let gg = acc(grads, self, *gamma);
                    for (grow, hrow) in gd.chunks(c).zip(xhat.data().chunks(c)) {
                        for j in 0..c {
                            gg[j] += grow[j] * hrow[j];
                        }
                    }
                }
                {
                    let gb = acc(grads, self, *beta);
                    for grow in gd.chunks(c) {
                        add_into(gb, grow);
                    }
                }
                let gx = acc(grads, self, *x);
                for i in 0..g.rows() {
                    let grow = &gd[i * c..(i + 1) * c];
                    let hrow = &xhat.data()[i * c..(i + 1) * c];
                    let dh: Vec<T> = grow.iter().zip(gamma_v).map(|(&a, &b)| a * b).collect();
                    let mean_dh = dh.iter().copied().sum::<T>() / n;
                    let mean_dh_h = dh.iter().zip(hrow).map(|(&a, &b)| a * b).sum::<T>() / n;
                    for j in 0..c {
                        gx[i * c + j] += inv_std[i] * (dh[j] - mean_dh - hrow[j] * mean_dh_h);
                    }
                }
            }
            Op::MaxOver { inputs, argmax } => {
                for (p, &node) in inputs.iter().enumerate() {
                    if !argmax.contains(&p) {
                        continue;
                    }
                    let gp = acc(grads, self, node);
                    for (k, &w) in argmax.iter().enumerate() {
                        if w == p {
                            gp[k] += gd[k];
                        }
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                let c = probs.cols();
                let scale = gd[0] / T::from_usize(targets.len());
                let gl = acc(grads, self, *logits);
                for (i, &t) in targets.iter().enumerate() {
                    for j in 0..c {
                        let y = if j == t { T::one() } else { T::zero() };
                        gl[i * c + j] += (probs.data()[i * c + j] - y) * scale;
                    }
                }
            }
            Op::SparseMatMul { rows, w } => {
                let c = g.cols();
                let gw = acc(grads, self, *w);
                for (i, entries) in rows.iter().enumerate() {
                    let grow = &gd[i * c..(i + 1) * c];
                    for &(j, v) in entries {
                        for (x, &gg) in gw[j * c..(j + 1) * c].iter_mut().zip(grow) {
                            *x += v * gg;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let s = gd[0];
                for x in acc(grads, self, *a).iter_mut() {
                    *x += s;
                }
            }
        }
    }
}

fn acc<'a, T: Real>(grads: &'a mut [Option<Tensor<T>>], graph: &Graph<'_, T>, id: NodeId) -> &'a mut [T] {
    grads[id.0]
        .get_or_insert_with(|| {
            let v = graph.value(id);
            Tensor::zeros(&[v.rows(), v.cols()])
        })
        .data_mut()
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(r: usize, c: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(r, c, v).unwrap()
    }

    #[test]
    fn symmetric_logits_give_ln2() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(t(1, 2, &[0.0, 0.0]));
        let loss = g.softmax_cross_entropy(x, &[0]).unwrap();
        assert!((g.scalar(loss) - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(g.cross_entropy_probs(loss).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn extreme_logits_are_stable() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(t(1, 2, &[1000.0, -1000.0]));
        let loss = g.softmax_cross_entropy(x, &[0]).unwrap();
        assert!(g.scalar(loss).abs() < 1e-12);
        let grads = g.backward(loss).unwrap();
        assert!(grads.node(x).unwrap().is_finite());
        let x2 = g.input(t(1, 2, &[1000.0, -1000.0]));
        let wrong = g.softmax_cross_entropy(x2, &[1]).unwrap();
        assert!((g.scalar(wrong) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn target_out_of_range() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(t(1, 2, &[0.0, 0.0]));
        assert_eq!(g.softmax_cross_entropy(x, &[2]).unwrap_err(), Error::TargetOutOfRange { target: 2, classes: 2 });
    }

    #[test]
    fn masked_softmax_zeroes_masked() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(t(2, 3, &[1.0, 5.0, 2.0, 0.0, 0.0, 9.0]));
        let p = g.masked_softmax(x, &[true, false, true, true, true, false]).unwrap();
        let v = g.value(p);
        assert_eq!(v.get(0, 1), 0.0);
        assert_eq!(v.get(1, 2), 0.0);
        assert!((v.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((v.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g.masked_softmax(x, &[false; 6]).unwrap_err(), Error::AllKeysMasked);
    }

    #[test]
    fn max_over_routes_gradient_to_winner() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(t(1, 2, &[1.0, 5.0]));
        let b = g.input(t(1, 2, &[3.0, 9.0]));
        let m = g.max_over(&[a, b], &[true, false]).unwrap();
        assert_eq!(g.value(m).data(), &[1.0, 5.0]);
        let m2 = g.max_over(&[a, b], &[true, true]).unwrap();
        assert_eq!(g.value(m2).data(), &[3.0, 9.0]);
        let s = g.sum(m2);
        let grads = g.backward(s).unwrap();
        assert!(grads.node(a).is_none() || grads.node(a).unwrap().data() == [0.0, 0.0]);
        assert_eq!(grads.node(b).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(g.max_over(&[a, b], &[false, false]).unwrap_err(), Error::EmptySequence);
    }

    #[test]
    fn dropout_rate_zero_and_eval_are_identity() {
        use rand::SeedableRng;
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(t(1, 3, &[1.0, 2.0, 3.0]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(g.dropout(x, 0.0, Some(&mut rng)).unwrap(), x);
        assert_eq!(g.dropout::<rand_chacha::ChaCha8Rng>(x, 0.5, None).unwrap(), x);
        let d = g.dropout(x, 0.5, Some(&mut rng)).unwrap();
        for (&o, &i) in g.value(d).data().iter().zip(&[1.0, 2.0, 3.0]) {
            assert!(o == 0.0 || o == 2.0 * i);
        }
    }

    #[test]
    fn shape_errors() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(t(2, 3, &[0.0; 6]));
        let b = g.input(t(2, 3, &[0.0; 6]));
        assert!(g.matmul(a, b).is_err());
        let r = g.input(t(1, 2, &[0.0; 2]));
        assert!(g.add_row(a, r).is_err());
        assert!(g.slice_cols(a, 2, 2).is_err());
        assert!(g.gather_rows(a, &[5]).is_err());
        assert!(g.backward(a).is_err());
        assert!(g.concat_cols(&[]).is_err());
    }
}
