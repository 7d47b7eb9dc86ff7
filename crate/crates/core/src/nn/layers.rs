use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use super::{Graph, Initializer, NodeId, ParamId, ParamStore, Real, Tensor};
use crate::{Error, Result};

/// `x W + b` with `b` broadcast over rows.
pub fn affine<T: Real>(g: &mut Graph<'_, T>, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
    let w = g.param(w);
    let b = g.param(b);
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// Fully connected layer.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new<T: Real>(store: &mut ParamStore<T>, init: &mut Initializer, name: &str, input: usize, output: usize) -> Dense {
        let w = store.add(format!("{name}.w"), init.xavier(input, output));
        let b = store.add(format!("{name}.b"), init.zeros(1, output));
        Dense { w, b, input, output }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, x: NodeId) -> Result<NodeId> {
        affine(g, x, self.w, self.b)
    }
}

/// Row-wise layer normalization with learned gain and shift.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, dim: usize) -> LayerNorm {
        let gamma = store.add(format!("{name}.gamma"), Tensor::filled(1, dim, T::one()));
        let beta = store.add(format!("{name}.beta"), Tensor::zeros(&[1, dim]));
        LayerNorm { gamma, beta, eps: 1e-5 }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, x: NodeId) -> Result<NodeId> {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta, self.eps)
    }
}

/// LSTM cell with gates packed as `[i | f | g | o]` along columns.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    /// Xavier weights; forget-gate bias starts at 1.
    pub fn new<T: Real>(store: &mut ParamStore<T>, init: &mut Initializer, name: &str, input: usize, hidden: usize) -> LstmCell {
        let wx = store.add(format!("{name}.wx"), init.xavier(input, 4 * hidden));
        let wh = store.add(format!("{name}.wh"), init.xavier(hidden, 4 * hidden));
        let mut bias = Tensor::zeros(&[1, 4 * hidden]);
        for v in &mut bias.data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        let b = store.add(format!("{name}.b"), bias);
        LstmCell { wx, wh, b, input, hidden }
    }
}

/// One LSTM step on a batch: returns the new `(h, c)`.
pub fn lstm_cell_step<T: Real>(
    g: &mut Graph<'_, T>,
    cell: &LstmCell,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let n = cell.hidden;
    let wx = g.param(cell.wx);
    let wh = g.param(cell.wh);
    let b = g.param(cell.b);
    let xw = g.matmul(x, wx)?;
    let hw = g.matmul(h, wh)?;
    let z = g.add(xw, hw)?;
    let z = g.add_row(z, b)?;
    let zi = g.slice_cols(z, 0, n)?;
    let zf = g.slice_cols(z, n, n)?;
    let zg = g.slice_cols(z, 2 * n, n)?;
    let zo = g.slice_cols(z, 3 * n, n)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let fc = g.mul(f, c)?;
    let ic = g.mul(i, cand)?;
    let c_new = g.add(fc, ic)?;
    let tc = g.tanh(c_new);
    let h_new = g.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Unrolled LSTM over a padded batch.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayer {
    pub cell: LstmCell,
}

impl LstmLayer {
    pub fn new<T: Real>(store: &mut ParamStore<T>, init: &mut Initializer, name: &str, input: usize, hidden: usize) -> LstmLayer {
        LstmLayer { cell: LstmCell::new(store, init, name, input, hidden) }
    }

    /// Runs over `steps` (each `batch x input`). `valid[t][r]` marks real
    /// tokens; at padded steps the state is carried through unchanged, so a
    /// forward pass ends on the last real token and a reverse pass starts on
    /// it from a zero state. Returns the hidden state per step, in time order.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        steps: &[NodeId],
        valid: &[Vec<bool>],
        reverse: bool,
    ) -> Result<Vec<NodeId>> {
        if steps.is_empty() {
            return Err(Error::EmptySequence);
        }
        if valid.len() != steps.len() {
            return Err(Error::LengthMismatch { left: steps.len(), right: valid.len() });
        }
        let batch = g.value(steps[0]).rows();
        let zero = Tensor::zeros(&[batch, self.cell.hidden]);
        let mut h = g.input(zero.clone());
        let mut c = g.input(zero);
        let mut out: Vec<Option<NodeId>> = alloc::vec![None; steps.len()];
        let order: Vec<usize> = if reverse { (0..steps.len()).rev().collect() } else { (0..steps.len()).collect() };
        for t in order {
            let (h_new, c_new) = lstm_cell_step(g, &self.cell, steps[t], h, c)?;
            if valid[t].iter().all(|&v| v) {
                h = h_new;
                c = c_new;
            } else {
                h = g.blend(h_new, h, &valid[t])?;
                c = g.blend(c_new, c, &valid[t])?;
            }
            out[t] = Some(h);
        }
        Ok(out.into_iter().flatten().collect())
    }

    /// Final hidden state of a forward pass (state at each row's last real token).
    pub fn last_hidden<T: Real>(&self, g: &mut Graph<'_, T>, steps: &[NodeId], valid: &[Vec<bool>]) -> Result<NodeId> {
        let hs = self.forward(g, steps, valid, false)?;
        Ok(*hs.last().expect("non-empty"))
    }
}

/// 1-D convolution over time: each window of `width` consecutive positions
/// is concatenated and passed through a dense map to `filters` outputs.
#[derive(Debug, Clone, Copy)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub width: usize,
    pub input: usize,
    pub filters: usize,
}

impl Conv1d {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        init: &mut Initializer,
        name: &str,
        input: usize,
        width: usize,
        filters: usize,
    ) -> Conv1d {
        let w = store.add(format!("{name}.w"), init.xavier(width * input, filters));
        let b = store.add(format!("{name}.b"), init.zeros(1, filters));
        Conv1d { w, b, width, input, filters }
    }

    /// One output per window start `0..=steps.len() - width`.
    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, steps: &[NodeId]) -> Result<Vec<NodeId>> {
        if steps.len() < self.width {
            return Err(Error::ShapeMismatch(format!("{} steps for width {}", steps.len(), self.width)));
        }
        let mut out = Vec::with_capacity(steps.len() + 1 - self.width);
        for s in 0..=steps.len() - self.width {
            let window = if self.width == 1 { steps[s] } else { g.concat_cols(&steps[s..s + self.width])? };
            out.push(affine(g, window, self.w, self.b)?);
        }
        Ok(out)
    }
}

/// Valid convolution per kernel, ReLU, max over time, concatenated in kernel
/// order. `lengths[r]` is the number of usable positions of batch row `r`;
/// windows reaching past it are excluded from the max.
pub fn conv1d_maxpool<T: Real>(g: &mut Graph<'_, T>, steps: &[NodeId], lengths: &[usize], convs: &[Conv1d]) -> Result<NodeId> {
    let mut pooled = Vec::with_capacity(convs.len());
    for conv in convs {
        if lengths.iter().any(|&l| l < conv.width) {
            return Err(Error::EmptySequence);
        }
        let windows: Vec<NodeId> = conv.forward(g, steps)?.into_iter().map(|w| g.relu(w)).collect();
        let valid: Vec<bool> =
            (0..windows.len()).flat_map(|s| lengths.iter().map(move |&l| s + conv.width <= l)).collect();
        pooled.push(g.max_over(&windows, &valid)?);
    }
    if pooled.len() == 1 {
        Ok(pooled[0])
    } else {
        g.concat_cols(&pooled)
    }
}

/// `softmax(q k^T / sqrt(d) + bias) v` with keys masked by `key_mask`.
/// Returns the output and the attention matrix.
pub fn scaled_dot_attention<T: Real>(
    g: &mut Graph<'_, T>,
    q: NodeId,
    k: NodeId,
    v: NodeId,
    key_mask: &[bool],
    bias: Option<NodeId>,
) -> Result<(NodeId, NodeId)> {
    let (n, d) = {
        let qv = g.value(q);
        (qv.rows(), qv.cols())
    };
    let m = g.value(k).rows();
    if key_mask.len() != m {
        return Err(Error::LengthMismatch { left: m, right: key_mask.len() });
    }
    if !key_mask.iter().any(|&x| x) {
        return Err(Error::AllKeysMasked);
    }
    let kt = g.transpose(k);
    let scores = g.matmul(q, kt)?;
    let mut scores = g.scale(scores, T::one() / Float::sqrt(T::from_usize(d)));
    if let Some(bias) = bias {
        scores = g.add(scores, bias)?;
    }
    let mask: Vec<bool> = (0..n).flat_map(|_| key_mask.iter().copied()).collect();
    let probs = g.masked_softmax(scores, &mask)?;
    let out = g.matmul(probs, v)?;
    Ok((out, probs))
}
