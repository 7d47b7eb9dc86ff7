use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Gradients, Real, Tensor};
use crate::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient accumulator and Adam state.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub trainable: bool,
    first_moment: Option<Tensor<T>>,
    second_moment: Option<Tensor<T>>,
    step: u64,
}

impl<T: Real> Param<T> {
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Named parameters in creation order. Names are unique.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> ParamStore<T> {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter name `{name}`");
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param {
            name,
            value,
            grad,
            trainable: true,
            first_moment: None,
            second_moment: None,
            step: 0,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values over all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set_value(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let id = self.find(name).ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    /// Adds a backward pass's parameter gradients into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (p, g) in self.params.iter_mut().zip(grads.params.iter()) {
            if let Some(g) = g {
                p.grad.add_assign(g);
            }
        }
    }

    /// Replaces the accumulators with one backward pass's gradients, zeroing
    /// parameters the pass did not reach.
    pub fn set_gradients(&mut self, grads: Gradients<T>) {
        for (p, g) in self.params.iter_mut().zip(grads.params) {
            match g {
                Some(g) if g.shape() == p.grad.shape() => p.grad = g,
                Some(g) => {
                    p.grad.fill(T::zero());
                    p.grad.add_assign(&g);
                }
                None => p.grad.fill(T::zero()),
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Snapshot of all values (for early-stopping restore).
    pub fn values(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: Vec<Tensor<T>>) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig { lr, ..AdamConfig::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam update of every trainable parameter, then zeroes all
/// gradients.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, cfg: &AdamConfig) {
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let zero = T::zero();
    for p in &mut store.params {
        if !p.trainable {
            p.grad.fill(zero);
            continue;
        }
        p.step += 1;
        let t = p.step as i32;
        // w -= lr * (m / c1) / (sqrt(v / c2) + eps)
        let step = T::from_f64(cfg.lr / (1.0 - cfg.beta1.powi(t)));
        let inv_c2 = T::from_f64(1.0 / (1.0 - cfg.beta2.powi(t)));
        let eps = T::from_f64(cfg.eps);
        let m = p.first_moment.get_or_insert_with(|| Tensor::zeros(p.value.shape()));
        let v = p.second_moment.get_or_insert_with(|| Tensor::zeros(p.value.shape()));
        let (w, g) = (p.value.data_mut(), p.grad.data_mut());
        for (((w, g), m), v) in w.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
            let gv = *g;
            *g = zero;
            *m = b1 * *m + (one - b1) * gv;
            *v = b2 * *v + (one - b2) * gv * gv;
            *w -= step * *m / (Float::sqrt(*v * inv_c2) + eps);
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(store: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let total: f64 = store
        .params
        .iter()
        .flat_map(|p| p.grad.data().iter())
        .map(|g| {
            let g = g.as_f64();
            g * g
        })
        .sum::<f64>()
        .sqrt();
    if total > max_norm && total > 0.0 {
        let scale = T::from_f64(max_norm / total);
        for p in &mut store.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
    total
}

/// Seeded parameter initialization.
#[derive(Debug, Clone)]
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Initializer {
        Initializer { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform on `±sqrt(6 / (fan_in + fan_out))` for a `fan_in x fan_out` matrix.
    pub fn xavier<T: Real>(&mut self, fan_in: usize, fan_out: usize) -> Tensor<T> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.uniform(fan_in, fan_out, bound)
    }

    pub fn uniform<T: Real>(&mut self, rows: usize, cols: usize, bound: f64) -> Tensor<T> {
        let data = (0..rows * cols).map(|_| T::from_f64(self.rng.gen_range(-bound..=bound))).collect();
        Tensor::from_raw(rows, cols, data)
    }

    pub fn zeros<T: Real>(&mut self, rows: usize, cols: usize) -> Tensor<T> {
        Tensor::zeros(&[rows, cols])
    }
}
