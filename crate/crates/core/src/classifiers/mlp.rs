use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::ensemble::ProbVector;
use crate::features::{Features, SparseVector};
use crate::nn::{Dense, Graph, Initializer, NodeId, ParamStore, Real, Tensor};
use crate::training::{predict_batched, train, History, TrainConfig, Trainable};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub patience: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![256], epochs: 20, lr: 1e-3, batch_size: 200, seed: 0, patience: None }
    }
}

impl MlpConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { epochs: self.epochs, batch_size: self.batch_size, lr: self.lr, seed: self.seed, patience: self.patience }
    }
}

/// ReLU hidden layers and a two-way softmax output.
#[derive(Debug, Clone)]
pub struct MlpModel<T: Real = f32> {
    pub config: MlpConfig,
    input_dim: usize,
    store: ParamStore<T>,
    layers: Vec<Dense>,
}

impl<T: Real> MlpModel<T> {
    pub fn new(config: MlpConfig, input_dim: usize) -> Result<MlpModel<T>> {
        if input_dim == 0 || config.hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        let mut store = ParamStore::new();
        let mut init = Initializer::new(config.seed);
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for (i, &h) in config.hidden.iter().chain(core::iter::once(&2)).enumerate() {
            layers.push(Dense::new(&mut store, &mut init, &format!("mlp.{i}"), prev, h));
            prev = h;
        }
        Ok(MlpModel { config, input_dim, store, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Layer widths from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        core::iter::once(self.input_dim).chain(self.layers.iter().map(|l| l.output)).collect()
    }

    pub fn predict_proba(&self, x: &Features) -> Result<ProbVector> {
        Ok(self.predict_many(&[x])?[0])
    }

    pub fn predict_many(&self, xs: &[&Features]) -> Result<Vec<ProbVector>> {
        predict_batched(self, xs, 256)
    }
}

impl<T: Real> Trainable<T> for MlpModel<T> {
    type Example = Features;

    fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn logits(&self, g: &mut Graph<'_, T>, batch: &[&Features], _dropout: Option<&mut ChaCha8Rng>) -> Result<NodeId> {
        if let Some(bad) = batch.iter().find(|x| x.dim() != self.input_dim) {
            return Err(Error::DimensionMismatch { expected: self.input_dim, found: bad.dim() });
        }
        let first = &self.layers[0];
        let mut h = if batch.iter().all(|x| matches!(x, Features::Sparse(_))) {
            let rows: Vec<SparseVector> = batch
                .iter()
                .map(|x| match x {
                    Features::Sparse(s) => s.clone(),
                    Features::Dense(_) => unreachable!(),
                })
                .collect();
            let w = g.param(first.w);
            let b = g.param(first.b);
            let xw = g.sparse_matmul(&rows, w)?;
            g.add_row(xw, b)?
        } else {
            let mut data = vec![T::zero(); batch.len() * self.input_dim];
            for (r, x) in batch.iter().enumerate() {
                for (j, v) in x.entries() {
                    data[r * self.input_dim + j] = T::from_f64(v);
                }
            }
            let x = g.input(Tensor::matrix(batch.len(), self.input_dim, data)?);
            first.forward(g, x)?
        };
        for layer in &self.layers[1..] {
            h = g.relu(h);
            h = layer.forward(g, h)?;
        }
        Ok(h)
    }
}

/// Minibatch Adam on cross-entropy. Zero epochs returns the initial model.
pub fn train_mlp(
    data: &[(Features, Label)],
    valid: Option<&[(Features, Label)]>,
    config: &MlpConfig,
) -> Result<(MlpModel, History)> {
    let dim = data.first().ok_or(Error::EmptyData)?.0.dim();
    let mut model = MlpModel::new(config.clone(), dim)?;
    let history = train(&mut model, data, valid, &config.train_config())?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;

    fn xor() -> Vec<(Features, Label)> {
        [([0.0, 0.0], Label::Real), ([1.0, 1.0], Label::Real), ([0.0, 1.0], Label::Fake), ([1.0, 0.0], Label::Fake)]
            .iter()
            .map(|(x, l)| (Features::Dense(x.to_vec()), *l))
            .collect()
    }

    #[test]
    fn learns_xor() {
        let cfg = MlpConfig { hidden: vec![8], epochs: 500, lr: 0.01, batch_size: 4, seed: 1, patience: None };
        let data = xor();
        let (model, _) = train_mlp(&data, None, &cfg).unwrap();
        for (x, l) in &data {
            assert_eq!(model.predict_proba(x).unwrap().label(), *l);
        }
    }

    #[test]
    fn zero_epochs_is_near_uniform() {
        let data = xor();
        let mut mean = 0.0;
        for seed in 0..20 {
            let cfg = MlpConfig { hidden: vec![8], epochs: 0, seed, ..MlpConfig::default() };
            let (m, h) = train_mlp(&data, None, &cfg).unwrap();
            assert!(h.epochs.is_empty());
            for (x, _) in &data {
                mean += m.predict_proba(x).unwrap().fake;
            }
        }
        mean /= 80.0;
        assert!((mean - 0.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let cfg = MlpConfig { hidden: vec![4], epochs: 5, seed: 3, batch_size: 2, ..MlpConfig::default() };
        let (a, ha) = train_mlp(&xor(), None, &cfg).unwrap();
        let (b, hb) = train_mlp(&xor(), None, &cfg).unwrap();
        assert_eq!(a.params().values(), b.params().values());
        assert_eq!(ha, hb);
    }

    #[test]
    fn sparse_and_dense_inputs_agree() {
        let m = MlpModel::<f64>::new(MlpConfig { hidden: vec![3], ..MlpConfig::default() }, 4).unwrap();
        let dense = Features::Dense(vec![0.0, 0.5, 0.0, -1.0]);
        let sparse = Features::Sparse(SparseVector::new(4, vec![(1, 0.5), (3, -1.0)]).unwrap());
        let a = m.predict_proba(&dense).unwrap();
        let b = m.predict_proba(&sparse).unwrap();
        assert!((a.fake - b.fake).abs() < 1e-12);
        assert!(m.predict_proba(&Features::Dense(vec![1.0])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut m = MlpModel::<f64>::new(MlpConfig { hidden: vec![5, 3], ..MlpConfig::default() }, 4).unwrap();
        let xs = [
            Features::Sparse(SparseVector::new(4, vec![(0, 0.7), (2, -0.4)]).unwrap()),
            Features::Sparse(SparseVector::new(4, vec![(1, 0.9), (3, 0.2)]).unwrap()),
        ];
        let model = m.clone();
        let err = gradient_check(m.params_mut(), 1e-5, |g| {
            let logits = model.logits(g, &[&xs[0], &xs[1]], None)?;
            g.softmax_cross_entropy(logits, &[0, 1])
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
