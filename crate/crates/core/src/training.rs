//! Minibatch Adam training with seeded shuffling and early stopping, shared
//! by the MLP, sequence and encoder models.

use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{evaluate, ProbVector};
use crate::nn::{adam_step, clip_grad_norm, AdamConfig, Graph, NodeId, ParamStore, Real};
use crate::{Error, Label, Result};

/// A model trained by cross-entropy on its two-column logits.
pub trait Trainable<T: Real> {
    type Example;

    fn params(&self) -> &ParamStore<T>;

    fn params_mut(&mut self) -> &mut ParamStore<T>;

    /// Records the `batch x 2` logits. `dropout` is `Some` only in training.
    fn logits(&self, g: &mut Graph<'_, T>, batch: &[&Self::Example], dropout: Option<&mut ChaCha8Rng>) -> Result<NodeId>;

    /// Global gradient-norm cap, if any.
    fn clip_norm(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Non-improving epochs tolerated before stopping; `None` disables early
    /// stopping.
    pub patience: Option<usize>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 20, batch_size: 32, lr: 1e-3, seed: 0, patience: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Weighted F1 on the validation set (the training set when none is given).
    pub valid_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 = initial parameters).
    pub best_epoch: usize,
}

impl History {
    /// `epoch<TAB>train_loss<TAB>valid_f1` rows with a header.
    pub fn to_tsv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut out = alloc::string::String::from("epoch\ttrain_loss\tvalid_f1\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}", r.epoch, r.train_loss, r.valid_f1);
        }
        out
    }
}

pub(crate) fn check_labels(labels: &[Label]) -> Result<()> {
    match labels.first() {
        None => Err(Error::EmptyData),
        Some(&first) if labels.iter().all(|&l| l == first) => Err(Error::SingleClass(first)),
        Some(_) => Ok(()),
    }
}

/// Softmax probabilities in evaluation mode, in batches of `batch_size`.
pub fn predict_batched<T: Real, M: Trainable<T>>(model: &M, examples: &[&M::Example], batch_size: usize) -> Result<Vec<ProbVector>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let mut g = Graph::new(model.params());
        let logits = model.logits(&mut g, chunk, None)?;
        let v = g.value(logits);
        for i in 0..v.rows() {
            let (a, b) = (v.get(i, 0).as_f64(), v.get(i, 1).as_f64());
            let m = a.max(b);
            let (ea, eb) = (Float::exp(a - m), Float::exp(b - m));
            out.push(ProbVector { fake: ea / (ea + eb), real: eb / (ea + eb) });
        }
    }
    Ok(out)
}

fn weighted_f1<T: Real, M: Trainable<T>>(model: &M, data: &[(M::Example, Label)], batch_size: usize) -> Result<f64> {
    let refs: Vec<&M::Example> = data.iter().map(|(x, _)| x).collect();
    let preds: Vec<Label> = predict_batched(model, &refs, batch_size)?.iter().map(ProbVector::label).collect();
    let golds: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
    Ok(evaluate(&preds, &golds)?.f1)
}

/// Trains with Adam on mean cross-entropy. Each epoch is scored by weighted
/// F1 on `valid` (or `train` when absent); the best-scoring parameters are
/// restored at the end.
pub fn train<T: Real, M: Trainable<T>>(
    model: &mut M,
    train: &[(M::Example, Label)],
    valid: Option<&[(M::Example, Label)]>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    let labels: Vec<Label> = train.iter().map(|(_, l)| *l).collect();
    check_labels(&labels)?;
    let score_set = match valid {
        Some(v) if !v.is_empty() => v,
        _ => train,
    };
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = History::default();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_params = None;
    let mut bad_epochs = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&M::Example> = chunk.iter().map(|&i| &train[i].0).collect();
            let targets: Vec<usize> = chunk.iter().map(|&i| train[i].1.index()).collect();
            let grads = {
                let mut g = Graph::new(model.params());
                let logits = model.logits(&mut g, &batch, Some(&mut dropout_rng))?;
                let loss = g.softmax_cross_entropy(logits, &targets)?;
                let value = g.scalar(loss).as_f64();
                if !value.is_finite() {
                    return Err(Error::Diverged);
                }
                loss_sum += value * chunk.len() as f64;
                g.backward(loss)?
            };
            let clip = model.clip_norm();
            let store = model.params_mut();
            store.set_gradients(grads);
            if let Some(max) = clip {
                clip_grad_norm(store, max);
            }
            adam_step(store, &adam);
        }
        let f1 = weighted_f1(model, score_set, cfg.batch_size.max(64))?;
        history.epochs.push(EpochRecord { epoch, train_loss: loss_sum / train.len() as f64, valid_f1: f1 });
        if f1 > best_f1 {
            best_f1 = f1;
            best_params = Some(model.params().values());
            history.best_epoch = epoch;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if cfg.patience.is_some_and(|p| bad_epochs > p) {
                break;
            }
        }
    }
    if let Some(values) = best_params {
        model.params_mut().restore(values);
    }
    Ok(history)
}
