use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::ProbVector;
use crate::features::Features;
use crate::training::check_labels;
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearKind {
    /// Logistic regression: SGD on log loss.
    Logreg,
    /// Linear SVM: SGD on hinge loss with an L2 term.
    Svm,
    /// Passive-aggressive (PA-I).
    Pac,
}

impl LinearKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinearKind::Logreg => "logreg",
            LinearKind::Svm => "svm",
            LinearKind::Pac => "pac",
        }
    }

    pub fn parse(s: &str) -> Option<LinearKind> {
        match s {
            "logreg" => Some(LinearKind::Logreg),
            "svm" => Some(LinearKind::Svm),
            "pac" => Some(LinearKind::Pac),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    pub epochs: usize,
    pub lr: f64,
    pub c: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig { epochs: 20, lr: 0.1, c: 1.0, seed: 0 }
    }
}

/// Weight vector and bias; the score `w.x + b` is positive for fake.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f32>,
    pub bias: f32,
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, dim: usize) -> LinearModel {
        LinearModel { kind, weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &Features) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        let s: f64 = x.entries().iter().map(|&(i, v)| v * f64::from(self.weights[i])).sum();
        Ok(s + f64::from(self.bias))
    }

    /// `P(fake) = sigmoid(w.x + b)`.
    pub fn predict_proba(&self, x: &Features) -> Result<ProbVector> {
        let s = self.score(x)?;
        let p_fake = if s >= 0.0 {
            1.0 / (1.0 + Float::exp(-s))
        } else {
            let e = Float::exp(s);
            e / (1.0 + e)
        };
        Ok(ProbVector::from_fake(p_fake))
    }
}

/// One PA-I step on `(x, y)` with `y` in `{+1, -1}`. Returns the step size.
pub fn pa_update(w: &mut [f64], b: &mut f64, x: &Features, y: f64, c: f64) -> f64 {
    let margin = y * (x.dot(w) + *b);
    let loss = (1.0 - margin).max(0.0);
    if loss == 0.0 {
        return 0.0;
    }
    let sq = x.squared_norm();
    let tau = if sq > 0.0 { c.min(loss / sq) } else { c };
    for (i, v) in x.entries() {
        w[i] += tau * y * v;
    }
    *b += tau * y;
    tau
}

/// Trains one of the linear kinds with per-epoch seeded shuffling.
pub fn train_linear(kind: LinearKind, data: &[(Features, Label)], cfg: &LinearConfig) -> Result<LinearModel> {
    let labels: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
    check_labels(&labels)?;
    if cfg.lr.is_nan() || cfg.lr <= 0.0 || cfg.c.is_nan() || cfg.c <= 0.0 {
        return Err(Error::InvalidConfig("lr and C must be positive".into()));
    }
    let dim = data[0].0.dim();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: x.dim() });
    }
    let n = data.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    // w = scale * v keeps the L2 shrink of the SVM update O(1).
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut b = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, label) = &data[i];
            let y = label.sign();
            match kind {
                LinearKind::Logreg => {
                    let s = x.dot(&v) + b;
                    // d/ds log(1 + exp(-y s)) = -y * sigmoid(-y s)
                    let z = -y * s;
                    let sig = if z >= 0.0 { 1.0 / (1.0 + Float::exp(-z)) } else { Float::exp(z) / (1.0 + Float::exp(z)) };
                    let step = cfg.lr * y * sig;
                    for (j, xv) in x.entries() {
                        v[j] += step * xv;
                    }
                    b += step;
                }
                LinearKind::Svm => {
                    let s = scale * x.dot(&v) + b;
                    scale *= 1.0 - cfg.lr * lambda;
                    if y * s < 1.0 {
                        let step = cfg.lr * y / scale;
                        for (j, xv) in x.entries() {
                            v[j] += step * xv;
                        }
                        b += cfg.lr * y;
                    }
                    if scale < 1e-9 {
                        v.iter_mut().for_each(|w| *w *= scale);
                        scale = 1.0;
                    }
                }
                LinearKind::Pac => {
                    pa_update(&mut v, &mut b, x, y, cfg.c);
                }
            }
        }
    }
    let weights = v.iter().map(|&w| (w * scale) as f32).collect();
    Ok(LinearModel { kind, weights, bias: b as f32 })
}
