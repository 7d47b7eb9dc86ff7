//! Softmax-averaging ensembles, classification metrics and misclassification
//! rows.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::{Error, Label, Result};

/// `(P(fake), P(real))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbVector {
    pub fake: f64,
    pub real: f64,
}

/// Which class wins an exact 0.5 / 0.5 split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Fake,
    Real,
}

impl ProbVector {
    /// Validates components in `[0, 1]` summing to 1 within `1e-9`.
    pub fn new(fake: f64, real: f64) -> Result<ProbVector> {
        let ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        if !ok(fake) || !ok(real) || (fake + real - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(alloc::format!("({fake}, {real}) is not a probability vector")));
        }
        Ok(ProbVector { fake, real })
    }

    /// From `P(fake)` alone.
    pub fn from_fake(p_fake: f64) -> ProbVector {
        ProbVector { fake: p_fake, real: 1.0 - p_fake }
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Fake => self.fake,
            Label::Real => self.real,
        }
    }

    pub fn predict(&self, tie: TieBreak) -> Label {
        if self.fake > self.real {
            Label::Fake
        } else if self.real > self.fake {
            Label::Real
        } else {
            match tie {
                TieBreak::Fake => Label::Fake,
                TieBreak::Real => Label::Real,
            }
        }
    }

    /// Prediction with the default fake-on-tie rule.
    pub fn label(&self) -> Label {
        self.predict(TieBreak::Fake)
    }
}

/// Arithmetic mean of member probability vectors. Components are summed in
/// sorted order, so the result is bitwise independent of member order.
pub fn ensemble_mean(members: &[ProbVector]) -> Result<ProbVector> {
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = members.len() as f64;
    let sorted_sum = |f: fn(&ProbVector) -> f64| {
        let mut v: Vec<f64> = members.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.into_iter().sum::<f64>()
    };
    let fake = sorted_sum(|p| p.fake) / n;
    let real = sorted_sum(|p| p.real) / n;
    Ok(ProbVector { fake, real })
}

/// Element-wise ensemble over aligned member outputs: `members[m][i]` is
/// member `m`'s vector for input `i`.
pub fn ensemble_predict(members: &[Vec<ProbVector>]) -> Result<Vec<ProbVector>> {
    let first = members.first().ok_or(Error::EmptyEnsemble)?;
    if let Some(bad) = members.iter().find(|m| m.len() != first.len()) {
        return Err(Error::LengthMismatch { left: first.len(), right: bad.len() });
    }
    let mut column = Vec::with_capacity(members.len());
    (0..first.len())
        .map(|i| {
            column.clear();
            column.extend(members.iter().map(|m| m[i]));
            ensemble_mean(&column)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Indexed by [`Label::index`].
    pub per_class: [ClassMetrics; 2],
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 2]; 2],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, per-class scores and their support-weighted and macro averages.
pub fn evaluate(preds: &[Label], golds: &[Label]) -> Result<Metrics> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &g) in preds.iter().zip(golds) {
        confusion[g.index()][p.index()] += 1;
    }
    let n = preds.len();
    let mut per_class = [ClassMetrics::default(); 2];
    for c in 0..2 {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        per_class[c] = ClassMetrics { precision, recall, f1, support };
    }
    let weighted = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n as f64;
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 2.0;
    let correct = confusion[0][0] + confusion[1][1];
    Ok(Metrics {
        accuracy: ratio(correct, n),
        precision: weighted(|m| m.precision),
        // support-weighted recall is sum(tp) / n
        recall: ratio(correct, n),
        f1: weighted(|m| m.f1),
        macro_precision: macro_avg(|m| m.precision),
        macro_recall: macro_avg(|m| m.recall),
        macro_f1: macro_avg(|m| m.f1),
        per_class,
        confusion,
    })
}

/// One sample that at least one model got wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisclassifiedRow {
    pub id: String,
    pub text: String,
    pub gold: Label,
    /// `true` where the model was correct, in model order.
    pub verdicts: Vec<bool>,
    pub ensemble: Option<bool>,
}

/// Rows for every labeled sample that some model (or the ensemble) got wrong.
pub fn misclassification_report(
    corpus: &Corpus,
    per_model: &[Vec<Label>],
    ensemble: Option<&[Label]>,
) -> Result<Vec<MisclassifiedRow>> {
    let golds = corpus.labels()?;
    for preds in per_model.iter().map(Vec::as_slice).chain(ensemble) {
        if preds.len() != golds.len() {
            return Err(Error::LengthMismatch { left: golds.len(), right: preds.len() });
        }
    }
    let mut rows = Vec::new();
    for (i, (record, &gold)) in corpus.records().iter().zip(&golds).enumerate() {
        let verdicts: Vec<bool> = per_model.iter().map(|p| p[i] == gold).collect();
        let ens = ensemble.map(|e| e[i] == gold);
        if verdicts.iter().any(|&v| !v) || ens == Some(false) {
            rows.push(MisclassifiedRow {
                id: record.id.clone(),
                text: record.text.clone(),
                gold,
                verdicts,
                ensemble: ens,
            });
        }
    }
    Ok(rows)
}
