//! Fake-news text classification toolkit core.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! under `#![no_std]` with `alloc`. File IO, configuration and the command line
//! live in the companion `infodemic` crate.
//!
//! The pieces, bottom-up:
//!
//! - [`corpus`]: labeled records, TSV dataset parsing, class counts and
//!   frequent-term reports.
//! - [`preprocess`]: tokenizer plus the emoticon, hashtag, stemming and cleaning
//!   stages.
//! - [`features`]: capped vocabularies, TF-IDF vectors, embedding tables and the
//!   TF-IDF weighted embedding average.
//! - [`nn`]: dense tensors, a reverse-mode tape, layers, Adam and a
//!   finite-difference gradient checker.
//! - [`classifiers`]: logistic regression, hinge SVM, passive-aggressive and MLP.
//! - [`sequence`]: LSTM, BiLSTM + attention, CNN and CNN + BiLSTM models.
//! - [`transformer`]: small encoder classifiers (standard, shared layers,
//!   relative position bias).
//! - [`ensemble`]: probability averaging, metrics and misclassification rows.
//! - [`model`]: one type wrapping any trained model behind text-in,
//!   probabilities-out.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifiers;
pub mod corpus;
pub mod ensemble;
mod error;
pub mod features;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod sequence;
pub mod training;
pub mod transformer;

pub use error::{Error, Result};

/// The two classes of the task. Index order (`Fake` = 0, `Real` = 1) is the
/// column order of every probability vector and logit matrix in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Fake, Label::Real];

    pub fn index(self) -> usize {
        match self {
            Label::Fake => 0,
            Label::Real => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Fake),
            1 => Some(Label::Real),
            _ => None,
        }
    }

    /// `+1` for fake, `-1` for real (linear model target encoding).
    pub fn sign(self) -> f64 {
        match self {
            Label::Fake => 1.0,
            Label::Real => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Real => "real",
        }
    }

    /// Case-insensitive parse of `real` / `fake`.
    pub fn parse(s: &str) -> Option<Label> {
        if s.eq_ignore_ascii_case("fake") {
            Some(Label::Fake)
        } else if s.eq_ignore_ascii_case("real") {
            Some(Label::Real)
        } else {
            None
        }
    }
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}
