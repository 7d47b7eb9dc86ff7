//! Feature extraction: capped vocabularies, TF-IDF sparse vectors, embedding
//! tables and the TF-IDF weighted embedding average.

mod embedding;
mod vocab;

pub use embedding::{weighted_average, weighted_average_embedding, DenseVector, EmbeddingTable, EmbeddingTableBuilder};
pub use vocab::{build_vocabulary, tfidf_vector, Analyzer, FeatureSpace, SparseVector, VocabConfig, Vocabulary};

use alloc::vec::Vec;

/// Either sparse TF-IDF or dense embedding features for one document.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(SparseVector),
    Dense(DenseVector),
}

impl Features {
    pub fn dim(&self) -> usize {
        match self {
            Features::Sparse(s) => s.dim(),
            Features::Dense(d) => d.len(),
        }
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        match self {
            Features::Sparse(s) => s.iter().map(|(i, v)| v * weights[i]).sum(),
            Features::Dense(d) => d.iter().zip(weights).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match self {
            Features::Sparse(s) => s.iter().map(|(_, v)| v * v).sum(),
            Features::Dense(d) => d.iter().map(|v| v * v).sum(),
        }
    }

    /// `(index, value)` pairs of the non-zero (sparse) or all (dense) entries.
    pub fn entries(&self) -> Vec<(usize, f64)> {
        match self {
            Features::Sparse(s) => s.iter().collect(),
            Features::Dense(d) => d.iter().copied().enumerate().collect(),
        }
    }
}
