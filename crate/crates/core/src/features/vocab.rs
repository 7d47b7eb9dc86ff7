use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;


use crate::preprocess::TokenSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analyzer {
    /// Space-joined word n-grams.
    Word,
    /// Character n-grams inside each token, padded with one space on both
    /// sides so word boundaries are visible; grams never cross tokens.
    Char,
}

impl Analyzer {
    pub fn as_str(self) -> &'static str {
        match self {
            Analyzer::Word => "word",
            Analyzer::Char => "char",
        }
    }

    pub fn parse(s: &str) -> Option<Analyzer> {
        match s {
            "word" => Some(Analyzer::Word),
            "char" => Some(Analyzer::Char),
            _ => None,
        }
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabConfig {
    pub analyzer: Analyzer,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
}

impl VocabConfig {
    pub fn words(ngram_min: usize, ngram_max: usize, max_features: usize) -> VocabConfig {
        VocabConfig { analyzer: Analyzer::Word, ngram_min, ngram_max, max_features }
    }

    pub fn chars(ngram_min: usize, ngram_max: usize, max_features: usize) -> VocabConfig {
        VocabConfig { analyzer: Analyzer::Char, ngram_min, ngram_max, max_features }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(Error::InvalidConfig(alloc::format!(
                "ngram range [{}, {}] is invalid",
                self.ngram_min,
                self.ngram_max
            )));
        }
        if self.max_features == 0 {
            return Err(Error::InvalidConfig("max_features must be positive".into()));
        }
        Ok(())
    }

    /// Every feature occurrence of a document, in order (with repeats).
    pub fn analyze(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        match self.analyzer {
            Analyzer::Word => {
                for n in self.ngram_min..=self.ngram_max {
                    for window in tokens.windows(n) {
                        out.push(window.join(" "));
                    }
                }
            }
            Analyzer::Char => {
                for tok in tokens {
                    let mut padded = Vec::with_capacity(tok.len() + 2);
                    padded.push(' ');
                    padded.extend(tok.chars());
                    padded.push(' ');
                    for n in self.ngram_min..=self.ngram_max {
                        for window in padded.windows(n) {
                            out.push(window.iter().collect());
                        }
                    }
                }
            }
        }
        out
    }
}

/// Feature index, document frequencies and the document count they were
/// collected over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    config: VocabConfig,
    index: BTreeMap<String, usize>,
    features: Vec<String>,
    df: Vec<usize>,
    total_documents: usize,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from `(feature, df)` pairs listed in index order.
    pub fn from_parts(config: VocabConfig, entries: Vec<(String, usize)>, total_documents: usize) -> Result<Vocabulary> {
        config.validate()?;
        if entries.len() > config.max_features {
            return Err(Error::InvalidConfig("vocabulary larger than max_features".into()));
        }
        let mut index = BTreeMap::new();
        let mut features = Vec::with_capacity(entries.len());
        let mut df = Vec::with_capacity(entries.len());
        for (i, (f, d)) in entries.into_iter().enumerate() {
            if d == 0 || d > total_documents {
                return Err(Error::InvalidConfig(alloc::format!("document frequency {d} out of range")));
            }
            if index.insert(f.clone(), i).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate feature `{f}`")));
            }
            features.push(f);
            df.push(d);
        }
        Ok(Vocabulary { config, index, features, df, total_documents })
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn total_documents(&self) -> usize {
        self.total_documents
    }

    pub fn index_of(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn feature(&self, index: usize) -> &str {
        &self.features[index]
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.df[index]
    }

    pub fn document_frequency_of(&self, feature: &str) -> Option<usize> {
        self.index_of(feature).map(|i| self.df[i])
    }

    /// Features with their document frequencies, in index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize)> {
        self.features.iter().map(String::as_str).zip(self.df.iter().copied())
    }

    /// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        let n = self.total_documents as f64;
        num_traits::Float::ln((1.0 + n) / (1.0 + self.df[index] as f64)) + 1.0
    }
}

/// Collects features over `docs` and keeps the `max_features` most
/// document-frequent ones (ties by lexicographic order). Indices follow
/// lexicographic feature order.
pub fn build_vocabulary(docs: &[TokenSequence], config: VocabConfig) -> Result<Vocabulary> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let mut feats = config.analyze(&doc.tokens);
        feats.sort_unstable();
        feats.dedup();
        for f in feats {
            *df.entry(f).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_by_key(|e| core::cmp::Reverse(e.1));
    ranked.truncate(config.max_features);
    ranked.sort_by(|a, b| a.0.cmp(&b.0));
    Vocabulary::from_parts(config, ranked, docs.len())
}

/// Sorted `(index, weight)` pairs over a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Checks strictly increasing in-range indices and finite weights.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<SparseVector> {
        for (k, &(i, v)) in entries.iter().enumerate() {
            if i >= dim || (k > 0 && entries[k - 1].0 >= i) {
                return Err(Error::ShapeMismatch(alloc::format!("sparse index {i} invalid for dimension {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> SparseVector {
        SparseVector { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        num_traits::Float::sqrt(self.entries.iter().map(|(_, v)| v * v).sum::<f64>())
    }

    fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
    }
}

/// Raw-count tf times smoothed idf, L2-normalized. Out-of-vocabulary
/// features are ignored.
pub fn tfidf_vector(tokens: &TokenSequence, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for f in vocab.config.analyze(&tokens.tokens) {
        if let Some(i) = vocab.index_of(&f) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let entries = counts.into_iter().map(|(i, tf)| (i, tf as f64 * vocab.idf(i))).collect();
    let mut v = SparseVector { dim: vocab.len(), entries };
    v.normalize();
    v
}

/// Several vocabularies stacked side by side (e.g. word n-grams next to
/// character n-grams); the concatenated vector is renormalized to unit length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    vocabularies: Vec<Vocabulary>,
}

impl FeatureSpace {
    pub fn fit(docs: &[TokenSequence], configs: &[VocabConfig]) -> Result<FeatureSpace> {
        if configs.is_empty() {
            return Err(Error::InvalidConfig("at least one vocabulary is required".into()));
        }
        let vocabularies = configs.iter().map(|&c| build_vocabulary(docs, c)).collect::<Result<_>>()?;
        Ok(FeatureSpace { vocabularies })
    }

    pub fn from_vocabularies(vocabularies: Vec<Vocabulary>) -> Result<FeatureSpace> {
        if vocabularies.is_empty() {
            return Err(Error::InvalidConfig("at least one vocabulary is required".into()));
        }
        Ok(FeatureSpace { vocabularies })
    }

    pub fn vocabularies(&self) -> &[Vocabulary] {
        &self.vocabularies
    }

    pub fn dim(&self) -> usize {
        self.vocabularies.iter().map(Vocabulary::len).sum()
    }

    pub fn vectorize(&self, tokens: &TokenSequence) -> SparseVector {
        let mut entries = Vec::new();
        let mut offset = 0;
        for v in &self.vocabularies {
            entries.extend(tfidf_vector(tokens, v).iter().map(|(i, w)| (i + offset, w)));
            offset += v.len();
        }
        let mut out = SparseVector { dim: offset, entries };
        out.normalize();
        out
    }
}
