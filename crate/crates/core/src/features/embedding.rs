use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::vocab::{tfidf_vector, Analyzer, Vocabulary};
use crate::preprocess::TokenSequence;
use crate::{Error, Result};

/// A dense real vector (document representation).
pub type DenseVector = Vec<f64>;

/// Token to fixed-dimension vector map, stored row-major in `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<EmbeddingTable> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable { dim, index: BTreeMap::new(), tokens: Vec::new(), data: Vec::new() })
    }

    /// Parses the whitespace text format (`token v1 .. vd` per line).
    /// Returns the table and the 1-based line numbers of ignored duplicates.
    pub fn parse(content: &str, expected_dim: Option<usize>) -> Result<(EmbeddingTable, Vec<usize>)> {
        let mut builder = EmbeddingTableBuilder::new(expected_dim);
        for line in content.lines() {
            builder.push_line(line)?;
        }
        builder.finish()
    }

    /// Appends a vector; returns `false` (and keeps the old one) on a duplicate token.
    pub fn insert(&mut self, token: &str, vector: &[f32]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// A copy keeping only the given tokens (those present), in the given order.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a str>) -> EmbeddingTable {
        let mut out = EmbeddingTable { dim: self.dim, index: BTreeMap::new(), tokens: Vec::new(), data: Vec::new() };
        for tok in keep {
            if let Some(v) = self.get(tok) {
                out.insert(tok, v).expect("same dimension");
            }
        }
        out
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f32) -> EmbeddingTable {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= factor;
        }
        out
    }
}

/// Incremental line-by-line loader, so large files can be streamed.
#[derive(Debug)]
pub struct EmbeddingTableBuilder {
    dim: Option<usize>,
    table: Option<EmbeddingTable>,
    line: usize,
    duplicates: Vec<usize>,
    scratch: Vec<f32>,
}

impl EmbeddingTableBuilder {
    pub fn new(expected_dim: Option<usize>) -> EmbeddingTableBuilder {
        EmbeddingTableBuilder { dim: expected_dim, table: None, line: 0, duplicates: Vec::new(), scratch: Vec::new() }
    }

    /// Feeds one line. Blank lines are skipped; a leading `count dim` header
    /// line (word2vec/fastText `.vec` style) fixes the dimension.
    pub fn push_line(&mut self, line: &str) -> Result<()> {
        self.line += 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { return Ok(()) };
        self.scratch.clear();
        let rest: Vec<&str> = fields.collect();
        if self.line == 1 && rest.len() == 1 && token.parse::<usize>().is_ok() {
            if let Ok(d) = rest[0].parse::<usize>() {
                if self.dim.is_some_and(|e| e != d) {
                    return Err(Error::EmbeddingDimension { line: 1, expected: self.dim.unwrap_or(0), found: d });
                }
                self.dim = Some(d);
                return Ok(());
            }
        }
        let dim = *self.dim.get_or_insert(rest.len());
        if rest.len() != dim || dim == 0 {
            return Err(Error::EmbeddingDimension { line: self.line, expected: dim, found: rest.len() });
        }
        for field in rest {
            let v: f32 = field
                .parse()
                .ok()
                .filter(|v: &f32| v.is_finite())
                .ok_or_else(|| Error::EmbeddingValue { line: self.line, value: field.to_string() })?;
            self.scratch.push(v);
        }
        let table = match &mut self.table {
            Some(t) => t,
            None => self.table.insert(EmbeddingTable::new(dim)?),
        };
        if !table.insert(token, &self.scratch)? {
            self.duplicates.push(self.line);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(EmbeddingTable, Vec<usize>)> {
        let table = match (self.table, self.dim) {
            (Some(t), _) => t,
            (None, Some(d)) => EmbeddingTable::new(d)?,
            (None, None) => return Err(Error::EmbeddingDimensionUnknown),
        };
        Ok((table, self.duplicates))
    }
}

/// `(sum_i weight(token_i) * embed(token_i)) / N` over the token occurrences.
///
/// Tokens without a weight or without an embedding contribute zero. `N` is the
/// full token count, or the count of contributing tokens when
/// `average_over_known` is set. Empty input gives the zero vector.
pub fn weighted_average(
    tokens: &[String],
    weight: impl Fn(&str) -> Option<f64>,
    table: &EmbeddingTable,
    average_over_known: bool,
) -> DenseVector {
    let mut out = vec![0.0; table.dim()];
    let mut known = 0usize;
    for tok in tokens {
        let (Some(w), Some(e)) = (weight(tok), table.get(tok)) else { continue };
        known += 1;
        for (o, &x) in out.iter_mut().zip(e) {
            *o += w * f64::from(x);
        }
    }
    let n = if average_over_known { known } else { tokens.len() };
    if n > 0 {
        let n = n as f64;
        for o in &mut out {
            *o /= n;
        }
    }
    out
}

/// TF-IDF weighted embedding average of a document. The weights are the
/// entries of the document's L2-normalized unigram TF-IDF vector.
pub fn weighted_average_embedding(
    tokens: &TokenSequence,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    average_over_known: bool,
) -> Result<DenseVector> {
    let cfg = vocab.config();
    if cfg.analyzer != Analyzer::Word || cfg.ngram_min != 1 {
        return Err(Error::InvalidConfig("weighted embeddings need a word vocabulary with unigrams".into()));
    }
    let tfidf = tfidf_vector(tokens, vocab);
    Ok(weighted_average(
        &tokens.tokens,
        |tok| vocab.index_of(tok).map(|i| tfidf.get(i)),
        table,
        average_over_known,
    ))
}
