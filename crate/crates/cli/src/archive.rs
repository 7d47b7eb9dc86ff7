//! Model archive: one file holding everything needed to predict.
//!
//! # Layout
//!
//! All integers are little-endian. A string is a `u32` byte length followed by
//! UTF-8 bytes.
//!
//! ```text
//! magic     8 bytes   "FNDARCH\0"
//! version   u32       1
//! sections  u32       number of sections
//! then per section:
//!   name      string
//!   length    u64     payload bytes
//!   payload
//! ```
//!
//! Sections, in this order:
//!
//! - `kind`: the model kind name as UTF-8 (`pac`, `bilstm_attn`, ...).
//! - `config`: `key=value` lines sorted by key. Holds the pipeline toggles,
//!   feature mode, architecture sizes and the training settings used.
//! - `vocab.0`, `vocab.1`, ...: one per vocabulary. Analyzer name (string),
//!   n-gram min and max (`u32`), max features, document count and entry count
//!   (`u64`), then per entry the feature (string) and its document
//!   frequency (`u64`), in index order. TF-IDF models store the word then
//!   character vocabulary; token-id models store their unigram index.
//! - `embeddings` (weighted-embedding features only): dimension (`u32`), row
//!   count (`u64`), then per row the token (string) and `dim` `f32` values.
//! - `params`: count (`u32`), then per parameter its name (string), rank
//!   (`u32`), each dimension (`u32`) and the values as `f32`, row-major.
//!   Linear models store `w` (1 x dim) and `b` (1 x 1).
//! - `history`: the per-epoch TSV (`epoch`, `train_loss`, `valid_f1`).
//!
//! Nothing time- or host-dependent is written, so equal models give equal
//! bytes, and loading then saving reproduces the input exactly.

use std::collections::BTreeMap;
use std::path::Path;

use infodemic_core::classifiers::{LinearKind, LinearModel, MlpConfig, MlpModel};
use infodemic_core::features::{Analyzer, EmbeddingTable, FeatureSpace, VocabConfig, Vocabulary};
use infodemic_core::model::{assign_params, Classifier, FeatureExtractor, FeatureMode, ModelKind, TrainSettings, TrainedModel};
use infodemic_core::nn::{ParamStore, Tensor};
use infodemic_core::preprocess::PipelineConfig;
use infodemic_core::sequence::{SequenceConfig, SequenceModel, TokenIndex};
use infodemic_core::training::{History, Trainable};
use infodemic_core::transformer::{EncoderConfig, EncoderModel};

use crate::error::{CliError, Result};
use crate::io::{read_bytes, write_atomic};

pub const MAGIC: [u8; 8] = *b"FNDARCH\0";
pub const VERSION: u32 = 1;

type Decode<T> = std::result::Result<T, String>;

/// Raw named sections, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Container {
    pub sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn push(&mut self, name: &str, payload: Vec<u8>) {
        self.sections.push((name.to_string(), payload));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, p)| p.as_slice())
    }

    fn require(&self, name: &str) -> Decode<&[u8]> {
        self.get(name).ok_or_else(|| format!("missing section `{name}`"))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(&MAGIC);
        w.u32(VERSION);
        w.u32(self.sections.len() as u32);
        for (name, payload) in &self.sections {
            w.str(name);
            w.u64(payload.len() as u64);
            w.buf.extend_from_slice(payload);
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Decode<Container> {
        if bytes.len() < 8 || bytes[..8] != MAGIC {
            return Err("not a model archive (bad magic)".into());
        }
        let mut r = Reader::new(&bytes[8..]);
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("archive version {version} is not supported (expected {VERSION})"));
        }
        let count = r.u32()?;
        let mut out = Container::default();
        for _ in 0..count {
            let name = r.string()?;
            let len = usize::try_from(r.u64()?).map_err(|_| "section too large".to_string())?;
            out.push(&name, r.take(len)?.to_vec());
        }
        r.finish()?;
        Ok(out)
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32s(&mut self, values: &[f32]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Reader<'a> {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Decode<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated archive")?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Decode<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Decode<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Decode<usize> {
        usize::try_from(self.u64()?).map_err(|_| "count out of range".to_string())
    }

    fn f32s(&mut self, n: usize) -> Decode<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or("count out of range")?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn string(&mut self) -> Decode<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "string is not UTF-8".to_string())
    }

    fn finish(&self) -> Decode<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.bytes.len() - self.pos))
        }
    }
}

fn encode_vocab(v: &Vocabulary) -> Vec<u8> {
    let c = v.config();
    let mut w = Writer::default();
    w.str(c.analyzer.as_str());
    w.u32(c.ngram_min as u32);
    w.u32(c.ngram_max as u32);
    w.u64(c.max_features as u64);
    w.u64(v.total_documents() as u64);
    w.u64(v.len() as u64);
    for (feature, df) in v.entries() {
        w.str(feature);
        w.u64(df as u64);
    }
    w.buf
}

fn decode_vocab(bytes: &[u8]) -> Decode<Vocabulary> {
    let mut r = Reader::new(bytes);
    let analyzer_name = r.string()?;
    let analyzer = Analyzer::parse(&analyzer_name).ok_or_else(|| format!("unknown analyzer `{analyzer_name}`"))?;
    let ngram_min = r.u32()? as usize;
    let ngram_max = r.u32()? as usize;
    let max_features = r.usize()?;
    let total = r.usize()?;
    let n = r.usize()?;
    let mut entries = Vec::with_capacity(n.min(bytes.len()));
    for _ in 0..n {
        let f = r.string()?;
        entries.push((f, r.usize()?));
    }
    r.finish()?;
    let config = VocabConfig { analyzer, ngram_min, ngram_max, max_features };
    Vocabulary::from_parts(config, entries, total).map_err(|e| e.to_string())
}

fn encode_embeddings(t: &EmbeddingTable) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(t.dim() as u32);
    w.u64(t.len() as u64);
    for tok in t.tokens() {
        w.str(tok);
        w.f32s(t.get(tok).expect("listed token"));
    }
    w.buf
}

fn decode_embeddings(bytes: &[u8]) -> Decode<EmbeddingTable> {
    let mut r = Reader::new(bytes);
    let dim = r.u32()? as usize;
    let n = r.usize()?;
    let mut t = EmbeddingTable::new(dim).map_err(|e| e.to_string())?;
    for _ in 0..n {
        let tok = r.string()?;
        let v = r.f32s(dim)?;
        if !t.insert(&tok, &v).map_err(|e| e.to_string())? {
            return Err(format!("duplicate embedding token `{tok}`"));
        }
    }
    r.finish()?;
    Ok(t)
}

fn encode_params(params: &[(&str, &Tensor<f32>)]) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(params.len() as u32);
    for (name, t) in params {
        w.str(name);
        w.u32(t.shape().len() as u32);
        for &d in t.shape() {
            w.u32(d as u32);
        }
        w.f32s(t.data());
    }
    w.buf
}

fn decode_params(bytes: &[u8]) -> Decode<Vec<(String, Tensor<f32>)>> {
    let mut r = Reader::new(bytes);
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let mut shape = Vec::new();
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("parameter too large")?;
        let values = r.f32s(n)?;
        out.push((name, Tensor::new(shape, values).map_err(|e| e.to_string())?));
    }
    r.finish()?;
    Ok(out)
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn list(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Key-value snapshot of everything that shaped the model.
fn snapshot(clf: &Classifier, settings: &TrainSettings, history: &History) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        c.insert(k.to_string(), v);
    };
    put("seed", settings.seed.to_string());
    let p = clf.pipeline();
    put("pipeline.emoticons", flag(p.emoticons));
    put("pipeline.hashtags", flag(p.hashtags));
    put("pipeline.stemming", flag(p.stemming));
    put("pipeline.cleaning", flag(p.cleaning));
    put("pipeline.keep_hashtag_digits", flag(p.keep_hashtag_digits));
    put("history.best_epoch", history.best_epoch.to_string());
    if let Some(fx) = clf.features() {
        put("features.mode", fx.mode().as_str().to_string());
        if let FeatureExtractor::WeightedEmbedding { average_over_known, .. } = fx {
            put("features.average_over_known", flag(*average_over_known));
        }
    }
    match clf.model() {
        TrainedModel::Linear(_) => {
            let l = &settings.linear;
            put("linear.epochs", l.epochs.to_string());
            put("linear.lr", l.lr.to_string());
            put("linear.c", l.c.to_string());
        }
        TrainedModel::Mlp(m) => {
            let cfg = &m.config;
            put("mlp.hidden", list(&cfg.hidden));
            put("mlp.epochs", cfg.epochs.to_string());
            put("mlp.lr", cfg.lr.to_string());
            put("mlp.batch_size", cfg.batch_size.to_string());
            put("mlp.patience", opt(cfg.patience));
            put("mlp.seed", cfg.seed.to_string());
        }
        TrainedModel::Sequence(m) => {
            let cfg = m.config();
            let s = &settings.sequence;
            put("sequence.embedding_dim", cfg.embedding_dim.to_string());
            put("sequence.hidden", cfg.hidden.to_string());
            put("sequence.dropout", cfg.dropout.to_string());
            put("sequence.kernel_widths", list(&cfg.kernel_widths));
            put("sequence.filters", cfg.filters.to_string());
            put("sequence.max_len", cfg.max_len.to_string());
            put("sequence.freeze_embeddings", flag(cfg.freeze_embeddings));
            put("sequence.seed", cfg.seed.to_string());
            put("sequence.vocab_size", s.vocab_size.to_string());
            put("sequence.epochs", s.epochs.to_string());
            put("sequence.batch_size", s.batch_size.to_string());
            put("sequence.lr", s.lr.to_string());
            put("sequence.patience", opt(s.patience));
        }
        TrainedModel::Encoder(m) => {
            let cfg = m.config();
            let e = &settings.encoder;
            put("encoder.layers", cfg.layers.to_string());
            put("encoder.heads", cfg.heads.to_string());
            put("encoder.d_model", cfg.d_model.to_string());
            put("encoder.d_ffn", cfg.d_ffn.to_string());
            put("encoder.max_len", cfg.max_len.to_string());
            put("encoder.dropout", cfg.dropout.to_string());
            put("encoder.rel_clip", cfg.rel_clip.to_string());
            put("encoder.seed", cfg.seed.to_string());
            put("encoder.vocab_size", e.vocab_size.to_string());
            put("encoder.epochs", e.epochs.to_string());
            put("encoder.batch_size", e.batch_size.unwrap_or(cfg.variant.default_batch_size()).to_string());
            put("encoder.lr", e.lr.to_string());
            put("encoder.patience", opt(e.patience));
        }
    }
    c
}

struct ConfigView<'a>(&'a BTreeMap<String, String>);

impl ConfigView<'_> {
    fn raw(&self, key: &str) -> Decode<&str> {
        self.0.get(key).map(String::as_str).ok_or_else(|| format!("config is missing `{key}`"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Decode<T> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| format!("config `{key}` has bad value `{raw}`"))
    }

    fn list(&self, key: &str) -> Decode<Vec<usize>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',').map(|v| v.parse().map_err(|_| format!("config `{key}` has bad value `{raw}`"))).collect()
    }

    fn opt(&self, key: &str) -> Decode<Option<usize>> {
        match self.raw(key)? {
            "none" => Ok(None),
            _ => self.parse(key).map(Some),
        }
    }
}

fn parse_config(bytes: &[u8]) -> Decode<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).map_err(|_| "config is not UTF-8".to_string())?;
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| format!("bad config line `{line}`"))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn render_config(config: &BTreeMap<String, String>) -> Vec<u8> {
    config.iter().map(|(k, v)| format!("{k}={v}\n")).collect::<String>().into_bytes()
}

fn named_params(store: &ParamStore<f32>) -> Vec<(&str, &Tensor<f32>)> {
    store.iter().map(|p| (p.name.as_str(), &p.value)).collect()
}

/// A classifier plus the metadata stored alongside it.
#[derive(Debug, Clone)]
pub struct ModelArchive {
    pub classifier: Classifier,
    pub config: BTreeMap<String, String>,
    pub history: String,
}

impl ModelArchive {
    pub fn new(classifier: Classifier, settings: &TrainSettings, history: &History) -> ModelArchive {
        let config = snapshot(&classifier, settings, history);
        ModelArchive { classifier, config, history: history.to_tsv() }
    }

    pub fn to_container(&self) -> Container {
        let clf = &self.classifier;
        let mut c = Container::default();
        c.push("kind", clf.kind().as_str().as_bytes().to_vec());
        c.push("config", render_config(&self.config));
        let vocabs: Vec<&Vocabulary> = match (clf.features(), clf.model().token_index()) {
            (Some(FeatureExtractor::Tfidf(space)), _) => space.vocabularies().iter().collect(),
            (Some(FeatureExtractor::WeightedEmbedding { vocab, .. }), _) => vec![vocab],
            (None, Some(index)) => vec![index.vocabulary()],
            (None, None) => Vec::new(),
        };
        for (i, v) in vocabs.iter().enumerate() {
            c.push(&format!("vocab.{i}"), encode_vocab(v));
        }
        if let Some(FeatureExtractor::WeightedEmbedding { table, .. }) = clf.features() {
            c.push("embeddings", encode_embeddings(table));
        }
        let params = match clf.model() {
            TrainedModel::Linear(m) => {
                let w = Tensor::matrix(1, m.weights.len(), m.weights.clone()).expect("row vector");
                let b = Tensor::matrix(1, 1, vec![m.bias]).expect("scalar");
                encode_params(&[("w", &w), ("b", &b)])
            }
            other => encode_params(&named_params(other.params().expect("gradient-trained model"))),
        };
        c.push("params", params);
        c.push("history", self.history.clone().into_bytes());
        c
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().encode()
    }

    pub fn from_bytes(bytes: &[u8]) -> Decode<ModelArchive> {
        let c = Container::decode(bytes)?;
        let kind_name = std::str::from_utf8(c.require("kind")?).map_err(|_| "kind is not UTF-8".to_string())?;
        let kind = ModelKind::parse(kind_name).ok_or_else(|| format!("unknown model kind `{kind_name}`"))?;
        let config = parse_config(c.require("config")?)?;
        let history = String::from_utf8(c.require("history")?.to_vec()).map_err(|_| "history is not UTF-8".to_string())?;
        let cv = ConfigView(&config);

        let pipeline = PipelineConfig {
            emoticons: cv.parse("pipeline.emoticons")?,
            hashtags: cv.parse("pipeline.hashtags")?,
            stemming: cv.parse("pipeline.stemming")?,
            cleaning: cv.parse("pipeline.cleaning")?,
            keep_hashtag_digits: cv.parse("pipeline.keep_hashtag_digits")?,
        };
        let mut vocabs = Vec::new();
        while let Some(bytes) = c.get(&format!("vocab.{}", vocabs.len())) {
            vocabs.push(decode_vocab(bytes)?);
        }
        let params = decode_params(c.require("params")?)?;
        let core = |e: infodemic_core::Error| e.to_string();

        let features = if kind.uses_feature_vectors() {
            let mode_name = cv.raw("features.mode")?;
            let mode = FeatureMode::parse(mode_name).ok_or_else(|| format!("unknown feature mode `{mode_name}`"))?;
            Some(match mode {
                FeatureMode::Tfidf => FeatureExtractor::Tfidf(FeatureSpace::from_vocabularies(vocabs).map_err(core)?),
                FeatureMode::WeightedEmbedding => {
                    let [vocab]: [Vocabulary; 1] =
                        vocabs.try_into().map_err(|_| "weighted-embedding model needs exactly one vocabulary".to_string())?;
                    let table = decode_embeddings(c.require("embeddings")?)?;
                    FeatureExtractor::WeightedEmbedding { vocab, table, average_over_known: cv.parse("features.average_over_known")? }
                }
            })
        } else {
            None
        };
        let token_index = || -> Decode<TokenIndex> {
            let [vocab]: [Vocabulary; 1] = vocabs_for_index(&c)?;
            TokenIndex::from_vocabulary(vocab).map_err(core)
        };

        let model = match kind {
            ModelKind::Linear(k) => TrainedModel::Linear(linear_from_params(k, params)?),
            ModelKind::Mlp => {
                let cfg = MlpConfig {
                    hidden: cv.list("mlp.hidden")?,
                    epochs: cv.parse("mlp.epochs")?,
                    lr: cv.parse("mlp.lr")?,
                    batch_size: cv.parse("mlp.batch_size")?,
                    seed: cv.parse("mlp.seed")?,
                    patience: cv.opt("mlp.patience")?,
                };
                let dim = features.as_ref().map_or(0, FeatureExtractor::dim);
                let mut m = MlpModel::new(cfg, dim).map_err(core)?;
                assign_params(m.params_mut(), params).map_err(core)?;
                TrainedModel::Mlp(m)
            }
            ModelKind::Sequence(arch) => {
                let cfg = SequenceConfig {
                    arch,
                    embedding_dim: cv.parse("sequence.embedding_dim")?,
                    hidden: cv.parse("sequence.hidden")?,
                    dropout: cv.parse("sequence.dropout")?,
                    kernel_widths: cv.list("sequence.kernel_widths")?,
                    filters: cv.parse("sequence.filters")?,
                    max_len: cv.parse("sequence.max_len")?,
                    freeze_embeddings: cv.parse("sequence.freeze_embeddings")?,
                    seed: cv.parse("sequence.seed")?,
                };
                let mut m = SequenceModel::new(cfg, token_index()?, None).map_err(core)?;
                assign_params(m.params_mut(), params).map_err(core)?;
                TrainedModel::Sequence(m)
            }
            ModelKind::Encoder(variant) => {
                let cfg = EncoderConfig {
                    variant,
                    layers: cv.parse("encoder.layers")?,
                    heads: cv.parse("encoder.heads")?,
                    d_model: cv.parse("encoder.d_model")?,
                    d_ffn: cv.parse("encoder.d_ffn")?,
                    max_len: cv.parse("encoder.max_len")?,
                    dropout: cv.parse("encoder.dropout")?,
                    rel_clip: cv.parse("encoder.rel_clip")?,
                    seed: cv.parse("encoder.seed")?,
                };
                let mut m = EncoderModel::new(cfg, token_index()?).map_err(core)?;
                assign_params(m.params_mut(), params).map_err(core)?;
                TrainedModel::Encoder(m)
            }
        };
        let classifier = Classifier::from_parts(pipeline, features, model).map_err(core)?;
        Ok(ModelArchive { classifier, config, history })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<ModelArchive> {
        let bytes = read_bytes(path)?;
        ModelArchive::from_bytes(&bytes).map_err(|reason| CliError::Archive { path: path.into(), reason })
    }
}

fn vocabs_for_index(c: &Container) -> Decode<[Vocabulary; 1]> {
    match (c.get("vocab.0"), c.get("vocab.1")) {
        (Some(bytes), None) => Ok([decode_vocab(bytes)?]),
        _ => Err("token-id model needs exactly one vocabulary".into()),
    }
}

fn linear_from_params(kind: LinearKind, params: Vec<(String, Tensor<f32>)>) -> Decode<LinearModel> {
    let mut w = None;
    let mut b = None;
    for (name, t) in params {
        match name.as_str() {
            "w" if t.rows() == 1 => w = Some(t.into_data()),
            "b" if t.len() == 1 => b = Some(t.data()[0]),
            _ => return Err(format!("unexpected linear parameter `{name}` {:?}", t.shape())),
        }
    }
    match (w, b) {
        (Some(weights), Some(bias)) => Ok(LinearModel { kind, weights, bias }),
        _ => Err("linear model needs `w` and `b`".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip() {
        let mut c = Container::default();
        c.push("a", vec![1, 2, 3]);
        c.push("empty", Vec::new());
        let bytes = c.encode();
        assert_eq!(&bytes[..8], b"FNDARCH\0");
        assert_eq!(Container::decode(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        let mut bytes = Container::default().encode();
        bytes[8] = 2;
        assert!(Container::decode(&bytes).unwrap_err().contains("version 2"));
        let mut c = Container::default();
        c.push("a", vec![0; 16]);
        let bytes = c.encode();
        assert!(Container::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::decode(b"PK\x03\x04").is_err());
    }

    #[test]
    fn params_round_trip() {
        let t = Tensor::matrix(2, 3, vec![1.0f32, -0.5, 0.25, 3.0, f32::MIN_POSITIVE, 7.0]).unwrap();
        let bytes = encode_params(&[("x", &t)]);
        let back = decode_params(&bytes).unwrap();
        assert_eq!(back, vec![("x".to_string(), t)]);
    }

    #[test]
    fn vocab_round_trip() {
        let v = Vocabulary::from_parts(VocabConfig::chars(2, 3, 10), vec![(" a".into(), 2), ("ab".into(), 1)], 3).unwrap();
        assert_eq!(decode_vocab(&encode_vocab(&v)).unwrap(), v);
    }
}
