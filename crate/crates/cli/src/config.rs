//! Run configuration: a TOML file with sections, overridden by flags.
//!
//! ```toml
//! seed = 7
//! model = "pac"
//!
//! [paths]
//! dataset = "data/train.tsv"
//! valid = "data/valid.tsv"
//! out = "models/pac.fnd"
//!
//! [features]
//! mode = "tfidf"
//! word_ngram = [1, 2]
//! char_max_features = 0     # 0 drops the character block
//!
//! [sequence]
//! epochs = 5
//! early_stopping = false
//! ```
//!
//! Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use infodemic_core::ensemble::TieBreak;
use infodemic_core::features::VocabConfig;
use infodemic_core::model::{FeatureMode, ModelKind, TrainSettings};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::io::read_text;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    model: Option<String>,
    #[serde(default)]
    paths: PathsSection,
    #[serde(default)]
    pipeline: PipelineSection,
    #[serde(default)]
    features: FeaturesSection,
    #[serde(default)]
    linear: LinearSection,
    #[serde(default)]
    mlp: MlpSection,
    #[serde(default)]
    sequence: SequenceSection,
    #[serde(default)]
    encoder: EncoderSection,
    #[serde(default)]
    ensemble: EnsembleSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    dataset: Option<PathBuf>,
    valid: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    out: Option<PathBuf>,
    stopwords: Option<PathBuf>,
    predictions: Option<Vec<PathBuf>>,
    misclassified: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineSection {
    emoticons: Option<bool>,
    hashtags: Option<bool>,
    stemming: Option<bool>,
    cleaning: Option<bool>,
    keep_hashtag_digits: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturesSection {
    mode: Option<String>,
    word_ngram: Option<[usize; 2]>,
    word_max_features: Option<usize>,
    char_ngram: Option<[usize; 2]>,
    char_max_features: Option<usize>,
    average_over_known: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearSection {
    epochs: Option<usize>,
    lr: Option<f64>,
    c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpSection {
    hidden: Option<Vec<usize>>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    patience: Option<usize>,
    early_stopping: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceSection {
    embedding_dim: Option<usize>,
    hidden: Option<usize>,
    dropout: Option<f64>,
    filters: Option<usize>,
    kernel_widths: Option<Vec<usize>>,
    max_len: Option<usize>,
    freeze_embeddings: Option<bool>,
    vocab_size: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    patience: Option<usize>,
    early_stopping: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderSection {
    layers: Option<usize>,
    heads: Option<usize>,
    d_model: Option<usize>,
    d_ffn: Option<usize>,
    max_len: Option<usize>,
    dropout: Option<f64>,
    rel_clip: Option<usize>,
    vocab_size: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    patience: Option<usize>,
    early_stopping: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSection {
    members: Option<Vec<PathBuf>>,
    tie: Option<String>,
}

/// Paths a command may need. Which ones are required depends on the command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub predictions: Vec<PathBuf>,
    pub misclassified: Option<PathBuf>,
    pub members: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub settings: TrainSettings,
    pub paths: Paths,
    pub tie: TieBreak,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { model: None, settings: TrainSettings::default(), paths: Paths::default(), tie: TieBreak::Fake }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn patience(current: Option<usize>, patience: Option<usize>, early_stopping: Option<bool>) -> Option<usize> {
    match early_stopping {
        Some(false) => None,
        _ => patience.or(current).or(Some(2)),
    }
}

pub fn parse_model(name: &str) -> Result<ModelKind> {
    ModelKind::parse(name).ok_or_else(|| {
        let known: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
        CliError::Config(format!("unknown model `{name}` (known: {})", known.join(", ")))
    })
}

pub fn parse_tie(name: &str) -> Result<TieBreak> {
    match name {
        "fake" => Ok(TieBreak::Fake),
        "real" => Ok(TieBreak::Real),
        _ => Err(CliError::Config(format!("tie must be `fake` or `real`, not `{name}`"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = read_text(path).map_err(|e| CliError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::from_toml(&text, base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        let s = &mut cfg.settings;
        set(&mut s.seed, file.seed);
        cfg.model = file.model.as_deref().map(parse_model).transpose()?;

        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let p = file.paths;
        cfg.paths = Paths {
            dataset: p.dataset.map(resolve),
            valid: p.valid.map(resolve),
            embeddings: p.embeddings.map(resolve),
            out: p.out.map(resolve),
            stopwords: p.stopwords.map(resolve),
            predictions: p.predictions.unwrap_or_default().into_iter().map(resolve).collect(),
            misclassified: p.misclassified.map(resolve),
            members: file.ensemble.members.unwrap_or_default().into_iter().map(resolve).collect(),
        };
        if let Some(t) = file.ensemble.tie {
            cfg.tie = parse_tie(&t)?;
        }

        let pl = file.pipeline;
        set(&mut s.pipeline.emoticons, pl.emoticons);
        set(&mut s.pipeline.hashtags, pl.hashtags);
        set(&mut s.pipeline.stemming, pl.stemming);
        set(&mut s.pipeline.cleaning, pl.cleaning);
        set(&mut s.pipeline.keep_hashtag_digits, pl.keep_hashtag_digits);

        let f = file.features;
        if let Some(mode) = f.mode {
            s.features.mode = FeatureMode::parse(&mode)
                .ok_or_else(|| CliError::Config(format!("unknown feature mode `{mode}` (tfidf, weighted_embedding)")))?;
        }
        if let Some([lo, hi]) = f.word_ngram {
            s.features.word.ngram_min = lo;
            s.features.word.ngram_max = hi;
        }
        set(&mut s.features.word.max_features, f.word_max_features);
        let mut chars = s.features.chars.unwrap_or(VocabConfig::chars(2, 5, 50_000));
        if let Some([lo, hi]) = f.char_ngram {
            chars.ngram_min = lo;
            chars.ngram_max = hi;
        }
        set(&mut chars.max_features, f.char_max_features);
        s.features.chars = (chars.max_features > 0).then_some(chars);
        set(&mut s.features.average_over_known, f.average_over_known);
        s.features.word.validate()?;
        if let Some(c) = &s.features.chars {
            c.validate()?;
        }

        let l = file.linear;
        set(&mut s.linear.epochs, l.epochs);
        set(&mut s.linear.lr, l.lr);
        set(&mut s.linear.c, l.c);

        let m = file.mlp;
        set(&mut s.mlp.hidden, m.hidden);
        set(&mut s.mlp.epochs, m.epochs);
        set(&mut s.mlp.lr, m.lr);
        set(&mut s.mlp.batch_size, m.batch_size);
        if m.patience.is_some() || m.early_stopping.is_some() {
            s.mlp.patience = patience(s.mlp.patience, m.patience, m.early_stopping);
        }

        let q = file.sequence;
        set(&mut s.sequence.embedding_dim, q.embedding_dim);
        set(&mut s.sequence.hidden, q.hidden);
        set(&mut s.sequence.dropout, q.dropout);
        set(&mut s.sequence.filters, q.filters);
        if q.kernel_widths.is_some() {
            s.sequence.kernel_widths = q.kernel_widths;
        }
        set(&mut s.sequence.max_len, q.max_len);
        set(&mut s.sequence.freeze_embeddings, q.freeze_embeddings);
        set(&mut s.sequence.vocab_size, q.vocab_size);
        set(&mut s.sequence.epochs, q.epochs);
        set(&mut s.sequence.batch_size, q.batch_size);
        set(&mut s.sequence.lr, q.lr);
        if q.patience.is_some() || q.early_stopping.is_some() {
            s.sequence.patience = patience(s.sequence.patience, q.patience, q.early_stopping);
        }

        let e = file.encoder;
        set(&mut s.encoder.layers, e.layers);
        set(&mut s.encoder.heads, e.heads);
        set(&mut s.encoder.d_model, e.d_model);
        set(&mut s.encoder.d_ffn, e.d_ffn);
        set(&mut s.encoder.max_len, e.max_len);
        set(&mut s.encoder.dropout, e.dropout);
        set(&mut s.encoder.rel_clip, e.rel_clip);
        set(&mut s.encoder.vocab_size, e.vocab_size);
        set(&mut s.encoder.epochs, e.epochs);
        if e.batch_size.is_some() {
            s.encoder.batch_size = e.batch_size;
        }
        set(&mut s.encoder.lr, e.lr);
        if e.patience.is_some() || e.early_stopping.is_some() {
            s.encoder.patience = patience(s.encoder.patience, e.patience, e.early_stopping);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infodemic_core::classifiers::LinearKind;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("", Path::new("")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn sections_apply() {
        let text = r#"
            seed = 9
            model = "svm"
            [paths]
            dataset = "train.tsv"
            out = "/abs/model.fnd"
            [pipeline]
            stemming = false
            [features]
            word_ngram = [1, 1]
            char_max_features = 0
            [sequence]
            early_stopping = false
            [ensemble]
            members = ["a.fnd", "b.fnd"]
            tie = "real"
        "#;
        let cfg = RunConfig::from_toml(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.settings.seed, 9);
        assert_eq!(cfg.model, Some(ModelKind::Linear(LinearKind::Svm)));
        assert_eq!(cfg.paths.dataset.as_deref(), Some(Path::new("/base/train.tsv")));
        assert_eq!(cfg.paths.out.as_deref(), Some(Path::new("/abs/model.fnd")));
        assert_eq!(cfg.paths.members.len(), 2);
        assert!(!cfg.settings.pipeline.stemming);
        assert_eq!(cfg.settings.features.word.ngram_max, 1);
        assert_eq!(cfg.settings.features.chars, None);
        assert_eq!(cfg.settings.sequence.patience, None);
        assert_eq!(cfg.tie, TieBreak::Real);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(matches!(RunConfig::from_toml("sede = 1", Path::new("")), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml("model = \"xgboost\"", Path::new("")), Err(CliError::Config(_))));
        assert!(RunConfig::from_toml("[features]\nword_ngram = [3, 1]", Path::new("")).is_err());
    }
}
