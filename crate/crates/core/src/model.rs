//! A trained model of any family together with the preprocessing and feature
//! extraction it was trained with: text in, probabilities out.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classifiers::{train_linear, train_mlp, LinearConfig, LinearKind, LinearModel, MlpConfig, MlpModel};
use crate::corpus::Corpus;
use crate::ensemble::ProbVector;
use crate::features::{
    build_vocabulary, weighted_average_embedding, EmbeddingTable, FeatureSpace, Features, VocabConfig, Vocabulary,
};
use crate::nn::{ParamStore, Tensor};
use crate::preprocess::{PipelineConfig, Preprocessor, TokenSequence};
use crate::sequence::{train_sequence_model, SequenceArch, SequenceConfig, SequenceModel, TokenIndex};
use crate::training::{History, TrainConfig, Trainable};
use crate::transformer::{train_encoder, EncoderConfig, EncoderModel, EncoderVariant};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear(LinearKind),
    Mlp,
    Sequence(SequenceArch),
    Encoder(EncoderVariant),
}

impl ModelKind {
    pub const ALL: [ModelKind; 11] = [
        ModelKind::Linear(LinearKind::Logreg),
        ModelKind::Linear(LinearKind::Svm),
        ModelKind::Linear(LinearKind::Pac),
        ModelKind::Mlp,
        ModelKind::Sequence(SequenceArch::Lstm),
        ModelKind::Sequence(SequenceArch::BilstmAttn),
        ModelKind::Sequence(SequenceArch::Cnn),
        ModelKind::Sequence(SequenceArch::CnnBilstm),
        ModelKind::Encoder(EncoderVariant::Standard),
        ModelKind::Encoder(EncoderVariant::SharedLayers),
        ModelKind::Encoder(EncoderVariant::RelativePosition),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear(k) => k.as_str(),
            ModelKind::Mlp => "mlp",
            ModelKind::Sequence(a) => a.as_str(),
            ModelKind::Encoder(EncoderVariant::Standard) => "encoder",
            ModelKind::Encoder(EncoderVariant::SharedLayers) => "encoder_shared",
            ModelKind::Encoder(EncoderVariant::RelativePosition) => "encoder_relative",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether the model reads TF-IDF or weighted-embedding vectors rather
    /// than token ids.
    pub fn uses_feature_vectors(self) -> bool {
        matches!(self, ModelKind::Linear(_) | ModelKind::Mlp)
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Tfidf,
    WeightedEmbedding,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Tfidf => "tfidf",
            FeatureMode::WeightedEmbedding => "weighted_embedding",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureMode> {
        match s {
            "tfidf" => Some(FeatureMode::Tfidf),
            "weighted_embedding" => Some(FeatureMode::WeightedEmbedding),
            _ => None,
        }
    }
}

/// Vector features for the linear models and the MLP. The default TF-IDF
/// space is word 1-2 grams next to character 2-5 grams, 50,000 features each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub mode: FeatureMode,
    pub word: VocabConfig,
    /// `None` leaves the character block out.
    pub chars: Option<VocabConfig>,
    pub average_over_known: bool,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            mode: FeatureMode::Tfidf,
            word: VocabConfig::words(1, 2, 50_000),
            chars: Some(VocabConfig::chars(2, 5, 50_000)),
            average_over_known: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSettings {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub filters: usize,
    /// `None` uses the architecture's default kernels.
    pub kernel_widths: Option<Vec<usize>>,
    pub max_len: usize,
    pub freeze_embeddings: bool,
    pub vocab_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: Option<usize>,
}

impl Default for SequenceSettings {
    fn default() -> Self {
        let c = SequenceConfig::new(SequenceArch::Lstm);
        SequenceSettings {
            embedding_dim: c.embedding_dim,
            hidden: c.hidden,
            dropout: c.dropout,
            filters: c.filters,
            kernel_widths: None,
            max_len: c.max_len,
            freeze_embeddings: false,
            vocab_size: 20_000,
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            patience: Some(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSettings {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub rel_clip: usize,
    pub vocab_size: usize,
    pub epochs: usize,
    /// `None` uses the variant default (16, or 32 for shared layers).
    pub batch_size: Option<usize>,
    pub lr: f64,
    pub patience: Option<usize>,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let c = EncoderConfig::new(EncoderVariant::Standard);
        EncoderSettings {
            layers: c.layers,
            heads: c.heads,
            d_model: c.d_model,
            d_ffn: c.d_ffn,
            max_len: c.max_len,
            dropout: c.dropout,
            rel_clip: c.rel_clip,
            vocab_size: 20_000,
            epochs: 10,
            batch_size: None,
            lr: 3e-4,
            patience: Some(2),
        }
    }
}

/// Everything that decides how a model is trained.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSettings {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub features: FeatureSettings,
    pub linear: LinearConfig,
    pub mlp: MlpConfig,
    pub sequence: SequenceSettings,
    pub encoder: EncoderSettings,
}

impl TrainSettings {
    pub fn sequence_config(&self, arch: SequenceArch, embedding_dim: usize) -> SequenceConfig {
        let s = &self.sequence;
        let defaults = SequenceConfig::new(arch);
        SequenceConfig {
            arch,
            embedding_dim,
            hidden: s.hidden,
            dropout: s.dropout,
            kernel_widths: s.kernel_widths.clone().unwrap_or(defaults.kernel_widths),
            filters: s.filters,
            max_len: s.max_len,
            freeze_embeddings: s.freeze_embeddings,
            seed: self.seed,
        }
    }

    pub fn encoder_config(&self, variant: EncoderVariant) -> EncoderConfig {
        let e = &self.encoder;
        EncoderConfig {
            variant,
            layers: e.layers,
            heads: e.heads,
            d_model: e.d_model,
            d_ffn: e.d_ffn,
            max_len: e.max_len,
            dropout: e.dropout,
            rel_clip: e.rel_clip,
            seed: self.seed,
        }
    }
}

/// Document to feature vector.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtractor {
    Tfidf(FeatureSpace),
    WeightedEmbedding { vocab: Vocabulary, table: EmbeddingTable, average_over_known: bool },
}

impl FeatureExtractor {
    pub fn extract(&self, doc: &TokenSequence) -> Result<Features> {
        match self {
            FeatureExtractor::Tfidf(space) => Ok(Features::Sparse(space.vectorize(doc))),
            FeatureExtractor::WeightedEmbedding { vocab, table, average_over_known } => {
                Ok(Features::Dense(weighted_average_embedding(doc, vocab, table, *average_over_known)?))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureExtractor::Tfidf(space) => space.dim(),
            FeatureExtractor::WeightedEmbedding { table, .. } => table.dim(),
        }
    }

    pub fn mode(&self) -> FeatureMode {
        match self {
            FeatureExtractor::Tfidf(_) => FeatureMode::Tfidf,
            FeatureExtractor::WeightedEmbedding { .. } => FeatureMode::WeightedEmbedding,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Linear(LinearModel),
    Mlp(MlpModel),
    Sequence(SequenceModel),
    Encoder(EncoderModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Linear(m) => ModelKind::Linear(m.kind),
            TrainedModel::Mlp(_) => ModelKind::Mlp,
            TrainedModel::Sequence(m) => ModelKind::Sequence(m.config().arch),
            TrainedModel::Encoder(m) => ModelKind::Encoder(m.config().variant),
        }
    }

    /// Parameters of the gradient-trained families.
    pub fn params(&self) -> Option<&ParamStore<f32>> {
        match self {
            TrainedModel::Linear(_) => None,
            TrainedModel::Mlp(m) => Some(m.params()),
            TrainedModel::Sequence(m) => Some(m.params()),
            TrainedModel::Encoder(m) => Some(m.params()),
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut ParamStore<f32>> {
        match self {
            TrainedModel::Linear(_) => None,
            TrainedModel::Mlp(m) => Some(m.params_mut()),
            TrainedModel::Sequence(m) => Some(m.params_mut()),
            TrainedModel::Encoder(m) => Some(m.params_mut()),
        }
    }

    /// The id vocabulary of the sequence and encoder families.
    pub fn token_index(&self) -> Option<&TokenIndex> {
        match self {
            TrainedModel::Sequence(m) => Some(m.index()),
            TrainedModel::Encoder(m) => Some(m.index()),
            _ => None,
        }
    }
}

/// Replaces every parameter value by name. The name sets must match exactly.
pub fn assign_params(store: &mut ParamStore<f32>, values: Vec<(String, Tensor<f32>)>) -> Result<()> {
    if values.len() != store.len() {
        return Err(Error::InvalidConfig(format!("expected {} parameters, found {}", store.len(), values.len())));
    }
    for (name, value) in values {
        store.set_value(&name, value)?;
    }
    Ok(())
}

/// A trained model bound to its preprocessing and feature extraction.
#[derive(Debug, Clone)]
pub struct Classifier {
    preprocessor: Preprocessor,
    features: Option<FeatureExtractor>,
    model: TrainedModel,
}

impl Classifier {
    /// Vector-feature models need an extractor whose dimension they accept;
    /// the other families take none.
    pub fn from_parts(pipeline: PipelineConfig, features: Option<FeatureExtractor>, model: TrainedModel) -> Result<Classifier> {
        let expected = match &model {
            TrainedModel::Linear(m) => Some(m.dim()),
            TrainedModel::Mlp(m) => Some(m.input_dim()),
            _ => None,
        };
        match (expected, &features) {
            (Some(dim), Some(f)) if f.dim() != dim => return Err(Error::DimensionMismatch { expected: dim, found: f.dim() }),
            (Some(_), None) => return Err(Error::InvalidConfig("this model needs a feature extractor".into())),
            (None, Some(_)) => return Err(Error::InvalidConfig("this model takes token ids, not feature vectors".into())),
            _ => {}
        }
        Ok(Classifier { preprocessor: Preprocessor::new(pipeline), features, model })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn pipeline(&self) -> &PipelineConfig {
        self.preprocessor.config()
    }

    pub fn features(&self) -> Option<&FeatureExtractor> {
        self.features.as_ref()
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn preprocess(&self, id: &str, text: &str) -> TokenSequence {
        self.preprocessor.process(text, id)
    }

    pub fn predict_tokens(&self, docs: &[TokenSequence]) -> Result<Vec<ProbVector>> {
        match &self.model {
            TrainedModel::Linear(m) => {
                let fx = self.features.as_ref().expect("checked at construction");
                docs.iter().map(|d| m.predict_proba(&fx.extract(d)?)).collect()
            }
            TrainedModel::Mlp(m) => {
                let fx = self.features.as_ref().expect("checked at construction");
                let xs: Vec<Features> = docs.iter().map(|d| fx.extract(d)).collect::<Result<_>>()?;
                m.predict_many(&xs.iter().collect::<Vec<_>>())
            }
            TrainedModel::Sequence(m) => {
                let ids: Vec<Vec<usize>> = docs.iter().map(|d| m.encode(d)).collect();
                m.predict_ids(&ids.iter().collect::<Vec<_>>())
            }
            TrainedModel::Encoder(m) => {
                let ids: Vec<Vec<usize>> = docs.iter().map(|d| m.encode(d)).collect();
                m.predict_ids(&ids.iter().collect::<Vec<_>>())
            }
        }
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Result<Vec<ProbVector>> {
        let docs: Vec<TokenSequence> = corpus.records().iter().map(|r| self.preprocess(&r.id, &r.text)).collect();
        self.predict_tokens(&docs)
    }
}

fn labeled_docs(pre: &Preprocessor, corpus: &Corpus) -> Result<Vec<(TokenSequence, Label)>> {
    let labels = corpus.labels()?;
    Ok(corpus.records().iter().zip(labels).map(|(r, l)| (pre.process(&r.text, &r.id), l)).collect())
}

fn fit_features(
    settings: &FeatureSettings,
    docs: &[TokenSequence],
    embeddings: Option<&EmbeddingTable>,
) -> Result<FeatureExtractor> {
    match settings.mode {
        FeatureMode::Tfidf => {
            let mut configs = alloc::vec![settings.word];
            configs.extend(settings.chars);
            Ok(FeatureExtractor::Tfidf(FeatureSpace::fit(docs, &configs)?))
        }
        FeatureMode::WeightedEmbedding => {
            let table = embeddings
                .ok_or_else(|| Error::InvalidConfig("weighted_embedding features need an embedding table".into()))?;
            let vocab = build_vocabulary(docs, VocabConfig::words(1, 1, settings.word.max_features))?;
            let table = table.restrict(vocab.entries().map(|(f, _)| f));
            Ok(FeatureExtractor::WeightedEmbedding { vocab, table, average_over_known: settings.average_over_known })
        }
    }
}

/// Preprocesses, fits features or the token index on the training split and
/// trains one model. `valid` drives early stopping where the family uses it.
pub fn train_classifier(
    kind: ModelKind,
    settings: &TrainSettings,
    train: &Corpus,
    valid: Option<&Corpus>,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(Classifier, History)> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pre = Preprocessor::new(settings.pipeline);
    let train_docs = labeled_docs(&pre, train)?;
    let valid_docs = valid.map(|v| labeled_docs(&pre, v)).transpose()?;
    let tokens: Vec<TokenSequence> = train_docs.iter().map(|(t, _)| t.clone()).collect();

    let (features, model, history) = match kind {
        ModelKind::Linear(_) | ModelKind::Mlp => {
            let fx = fit_features(&settings.features, &tokens, embeddings)?;
            let featurize = |set: &[(TokenSequence, Label)]| -> Result<Vec<(Features, Label)>> {
                set.iter().map(|(t, l)| Ok((fx.extract(t)?, *l))).collect()
            };
            let train_x = featurize(&train_docs)?;
            let (model, history) = if let ModelKind::Linear(k) = kind {
                let cfg = LinearConfig { seed: settings.seed, ..settings.linear };
                (TrainedModel::Linear(train_linear(k, &train_x, &cfg)?), History::default())
            } else {
                let valid_x = valid_docs.as_deref().map(featurize).transpose()?;
                let cfg = MlpConfig { seed: settings.seed, ..settings.mlp.clone() };
                let (m, h) = train_mlp(&train_x, valid_x.as_deref(), &cfg)?;
                (TrainedModel::Mlp(m), h)
            };
            (Some(fx), model, history)
        }
        ModelKind::Sequence(arch) => {
            let index = TokenIndex::fit(&tokens, settings.sequence.vocab_size)?;
            let dim = embeddings.map_or(settings.sequence.embedding_dim, EmbeddingTable::dim);
            let mut m = SequenceModel::new(settings.sequence_config(arch, dim), index, embeddings)?;
            let s = &settings.sequence;
            let cfg = TrainConfig { epochs: s.epochs, batch_size: s.batch_size, lr: s.lr, seed: settings.seed, patience: s.patience };
            let h = train_sequence_model(&mut m, &train_docs, valid_docs.as_deref(), &cfg)?;
            (None, TrainedModel::Sequence(m), h)
        }
        ModelKind::Encoder(variant) => {
            let index = TokenIndex::fit(&tokens, settings.encoder.vocab_size)?;
            let mut m = EncoderModel::new(settings.encoder_config(variant), index)?;
            let e = &settings.encoder;
            let cfg = TrainConfig {
                epochs: e.epochs,
                batch_size: e.batch_size.unwrap_or(variant.default_batch_size()),
                lr: e.lr,
                seed: settings.seed,
                patience: e.patience,
            };
            let h = train_encoder(&mut m, &train_docs, valid_docs.as_deref(), &cfg)?;
            (None, TrainedModel::Encoder(m), h)
        }
    };
    Ok((Classifier::from_parts(settings.pipeline, features, model)?, history))
}
