//! Recurrent and convolutional classifiers over embedded token ids.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::ensemble::ProbVector;
use crate::features::{build_vocabulary, Analyzer, EmbeddingTable, VocabConfig, Vocabulary};
use crate::nn::{conv1d_maxpool, Conv1d, Dense, Graph, Initializer, LstmLayer, NodeId, ParamId, ParamStore, Real, Tensor};
use crate::preprocess::TokenSequence;
use crate::training::{predict_batched, train, History, TrainConfig, Trainable};
use crate::{Error, Label, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
/// Class token, used by the encoder models.
pub const CLS: usize = 2;
const RESERVED: usize = 3;

/// Token to id mapping backed by a word unigram vocabulary. Ids 0..3 are
/// reserved for padding, unknown and class tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenIndex {
    vocab: Vocabulary,
}

impl TokenIndex {
    /// Keeps the `max_size` most document-frequent words.
    pub fn fit(docs: &[TokenSequence], max_size: usize) -> Result<TokenIndex> {
        TokenIndex::from_vocabulary(build_vocabulary(docs, VocabConfig::words(1, 1, max_size))?)
    }

    pub fn from_vocabulary(vocab: Vocabulary) -> Result<TokenIndex> {
        let c = vocab.config();
        if c.analyzer != Analyzer::Word || c.ngram_min != 1 || c.ngram_max != 1 {
            return Err(Error::InvalidConfig("token index needs a word unigram vocabulary".into()));
        }
        Ok(TokenIndex { vocab })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Number of ids including the reserved ones.
    pub fn size(&self) -> usize {
        self.vocab.len() + RESERVED
    }

    pub fn id(&self, token: &str) -> usize {
        self.vocab.index_of(token).map_or(UNK, |i| i + RESERVED)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        id.checked_sub(RESERVED).filter(|&i| i < self.vocab.len()).map(|i| self.vocab.feature(i))
    }

    /// Ids of the first `max_len` tokens.
    pub fn encode(&self, tokens: &TokenSequence, max_len: usize) -> Vec<usize> {
        tokens.tokens.iter().take(max_len).map(|t| self.id(t)).collect()
    }
}

/// Initial embedding matrix: rows from `table` where present, otherwise
/// uniform on `±0.1`; the padding row is zero.
pub(crate) fn embedding_matrix<T: Real>(
    index: &TokenIndex,
    dim: usize,
    table: Option<&EmbeddingTable>,
    init: &mut Initializer,
) -> Result<Tensor<T>> {
    if let Some(t) = table {
        if t.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: t.dim() });
        }
    }
    let mut m = init.uniform::<T>(index.size(), dim, 0.1);
    let data = m.data_mut();
    data[..dim].iter_mut().for_each(|v| *v = T::zero());
    if let Some(table) = table {
        for id in RESERVED..index.size() {
            if let Some(vec) = index.token(id).and_then(|tok| table.get(tok)) {
                for (d, &x) in data[id * dim..(id + 1) * dim].iter_mut().zip(vec) {
                    *d = T::from_f64(f64::from(x));
                }
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceArch {
    Lstm,
    BilstmAttn,
    Cnn,
    CnnBilstm,
}

impl SequenceArch {
    pub const ALL: [SequenceArch; 4] = [SequenceArch::Lstm, SequenceArch::BilstmAttn, SequenceArch::Cnn, SequenceArch::CnnBilstm];

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceArch::Lstm => "lstm",
            SequenceArch::BilstmAttn => "bilstm_attn",
            SequenceArch::Cnn => "cnn",
            SequenceArch::CnnBilstm => "cnn_bilstm",
        }
    }

    pub fn parse(s: &str) -> Option<SequenceArch> {
        SequenceArch::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn is_recurrent(self) -> bool {
        self != SequenceArch::Cnn
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    pub arch: SequenceArch,
    /// Must equal the pretrained table dimension when one is given.
    pub embedding_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub kernel_widths: Vec<usize>,
    pub filters: usize,
    pub max_len: usize,
    pub freeze_embeddings: bool,
    pub seed: u64,
}

impl SequenceConfig {
    /// Default sizes for an architecture: hidden 128, dropout 0.25, kernels
    /// (3, 4, 5) x 128 for `cnn` and 3 x 128 for `cnn_bilstm`.
    pub fn new(arch: SequenceArch) -> SequenceConfig {
        let kernel_widths = match arch {
            SequenceArch::Cnn => vec![3, 4, 5],
            SequenceArch::CnnBilstm => vec![3],
            _ => Vec::new(),
        };
        SequenceConfig {
            arch,
            embedding_dim: 100,
            hidden: 128,
            dropout: 0.25,
            kernel_widths,
            filters: 128,
            max_len: 64,
            freeze_embeddings: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.embedding_dim == 0 || self.hidden == 0 || self.max_len == 0 {
            return bad("embedding_dim, hidden and max_len must be positive");
        }
        match self.arch {
            SequenceArch::Cnn | SequenceArch::CnnBilstm => {
                if self.filters == 0 {
                    return bad("filters must be positive");
                }
                if self.kernel_widths.is_empty() || self.kernel_widths.contains(&0) {
                    return bad("kernel widths must be positive");
                }
                if self.arch == SequenceArch::CnnBilstm && self.kernel_widths.len() != 1 {
                    return bad("cnn_bilstm takes exactly one kernel width");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn max_width(&self) -> usize {
        self.kernel_widths.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone)]
enum Body {
    Lstm { layers: [LstmLayer; 2] },
    BilstmAttn { fw: LstmLayer, bw: LstmLayer, proj: Dense, v: ParamId },
    Cnn { convs: Vec<Conv1d> },
    CnnBilstm { conv: Conv1d, fw: LstmLayer, bw: LstmLayer },
}

/// One of the four architectures: embedding, body, dense two-way head.
#[derive(Debug, Clone)]
pub struct SequenceModel<T: Real = f32> {
    config: SequenceConfig,
    index: TokenIndex,
    store: ParamStore<T>,
    embedding: ParamId,
    body: Body,
    head: Dense,
}

struct Forward {
    logits: NodeId,
    attention: Option<NodeId>,
}

impl<T: Real> SequenceModel<T> {
    pub fn new(config: SequenceConfig, index: TokenIndex, embeddings: Option<&EmbeddingTable>) -> Result<SequenceModel<T>> {
        config.validate()?;
        let mut init = Initializer::new(config.seed);
        let mut store = ParamStore::new();
        let e = config.embedding_dim;
        let h = config.hidden;
        let embedding = store.add("embedding", embedding_matrix(&index, e, embeddings, &mut init)?);
        if config.freeze_embeddings {
            store.set_trainable(embedding, false);
        }
        let (body, features) = match config.arch {
            SequenceArch::Lstm => {
                let l1 = LstmLayer::new(&mut store, &mut init, "lstm1", e, h);
                let l2 = LstmLayer::new(&mut store, &mut init, "lstm2", h, h);
                (Body::Lstm { layers: [l1, l2] }, h)
            }
            SequenceArch::BilstmAttn => {
                let fw = LstmLayer::new(&mut store, &mut init, "fw", e, h);
                let bw = LstmLayer::new(&mut store, &mut init, "bw", e, h);
                let proj = Dense::new(&mut store, &mut init, "attn", 2 * h, h);
                let v = store.add("attn.v", init.xavier(h, 1));
                (Body::BilstmAttn { fw, bw, proj, v }, 2 * h)
            }
            SequenceArch::Cnn => {
                let convs: Vec<Conv1d> = config
                    .kernel_widths
                    .iter()
                    .map(|&w| Conv1d::new(&mut store, &mut init, &alloc::format!("conv{w}"), e, w, config.filters))
                    .collect();
                let n = convs.len() * config.filters;
                (Body::Cnn { convs }, n)
            }
            SequenceArch::CnnBilstm => {
                let w = config.kernel_widths[0];
                let conv = Conv1d::new(&mut store, &mut init, &alloc::format!("conv{w}"), e, w, config.filters);
                let fw = LstmLayer::new(&mut store, &mut init, "fw", config.filters, h);
                let bw = LstmLayer::new(&mut store, &mut init, "bw", config.filters, h);
                (Body::CnnBilstm { conv, fw, bw }, 2 * h)
            }
        };
        let head = Dense::new(&mut store, &mut init, "head", features, 2);
        Ok(SequenceModel { config, index, store, embedding, body, head })
    }

    pub fn config(&self) -> &SequenceConfig {
        &self.config
    }

    pub fn index(&self) -> &TokenIndex {
        &self.index
    }

    /// Number of stacked recurrent layers per direction.
    pub fn recurrent_layers(&self) -> usize {
        match self.body {
            Body::Lstm { .. } => 2,
            Body::BilstmAttn { .. } | Body::CnnBilstm { .. } => 1,
            Body::Cnn { .. } => 0,
        }
    }

    /// Width of the representation fed to the dense head.
    pub fn feature_size(&self) -> usize {
        self.head.input
    }

    pub fn encode(&self, tokens: &TokenSequence) -> Vec<usize> {
        self.index.encode(tokens, self.config.max_len)
    }

    pub fn predict_proba(&self, tokens: &TokenSequence) -> Result<ProbVector> {
        Ok(self.predict_ids(&[&self.encode(tokens)])?[0])
    }

    pub fn predict_ids(&self, batch: &[&Vec<usize>]) -> Result<Vec<ProbVector>> {
        predict_batched(self, batch, 64)
    }

    /// Attention weight per input token (`bilstm_attn` only). An empty input
    /// yields the single weight of its padding position.
    pub fn attention_weights(&self, tokens: &TokenSequence) -> Result<Option<Vec<f64>>> {
        let ids = self.encode(tokens);
        let mut g = Graph::new(&self.store);
        let out = self.forward(&mut g, &[&ids], None)?;
        Ok(out.attention.map(|a| g.value(a).data().iter().map(|v| v.as_f64()).collect()))
    }

    fn forward(&self, g: &mut Graph<'_, T>, batch: &[&Vec<usize>], mut rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        let min_len = match self.body {
            Body::Cnn { .. } | Body::CnnBilstm { .. } => self.config.max_width(),
            _ => 1,
        };
        // trailing padding ids are ignored; an empty row is one padding token
        let lengths: Vec<usize> = batch.iter().map(|ids| real_length(ids).clamp(1, self.config.max_len)).collect();
        let usable: Vec<usize> = lengths.iter().map(|&l| l.max(min_len)).collect();
        let steps_n = usable.iter().copied().max().unwrap_or(1);
        let emb = g.param(self.embedding);
        let mut steps = Vec::with_capacity(steps_n);
        for t in 0..steps_n {
            let col: Vec<usize> = batch.iter().map(|ids| ids.get(t).copied().unwrap_or(PAD)).collect();
            steps.push(g.gather_rows(emb, &col)?);
        }
        let valid: Vec<Vec<bool>> = (0..steps_n).map(|t| lengths.iter().map(|&l| t < l).collect()).collect();
        let rate = self.config.dropout;
        let mut attention = None;
        let features = match &self.body {
            Body::Lstm { layers } => {
                let h1 = layers[0].forward(g, &steps, &valid, false)?;
                let h1: Vec<NodeId> = h1.into_iter().map(|h| g.dropout(h, rate, rng.as_deref_mut())).collect::<Result<_>>()?;
                let h2 = layers[1].forward(g, &h1, &valid, false)?;
                *h2.last().expect("non-empty")
            }
            Body::BilstmAttn { fw, bw, proj, v } => {
                let f = fw.forward(g, &steps, &valid, false)?;
                let b = bw.forward(g, &steps, &valid, true)?;
                let v = g.param(*v);
                let mut states = Vec::with_capacity(steps_n);
                let mut scores = Vec::with_capacity(steps_n);
                for t in 0..steps_n {
                    let ht = g.concat_cols(&[f[t], b[t]])?;
                    let u = proj.forward(g, ht)?;
                    let u = g.tanh(u);
                    scores.push(g.matmul(u, v)?);
                    states.push(ht);
                }
                let scores = if steps_n == 1 { scores[0] } else { g.concat_cols(&scores)? };
                let mask: Vec<bool> = lengths.iter().flat_map(|&l| (0..steps_n).map(move |t| t < l)).collect();
                let alpha = g.masked_softmax(scores, &mask)?;
                let mut context = None;
                for (t, &ht) in states.iter().enumerate() {
                    let a = g.slice_cols(alpha, t, 1)?;
                    let weighted = g.mul_col(ht, a)?;
                    context = Some(match context {
                        None => weighted,
                        Some(c) => g.add(c, weighted)?,
                    });
                }
                attention = Some(alpha);
                context.expect("non-empty")
            }
            Body::Cnn { convs } => conv1d_maxpool(g, &steps, &usable, convs)?,
            Body::CnnBilstm { conv, fw, bw } => {
                let windows: Vec<NodeId> = conv.forward(g, &steps)?.into_iter().map(|w| g.relu(w)).collect();
                let win_valid: Vec<Vec<bool>> =
                    (0..windows.len()).map(|s| usable.iter().map(|&l| s + conv.width <= l).collect()).collect();
                let f = fw.forward(g, &windows, &win_valid, false)?;
                let b = bw.forward(g, &windows, &win_valid, true)?;
                let states: Vec<NodeId> =
                    f.iter().zip(&b).map(|(&x, &y)| g.concat_cols(&[x, y])).collect::<Result<_>>()?;
                let flat: Vec<bool> = win_valid.iter().flatten().copied().collect();
                g.max_over(&states, &flat)?
            }
        };
        let features = g.dropout(features, rate, rng)?;
        let logits = self.head.forward(g, features)?;
        Ok(Forward { logits, attention })
    }
}

impl<T: Real> Trainable<T> for SequenceModel<T> {
    type Example = Vec<usize>;

    fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn logits(&self, g: &mut Graph<'_, T>, batch: &[&Vec<usize>], dropout: Option<&mut ChaCha8Rng>) -> Result<NodeId> {
        Ok(self.forward(g, batch, dropout)?.logits)
    }

    fn clip_norm(&self) -> Option<f64> {
        self.config.arch.is_recurrent().then_some(5.0)
    }
}

/// Encodes the corpus with the model's index and trains it.
pub fn train_sequence_model<T: Real>(
    model: &mut SequenceModel<T>,
    train_set: &[(TokenSequence, Label)],
    valid: Option<&[(TokenSequence, Label)]>,
    cfg: &TrainConfig,
) -> Result<History> {
    if train_set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let encode = |set: &[(TokenSequence, Label)]| -> Vec<(Vec<usize>, Label)> {
        set.iter().map(|(t, l)| (model.encode(t), *l)).collect()
    };
    let train_ids = encode(train_set);
    let valid_ids = valid.map(encode);
    train(model, &train_ids, valid_ids.as_deref(), cfg)
}

/// Length up to the last non-padding id.
pub fn real_length(ids: &[usize]) -> usize {
    ids.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1)
}

/// Token ids to text, for diagnostics.
pub fn decode(index: &TokenIndex, ids: &[usize]) -> Vec<String> {
    ids.iter()
        .map(|&id| match id {
            PAD => "[PAD]".into(),
            UNK => "[UNK]".into(),
            CLS => "[CLS]".into(),
            _ => index.token(id).unwrap_or("[UNK]").into(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use rand::{Rng, SeedableRng};

    const FILLER: [&str; 8] = ["the", "new", "report", "says", "cases", "today", "virus", "people"];

    fn synthetic(n: usize, seed: u64) -> Vec<(TokenSequence, Label)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Fake } else { Label::Real };
                let len = rng.gen_range(3..7);
                let mut words: Vec<&str> = (0..len).map(|_| FILLER[rng.gen_range(0..FILLER.len())]).collect();
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, if label == Label::Fake { "hoax" } else { "official" });
                (TokenSequence::from_words(&words), label)
            })
            .collect()
    }

    fn index_for(data: &[(TokenSequence, Label)]) -> TokenIndex {
        let docs: Vec<TokenSequence> = data.iter().map(|(t, _)| t.clone()).collect();
        TokenIndex::fit(&docs, 1000).unwrap()
    }

    fn tiny(arch: SequenceArch) -> SequenceConfig {
        SequenceConfig {
            embedding_dim: 3,
            hidden: 3,
            filters: 3,
            kernel_widths: if arch == SequenceArch::Cnn { vec![1, 2] } else if arch == SequenceArch::CnnBilstm { vec![2] } else { vec![] },
            dropout: 0.0,
            ..SequenceConfig::new(arch)
        }
    }

    #[test]
    fn index_reserves_ids() {
        let idx = TokenIndex::fit(&[TokenSequence::from_words(&["b", "a"])], 10).unwrap();
        assert_eq!(idx.size(), 5);
        assert_eq!(idx.id("a"), 3);
        assert_eq!(idx.id("zzz"), UNK);
        assert_eq!(decode(&idx, &[CLS, 4, PAD]), vec!["[CLS]", "b", "[PAD]"]);
    }

    #[test]
    fn architecture_shapes() {
        let data = synthetic(8, 0);
        let idx = index_for(&data);
        let lstm = SequenceModel::<f32>::new(SequenceConfig::new(SequenceArch::Lstm), idx.clone(), None).unwrap();
        assert_eq!(lstm.recurrent_layers(), 2);
        assert_eq!(lstm.params().value(lstm.params().find("lstm2.wh").unwrap()).shape(), &[128, 512]);
        let cnn = SequenceModel::<f32>::new(SequenceConfig::new(SequenceArch::Cnn), idx.clone(), None).unwrap();
        assert_eq!(cnn.feature_size(), 384);
        let bad = SequenceConfig { dropout: 1.0, ..SequenceConfig::new(SequenceArch::Lstm) };
        assert!(SequenceModel::<f32>::new(bad, idx.clone(), None).is_err());
        let table = EmbeddingTable::new(50).unwrap();
        assert_eq!(
            SequenceModel::<f32>::new(SequenceConfig::new(SequenceArch::Lstm), idx, Some(&table)).unwrap_err(),
            Error::DimensionMismatch { expected: 100, found: 50 }
        );
    }

    #[test]
    fn pretrained_rows_are_copied() {
        let data = synthetic(8, 0);
        let idx = index_for(&data);
        let mut table = EmbeddingTable::new(3).unwrap();
        table.insert("hoax", &[1.0, 2.0, 3.0]).unwrap();
        let cfg = SequenceConfig { embedding_dim: 3, freeze_embeddings: true, ..SequenceConfig::new(SequenceArch::Lstm) };
        let m = SequenceModel::<f32>::new(cfg, idx.clone(), Some(&table)).unwrap();
        let emb = m.params().get(m.params().find("embedding").unwrap());
        assert!(!emb.trainable);
        assert_eq!(emb.value.row(idx.id("hoax")), &[1.0, 2.0, 3.0]);
        assert_eq!(emb.value.row(PAD), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn padding_never_changes_output() {
        let data = synthetic(6, 1);
        let idx = index_for(&data);
        for arch in SequenceArch::ALL {
            let m = SequenceModel::<f64>::new(SequenceConfig { seed: 4, ..tiny(arch) }, idx.clone(), None).unwrap();
            for (t, _) in &data {
                let ids = m.encode(t);
                let mut padded = ids.clone();
                padded.extend([PAD; 5]);
                let long: Vec<usize> = data.iter().map(|(t, _)| m.encode(t)).max_by_key(Vec::len).unwrap();
                let alone = m.predict_ids(&[&ids]).unwrap()[0];
                let with_pad = m.predict_ids(&[&padded]).unwrap()[0];
                // batch padding up to a longer neighbour
                let batched = m.predict_ids(&[&ids, &long]).unwrap()[0];
                assert!((alone.fake - batched.fake).abs() < 1e-6, "{arch:?}");
                assert!((alone.fake - with_pad.fake).abs() < 1e-6, "{arch:?}");
            }
        }
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let data = synthetic(4, 2);
        let idx = index_for(&data);
        let m = SequenceModel::<f32>::new(SequenceConfig::new(SequenceArch::BilstmAttn), idx, None).unwrap();
        for (t, _) in &data {
            let w = m.attention_weights(t).unwrap().unwrap();
            assert_eq!(w.len(), t.len());
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let w = m.attention_weights(&TokenSequence::default()).unwrap().unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn empty_input_is_defined() {
        let idx = index_for(&synthetic(4, 3));
        for arch in SequenceArch::ALL {
            let m = SequenceModel::<f32>::new(SequenceConfig::new(arch), idx.clone(), None).unwrap();
            let p = m.predict_proba(&TokenSequence::default()).unwrap();
            assert!((p.fake + p.real - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let data = synthetic(4, 5);
        let idx = index_for(&data);
        let m = SequenceModel::<f32>::new(SequenceConfig { dropout: 0.0, ..SequenceConfig::new(SequenceArch::Lstm) }, idx, None).unwrap();
        let ids: Vec<Vec<usize>> = data.iter().map(|(t, _)| m.encode(t)).collect();
        let refs: Vec<&Vec<usize>> = ids.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g1 = Graph::new(m.params());
        let a = m.logits(&mut g1, &refs, Some(&mut rng)).unwrap();
        let mut g2 = Graph::new(m.params());
        let b = m.logits(&mut g2, &refs, None).unwrap();
        assert_eq!(g1.value(a), g2.value(b));
    }

    #[test]
    fn every_architecture_overfits_small_corpus() {
        let data = synthetic(32, 7);
        let idx = index_for(&data);
        for arch in SequenceArch::ALL {
            let mut m = SequenceModel::<f32>::new(SequenceConfig { seed: 1, ..SequenceConfig::new(arch) }, idx.clone(), None).unwrap();
            let cfg = TrainConfig { epochs: 200, batch_size: 32, lr: 1e-3, seed: 1, patience: Some(0) };
            // patience counts against training F1 here; keep going until perfect
            let cfg = TrainConfig { patience: None, ..cfg };
            let history = train_sequence_model(&mut m, &data, None, &cfg).unwrap();
            let best = history.epochs.iter().map(|e| e.valid_f1).fold(0.0, f64::max);
            assert_eq!(best, 1.0, "{arch:?}");
            let correct = data.iter().filter(|(t, l)| m.predict_proba(t).unwrap().label() == *l).count();
            assert_eq!(correct, 32, "{arch:?}");
        }
    }

    #[test]
    fn patience_zero_stops_at_first_plateau() {
        let data = synthetic(16, 8);
        let idx = index_for(&data);
        let mut m = SequenceModel::<f32>::new(tiny(SequenceArch::Cnn), idx, None).unwrap();
        let cfg = TrainConfig { epochs: 50, batch_size: 8, lr: 1e-4, seed: 0, patience: Some(0) };
        let h = train_sequence_model(&mut m, &data, None, &cfg).unwrap();
        let n = h.epochs.len();
        assert!(n < 50);
        let best_before = h.epochs[..n - 1].iter().map(|e| e.valid_f1).fold(f64::NEG_INFINITY, f64::max);
        assert!(h.epochs[n - 1].valid_f1 <= best_before);
        for w in h.epochs[..n - 1].windows(2) {
            assert!(w[1].valid_f1 > w[0].valid_f1);
        }
    }

    #[test]
    fn seeded_history_is_bitwise_identical() {
        let data = synthetic(16, 9);
        let idx = index_for(&data);
        let run = || {
            let mut m = SequenceModel::<f32>::new(SequenceConfig { seed: 2, ..tiny(SequenceArch::BilstmAttn) }, idx.clone(), None).unwrap();
            let cfg = TrainConfig { epochs: 3, batch_size: 4, lr: 1e-2, seed: 5, patience: None };
            let h = train_sequence_model(&mut m, &data, None, &cfg).unwrap();
            (h, m.params().values())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn untrained_output_averages_to_half() {
        let data = synthetic(8, 10);
        let idx = index_for(&data);
        for arch in SequenceArch::ALL {
            let mut mean = 0.0;
            for seed in 0..100 {
                let cfg = SequenceConfig { seed, embedding_dim: 16, hidden: 16, filters: 16, ..SequenceConfig::new(arch) };
                let m = SequenceModel::<f32>::new(cfg, idx.clone(), None).unwrap();
                mean += m.predict_proba(&data[(seed % 8) as usize].0).unwrap().fake;
            }
            mean /= 100.0;
            assert!((mean - 0.5).abs() < 0.05, "{arch:?}: {mean}");
        }
    }

    #[test]
    fn width_one_cnn_ignores_order() {
        let data = synthetic(4, 11);
        let idx = index_for(&data);
        let cfg = SequenceConfig { kernel_widths: vec![1], ..tiny(SequenceArch::Cnn) };
        let m = SequenceModel::<f64>::new(cfg, idx, None).unwrap();
        let ids = m.encode(&data[0].0);
        let mut rev = ids.clone();
        rev.reverse();
        let a = m.predict_ids(&[&ids]).unwrap()[0];
        let b = m.predict_ids(&[&rev]).unwrap()[0];
        assert_eq!(a, b);
    }

    #[test]
    fn reversed_input_swaps_tied_directions() {
        let mut store = ParamStore::<f64>::new();
        let mut init = Initializer::new(6);
        let layer = LstmLayer::new(&mut store, &mut init, "dir", 2, 3);
        let xs: Vec<Tensor<f64>> = (0..5).map(|_| init.uniform(1, 2, 1.0)).collect();
        let mut g = Graph::new(&store);
        let fwd: Vec<NodeId> = xs.iter().map(|x| g.input(x.clone())).collect();
        let rev: Vec<NodeId> = xs.iter().rev().map(|x| g.input(x.clone())).collect();
        let valid = vec![vec![true]; 5];
        let f = layer.forward(&mut g, &fwd, &valid, false).unwrap();
        let b = layer.forward(&mut g, &rev, &valid, true).unwrap();
        // forward final state on x == backward-direction state at position 0 of reversed x
        assert_eq!(g.value(f[4]).data(), g.value(b[0]).data());
    }

    #[test]
    fn gradients_match_for_every_architecture() {
        let data = synthetic(3, 12);
        let idx = index_for(&data);
        for arch in SequenceArch::ALL {
            let mut m = SequenceModel::<f64>::new(SequenceConfig { seed: 3, ..tiny(arch) }, idx.clone(), None).unwrap();
            let ids: Vec<Vec<usize>> = data.iter().map(|(t, _)| m.encode(t)[..3].to_vec()).collect();
            let ids = [ids[0].clone(), ids[1][..2].to_vec()];
            let frozen = m.clone();
            let err = gradient_check(m.params_mut(), 1e-5, |g| {
                let logits = frozen.logits(g, &[&ids[0], &ids[1]], None)?;
                g.softmax_cross_entropy(logits, &[0, 1])
            })
            .unwrap();
            assert!(err < 1e-4, "{arch:?}: {err}");
        }
    }
}
