//! Small transformer-encoder classifiers trained from scratch, in three
//! variants: a standard encoder, one with a single block shared across all
//! layers, and one with a learned relative-position attention bias in place of
//! absolute position embeddings.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::ensemble::ProbVector;
use crate::nn::{scaled_dot_attention, Dense, Graph, Initializer, LayerNorm, NodeId, ParamId, ParamStore, Real, Tensor};
use crate::preprocess::TokenSequence;
use crate::sequence::{embedding_matrix, real_length, TokenIndex, CLS, PAD};
use crate::training::{predict_batched, train, History, TrainConfig, Trainable};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderVariant {
    Standard,
    SharedLayers,
    RelativePosition,
}

impl EncoderVariant {
    pub const ALL: [EncoderVariant; 3] = [EncoderVariant::Standard, EncoderVariant::SharedLayers, EncoderVariant::RelativePosition];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderVariant::Standard => "standard",
            EncoderVariant::SharedLayers => "shared_layers",
            EncoderVariant::RelativePosition => "relative_position",
        }
    }

    pub fn parse(s: &str) -> Option<EncoderVariant> {
        EncoderVariant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// 16 for the standard and relative variants, 32 for the shared one.
    pub fn default_batch_size(self) -> usize {
        match self {
            EncoderVariant::SharedLayers => 32,
            _ => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub variant: EncoderVariant,
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    /// Positions including the class token.
    pub max_len: usize,
    pub dropout: f64,
    /// Relative offsets are clipped to `±rel_clip`.
    pub rel_clip: usize,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn new(variant: EncoderVariant) -> EncoderConfig {
        EncoderConfig { variant, layers: 2, heads: 4, d_model: 64, d_ffn: 256, max_len: 128, dropout: 0.1, rel_clip: 8, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.layers == 0 || self.heads == 0 || self.d_model == 0 || self.d_ffn == 0 {
            return bad("layers, heads, d_model and d_ffn must be positive");
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return bad("d_model must be divisible by heads");
        }
        if self.max_len < 2 {
            return bad("max_len must leave room for the class token and one token");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    ln1: LayerNorm,
    q: Dense,
    k: Dense,
    v: Dense,
    o: Dense,
    ln2: LayerNorm,
    ff1: Dense,
    ff2: Dense,
}

impl Block {
    fn new<T: Real>(store: &mut ParamStore<T>, init: &mut Initializer, name: &str, c: &EncoderConfig) -> Block {
        let d = c.d_model;
        Block {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
            q: Dense::new(store, init, &format!("{name}.q"), d, d),
            k: Dense::new(store, init, &format!("{name}.k"), d, d),
            v: Dense::new(store, init, &format!("{name}.v"), d, d),
            o: Dense::new(store, init, &format!("{name}.o"), d, d),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
            ff1: Dense::new(store, init, &format!("{name}.ff1"), d, c.d_ffn),
            ff2: Dense::new(store, init, &format!("{name}.ff2"), c.d_ffn, d),
        }
    }
}

/// Pre-norm encoder with a class token and a dense two-way head.
#[derive(Debug, Clone)]
pub struct EncoderModel<T: Real = f32> {
    config: EncoderConfig,
    index: TokenIndex,
    store: ParamStore<T>,
    tokens: ParamId,
    positions: Option<ParamId>,
    blocks: Vec<Block>,
    rel_bias: Vec<ParamId>,
    final_ln: LayerNorm,
    head: Dense,
}

impl<T: Real> EncoderModel<T> {
    pub fn new(config: EncoderConfig, index: TokenIndex) -> Result<EncoderModel<T>> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut init = Initializer::new(config.seed);
        let d = config.d_model;
        let tokens = store.add("tokens", embedding_matrix(&index, d, None, &mut init)?);
        let positions = match config.variant {
            EncoderVariant::RelativePosition => None,
            _ => Some(store.add("positions", init.uniform(config.max_len, d, 0.1))),
        };
        let n_blocks = match config.variant {
            EncoderVariant::SharedLayers => 1,
            _ => config.layers,
        };
        let blocks = (0..n_blocks).map(|l| Block::new(&mut store, &mut init, &format!("block{l}"), &config)).collect();
        let rel_bias = match config.variant {
            EncoderVariant::RelativePosition => (0..config.layers)
                .map(|l| store.add(format!("block{l}.rel_bias"), Tensor::zeros(&[config.heads, 2 * config.rel_clip + 1])))
                .collect(),
            _ => Vec::new(),
        };
        let final_ln = LayerNorm::new(&mut store, "final_ln", d);
        let head = Dense::new(&mut store, &mut init, "head", d, 2);
        Ok(EncoderModel { config, index, store, tokens, positions, blocks, rel_bias, final_ln, head })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn index(&self) -> &TokenIndex {
        &self.index
    }

    /// Token ids without the class token, truncated to fit `max_len`.
    pub fn encode(&self, tokens: &TokenSequence) -> Vec<usize> {
        self.index.encode(tokens, self.config.max_len - 1)
    }

    pub fn predict_proba(&self, tokens: &TokenSequence) -> Result<ProbVector> {
        Ok(self.predict_ids(&[&self.encode(tokens)])?[0])
    }

    pub fn predict_ids(&self, batch: &[&Vec<usize>]) -> Result<Vec<ProbVector>> {
        predict_batched(self, batch, 32)
    }

    /// Flat indices into a `heads x (2 clip + 1)` bias table for an `n x n`
    /// score matrix, one table per head.
    fn relative_indices(&self, n: usize) -> Vec<Vec<usize>> {
        let clip = self.config.rel_clip as isize;
        let width = 2 * self.config.rel_clip + 1;
        (0..self.config.heads)
            .map(|h| {
                (0..n)
                    .flat_map(|i| {
                        (0..n).map(move |j| {
                            let off = (j as isize - i as isize).clamp(-clip, clip);
                            h * width + (off + clip) as usize
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn block_for(&self, layer: usize) -> &Block {
        &self.blocks[if self.config.variant == EncoderVariant::SharedLayers { 0 } else { layer }]
    }

    /// Multi-head self-attention over `rows` frames of `n` positions stacked
    /// in `h` (`rows*n x d`). Returns the concatenated head outputs and the
    /// per-frame, per-head attention matrices.
    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        g: &mut Graph<'_, T>,
        block: &Block,
        layer: usize,
        h: NodeId,
        n: usize,
        masks: &[Vec<bool>],
        rel: &[Vec<usize>],
    ) -> Result<(NodeId, Vec<Vec<NodeId>>)> {
        let dk = self.config.d_model / self.config.heads;
        let q = block.q.forward(g, h)?;
        let k = block.k.forward(g, h)?;
        let v = block.v.forward(g, h)?;
        let bias = match self.rel_bias.get(layer) {
            Some(&p) => {
                let table = g.param(p);
                rel.iter().map(|idx| g.gather_elems(table, idx, n, n).map(Some)).collect::<Result<Vec<_>>>()?
            }
            None => alloc::vec![None; self.config.heads],
        };
        let mut frames = Vec::with_capacity(masks.len());
        let mut probs = Vec::with_capacity(masks.len());
        for (r, mask) in masks.iter().enumerate() {
            let (qr, kr, vr) = if masks.len() == 1 {
                (q, k, v)
            } else {
                (g.slice_rows(q, r * n, n)?, g.slice_rows(k, r * n, n)?, g.slice_rows(v, r * n, n)?)
            };
            let mut heads = Vec::with_capacity(self.config.heads);
            let mut frame_probs = Vec::with_capacity(self.config.heads);
            for (hd, &b) in bias.iter().enumerate() {
                let (qh, kh, vh) = if self.config.heads == 1 {
                    (qr, kr, vr)
                } else {
                    (g.slice_cols(qr, hd * dk, dk)?, g.slice_cols(kr, hd * dk, dk)?, g.slice_cols(vr, hd * dk, dk)?)
                };
                let (out, p) = scaled_dot_attention(g, qh, kh, vh, mask, b)?;
                heads.push(out);
                frame_probs.push(p);
            }
            frames.push(if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? });
            probs.push(frame_probs);
        }
        let joined = if frames.len() == 1 { frames[0] } else { g.concat_rows(&frames)? };
        Ok((joined, probs))
    }

    /// Embeds `rows` frames of `n` ids each (flattened in `ids`).
    fn embed(&self, g: &mut Graph<'_, T>, ids: &[usize], n: usize) -> Result<NodeId> {
        let table = g.param(self.tokens);
        let x = g.gather_rows(table, ids)?;
        match self.positions {
            Some(p) => {
                let table = g.param(p);
                let pos: Vec<usize> = (0..ids.len()).map(|i| i % n).collect();
                let pe = g.gather_rows(table, &pos)?;
                g.add(x, pe)
            }
            None => Ok(x),
        }
    }

    fn forward(&self, g: &mut Graph<'_, T>, batch: &[&Vec<usize>], mut rng: Option<&mut ChaCha8Rng>) -> Result<NodeId> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        let cap = self.config.max_len - 1;
        let lens: Vec<usize> = batch.iter().map(|ids| 1 + real_length(ids).min(cap)).collect();
        let n = lens.iter().copied().max().unwrap_or(1);
        let mut flat = Vec::with_capacity(batch.len() * n);
        for (ids, &len) in batch.iter().zip(&lens) {
            flat.push(CLS);
            flat.extend_from_slice(&ids[..len - 1]);
            flat.extend(core::iter::repeat_n(PAD, n - len));
        }
        let masks: Vec<Vec<bool>> = lens.iter().map(|&len| (0..n).map(|j| j < len).collect()).collect();
        let rel = if self.rel_bias.is_empty() { Vec::new() } else { self.relative_indices(n) };
        let rate = self.config.dropout;

        let mut x = self.embed(g, &flat, n)?;
        x = g.dropout(x, rate, rng.as_deref_mut())?;
        for layer in 0..self.config.layers {
            let block = *self.block_for(layer);
            let h = block.ln1.forward(g, x)?;
            let (att, _) = self.attention(g, &block, layer, h, n, &masks, &rel)?;
            let att = block.o.forward(g, att)?;
            let att = g.dropout(att, rate, rng.as_deref_mut())?;
            x = g.add(x, att)?;
            let h = block.ln2.forward(g, x)?;
            let f = block.ff1.forward(g, h)?;
            let f = g.gelu(f);
            let f = block.ff2.forward(g, f)?;
            let f = g.dropout(f, rate, rng.as_deref_mut())?;
            x = g.add(x, f)?;
        }
        let cls_rows: Vec<usize> = (0..batch.len()).map(|r| r * n).collect();
        let cls = g.gather_rows(x, &cls_rows)?;
        let cls = self.final_ln.forward(g, cls)?;
        self.head.forward(g, cls)
    }

    /// First-layer attention matrices (one per head) for a raw id frame
    /// (no class token added) with an explicit key mask.
    pub fn first_layer_attention(&self, frame: &[usize], valid: &[bool]) -> Result<Vec<Tensor<T>>> {
        if frame.len() != valid.len() {
            return Err(Error::LengthMismatch { left: frame.len(), right: valid.len() });
        }
        if frame.is_empty() || frame.len() > self.config.max_len {
            return Err(Error::InvalidConfig(format!("frame length must be in 1..={}", self.config.max_len)));
        }
        let n = frame.len();
        let mut g = Graph::new(&self.store);
        let x = self.embed(&mut g, frame, n)?;
        let block = *self.block_for(0);
        let h = block.ln1.forward(&mut g, x)?;
        let rel = if self.rel_bias.is_empty() { Vec::new() } else { self.relative_indices(n) };
        let (_, probs) = self.attention(&mut g, &block, 0, h, n, &[valid.to_vec()], &rel)?;
        Ok(probs[0].iter().map(|&p| g.value(p).clone()).collect())
    }
}

impl<T: Real> Trainable<T> for EncoderModel<T> {
    type Example = Vec<usize>;

    fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn logits(&self, g: &mut Graph<'_, T>, batch: &[&Vec<usize>], dropout: Option<&mut ChaCha8Rng>) -> Result<NodeId> {
        self.forward(g, batch, dropout)
    }
}

/// Encodes the corpus with the model's index and trains it.
pub fn train_encoder<T: Real>(
    model: &mut EncoderModel<T>,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use alloc::vec;
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

    fn index() -> TokenIndex {
        let docs: Vec<TokenSequence> = synthetic(16, 0).into_iter().map(|(t, _)| t).collect();
        TokenIndex::fit(&docs, 100).unwrap()
    }

    fn tiny(variant: EncoderVariant) -> EncoderConfig {
        EncoderConfig { layers: 2, heads: 2, d_model: 8, d_ffn: 12, max_len: 10, dropout: 0.0, rel_clip: 3, ..EncoderConfig::new(variant) }
    }

    #[test]
    fn config_checks() {
        let bad = EncoderConfig { heads: 3, ..EncoderConfig::new(EncoderVariant::Standard) };
        assert!(EncoderModel::<f32>::new(bad, index()).is_err());
        let bad = EncoderConfig { max_len: 1, ..EncoderConfig::new(EncoderVariant::Standard) };
        assert!(EncoderModel::<f32>::new(bad, index()).is_err());
        assert_eq!(EncoderVariant::SharedLayers.default_batch_size(), 32);
        assert_eq!(EncoderVariant::Standard.default_batch_size(), 16);
        assert_eq!(EncoderVariant::RelativePosition.default_batch_size(), 16);
    }

    #[test]
    fn parameter_counts() {
        let idx = index();
        let v = idx.size();
        let (l, d, f, m) = (2, 64, 256, 128);
        let block = 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
        let expected = v * d + m * d + l * block + 2 * d + (2 * d + 2);
        let standard = EncoderModel::<f32>::new(EncoderConfig::new(EncoderVariant::Standard), idx.clone()).unwrap();
        assert_eq!(standard.params().scalar_count(), expected);

        let count = |variant, layers| {
            let c = EncoderConfig { layers, ..EncoderConfig::new(variant) };
            EncoderModel::<f32>::new(c, idx.clone()).unwrap().params().scalar_count()
        };
        assert_eq!(count(EncoderVariant::SharedLayers, 4), count(EncoderVariant::SharedLayers, 1));
        assert_eq!(count(EncoderVariant::SharedLayers, 4), count(EncoderVariant::Standard, 1));
        let rel = count(EncoderVariant::RelativePosition, 2);
        assert_eq!(rel, expected - m * d + 2 * 4 * 17);
    }

    #[test]
    fn padding_and_pad_values_do_not_matter() {
        for variant in EncoderVariant::ALL {
            let mut m = EncoderModel::<f64>::new(EncoderConfig { seed: 1, ..tiny(variant) }, index()).unwrap();
            let data = synthetic(4, 3);
            let ids: Vec<Vec<usize>> = data.iter().map(|(t, _)| m.encode(t)).collect();
            let alone = m.predict_ids(&[&ids[0]]).unwrap()[0];
            let mut padded = ids[0].clone();
            padded.extend([PAD; 2]);
            let with_pad = m.predict_ids(&[&padded]).unwrap()[0];
            let longest = ids.iter().max_by_key(|v| v.len()).unwrap();
            let batched = m.predict_ids(&[&ids[0], longest]).unwrap()[0];
            assert!((alone.fake - with_pad.fake).abs() < 1e-6, "{variant:?}");
            assert!((alone.fake - batched.fake).abs() < 1e-6, "{variant:?}");
            assert!((alone.fake + alone.real - 1.0).abs() < 1e-6);

            // scribble over the padding embedding row
            let mut tokens = m.params().value(m.params().find("tokens").unwrap()).clone();
            for x in &mut tokens.data_mut()[..8] {
                *x = 37.0;
            }
            m.params_mut().set_value("tokens", tokens).unwrap();
            let scribbled = m.predict_ids(&[&ids[0], longest]).unwrap()[0];
            assert!((scribbled.fake - batched.fake).abs() < 1e-12, "{variant:?}");
        }
    }

    #[test]
    fn relative_attention_is_translation_invariant() {
        let m = EncoderModel::<f64>::new(EncoderConfig { seed: 2, ..tiny(EncoderVariant::RelativePosition) }, index()).unwrap();
        let mut bias = m.params().value(m.params().find("block0.rel_bias").unwrap()).clone();
        let mut init = Initializer::new(9);
        bias = Tensor::from_f64(bias.rows(), bias.cols(), init.uniform::<f64>(bias.rows(), bias.cols(), 1.0).data()).unwrap();
        let mut m = m;
        m.params_mut().set_value("block0.rel_bias", bias).unwrap();
        let toks = [5usize, 7, 4];
        let frame_at = |offset: usize| {
            let mut f = vec![PAD; 10];
            let mut v = vec![false; 10];
            for (i, &t) in toks.iter().enumerate() {
                f[offset + i] = t;
                v[offset + i] = true;
            }
            (f, v)
        };
        let (f0, v0) = frame_at(0);
        let (f1, v1) = frame_at(4);
        let a0 = m.first_layer_attention(&f0, &v0).unwrap();
        let a1 = m.first_layer_attention(&f1, &v1).unwrap();
        for (h0, h1) in a0.iter().zip(&a1) {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((h0.get(i, j) - h1.get(4 + i, 4 + j)).abs() < 1e-12);
                }
                assert!((h0.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(h0.get(i, 5), 0.0);
            }
        }
    }

    #[test]
    fn identity_block_reduces_to_head_on_class_token() {
        let cfg = EncoderConfig { layers: 1, ..tiny(EncoderVariant::Standard) };
        let mut m = EncoderModel::<f64>::new(cfg, index()).unwrap();
        for name in ["block0.o.w", "block0.o.b", "block0.ff2.w", "block0.ff2.b"] {
            let shape = m.params().value(m.params().find(name).unwrap()).shape().to_vec();
            m.params_mut().set_value(name, Tensor::zeros(&shape)).unwrap();
        }
        let ids = m.encode(&synthetic(1, 4)[0].0);
        let p = m.predict_ids(&[&ids]).unwrap()[0];

        let store = m.params();
        let d = 8;
        let tok = store.value(store.find("tokens").unwrap()).row(CLS).to_vec();
        let pos = store.value(store.find("positions").unwrap()).row(0).to_vec();
        let x: Vec<f64> = tok.iter().zip(&pos).map(|(a, b)| a + b).collect();
        let mean = x.iter().sum::<f64>() / d as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let xhat: Vec<f64> = x.iter().map(|v| (v - mean) / (var + 1e-5).sqrt()).collect();
        let w = store.value(store.find("head.w").unwrap());
        let b = store.value(store.find("head.b").unwrap());
        let logit = |c: usize| (0..d).map(|i| xhat[i] * w.get(i, c)).sum::<f64>() + b.data()[c];
        let (z0, z1) = (logit(0), logit(1));
        let p_fake = 1.0 / (1.0 + (z1 - z0).exp());
        assert!((p.fake - p_fake).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_for_every_variant() {
        let data = synthetic(2, 5);
        for variant in EncoderVariant::ALL {
            let mut m = EncoderModel::<f64>::new(EncoderConfig { seed: 3, ..tiny(variant) }, index()).unwrap();
            // give the zero-initialized tables something to differentiate through
            if let Some(id) = m.params().find("block0.rel_bias") {
                let shape = m.params().value(id).shape().to_vec();
                m.params_mut().set_value("block0.rel_bias", Initializer::new(1).uniform(shape[0], shape[1], 0.5)).unwrap();
            }
            let ids: Vec<Vec<usize>> = data.iter().map(|(t, _)| m.encode(t)).collect();
            let frozen = m.clone();
            let err = gradient_check(m.params_mut(), 1e-5, |g| {
                let logits = frozen.logits(g, &[&ids[0], &ids[1]], None)?;
                g.softmax_cross_entropy(logits, &[0, 1])
            })
            .unwrap();
            assert!(err < 1e-4, "{variant:?}: {err}");
        }
    }

    #[test]
    fn every_variant_overfits_small_corpus() {
        let data = synthetic(32, 6);
        let docs: Vec<TokenSequence> = data.iter().map(|(t, _)| t.clone()).collect();
        let idx = TokenIndex::fit(&docs, 100).unwrap();
        for variant in EncoderVariant::ALL {
            let mut m = EncoderModel::<f32>::new(EncoderConfig { seed: 1, ..EncoderConfig::new(variant) }, idx.clone()).unwrap();
            let cfg = TrainConfig { epochs: 300, batch_size: variant.default_batch_size(), lr: 3e-4, seed: 1, patience: None };
            train_encoder(&mut m, &data, None, &cfg).unwrap();
            let correct = data.iter().filter(|(t, l)| m.predict_proba(t).unwrap().label() == *l).count();
            assert_eq!(correct, 32, "{variant:?}");
        }
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let data = synthetic(8, 7);
        let run = || {
            let mut m = EncoderModel::<f32>::new(EncoderConfig { dropout: 0.1, seed: 4, ..tiny(EncoderVariant::Standard) }, index()).unwrap();
            let cfg = TrainConfig { epochs: 3, batch_size: 4, lr: 1e-3, seed: 2, patience: None };
            (train_encoder(&mut m, &data, None, &cfg).unwrap(), m.params().values())
        };
        assert_eq!(run(), run());
    }
}
