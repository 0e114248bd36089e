//! Word-level tokenizer and a pre-norm decoder-only transformer.
//!
//! Parameters live in one flat `f64` vector in registration order; each named
//! tensor is a view `[offset, offset + numel)` tagged with a [`Component`].
//! Forward passes bind that vector onto a fresh [`Tape`] in either `f32` or
//! `f64`, so the same model serves training, probing and curvature analysis.

mod batch;
mod checkpoint;
mod tokenizer;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::tensor::{Precision, Real, Tape, Tensor, TensorError, Var};
use crate::{Error, Result};

pub use batch::Batch;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use tokenizer::{Tokenizer, BOS, EOS, PAD, SPECIALS, UNK};

const LN_EPS: f64 = 1e-5;
const MASK: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    #[default]
    DecoderOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    #[serde(default)]
    pub model_type: ModelType,
    /// Requested vocabulary size. Kept as metadata; the embedding and head are
    /// always sized from the tokenizer.
    #[serde(default)]
    pub vocab_size: Option<usize>,
    pub d_model: usize,
    pub num_heads: usize,
    pub num_decoder_layers: usize,
    pub d_ff: usize,
    pub max_seq_length: usize,
    pub dropout: f64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            model_type: ModelType::DecoderOnly,
            vocab_size: Some(7000),
            d_model: 96,
            num_heads: 3,
            num_decoder_layers: 2,
            d_ff: 384,
            max_seq_length: 16,
            dropout: 0.1,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.num_heads == 0 || !self.d_model.is_multiple_of(self.num_heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of num_heads {}",
                self.d_model, self.num_heads
            ));
        }
        if self.num_decoder_layers == 0 || self.d_ff == 0 {
            return bad("num_decoder_layers and d_ff must be positive".into());
        }
        if self.max_seq_length < 2 {
            return bad(format!("max_seq_length {} must be at least 2", self.max_seq_length));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Closed-form parameter count for a vocabulary of `vocab` tokens.
    pub fn num_params(&self, vocab: usize) -> usize {
        let (d, f) = (self.d_model, self.d_ff);
        let layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
        vocab * d + self.num_decoder_layers * layer + 2 * d + d * vocab + vocab
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Embedding,
    Attention,
    FeedForward,
    Norm,
    Head,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Embedding,
        Component::Attention,
        Component::FeedForward,
        Component::Norm,
        Component::Head,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Embedding => "embedding",
            Component::Attention => "attention",
            Component::FeedForward => "feed_forward",
            Component::Norm => "norm",
            Component::Head => "head",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown component '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub component: Component,
    pub offset: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.numel()
    }
}

#[derive(Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Xavier,
    Normal(f64),
}

/// Per-layer parameter indices into the registration list.
#[derive(Debug, Clone, Copy)]
struct LayerIdx {
    ln1: (usize, usize),
    q: (usize, usize),
    k: (usize, usize),
    v: (usize, usize),
    o: (usize, usize),
    ln2: (usize, usize),
    ff1: (usize, usize),
    ff2: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    config: TransformerConfig,
    vocab: usize,
    specs: Vec<ParamSpec>,
    params: Vec<f64>,
    precision: Precision,
}

/// Output of a forward pass: logits `[B, L, V]` and the post-block residual
/// stream `[B, L, d]` of every layer, all still attached to the tape.
pub struct Forward<'t, T: Real> {
    pub logits: Var<'t, T>,
    pub hidden: Vec<Var<'t, T>>,
}

/// Detached forward results converted to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub logits: Tensor<f64>,
    pub hidden: Vec<Tensor<f64>>,
}

pub(crate) fn mix(seed: u64, site: u64) -> u64 {
    let mut z = seed ^ site.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DecoderModel {
    /// Registers every parameter and initialises it deterministically from
    /// `seed`.
    pub fn new(config: TransformerConfig, vocab: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab == 0 {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        let (d, f) = (config.d_model, config.d_ff);
        let mut plan: Vec<(String, Vec<usize>, Component, Init)> = Vec::new();
        let mut reg = |name: String, shape: Vec<usize>, c: Component, init: Init| {
            plan.push((name, shape, c, init));
        };
        use Component::*;
        reg("embedding.token".into(), vec![vocab, d], Embedding, Init::Normal((d as f64).powf(-0.5)));
        for l in 0..config.num_decoder_layers {
            let p = |s: &str| format!("layer{l}.{s}");
            reg(p("ln1.gain"), vec![d], Norm, Init::Ones);
            reg(p("ln1.bias"), vec![d], Norm, Init::Zeros);
            for m in ["q", "k", "v", "o"] {
                reg(p(&format!("attn.w{m}")), vec![d, d], Attention, Init::Xavier);
                reg(p(&format!("attn.b{m}")), vec![d], Attention, Init::Zeros);
            }
            reg(p("ln2.gain"), vec![d], Norm, Init::Ones);
            reg(p("ln2.bias"), vec![d], Norm, Init::Zeros);
            reg(p("ff.w1"), vec![d, f], FeedForward, Init::Xavier);
            reg(p("ff.b1"), vec![f], FeedForward, Init::Zeros);
            reg(p("ff.w2"), vec![f, d], FeedForward, Init::Xavier);
            reg(p("ff.b2"), vec![d], FeedForward, Init::Zeros);
        }
        reg("final_norm.gain".into(), vec![d], Norm, Init::Ones);
        reg("final_norm.bias".into(), vec![d], Norm, Init::Zeros);
        reg("head.w".into(), vec![d, vocab], Head, Init::Xavier);
        reg("head.b".into(), vec![vocab], Head, Init::Zeros);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut specs = Vec::with_capacity(plan.len());
        let mut params = Vec::with_capacity(config.num_params(vocab));
        for (name, shape, component, init) in plan {
            let n: usize = shape.iter().product();
            match init {
                Init::Zeros => params.extend(std::iter::repeat_n(0.0, n)),
                Init::Ones => params.extend(std::iter::repeat_n(1.0, n)),
                Init::Xavier => {
                    let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                    params.extend((0..n).map(|_| dist.sample(&mut rng)));
                }
                Init::Normal(std) => {
                    let dist = Normal::new(0.0, std).expect("positive std");
                    params.extend((0..n).map(|_| dist.sample(&mut rng)));
                }
            }
            specs.push(ParamSpec {
                name,
                shape,
                component,
                offset: params.len() - n,
            });
        }
        let mut model = DecoderModel {
            config,
            vocab,
            specs,
            params,
            precision: Precision::F32,
        };
        model.round_to_precision();
        Ok(model)
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self.round_to_precision();
        self
    }

    /// In 32-bit mode parameters are kept representable in `f32`.
    pub fn round_to_precision(&mut self) {
        if self.precision == Precision::F32 {
            self.params.iter_mut().for_each(|p| *p = *p as f32 as f64);
        }
    }

    /// Flat parameter vector in registration order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), TensorError> {
        if flat.len() != self.params.len() {
            return Err(TensorError::Length {
                expected: self.params.len(),
                got: flat.len(),
            });
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<&[f64]> {
        self.specs
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.params[s.range()])
    }

    /// Parameters belonging to `component` and the matching flat mask.
    pub fn parameters_of(&self, component: Component) -> (Vec<&ParamSpec>, Vec<bool>) {
        let mut mask = vec![false; self.params.len()];
        let subset: Vec<_> = self.specs.iter().filter(|s| s.component == component).collect();
        for s in &subset {
            mask[s.range()].iter_mut().for_each(|m| *m = true);
        }
        (subset, mask)
    }

    /// Contiguous-or-not flat index ranges per component.
    pub fn component_ranges(&self) -> Vec<(Component, Vec<(usize, usize)>)> {
        Component::ALL
            .into_iter()
            .map(|c| {
                let ranges = self
                    .specs
                    .iter()
                    .filter(|s| s.component == c)
                    .map(|s| (s.offset, s.offset + s.numel()))
                    .collect();
                (c, ranges)
            })
            .collect()
    }

    fn layer_indices(&self) -> Vec<LayerIdx> {
        let mut i = 1;
        let mut next = || {
            let pair = (i, i + 1);
            i += 2;
            pair
        };
        (0..self.config.num_decoder_layers)
            .map(|_| LayerIdx {
                ln1: next(),
                q: next(),
                k: next(),
                v: next(),
                o: next(),
                ln2: next(),
                ff1: next(),
                ff2: next(),
            })
            .collect()
    }

    /// Binds a flat parameter vector onto `tape` as leaves.
    pub fn bind<'t, T: Real>(
        &self,
        tape: &'t Tape<T>,
        flat: &[f64],
        requires_grad: bool,
    ) -> Result<Vec<Var<'t, T>>, TensorError> {
        if flat.len() != self.params.len() {
            return Err(TensorError::Length {
                expected: self.params.len(),
                got: flat.len(),
            });
        }
        self.specs
            .iter()
            .map(|s| {
                let data = flat[s.range()].iter().map(|&x| T::of(x)).collect();
                Ok(tape.leaf(Tensor::new(&s.shape, data)?, requires_grad))
            })
            .collect()
    }

    fn positional_encoding<T: Real>(&self, len: usize) -> Tensor<T> {
        let d = self.config.d_model;
        let mut pe = Vec::with_capacity(len * d);
        for pos in 0..len {
            for i in 0..d {
                let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
                pe.push(T::of(if i % 2 == 0 { angle.sin() } else { angle.cos() }));
            }
        }
        Tensor::new(&[len, d], pe).expect("shape matches")
    }

    fn causal_mask<T: Real>(len: usize) -> Tensor<T> {
        let data = (0..len * len)
            .map(|i| if i % len > i / len { T::of(MASK) } else { T::zero() })
            .collect();
        Tensor::new(&[len, len], data).expect("shape matches")
    }

    /// Forward pass over `ids` shaped `[rows, len]`. Dropout is applied only
    /// when `dropout_seed` is given.
    pub fn forward<'t, T: Real>(
        &self,
        tape: &'t Tape<T>,
        params: &[Var<'t, T>],
        ids: &[usize],
        rows: usize,
        len: usize,
        dropout_seed: Option<u64>,
    ) -> Result<Forward<'t, T>, TensorError> {
        let cfg = &self.config;
        if len > cfg.max_seq_length {
            return Err(TensorError::Shape {
                op: "forward",
                left: vec![rows, len],
                right: vec![rows, cfg.max_seq_length],
            });
        }
        let (d, h) = (cfg.d_model, cfg.num_heads);
        let dh = d / h;
        let mut site = 0u64;
        let mut drop = |x: Var<'t, T>| -> Result<Var<'t, T>, TensorError> {
            site += 1;
            match dropout_seed {
                Some(seed) if cfg.dropout > 0.0 => x.dropout(cfg.dropout, mix(seed, site)),
                _ => Ok(x),
            }
        };

        let pe = tape.constant(self.positional_encoding(len));
        let mask = tape.constant(Self::causal_mask(len));
        let mut x = params[0].embedding(ids, &[rows, len])?.add(&pe)?;
        x = drop(x)?;

        let heads = |t: Var<'t, T>| -> Result<Var<'t, T>, TensorError> {
            t.reshape(&[rows, len, h, dh])?
                .transpose(1, 2)?
                .reshape(&[rows * h, len, dh])
        };
        let mut hidden = Vec::with_capacity(cfg.num_decoder_layers);
        for li in self.layer_indices() {
            let p = |i: usize| &params[i];
            let a = x.layer_norm(p(li.ln1.0), p(li.ln1.1), 2, LN_EPS)?;
            let q = heads(a.matmul(p(li.q.0))?.add(p(li.q.1))?)?;
            let k = heads(a.matmul(p(li.k.0))?.add(p(li.k.1))?)?;
            let v = heads(a.matmul(p(li.v.0))?.add(p(li.v.1))?)?;
            let scores = q
                .bmm(&k.transpose(1, 2)?)?
                .scale(1.0 / (dh as f64).sqrt())?
                .add(&mask)?;
            let att = scores.softmax(2)?.bmm(&v)?;
            let merged = att
                .reshape(&[rows, h, len, dh])?
                .transpose(1, 2)?
                .reshape(&[rows, len, d])?;
            let out = merged.matmul(p(li.o.0))?.add(p(li.o.1))?;
            x = x.add(&drop(out)?)?;

            let b = x.layer_norm(p(li.ln2.0), p(li.ln2.1), 2, LN_EPS)?;
            let ff = b
                .matmul(p(li.ff1.0))?
                .add(p(li.ff1.1))?
                .relu()?
                .matmul(p(li.ff2.0))?
                .add(p(li.ff2.1))?;
            x = x.add(&drop(ff)?)?;
            hidden.push(x);
        }
        let n = params.len();
        let logits = x
            .layer_norm(&params[n - 4], &params[n - 3], 2, LN_EPS)?
            .matmul(&params[n - 2])?
            .add(&params[n - 1])?;
        Ok(Forward { logits, hidden })
    }

    fn loss_and_grad_t<T: Real>(
        &self,
        flat: &[f64],
        batch: &Batch,
        dropout_seed: Option<u64>,
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>), TensorError> {
        let tape = Tape::<T>::new();
        let params = self.bind(&tape, flat, with_grad)?;
        let out = self.forward(&tape, &params, &batch.inputs, batch.rows, batch.len, dropout_seed)?;
        let loss = out.logits.cross_entropy(&batch.targets, PAD)?;
        let value = loss.item().f64();
        if !with_grad {
            return Ok((value, None));
        }
        loss.backward()?;
        let mut grad = vec![0.0; flat.len()];
        for (spec, p) in self.specs.iter().zip(&params) {
            if let Some(g) = p.grad() {
                grad[spec.range()]
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(o, v)| *o = v.f64());
            }
        }
        Ok((value, Some(grad)))
    }

    /// Mean cross-entropy over non-padding targets and its gradient with
    /// respect to `flat`, computed at the model's precision.
    pub fn loss_and_grad(
        &self,
        flat: &[f64],
        batch: &Batch,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Vec<f64>), TensorError> {
        let (l, g) = match self.precision {
            Precision::F32 => self.loss_and_grad_t::<f32>(flat, batch, dropout_seed, true)?,
            Precision::F64 => self.loss_and_grad_t::<f64>(flat, batch, dropout_seed, true)?,
        };
        Ok((l, g.expect("gradient requested")))
    }

    /// Evaluation-mode loss at the given parameters.
    pub fn loss_at(&self, flat: &[f64], batch: &Batch) -> Result<f64, TensorError> {
        let (l, _) = match self.precision {
            Precision::F32 => self.loss_and_grad_t::<f32>(flat, batch, None, false)?,
            Precision::F64 => self.loss_and_grad_t::<f64>(flat, batch, None, false)?,
        };
        Ok(l)
    }

    fn infer_t<T: Real>(&self, ids: &[usize], rows: usize, len: usize) -> Result<Inference, TensorError> {
        let tape = Tape::<T>::new();
        let params = self.bind(&tape, &self.params, false)?;
        let out = self.forward(&tape, &params, ids, rows, len, None)?;
        let conv = |v: &Var<'_, T>| {
            let t = v.value();
            Tensor::new(t.shape(), t.to_f64())
        };
        Ok(Inference {
            logits: conv(&out.logits)?,
            hidden: out.hidden.iter().map(conv).collect::<Result<_, _>>()?,
        })
    }

    /// Evaluation-mode forward pass with results detached and widened to f64.
    pub fn infer(&self, ids: &[usize], rows: usize, len: usize) -> Result<Inference, TensorError> {
        match self.precision {
            Precision::F32 => self.infer_t::<f32>(ids, rows, len),
            Precision::F64 => self.infer_t::<f64>(ids, rows, len),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TransformerConfig {
        TransformerConfig {
            vocab_size: None,
            d_model: 8,
            num_heads: 2,
            num_decoder_layers: 2,
            d_ff: 16,
            max_seq_length: 8,
            dropout: 0.1,
            ..TransformerConfig::default()
        }
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let cfg = TransformerConfig::default();
        let m = DecoderModel::new(cfg.clone(), 7914, 0).unwrap();
        let d = 96;
        let per_layer = 4 * d + 4 * (d * d + d) + 2 * d * 384 + 384 + d;
        assert_eq!(m.num_params(), 7914 * d * 2 + 7914 + 2 * per_layer + 2 * d);
        assert_eq!(m.num_params(), cfg.num_params(7914));
    }

    #[test]
    fn components_partition_parameters() {
        let m = DecoderModel::new(tiny(), 20, 1).unwrap();
        let mut cover = vec![0u8; m.num_params()];
        let mut total = 0;
        for c in Component::ALL {
            let (subset, mask) = m.parameters_of(c);
            total += subset.iter().map(|s| s.numel()).sum::<usize>();
            for (i, &b) in mask.iter().enumerate() {
                cover[i] += b as u8;
            }
        }
        assert_eq!(total, m.num_params());
        assert!(cover.iter().all(|&c| c == 1));
        let (attn, _) = m.parameters_of(Component::Attention);
        assert_eq!(attn.iter().filter(|s| s.shape.len() == 2).count(), 8);
        assert_eq!(attn.iter().filter(|s| s.shape.len() == 1).count(), 8);
        assert!("mlp".parse::<Component>().is_err());
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = DecoderModel::new(tiny(), 20, 5).unwrap();
        let b = DecoderModel::new(tiny(), 20, 5).unwrap();
        assert_eq!(a.params(), b.params());
        let is_bias = |n: &str| {
            let last = n.rsplit('.').next().unwrap();
            last == "bias" || (last.starts_with('b') && last.len() <= 2)
        };
        let biases: Vec<_> = a.specs().iter().filter(|s| is_bias(&s.name)).collect();
        assert_eq!(biases.len(), 2 * (1 + 4 + 1 + 2) + 2);
        for s in biases {
            assert!(a.params()[s.range()].iter().all(|&x| x == 0.0), "{}", s.name);
        }
    }

    #[test]
    fn xavier_variance_within_tolerance() {
        let m = DecoderModel::new(TransformerConfig::default(), 100, 2).unwrap();
        let w = m.param("layer0.ff.w1").unwrap();
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let target = 2.0 / (96.0 + 384.0);
        assert!((var / target - 1.0).abs() < 0.2, "{var} vs {target}");
        let e = m.param("embedding.token").unwrap();
        let var = e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64;
        assert!((var * 96.0 - 1.0).abs() < 0.2);
    }

    #[test]
    fn logits_shape_and_causality() {
        let m = DecoderModel::new(tiny(), 20, 3).unwrap().with_precision(Precision::F64);
        let ids = vec![1, 5, 7, 9, 4];
        let a = m.infer(&ids, 1, 5).unwrap();
        assert_eq!(a.logits.shape(), &[1, 5, 20]);
        assert!(a.logits.is_finite());
        let mut changed = ids.clone();
        changed[4] = 11;
        let b = m.infer(&changed, 1, 5).unwrap();
        assert_eq!(a.logits.data()[..4 * 20], b.logits.data()[..4 * 20]);
        assert_ne!(a.logits.data()[4 * 20..], b.logits.data()[4 * 20..]);
        let one = m.infer(&[1], 1, 1).unwrap();
        assert_eq!(one.logits.shape(), &[1, 1, 20]);
        assert_eq!(a.hidden.len(), 2);
        assert!(m.infer(&[1; 9], 1, 9).is_err());
    }

    #[test]
    fn eval_forward_is_repeatable() {
        let m = DecoderModel::new(tiny(), 20, 3).unwrap();
        let ids = vec![1, 5, 7, 9, 1, 2, 3, 4];
        assert_eq!(m.infer(&ids, 2, 4).unwrap(), m.infer(&ids, 2, 4).unwrap());
    }

    #[test]
    fn params_round_trip_bit_exact() {
        let mut m = DecoderModel::new(tiny(), 20, 3).unwrap();
        let orig = m.params().to_vec();
        let batch = Batch {
            inputs: vec![1, 5, 6, 0],
            targets: vec![5, 6, 2, 0],
            rows: 1,
            len: 4,
            sentence_ids: vec![0],
            lengths: vec![2],
        };
        let before = m.loss_at(m.params(), &batch).unwrap();
        let perturbed: Vec<f64> = orig.iter().map(|x| x + 0.01).collect();
        m.set_params(&perturbed).unwrap();
        assert_ne!(m.loss_at(m.params(), &batch).unwrap(), before);
        m.set_params(&orig).unwrap();
        assert_eq!(m.params(), &orig[..]);
        assert_eq!(m.loss_at(m.params(), &batch).unwrap().to_bits(), before.to_bits());
        assert!(m.set_params(&orig[1..]).is_err());
    }
}
