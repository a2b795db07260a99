//! Encoder, attention and copy-aware decoder.

pub mod checkpoint;
pub mod network;
pub mod search;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::parallel::Indicator;
use crate::error::{Error, Result};
use crate::numeric::{ParamId, ParamSet, Real, Tensor};
use crate::vocab::Vocabulary;

pub use network::{DecodeState, EncodedSource, Instance, LossStats, StepOutput};
pub use search::{Decoded, SearchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncoderStyle {
    /// Every layer runs both directions and concatenates them.
    #[default]
    Bidirectional,
    /// One direction per layer, flipping at each layer.
    Alternating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub predicate_dim: usize,
    pub language_dim: usize,
    /// Hidden size per encoder direction.
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub encoder_style: EncoderStyle,
    pub decoder_hidden: usize,
    pub attention_dim: usize,
    /// Language indicators the model can be conditioned on, e.g. `EN`, `DE-SRL`.
    pub indicators: Vec<Indicator>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 64,
            predicate_dim: 8,
            language_dim: 8,
            encoder_hidden: 64,
            encoder_layers: 2,
            encoder_style: EncoderStyle::Bidirectional,
            decoder_hidden: 128,
            attention_dim: 128,
            indicators: Vec::new(),
        }
    }
}

impl ModelConfig {
    /// Width of one encoder state `h_j`.
    pub fn encoder_out(&self) -> usize {
        match self.encoder_style {
            EncoderStyle::Bidirectional => 2 * self.encoder_hidden,
            EncoderStyle::Alternating => self.encoder_hidden,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("predicate_dim", self.predicate_dim),
            ("language_dim", self.language_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("encoder_layers", self.encoder_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("attention_dim", self.attention_dim),
        ] {
            if v == 0 {
                errs.push(format!("model.{name} must be positive"));
            }
        }
        if self.indicators.is_empty() {
            errs.push("model.indicators must list at least one language indicator".into());
        }
        errs
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ParamIds {
    pub embed: ParamId,
    pub predicate: ParamId,
    pub language: ParamId,
    /// `[layer][direction] -> (w, b)`; alternating encoders have one direction.
    pub encoder: Vec<Vec<(ParamId, ParamId)>>,
    pub bridge_w: ParamId,
    pub bridge_b: ParamId,
    pub att_keys: ParamId,
    pub att_query: ParamId,
    pub att_bias: ParamId,
    pub att_v: ParamId,
    pub dec_w: ParamId,
    pub dec_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub copy_w: ParamId,
}

/// A parameterized model together with its vocabulary.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamSet<T>,
    pub(crate) ids: ParamIds,
    indicator_index: HashMap<Indicator, usize>,
}

fn lstm_params<T: Real, R: Rng>(p: &mut ParamSet<T>, name: &str, input: usize, hidden: usize, rng: &mut R) -> (ParamId, ParamId) {
    let w = p.add_uniform(format!("{name}.w"), &[4 * hidden, input + hidden], input + hidden, rng);
    let mut b = vec![T::zero(); 4 * hidden];
    for v in &mut b[hidden..2 * hidden] {
        *v = T::one();
    }
    let b = p.add(format!("{name}.b"), Tensor::vector(b));
    (w, b)
}

impl<T: Real> Model<T> {
    pub fn new<R: Rng>(config: ModelConfig, vocab: Vocabulary, rng: &mut R) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let c = &config;
        let nsym = vocab.len();
        let e = c.encoder_out();
        let mut p = ParamSet::new();
        let embed = p.add_uniform("embed.symbols", &[nsym, c.word_dim], c.word_dim, rng);
        let predicate = p.add_uniform("embed.predicate", &[2, c.predicate_dim], c.predicate_dim, rng);
        let language = p.add_uniform("embed.language", &[c.indicators.len(), c.language_dim], c.language_dim, rng);

        let mut encoder = Vec::new();
        for layer in 0..c.encoder_layers {
            let input = if layer == 0 {
                c.word_dim + c.predicate_dim + c.language_dim
            } else {
                e
            };
            let dirs = match c.encoder_style {
                EncoderStyle::Bidirectional => vec!["fwd", "bwd"],
                EncoderStyle::Alternating => vec![if layer % 2 == 0 { "fwd" } else { "bwd" }],
            };
            encoder.push(
                dirs.iter()
                    .map(|d| lstm_params(&mut p, &format!("encoder.{layer}.{d}"), input, c.encoder_hidden, rng))
                    .collect(),
            );
        }
        let bridge_in = match c.encoder_style {
            EncoderStyle::Bidirectional => 2 * c.encoder_hidden,
            EncoderStyle::Alternating => c.encoder_hidden,
        };
        let bridge_w = p.add_uniform("bridge.w", &[c.decoder_hidden, bridge_in], bridge_in, rng);
        let bridge_b = p.add("bridge.b", Tensor::zeros(&[c.decoder_hidden]));
        let att_keys = p.add_uniform("attention.keys", &[e, c.attention_dim], e, rng);
        let att_query = p.add_uniform("attention.query", &[c.attention_dim, c.decoder_hidden], c.decoder_hidden, rng);
        let att_bias = p.add("attention.bias", Tensor::zeros(&[c.attention_dim]));
        let att_v = p.add_uniform("attention.v", &[c.attention_dim], c.attention_dim, rng);
        let dec_in = c.word_dim + c.language_dim + e;
        let (dec_w, dec_b) = lstm_params(&mut p, "decoder", dec_in, c.decoder_hidden, rng);
        let out_in = c.decoder_hidden + e;
        let out_w = p.add_uniform("output.w", &[nsym, out_in], out_in, rng);
        let out_b = p.add("output.b", Tensor::zeros(&[nsym]));
        let copy_w = p.add_uniform("copy.w", &[e, c.decoder_hidden], e, rng);

        let indicator_index = c.indicators.iter().enumerate().map(|(i, ind)| (ind.clone(), i)).collect();
        Ok(Model {
            ids: ParamIds {
                embed,
                predicate,
                language,
                encoder,
                bridge_w,
                bridge_b,
                att_keys,
                att_query,
                att_bias,
                att_v,
                dec_w,
                dec_b,
                out_w,
                out_b,
                copy_w,
            },
            config,
            vocab,
            params: p,
            indicator_index,
        })
    }

    pub fn indicator(&self, ind: &Indicator) -> Result<usize> {
        self.indicator_index
            .get(ind)
            .copied()
            .ok_or_else(|| Error::invalid(format!("language indicator `{ind}` unknown to this model")))
    }

    pub fn knows_indicator(&self, ind: &Indicator) -> bool {
        self.indicator_index.contains_key(ind)
    }

    /// Copies pre-trained vectors into the rows of matching words. Returns
    /// how many rows were set.
    pub fn load_pretrained(&mut self, vectors: &HashMap<String, Vec<f64>>) -> Result<usize> {
        let dim = self.config.word_dim;
        let table = self.params.get_mut(self.ids.embed);
        let mut hits = 0;
        for (i, w) in self.vocab.words().iter().enumerate() {
            if let Some(v) = vectors.get(w) {
                if v.len() != dim {
                    return Err(Error::Shape {
                        op: "load_pretrained",
                        detail: format!("`{w}` has {} values, model expects {dim}", v.len()),
                    });
                }
                for (dst, src) in table.row_mut(i).iter_mut().zip(v) {
                    *dst = T::lit(*src);
                }
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
            ids: self.ids.clone(),
            indicator_index: self.indicator_index.clone(),
        }
    }
}
