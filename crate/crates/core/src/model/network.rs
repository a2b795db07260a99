//! Forward computations recorded on a [`Tape`].

use crate::data::parallel::Indicator;
use crate::error::{Error, Result};
use crate::model::{EncoderStyle, Model};
use crate::numeric::ops::CE_EPS;
use crate::numeric::{Real, Tape, Var};
use crate::vocab::{encode_target, InstanceExtension, TargetSymbol};

/// One training or inference example.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    /// Source tokens including the leading translation token.
    pub source: Vec<String>,
    /// Predicate position within `source`, if any.
    pub predicate: Option<usize>,
    pub source_lang: Indicator,
    pub target_lang: Indicator,
    /// Target symbols without BOS/EOS.
    pub target: Vec<String>,
}

/// Encoder output for one source sentence.
#[derive(Clone, Debug)]
pub struct EncodedSource {
    /// `T_x x e` matrix of encoder states.
    pub states: Var,
    keys: Var,
    copy_proj: Var,
    init: Var,
    pub ext: InstanceExtension,
    /// Extended id emitted by each copy position: the `V ∪ L` id when the
    /// token is there, otherwise `|V ∪ L| + first position of the token`.
    pub copy_targets: Vec<usize>,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.ext.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ext.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct DecodeState {
    pub hidden: Var,
    pub cell: Var,
    /// `V ∪ L` id of the previously emitted symbol.
    pub prev: usize,
    pub target_lang: usize,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Softmax over `[generate scores; copy scores]`, length `|V ∪ L| + T_x`.
    pub joint: Var,
    pub attention: Var,
    pub state: DecodeState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub tokens: usize,
    pub correct: usize,
}

impl LossStats {
    pub fn absorb(&mut self, other: &LossStats) {
        self.loss += other.loss;
        self.tokens += other.tokens;
        self.correct += other.correct;
    }

    pub fn accuracy(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.correct as f64 / self.tokens as f64
        }
    }
}

impl<T: Real> Model<T> {
    fn run_lstm(
        &self,
        tape: &mut Tape<'_, T>,
        inputs: &[Var],
        (w, b): (crate::numeric::ParamId, crate::numeric::ParamId),
        reverse: bool,
    ) -> Result<Vec<Var>> {
        let d = self.config.encoder_hidden;
        let wv = tape.param(w);
        let bv = tape.param(b);
        let mut h = tape.vector(vec![T::zero(); d]);
        let mut c = tape.vector(vec![T::zero(); d]);
        let mut out = vec![h; inputs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..inputs.len()).rev())
        } else {
            Box::new(0..inputs.len())
        };
        for t in order {
            let (hn, cn) = tape.lstm(inputs[t], h, c, wv, bv)?;
            h = hn;
            c = cn;
            out[t] = hn;
        }
        Ok(out)
    }

    /// Encodes `tokens` (already prefixed with the translation token).
    ///
    /// Every step sees `[word; predicate flag; source language]`.
    pub fn encode(
        &self,
        tape: &mut Tape<'_, T>,
        tokens: &[String],
        predicate: Option<usize>,
        source_lang: &Indicator,
    ) -> Result<EncodedSource> {
        if tokens.is_empty() {
            return Err(Error::Empty { op: "encode" });
        }
        if let Some(p) = predicate {
            if p >= tokens.len() {
                return Err(Error::IndexOutOfRange {
                    op: "encode",
                    index: p,
                    len: tokens.len(),
                });
            }
        }
        let ids = &self.ids;
        let lang_row = self.indicator(source_lang)?;
        let mut layer_in = Vec::with_capacity(tokens.len());
        for (t, tok) in tokens.iter().enumerate() {
            let w = tape.row(ids.embed, self.vocab.id_or_unk(tok))?;
            let p = tape.row(ids.predicate, usize::from(predicate == Some(t)))?;
            let l = tape.row(ids.language, lang_row)?;
            layer_in.push(tape.concat(&[w, p, l]));
        }

        let mut finals = Vec::new();
        for (layer, dirs) in ids.encoder.iter().enumerate() {
            let outs = match self.config.encoder_style {
                EncoderStyle::Bidirectional => {
                    let fwd = self.run_lstm(tape, &layer_in, dirs[0], false)?;
                    let bwd = self.run_lstm(tape, &layer_in, dirs[1], true)?;
                    if layer + 1 == ids.encoder.len() {
                        finals = vec![*fwd.last().expect("non-empty"), bwd[0]];
                    }
                    fwd.iter().zip(&bwd).map(|(f, b)| tape.concat(&[*f, *b])).collect()
                }
                EncoderStyle::Alternating => {
                    let reverse = layer % 2 == 1;
                    let out = self.run_lstm(tape, &layer_in, dirs[0], reverse)?;
                    if layer + 1 == ids.encoder.len() {
                        finals = vec![if reverse { out[0] } else { *out.last().expect("non-empty") }];
                    }
                    out
                }
            };
            layer_in = outs;
        }
        let states = tape.stack_rows(&layer_in)?;

        let summary = tape.concat(&finals);
        let bw = tape.param(ids.bridge_w);
        let bb = tape.param(ids.bridge_b);
        let proj = tape.matvec(bw, summary)?;
        let init = tape.add(proj, bb)?;

        let wk = tape.param(ids.att_keys);
        let keys = tape.matmul(states, wk)?;
        let wc = tape.param(ids.copy_w);
        let hc = tape.matmul(states, wc)?;
        let copy_proj = tape.tanh(hc);

        let ext = InstanceExtension::new(tokens.to_vec());
        let n = self.vocab.len();
        let unk = self.vocab.unk();
        let copy_targets = tokens
            .iter()
            .enumerate()
            .map(|(j, tok)| match self.vocab.id(tok) {
                Some(id) if id != unk => id,
                _ => n + tokens.iter().position(|t| t == tok).unwrap_or(j),
            })
            .collect();
        Ok(EncodedSource {
            states,
            keys,
            copy_proj,
            init,
            ext,
            copy_targets,
        })
    }

    pub fn initial_state(&self, tape: &mut Tape<'_, T>, src: &EncodedSource, target_lang: &Indicator) -> Result<DecodeState> {
        let cell = tape.vector(vec![T::zero(); self.config.decoder_hidden]);
        Ok(DecodeState {
            hidden: src.init,
            cell,
            prev: self.vocab.bos(),
            target_lang: self.indicator(target_lang)?,
            terminal: false,
        })
    }

    /// Additive attention of `query_state` over the encoder states.
    pub fn attend(&self, tape: &mut Tape<'_, T>, src: &EncodedSource, query_state: Var) -> Result<(Var, Var)> {
        let ids = &self.ids;
        let wq = tape.param(ids.att_query);
        let bq = tape.param(ids.att_bias);
        let v = tape.param(ids.att_v);
        let q = tape.matvec(wq, query_state)?;
        let q = tape.add(q, bq)?;
        let scores = tape.additive_scores(src.keys, q, v)?;
        let alpha = tape.softmax(scores)?;
        let context = tape.vecmat(alpha, src.states)?;
        Ok((context, alpha))
    }

    /// One decoder step: attend with the previous state, update the LSTM on
    /// `[y_{t-1}; l; c_t]`, then score generation and copying jointly.
    pub fn decode_step(&self, tape: &mut Tape<'_, T>, state: &DecodeState, src: &EncodedSource) -> Result<StepOutput> {
        if state.terminal {
            return Err(Error::invalid("decode_step called on a terminal state"));
        }
        let ids = &self.ids;
        let (context, alpha) = self.attend(tape, src, state.hidden)?;
        let y = tape.row(ids.embed, state.prev)?;
        let l = tape.row(ids.language, state.target_lang)?;
        let input = tape.concat(&[y, l, context]);
        let w = tape.param(ids.dec_w);
        let b = tape.param(ids.dec_b);
        let (hidden, cell) = tape.lstm(input, state.hidden, state.cell, w, b)?;

        let feat = tape.concat(&[hidden, context]);
        let wo = tape.param(ids.out_w);
        let bo = tape.param(ids.out_b);
        let gen = tape.matvec(wo, feat)?;
        let gen = tape.add(gen, bo)?;
        let copy = tape.matvec(src.copy_proj, hidden)?;
        let scores = tape.concat(&[gen, copy]);
        let joint = tape.softmax(scores)?;
        Ok(StepOutput {
            joint,
            attention: alpha,
            state: DecodeState {
                hidden,
                cell,
                prev: state.prev,
                target_lang: state.target_lang,
                terminal: false,
            },
        })
    }

    /// Sums copy mass onto the symbol each source position emits.
    ///
    /// Index `i < |V ∪ L|` holds generate mass plus copy mass of positions
    /// holding that symbol; index `|V ∪ L| + j` holds the copy mass of an
    /// out-of-vocabulary token first seen at position `j`.
    pub fn aggregate(&self, joint: &[T], src: &EncodedSource) -> Vec<T> {
        let n = self.vocab.len();
        let mut out = joint[..n].to_vec();
        out.resize(n + src.len(), T::zero());
        for (j, &target) in src.copy_targets.iter().enumerate() {
            out[target] = out[target] + joint[n + j];
        }
        out
    }

    /// Surface text of an extended id.
    pub fn symbol_text<'a>(&'a self, id: usize, src: &'a EncodedSource) -> &'a str {
        let n = self.vocab.len();
        if id < n {
            self.vocab.symbol(id)
        } else {
            &src.ext.tokens[id - n]
        }
    }

    /// Decoder input id for an emitted extended id.
    pub fn feedback_id(&self, id: usize) -> usize {
        if id < self.vocab.len() {
            id
        } else {
            self.vocab.unk()
        }
    }

    /// Teacher-forced negative log-likelihood of `instance.target` + EOS.
    pub fn forward_loss(&self, tape: &mut Tape<'_, T>, instance: &Instance) -> Result<(Var, LossStats)> {
        let src = self.encode(tape, &instance.source, instance.predicate, &instance.source_lang)?;
        let mut state = self.initial_state(tape, &src, &instance.target_lang)?;
        let mut gold: Vec<TargetSymbol> = encode_target(&instance.target, &self.vocab, &src.ext);
        gold.push(TargetSymbol {
            text: crate::vocab::EOS.to_string(),
            vocab_id: Some(self.vocab.eos()),
            copy_positions: Vec::new(),
        });
        let eps = T::lit(CE_EPS);
        let mut losses = Vec::with_capacity(gold.len());
        let mut stats = LossStats::default();
        for sym in &gold {
            let step = self.decode_step(tape, &state, &src)?;
            let slots = sym.output_slots(&self.vocab);
            losses.push(tape.cross_entropy(step.joint, &slots, eps)?);

            let agg = self.aggregate(tape.value(step.joint), &src);
            let best = argmax(&agg);
            let gold_ext = match sym.vocab_id {
                Some(id) => id,
                None if !sym.copy_positions.is_empty() => src.copy_targets[sym.copy_positions[0]],
                None => self.vocab.unk(),
            };
            stats.tokens += 1;
            stats.correct += usize::from(best == gold_ext);

            state = step.state;
            state.prev = sym.input_id(&self.vocab);
        }
        let total = tape.sum(&losses)?;
        stats.loss = tape.scalar(total).as_f64();
        Ok((total, stats))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
