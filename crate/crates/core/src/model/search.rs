//! Greedy and beam decoding.

use serde::{Deserialize, Serialize};

use crate::data::parallel::Indicator;
use crate::error::{Error, Result};
use crate::model::network::{argmax, DecodeState, EncodedSource};
use crate::model::Model;
use crate::numeric::{Real, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub max_len: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 1,
            max_len: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub symbols: Vec<String>,
    /// Extended ids of the emitted symbols (EOS excluded).
    pub ids: Vec<usize>,
    /// Mean log-probability per emitted symbol, EOS included.
    pub score: f64,
    /// Stopped at `max_len` without emitting EOS.
    pub truncated: bool,
    /// Attention weights over source positions for each emitted symbol.
    pub attention: Vec<Vec<f64>>,
}

struct Hyp {
    state: DecodeState,
    ids: Vec<usize>,
    attention: Vec<Vec<f64>>,
    logp: f64,
    finished: bool,
    truncated: bool,
}

impl Hyp {
    fn score(&self) -> f64 {
        let len = self.ids.len() + usize::from(self.finished && !self.truncated);
        if len == 0 {
            0.0
        } else {
            self.logp / len as f64
        }
    }
}

fn ln<T: Real>(p: T) -> f64 {
    p.as_f64().max(f64::MIN_POSITIVE).ln()
}

impl<T: Real> Model<T> {
    fn finish(&self, src: &EncodedSource, h: Hyp) -> Decoded {
        let score = h.score();
        Decoded {
            symbols: h.ids.iter().map(|&i| self.symbol_text(i, src).to_string()).collect(),
            ids: h.ids,
            score,
            truncated: h.truncated,
            attention: h.attention,
        }
    }

    fn start(&self, tape: &mut Tape<'_, T>, tokens: &[String], predicate: Option<usize>, source_lang: &Indicator, target: &Indicator, max_len: usize) -> Result<(EncodedSource, DecodeState)> {
        if max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        let src = self.encode(tape, tokens, predicate, source_lang)?;
        let state = self.initial_state(tape, &src, target)?;
        Ok((src, state))
    }

    /// Emits the most probable symbol at every step until EOS or `max_len`.
    pub fn greedy_decode(
        &self,
        tokens: &[String],
        predicate: Option<usize>,
        source_lang: &Indicator,
        target: &Indicator,
        max_len: usize,
    ) -> Result<Decoded> {
        let mut tape = Tape::new(&self.params);
        let (src, state) = self.start(&mut tape, tokens, predicate, source_lang, target, max_len)?;
        let eos = self.vocab.eos();
        let mut h = Hyp {
            state,
            ids: Vec::new(),
            attention: Vec::new(),
            logp: 0.0,
            finished: false,
            truncated: false,
        };
        while !h.finished {
            let step = self.decode_step(&mut tape, &h.state, &src)?;
            let agg = self.aggregate(tape.value(step.joint), &src);
            let best = argmax(&agg);
            h.logp += ln(agg[best]);
            h.state = step.state;
            if best == eos {
                h.finished = true;
            } else {
                h.ids.push(best);
                h.attention.push(tape.value(step.attention).iter().map(|x| x.as_f64()).collect());
                h.state.prev = self.feedback_id(best);
                if h.ids.len() >= max_len {
                    h.finished = true;
                    h.truncated = true;
                }
            }
        }
        Ok(self.finish(&src, h))
    }

    /// Length-normalized beam search. The greedy hypothesis competes in the
    /// final selection, so the result never scores below greedy decoding.
    pub fn beam_decode(
        &self,
        tokens: &[String],
        predicate: Option<usize>,
        source_lang: &Indicator,
        target: &Indicator,
        search: SearchConfig,
    ) -> Result<Decoded> {
        if search.beam_width == 0 {
            return Err(Error::invalid("beam width must be at least 1"));
        }
        let greedy = self.greedy_decode(tokens, predicate, source_lang, target, search.max_len)?;
        if search.beam_width == 1 {
            return Ok(greedy);
        }
        let width = search.beam_width;
        let mut tape = Tape::new(&self.params);
        let (src, state) = self.start(&mut tape, tokens, predicate, source_lang, target, search.max_len)?;
        let eos = self.vocab.eos();
        let mut beam = vec![Hyp {
            state,
            ids: Vec::new(),
            attention: Vec::new(),
            logp: 0.0,
            finished: false,
            truncated: false,
        }];
        let mut done: Vec<Hyp> = Vec::new();

        while !beam.is_empty() {
            // (logp, parent, ext id)
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            let mut steps = Vec::with_capacity(beam.len());
            for (hi, h) in beam.iter().enumerate() {
                let step = self.decode_step(&mut tape, &h.state, &src)?;
                let agg = self.aggregate(tape.value(step.joint), &src);
                let mut order: Vec<usize> = (0..agg.len()).collect();
                order.sort_by(|&a, &b| agg[b].partial_cmp(&agg[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
                for &id in order.iter().take(width) {
                    cands.push((h.logp + ln(agg[id]), hi, id));
                }
                steps.push(step);
            }
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next = Vec::new();
            for (logp, hi, id) in cands.into_iter().take(width) {
                let parent = &beam[hi];
                let step = &steps[hi];
                let mut h = Hyp {
                    state: step.state.clone(),
                    ids: parent.ids.clone(),
                    attention: parent.attention.clone(),
                    logp,
                    finished: false,
                    truncated: false,
                };
                if id == eos {
                    h.finished = true;
                    done.push(h);
                    continue;
                }
                h.ids.push(id);
                h.attention.push(tape.value(step.attention).iter().map(|x| x.as_f64()).collect());
                h.state.prev = self.feedback_id(id);
                if h.ids.len() >= search.max_len {
                    h.finished = true;
                    h.truncated = true;
                    done.push(h);
                } else {
                    next.push(h);
                }
            }
            beam = next;
        }

        let mut best: Option<Hyp> = None;
        for h in done {
            if best.as_ref().is_none_or(|b| h.score() > b.score()) {
                best = Some(h);
            }
        }
        let best = best.expect("beam search finishes at least one hypothesis");
        if greedy.score > best.score() {
            return Ok(greedy);
        }
        Ok(self.finish(&src, best))
    }

    pub fn decode(
        &self,
        tokens: &[String],
        predicate: Option<usize>,
        source_lang: &Indicator,
        target: &Indicator,
        search: SearchConfig,
    ) -> Result<Decoded> {
        self.beam_decode(tokens, predicate, source_lang, target, search)
    }
}
