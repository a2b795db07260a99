use rayon::prelude::*;
use serde::Serialize;

use crate::data::srl::{delinearize, LinearizedSeq, RepairLog};
use crate::error::Result;
use crate::metrics::{bleu_triple, srl_f1_corpus, BleuTriple, F1Report};
use crate::model::{Decoded, Model, SearchConfig};
use crate::numeric::Real;
use crate::train::corpus::{is_copy_mode, Corpus};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DevReport {
    /// `f1` for copy-mode labeled sets, `bleu` otherwise.
    pub metric: &'static str,
    /// F1 in `[0, 1]` or full-sequence BLEU in `[0, 100]`.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<F1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuTriple>,
    pub repairs: RepairLog,
    pub truncated: usize,
}

pub fn decode_corpus<T: Real>(model: &Model<T>, corpus: &Corpus, search: SearchConfig) -> Result<Vec<Decoded>> {
    corpus
        .instances
        .par_iter()
        .map(|i| model.decode(&i.source, i.predicate, &i.source_lang, &i.target_lang, search))
        .collect()
}

/// Decodes every dev instance and scores the outputs: labeled F1 when all
/// instances label their own language, three-view BLEU otherwise.
pub fn evaluate_dev<T: Real>(model: &Model<T>, dev: &Corpus, search: SearchConfig) -> Result<DevReport> {
    let decoded = decode_corpus(model, dev, search)?;
    let truncated = decoded.iter().filter(|d| d.truncated).count();
    let mut repairs = RepairLog::default();
    if !dev.instances.is_empty() && dev.instances.iter().all(is_copy_mode) {
        let mut pairs = Vec::with_capacity(decoded.len());
        for (inst, d) in dev.instances.iter().zip(&decoded) {
            let tag = inst.target_lang.to_string();
            let pred = inst.predicate.map_or(0, |p| p - 1);
            let out = delinearize(&LinearizedSeq::new(d.symbols.clone(), tag.clone()), pred);
            repairs.absorb(&out.repairs);
            let gold = delinearize(&LinearizedSeq::new(inst.target.clone(), tag), pred).sentence;
            pairs.push((out.sentence, gold));
        }
        let f1 = srl_f1_corpus(pairs.iter().map(|(p, g)| (p, g)), dev.f1_mode);
        Ok(DevReport {
            metric: "f1",
            value: f1.f1,
            f1: Some(f1),
            bleu: None,
            repairs,
            truncated,
        })
    } else {
        let hyps: Vec<Vec<String>> = decoded.into_iter().map(|d| d.symbols).collect();
        let refs: Vec<Vec<String>> = dev.instances.iter().map(|i| i.target.clone()).collect();
        let bleu = bleu_triple(&hyps, &refs)?;
        Ok(DevReport {
            metric: "bleu",
            value: bleu.full.score,
            f1: None,
            bleu: Some(bleu),
            repairs,
            truncated,
        })
    }
}
