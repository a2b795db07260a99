//! Cross-lingual data generation with a back-translation filter.
//!
//! Input lines are `lang <TAB> predicate index <TAB> tokens`.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::parallel::{prefix_tokens, write_parallel, Indicator, ParallelPair, Target};
use crate::data::records::{write_records, GenerationRecord};
use crate::data::srl::{delinearize, is_bracket, linearize, LinearizedSeq, RepairLog};
use crate::error::{Error, Result};
use crate::metrics::bleu_sentence;
use crate::model::checkpoint::load_checkpoint;
use crate::model::{Model, SearchConfig};
use crate::numeric::{Precision, Real};
use crate::pipeline::{manifest_path, to_json, Recorder, RunOptions};

pub const DEFAULT_THRESHOLD: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenerationInput {
    pub language: Indicator,
    pub predicate: usize,
    pub tokens: Vec<String>,
}

pub fn read_generation_input(path: &Path) -> Result<Vec<GenerationInput>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::parse(path, i + 1, msg);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let language: Indicator = fields[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        if language.srl {
            return Err(bad(format!("source language `{language}` must be a plain language code")));
        }
        let predicate: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad predicate index `{}`", fields[1])))?;
        let tokens: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
        if predicate >= tokens.len() {
            return Err(bad(format!("predicate index {predicate} outside sentence of {} tokens", tokens.len())));
        }
        out.push(GenerationInput { language, predicate, tokens });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerateRequest {
    pub checkpoint: PathBuf,
    /// Translation model from the target language back to the source.
    pub reverse_checkpoint: Option<PathBuf>,
    pub input: PathBuf,
    pub target: Indicator,
    pub threshold: f64,
    pub records: PathBuf,
    /// Kept outputs as a labeled parallel corpus in the target language.
    pub kept: PathBuf,
    pub search: SearchConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub total: usize,
    pub kept: usize,
    /// Kept records that could not be turned into a training pair.
    pub unusable: usize,
    pub repairs: RepairLog,
    pub truncated: usize,
}

impl GenerateSummary {
    pub fn kept_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }
}

struct Generated {
    record: GenerationRecord,
    pair: Option<ParallelPair>,
    repairs: RepairLog,
    truncated: bool,
}

/// The emitted word that attends most to the source predicate.
fn target_predicate(symbols: &[String], attention: &[Vec<f64>], source_predicate: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut word = 0;
    for (sym, att) in symbols.iter().zip(attention) {
        if is_bracket(sym) {
            continue;
        }
        let w = att.get(source_predicate).copied().unwrap_or(0.0);
        if best.is_none_or(|(_, b)| w > b) {
            best = Some((word, w));
        }
        word += 1;
    }
    best.map(|(i, _)| i)
}

fn generate_one<T: Real>(
    model: &Model<T>,
    reverse: &Model<T>,
    input: &GenerationInput,
    target: &Indicator,
    threshold: f64,
    search: SearchConfig,
) -> Result<Generated> {
    let prefixed = prefix_tokens(&input.tokens, target)?;
    let d = model.decode(&prefixed, Some(input.predicate + 1), &input.language, target, search)?;
    let plain_target = Indicator::plain(&target.lang)?;
    let seq = LinearizedSeq::new(d.symbols.clone(), target.to_string());
    let words = seq.words();
    let back = if words.is_empty() {
        Vec::new()
    } else {
        let src = prefix_tokens(&words, &input.language)?;
        reverse.decode(&src, None, &plain_target, &input.language, search)?.symbols
    };
    let bleu = bleu_sentence(&back, &input.tokens)?;
    let record = GenerationRecord::new(input.tokens.clone(), seq.clone(), back, bleu, threshold);

    let mut repairs = RepairLog::default();
    let pair = match target_predicate(&d.symbols, &d.attention, input.predicate + 1) {
        Some(pred) if record.kept => {
            let out = delinearize(&seq, pred);
            repairs = out.repairs;
            linearize(&out.sentence, &target.to_string()).ok().map(|clean| ParallelPair {
                source_lang: plain_target.clone(),
                target: target.clone(),
                source: words,
                target_seq: Target::Labeled(clean),
                predicate_index: Some(pred),
            })
        }
        _ => None,
    };
    Ok(Generated {
        record,
        pair,
        repairs,
        truncated: d.truncated,
    })
}

/// Generates labeled target sentences, back-translates their words and keeps
/// those whose sentence BLEU against the source reaches the threshold.
pub fn generate_with<T: Real>(
    model: &Model<T>,
    reverse: &Model<T>,
    inputs: &[GenerationInput],
    target: &Indicator,
    threshold: f64,
    search: SearchConfig,
) -> Result<(Vec<GenerationRecord>, Vec<ParallelPair>, GenerateSummary)> {
    if !target.srl {
        return Err(Error::invalid(format!("generation target `{target}` must be a labeled (-SRL) indicator")));
    }
    let plain_target = Indicator::plain(&target.lang)?;
    for ind in [target, &plain_target] {
        let (m, role) = if ind.srl { (model, "generator") } else { (reverse, "reverse model") };
        if !m.knows_indicator(ind) {
            return Err(Error::invalid(format!("{role} does not support indicator `{ind}`")));
        }
    }
    for lang in inputs.iter().map(|i| &i.language) {
        if !model.knows_indicator(lang) || !reverse.knows_indicator(lang) {
            return Err(Error::invalid(format!("source language `{lang}` unknown to the generator or the reverse model")));
        }
    }
    let results: Vec<Generated> = inputs
        .par_iter()
        .map(|i| generate_one(model, reverse, i, target, threshold, search))
        .collect::<Result<_>>()?;
    let mut summary = GenerateSummary {
        total: results.len(),
        ..Default::default()
    };
    let mut records = Vec::with_capacity(results.len());
    let mut pairs = Vec::new();
    for g in results {
        summary.repairs.absorb(&g.repairs);
        summary.truncated += usize::from(g.truncated);
        if g.record.kept {
            summary.kept += 1;
            match g.pair {
                Some(p) => pairs.push(p),
                None => summary.unusable += 1,
            }
        }
        records.push(g.record);
    }
    Ok((records, pairs, summary))
}

fn run<T: Real>(req: &GenerateRequest, reverse_path: &Path, inputs: &[GenerationInput]) -> Result<GenerateSummary> {
    let model = load_checkpoint::<T>(&req.checkpoint)?.model;
    let reverse = load_checkpoint::<T>(reverse_path)?.model;
    let (records, pairs, summary) = generate_with(&model, &reverse, inputs, &req.target, req.threshold, req.search)?;
    write_records(&req.records, &records)?;
    write_parallel(&req.kept, &pairs)?;
    Ok(summary)
}

pub fn cmd_generate(req: &GenerateRequest, opts: RunOptions) -> Result<GenerateSummary> {
    let rec = Recorder::start("generate");
    let reverse = match &req.reverse_checkpoint {
        Some(p) if p.is_file() => p.clone(),
        other => {
            let what = other.as_ref().map_or("no reverse checkpoint given".to_string(), |p| format!("reverse checkpoint {} not found", p.display()));
            return Err(Error::invalid(format!(
                "{what}: generation filters its outputs by back-translating them, which needs a translation \
                 model from {} back to the source language (train one with mode = \"translation\")",
                req.target.lang
            )));
        }
    };
    if !req.threshold.is_finite() || req.threshold < 0.0 {
        return Err(Error::invalid(format!("BLEU threshold must be a non-negative number, got {}", req.threshold)));
    }
    let inputs = read_generation_input(&req.input)?;
    let summary = match opts.precision {
        Precision::F32 => run::<f32>(req, &reverse, &inputs)?,
        Precision::F64 => run::<f64>(req, &reverse, &inputs)?,
    };
    if summary.unusable > 0 {
        warn!("{} kept output(s) had no usable predicate and were left out of {}", summary.unusable, req.kept.display());
    }
    info!("kept {} of {} generated sentences at BLEU >= {}", summary.kept, summary.total, req.threshold);
    rec.finish(
        &manifest_path(&req.records),
        opts,
        serde_json::json!({ "request": to_json(req), "summary": to_json(&summary) }),
        &[&req.checkpoint, &reverse, &req.input],
        &[&req.records, &req.kept],
    )?;
    Ok(summary)
}
