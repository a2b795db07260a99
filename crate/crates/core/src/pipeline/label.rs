use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::conll::{read_conll_dep_sentences, read_conll_span, write_conll_dep, write_conll_span, DepReaderConfig, DepSentence, SpanSentence};
use crate::data::parallel::{prefix_tokens, Indicator};
use crate::data::srl::{delinearize, Argument, LinearizedSeq, RepairLog};
use crate::error::{Error, Result};
use crate::model::checkpoint::load_checkpoint;
use crate::model::{Model, SearchConfig};
use crate::numeric::{Precision, Real};
use crate::pipeline::{manifest_path, to_json, Recorder, RunOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelFormat {
    Conll09,
    Conll05,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabelRequest {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub format: LabelFormat,
    pub language: String,
    /// Defaults to `<language>-SRL`.
    pub target: Option<Indicator>,
    pub search: SearchConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LabelSummary {
    pub sentences: usize,
    pub predicates: usize,
    pub repairs: RepairLog,
    pub truncated: usize,
    /// Frames whose decoded words differ from the input tokens.
    pub word_mismatches: usize,
    /// Decoded arguments that fell outside the sentence or on the verb span.
    pub dropped_arguments: usize,
}

struct FrameResult {
    args: Vec<Argument>,
    repairs: RepairLog,
    truncated: bool,
    mismatch: bool,
}

fn label_frame<T: Real>(
    model: &Model<T>,
    tokens: &[String],
    predicate: usize,
    source: &Indicator,
    target: &Indicator,
    search: SearchConfig,
) -> Result<FrameResult> {
    let input = prefix_tokens(tokens, target)?;
    let d = model.decode(&input, Some(predicate + 1), source, target, search)?;
    let out = delinearize(&LinearizedSeq::new(d.symbols, target.to_string()), predicate);
    Ok(FrameResult {
        mismatch: out.sentence.tokens != tokens,
        args: out.sentence.arguments,
        repairs: out.repairs,
        truncated: d.truncated,
    })
}

fn check_indicators<T: Real>(model: &Model<T>, source: &Indicator, target: &Indicator) -> Result<()> {
    for ind in [source, target] {
        if !model.knows_indicator(ind) {
            return Err(Error::invalid(format!(
                "checkpoint does not support indicator `{ind}` (known: {})",
                model.config.indicators.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
            )));
        }
    }
    Ok(())
}

fn decode_all<T: Real>(
    model: &Model<T>,
    jobs: &[(usize, usize, &[String], usize)],
    source: &Indicator,
    target: &Indicator,
    search: SearchConfig,
) -> Result<Vec<FrameResult>> {
    check_indicators(model, source, target)?;
    jobs.par_iter()
        .map(|&(_, _, tokens, pred)| label_frame(model, tokens, pred, source, target, search))
        .collect()
}

fn tally(summary: &mut LabelSummary, r: &FrameResult) {
    summary.predicates += 1;
    summary.repairs.absorb(&r.repairs);
    summary.truncated += usize::from(r.truncated);
    summary.word_mismatches += usize::from(r.mismatch);
}

/// Replaces every frame's arguments with the model's output.
pub fn label_dep<T: Real>(
    model: &Model<T>,
    sentences: &mut [DepSentence],
    source: &Indicator,
    target: &Indicator,
    search: SearchConfig,
) -> Result<LabelSummary> {
    let tokens: Vec<Vec<String>> = sentences.iter().map(DepSentence::tokens).collect();
    let jobs: Vec<(usize, usize, &[String], usize)> = sentences
        .iter()
        .enumerate()
        .flat_map(|(si, s)| s.frames.iter().enumerate().map(move |(k, f)| (si, k, f.predicate_index)))
        .map(|(si, k, p)| (si, k, tokens[si].as_slice(), p))
        .collect();
    let results = decode_all(model, &jobs, source, target, search)?;
    let mut summary = LabelSummary {
        sentences: sentences.len(),
        ..Default::default()
    };
    for (&(si, k, toks, _), r) in jobs.iter().zip(&results) {
        tally(&mut summary, r);
        let (inside, outside): (Vec<Argument>, Vec<Argument>) = r.args.iter().cloned().partition(|a| a.end < toks.len());
        summary.dropped_arguments += outside.len();
        sentences[si].set_arguments(k, &inside)?;
    }
    Ok(summary)
}

/// Span counterpart of [`label_dep`]. Arguments touching the verb span are
/// dropped since the bracket column cannot nest them.
pub fn label_span<T: Real>(
    model: &Model<T>,
    sentences: &mut [SpanSentence],
    source: &Indicator,
    target: &Indicator,
    search: SearchConfig,
) -> Result<LabelSummary> {
    let jobs: Vec<(usize, usize, &[String], usize)> = sentences
        .iter()
        .enumerate()
        .flat_map(|(si, s)| s.frames.iter().enumerate().map(move |(k, f)| (si, k, s.tokens.as_slice(), f.predicate_index)))
        .collect();
    let results = decode_all(model, &jobs, source, target, search)?;
    let mut summary = LabelSummary {
        sentences: sentences.len(),
        ..Default::default()
    };
    let placed: Vec<(usize, usize, Vec<Argument>)> = jobs
        .iter()
        .zip(&results)
        .map(|(&(si, k, toks, _), r)| {
            tally(&mut summary, r);
            let (vs, ve) = sentences[si].frames[k].verb_span;
            let (keep, drop): (Vec<Argument>, Vec<Argument>) = r
                .args
                .iter()
                .cloned()
                .partition(|a| a.end < toks.len() && (a.end < vs || a.start > ve));
            summary.dropped_arguments += drop.len();
            (si, k, keep)
        })
        .collect();
    for (si, k, args) in placed {
        sentences[si].frames[k].arguments = args;
    }
    Ok(summary)
}

fn run<T: Real>(req: &LabelRequest, source: &Indicator, target: &Indicator) -> Result<LabelSummary> {
    let model = load_checkpoint::<T>(&req.checkpoint)?.model;
    check_indicators(&model, source, target)?;
    let summary = match req.format {
        LabelFormat::Conll09 => {
            let mut sentences = read_conll_dep_sentences(&req.input, &DepReaderConfig::new(&req.language))?;
            let summary = label_dep(&model, &mut sentences, source, target, req.search)?;
            if summary.predicates == 0 {
                write_empty(&req.output)?;
            } else {
                write_conll_dep(&req.output, &sentences)?;
            }
            summary
        }
        LabelFormat::Conll05 => {
            let mut corpus = read_conll_span(&req.input, &req.language)?;
            if !corpus.skipped.is_empty() {
                warn!("{}: {} discontinuous frame(s) skipped", req.input.display(), corpus.skipped.len());
            }
            let summary = label_span(&model, &mut corpus.sentences, source, target, req.search)?;
            if summary.predicates == 0 {
                write_empty(&req.output)?;
            } else {
                write_conll_span(&req.output, &corpus.sentences)?;
            }
            summary
        }
    };
    Ok(summary)
}

fn write_empty(path: &Path) -> Result<()> {
    fs::write(path, "").map_err(|e| Error::io(path, e))
}

/// Labels every predicate of a CoNLL file and writes the result in the
/// same format.
pub fn cmd_label(req: &LabelRequest, opts: RunOptions) -> Result<LabelSummary> {
    let rec = Recorder::start("label");
    let source = Indicator::plain(&req.language)?;
    let target = match &req.target {
        Some(t) => t.clone(),
        None => Indicator::srl(&req.language)?,
    };
    let summary = match opts.precision {
        Precision::F32 => run::<f32>(req, &source, &target)?,
        Precision::F64 => run::<f64>(req, &source, &target)?,
    };
    if summary.predicates == 0 {
        warn!("{}: no predicates found, wrote an empty file", req.input.display());
    }
    if !summary.repairs.is_clean() {
        warn!("decoder output needed repairs: {:?}", summary.repairs);
    }
    info!(
        "labeled {} predicates in {} sentences ({} truncated, {} word mismatches)",
        summary.predicates, summary.sentences, summary.truncated, summary.word_mismatches
    );
    rec.finish(
        &manifest_path(&req.output),
        opts,
        serde_json::json!({ "request": to_json(req), "summary": to_json(&summary) }),
        &[&req.checkpoint, &req.input],
        &[&req.output],
    )?;
    Ok(summary)
}
