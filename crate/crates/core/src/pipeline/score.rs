use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::conll::{read_conll_dep, read_conll_span, DepReaderConfig};
use crate::data::srl::SrlSentence;
use crate::error::{Error, Result};
use crate::metrics::{bleu_triple, srl_f1_corpus, BleuTriple, F1Mode, F1Report};
use crate::pipeline::{manifest_path, to_json, Recorder, RunOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// One whitespace-tokenized sequence per line; three-view BLEU.
    Bleu,
    /// CoNLL-09 files; head-word F1.
    F1Dep,
    /// CoNLL-05 files; exact-span F1.
    F1Span,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoreRequest {
    pub hypotheses: PathBuf,
    pub references: PathBuf,
    pub kind: ScoreKind,
    /// Language code for CoNLL input.
    pub language: String,
    /// JSON report destination.
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub sentences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuTriple>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<F1Report>,
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(b) = &self.bleu {
            writeln!(f, "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}", "view", "BLEU", "p1", "p2", "p3", "p4", "BP")?;
            for r in [&b.full, &b.words, &b.labels] {
                let p = r.precisions.map(|x| 100.0 * x);
                writeln!(
                    f,
                    "{:<8} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>6.3}",
                    format!("{:?}", r.view).to_lowercase(),
                    r.score,
                    p[0],
                    p[1],
                    p[2],
                    p[3],
                    r.brevity_penalty
                )?;
            }
        }
        if let Some(r) = &self.f1 {
            writeln!(f, "{:<12} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "label", "tp", "fp", "fn", "P", "R", "F1")?;
            let row = |f: &mut fmt::Formatter<'_>, name: &str, tp: usize, fp: usize, fn_: usize| {
                let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
                let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
                let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
                writeln!(f, "{name:<12} {tp:>6} {fp:>6} {fn_:>6} {:>8.2} {:>8.2} {:>8.2}", 100.0 * p, 100.0 * r, 100.0 * f1)
            };
            for (label, c) in &r.per_label {
                row(f, label, c.tp, c.fp, c.fn_)?;
            }
            row(f, "overall", r.counts.tp, r.counts.fp, r.counts.fn_)?;
        }
        Ok(())
    }
}

fn read_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.split_whitespace().map(str::to_string).collect()).collect())
}

fn mismatch(what: &str, hyp: usize, gold: usize) -> Error {
    Error::invalid(format!("{what}: hypothesis file has {hyp}, reference file has {gold}"))
}

fn read_frames(path: &Path, kind: ScoreKind, language: &str) -> Result<Vec<SrlSentence>> {
    match kind {
        ScoreKind::F1Span => Ok(read_conll_span(path, language)?.expand()),
        _ => read_conll_dep(path, &DepReaderConfig::new(language)),
    }
}

/// Scores two files without writing a report.
pub fn score_files(req: &ScoreRequest) -> Result<ScoreReport> {
    match req.kind {
        ScoreKind::Bleu => {
            let hyps = read_lines(&req.hypotheses)?;
            let refs = read_lines(&req.references)?;
            if hyps.len() != refs.len() {
                return Err(mismatch("line counts differ", hyps.len(), refs.len()));
            }
            Ok(ScoreReport {
                sentences: hyps.len(),
                bleu: Some(bleu_triple(&hyps, &refs)?),
                f1: None,
            })
        }
        ScoreKind::F1Dep | ScoreKind::F1Span => {
            let hyps = read_frames(&req.hypotheses, req.kind, &req.language)?;
            let gold = read_frames(&req.references, req.kind, &req.language)?;
            if hyps.len() != gold.len() {
                return Err(mismatch("predicate counts differ", hyps.len(), gold.len()));
            }
            let mode = if req.kind == ScoreKind::F1Span { F1Mode::Span } else { F1Mode::Dep };
            Ok(ScoreReport {
                sentences: hyps.len(),
                bleu: None,
                f1: Some(srl_f1_corpus(hyps.iter().zip(&gold), mode)),
            })
        }
    }
}

pub fn cmd_score(req: &ScoreRequest, opts: RunOptions) -> Result<ScoreReport> {
    let rec = Recorder::start("score");
    let report = score_files(req)?;
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    fs::write(&req.output, body).map_err(|e| Error::io(&req.output, e))?;
    rec.finish(
        &manifest_path(&req.output),
        opts,
        to_json(req),
        &[&req.hypotheses, &req.references],
        &[&req.output],
    )?;
    Ok(report)
}
