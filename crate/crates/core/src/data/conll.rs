//! CoNLL-09 (dependency) and CoNLL-05 (span) SRL files.
//!
//! Sentences are kept together with their raw rows so that writing back a
//! file that was read reproduces it byte for byte, and labeling output only
//! touches the role columns.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::srl::{Argument, SrlSentence};
use crate::error::{Error, Result};

/// Placeholder for an empty cell.
pub const EMPTY: &str = "_";

/// Zero-based column positions of a CoNLL-09-style file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub word: usize,
    pub predicate_flag: usize,
    pub sense: usize,
    pub first_role: usize,
    /// Value of the flag column that marks a predicate.
    pub flag_value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            word: 1,
            predicate_flag: 12,
            sense: 13,
            first_role: 14,
            flag_value: "Y".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownLabelPolicy {
    #[default]
    Reject,
    MapToUnk,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DepReaderConfig {
    pub columns: ColumnMap,
    pub language: String,
    /// Declared label set; `None` accepts every label.
    pub labels: Option<BTreeSet<String>>,
    pub unknown_labels: UnknownLabelPolicy,
}

impl DepReaderConfig {
    pub fn new(language: impl Into<String>) -> Self {
        DepReaderConfig {
            language: language.into(),
            ..Default::default()
        }
    }
}

/// One predicate of a CoNLL sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub predicate_index: usize,
    pub sense: Option<String>,
    pub arguments: Vec<Argument>,
}

/// A CoNLL-09 sentence block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepSentence {
    pub rows: Vec<Vec<String>>,
    pub frames: Vec<Frame>,
    pub language: String,
    pub columns: ColumnMap,
}

impl DepSentence {
    pub fn tokens(&self) -> Vec<String> {
        self.rows.iter().map(|r| r[self.columns.word].clone()).collect()
    }

    /// Per-predicate expansion: one [`SrlSentence`] per frame.
    pub fn expand(&self) -> Vec<SrlSentence> {
        let tokens = self.tokens();
        self.frames
            .iter()
            .map(|f| {
                let mut s = SrlSentence::new(tokens.clone(), &self.language, f.predicate_index, f.arguments.clone());
                s.predicate_sense = f.sense.clone();
                s
            })
            .collect()
    }

    /// Replaces the role column of frame `k` with `args`.
    pub fn set_arguments(&mut self, k: usize, args: &[Argument]) -> Result<()> {
        let col = self.columns.first_role + k;
        let n = self.rows.len();
        if k >= self.frames.len() {
            return Err(Error::IndexOutOfRange {
                op: "set_arguments",
                index: k,
                len: self.frames.len(),
            });
        }
        for row in &mut self.rows {
            row[col] = EMPTY.to_string();
        }
        let mut kept = Vec::new();
        for a in args {
            // dependency output labels the head only: the last token of the region
            let head = a.end;
            if head < n {
                self.rows[head][col] = a.label.clone();
                kept.push(Argument::new(head, head, a.label.clone()));
            }
        }
        kept.sort();
        kept.dedup_by(|a, b| a.start == b.start);
        self.frames[k].arguments = kept;
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Splits into blank-line separated blocks of `(line number, line)`.
fn blocks(text: &str) -> Vec<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push((i + 1, line));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn check_label(label: &str, cfg: &DepReaderConfig, path: &Path, line: usize) -> Result<String> {
    match &cfg.labels {
        Some(set) if !set.contains(label) => match cfg.unknown_labels {
            UnknownLabelPolicy::Reject => Err(Error::parse(path, line, format!("unknown label `{label}`"))),
            UnknownLabelPolicy::MapToUnk => Ok(crate::data::srl::UNK_ROLE.to_string()),
        },
        _ => Ok(label.to_string()),
    }
}

pub fn parse_conll_dep(text: &str, path: &Path, cfg: &DepReaderConfig) -> Result<Vec<DepSentence>> {
    let cols = &cfg.columns;
    let mut out = Vec::new();
    for block in blocks(text) {
        let rows: Vec<Vec<String>> = block
            .iter()
            .map(|(_, l)| l.split('\t').map(str::to_string).collect())
            .collect();
        let width = rows[0].len();
        let min = cols.word.max(cols.predicate_flag).max(cols.sense) + 1;
        for (row, (line, _)) in rows.iter().zip(&block) {
            if row.len() != width || row.len() < min.max(cols.first_role) {
                return Err(Error::parse(
                    path,
                    *line,
                    format!("expected {} columns, found {}", width.max(min), row.len()),
                ));
            }
        }
        let preds: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r[cols.predicate_flag] == cols.flag_value)
            .map(|(i, _)| i)
            .collect();
        if width != cols.first_role + preds.len() {
            return Err(Error::parse(
                path,
                block[0].0,
                format!(
                    "{} predicates need {} columns, found {}",
                    preds.len(),
                    cols.first_role + preds.len(),
                    width
                ),
            ));
        }
        let mut frames = Vec::with_capacity(preds.len());
        for (k, &p) in preds.iter().enumerate() {
            let col = cols.first_role + k;
            let mut args = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let cell = &row[col];
                if cell != EMPTY {
                    let label = check_label(cell, cfg, path, block[i].0)?;
                    args.push(Argument::new(i, i, label));
                }
            }
            let sense = &rows[p][cols.sense];
            frames.push(Frame {
                predicate_index: p,
                sense: (sense != EMPTY).then(|| sense.clone()),
                arguments: args,
            });
        }
        out.push(DepSentence {
            rows,
            frames,
            language: cfg.language.clone(),
            columns: cols.clone(),
        });
    }
    Ok(out)
}

pub fn read_conll_dep_sentences(path: impl AsRef<Path>, cfg: &DepReaderConfig) -> Result<Vec<DepSentence>> {
    let path = path.as_ref();
    parse_conll_dep(&read_to_string(path)?, path, cfg)
}

/// Reads a CoNLL-09 file expanded to one instance per predicate.
pub fn read_conll_dep(path: impl AsRef<Path>, cfg: &DepReaderConfig) -> Result<Vec<SrlSentence>> {
    Ok(read_conll_dep_sentences(path, cfg)?
        .iter()
        .flat_map(DepSentence::expand)
        .collect())
}

pub fn format_conll_dep(sentences: &[DepSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for row in &s.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll_dep(path: impl AsRef<Path>, sentences: &[DepSentence]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_conll_dep(sentences)).map_err(|e| Error::io(path, e))
}

/// A CoNLL-05 span frame: the `V` span is kept apart from the arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanFrame {
    pub predicate_index: usize,
    pub verb_span: (usize, usize),
    pub arguments: Vec<Argument>,
}

/// A CoNLL-05 sentence: word column, predicate column, one bracket column
/// per predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanSentence {
    pub tokens: Vec<String>,
    pub predicates: Vec<String>,
    pub frames: Vec<SpanFrame>,
    pub language: String,
}

impl SpanSentence {
    pub fn expand(&self) -> Vec<SrlSentence> {
        self.frames
            .iter()
            .map(|f| {
                let mut s = SrlSentence::new(self.tokens.clone(), &self.language, f.predicate_index, f.arguments.clone());
                let lemma = &self.predicates[f.predicate_index];
                s.predicate_sense = (lemma != "-").then(|| lemma.clone());
                s
            })
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct SpanCorpus {
    pub sentences: Vec<SpanSentence>,
    /// `(sentence index, predicate index)` of skipped discontinuous frames.
    pub skipped: Vec<(usize, usize)>,
}

impl SpanCorpus {
    pub fn expand(&self) -> Vec<SrlSentence> {
        self.sentences.iter().flat_map(SpanSentence::expand).collect()
    }
}

enum SpanIssue {
    Unbalanced(String),
    Discontinuous,
}

fn parse_span_column(cells: &[&str]) -> std::result::Result<Vec<Argument>, SpanIssue> {
    let mut open: Option<(usize, String)> = None;
    let mut out = Vec::new();
    let mut discontinuous = false;
    for (i, cell) in cells.iter().enumerate() {
        let star = cell
            .find('*')
            .ok_or_else(|| SpanIssue::Unbalanced(format!("cell `{cell}` has no `*`")))?;
        let (head, tail) = (&cell[..star], &cell[star + 1..]);
        let opens: Vec<&str> = head.split('(').skip(1).collect();
        if !head.is_empty() && !head.starts_with('(') {
            return Err(SpanIssue::Unbalanced(format!("malformed cell `{cell}`")));
        }
        let closes = tail.matches(')').count();
        for label in opens {
            if let Some((s, outer)) = &open {
                return Err(SpanIssue::Unbalanced(format!(
                    "`({label}` opened at token {i} inside `({outer}` from token {s}"
                )));
            }
            if label.starts_with("C-") {
                discontinuous = true;
            }
            open = Some((i, label.to_string()));
        }
        for _ in 0..closes {
            match open.take() {
                Some((s, label)) => out.push(Argument::new(s, i, label)),
                None if discontinuous => {}
                None => return Err(SpanIssue::Unbalanced(format!("`)` without `(` at token {i}"))),
            }
        }
    }
    if let Some((s, label)) = open {
        return Err(SpanIssue::Unbalanced(format!("`({label}` opened at token {s} never closed")));
    }
    if discontinuous {
        return Err(SpanIssue::Discontinuous);
    }
    Ok(out)
}

pub fn parse_conll_span(text: &str, path: &Path, language: &str) -> Result<SpanCorpus> {
    let mut corpus = SpanCorpus::default();
    for (si, block) in blocks(text).into_iter().enumerate() {
        let rows: Vec<Vec<&str>> = block.iter().map(|(_, l)| l.split_whitespace().collect()).collect();
        let width = rows[0].len();
        if let Some((row, (line, _))) = rows.iter().zip(&block).find(|(r, _)| r.len() != width || r.len() < 2) {
            return Err(Error::parse(
                path,
                *line,
                format!("sentence {si}: expected {} columns, found {}", width.max(2), row.len()),
            ));
        }
        let tokens: Vec<String> = rows.iter().map(|r| r[0].to_string()).collect();
        let predicates: Vec<String> = rows.iter().map(|r| r[1].to_string()).collect();
        let pred_rows: Vec<usize> = (0..rows.len()).filter(|&i| predicates[i] != "-").collect();
        if width != 2 + pred_rows.len() {
            return Err(Error::parse(
                path,
                block[0].0,
                format!(
                    "sentence {si}: {} predicates need {} columns, found {width}",
                    pred_rows.len(),
                    2 + pred_rows.len()
                ),
            ));
        }
        let mut frames = Vec::new();
        for (k, &p) in pred_rows.iter().enumerate() {
            let cells: Vec<&str> = rows.iter().map(|r| r[2 + k]).collect();
            match parse_span_column(&cells) {
                Ok(spans) => {
                    let (verbs, args): (Vec<Argument>, Vec<Argument>) = spans.into_iter().partition(|a| a.label == "V");
                    let verb_span = verbs.first().map_or((p, p), |v| (v.start, v.end));
                    frames.push(SpanFrame {
                        predicate_index: p,
                        verb_span,
                        arguments: args,
                    });
                }
                Err(SpanIssue::Discontinuous) => {
                    warn!("{}: sentence {si}: skipping discontinuous frame for predicate {p}", path.display());
                    corpus.skipped.push((si, p));
                }
                Err(SpanIssue::Unbalanced(msg)) => {
                    return Err(Error::parse(
                        path,
                        block[0].0,
                        format!("sentence {si}: unbalanced span brackets: {msg}"),
                    ));
                }
            }
        }
        corpus.sentences.push(SpanSentence {
            tokens,
            predicates,
            frames,
            language: language.to_string(),
        });
    }
    Ok(corpus)
}

pub fn read_conll_span(path: impl AsRef<Path>, language: &str) -> Result<SpanCorpus> {
    let path = path.as_ref();
    parse_conll_span(&read_to_string(path)?, path, language)
}

fn span_cell(i: usize, frame: &SpanFrame) -> String {
    let mut spans: Vec<(usize, usize, &str)> = frame.arguments.iter().map(|a| (a.start, a.end, a.label.as_str())).collect();
    spans.push((frame.verb_span.0, frame.verb_span.1, "V"));
    let mut cell = String::new();
    for (s, _, label) in &spans {
        if *s == i {
            cell.push('(');
            cell.push_str(label);
        }
    }
    cell.push('*');
    for (_, e, _) in &spans {
        if *e == i {
            cell.push(')');
        }
    }
    cell
}

/// Tab-separated CoNLL-05 rendering. Skipped frames are not written.
pub fn format_conll_span(sentences: &[SpanSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for i in 0..s.tokens.len() {
            out.push_str(&s.tokens[i]);
            out.push('\t');
            let is_pred = s.frames.iter().any(|f| f.predicate_index == i);
            out.push_str(if is_pred { &s.predicates[i] } else { "-" });
            for f in &s.frames {
                out.push('\t');
                out.push_str(&span_cell(i, f));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll_span(path: impl AsRef<Path>, sentences: &[SpanSentence]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_conll_span(sentences)).map_err(|e| Error::io(path, e))
}
