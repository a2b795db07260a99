use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::srl::SrlSentence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Mode {
    /// Match `(head, label)`; the head of a region is its last token.
    Dep,
    /// Match `(start, end, label)`.
    Span,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: LabelCounts,
    pub per_label: BTreeMap<String, LabelCounts>,
    /// Predicted regions whose words differ from the gold sentence at the
    /// same positions. They count as false positives.
    pub word_mismatches: usize,
    /// Pairs skipped because their predicates disagree.
    pub excluded: usize,
    pub sentences: usize,
}

impl F1Report {
    fn finish(mut self) -> Self {
        let c = self.counts;
        self.precision = ratio(c.tp, c.tp + c.fp);
        self.recall = ratio(c.tp, c.tp + c.fn_);
        let s = self.precision + self.recall;
        self.f1 = if s == 0.0 { 0.0 } else { 2.0 * self.precision * self.recall / s };
        self
    }

    fn bump(&mut self, label: &str, f: impl Fn(&mut LabelCounts)) {
        f(&mut self.counts);
        f(self.per_label.entry(label.to_string()).or_default());
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

type Key = (usize, usize, String);

fn key(start: usize, end: usize, label: &str, mode: F1Mode) -> Key {
    match mode {
        F1Mode::Dep => (end, end, label.to_string()),
        F1Mode::Span => (start, end, label.to_string()),
    }
}

fn accumulate(report: &mut F1Report, predicted: &SrlSentence, gold: &SrlSentence, mode: F1Mode) {
    if predicted.predicate_index != gold.predicate_index {
        warn!(
            "f1: predicate {} vs gold {}; pair excluded",
            predicted.predicate_index, gold.predicate_index
        );
        report.excluded += 1;
        return;
    }
    report.sentences += 1;
    let gold_keys: BTreeSet<Key> = gold.arguments.iter().map(|a| key(a.start, a.end, &a.label, mode)).collect();
    let mut seen = BTreeSet::new();
    for a in &predicted.arguments {
        let aligned = a.end < gold.tokens.len()
            && a.end < predicted.tokens.len()
            && predicted.tokens[a.start..=a.end] == gold.tokens[a.start..=a.end];
        let k = key(a.start, a.end, &a.label, mode);
        if !aligned {
            report.word_mismatches += 1;
            report.bump(&a.label, |c| c.fp += 1);
        } else if gold_keys.contains(&k) && seen.insert(k) {
            report.bump(&a.label, |c| c.tp += 1);
        } else {
            report.bump(&a.label, |c| c.fp += 1);
        }
    }
    for k in gold_keys.difference(&seen) {
        report.bump(&k.2, |c| c.fn_ += 1);
    }
}

pub fn srl_f1(predicted: &SrlSentence, gold: &SrlSentence, mode: F1Mode) -> F1Report {
    let mut r = F1Report::default();
    accumulate(&mut r, predicted, gold, mode);
    r.finish()
}

/// Micro-averaged F1 over pooled counts.
pub fn srl_f1_corpus<'a, I>(pairs: I, mode: F1Mode) -> F1Report
where
    I: IntoIterator<Item = (&'a SrlSentence, &'a SrlSentence)>,
{
    let mut r = F1Report::default();
    for (p, g) in pairs {
        accumulate(&mut r, p, g, mode);
    }
    r.finish()
}
