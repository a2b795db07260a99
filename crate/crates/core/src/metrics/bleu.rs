use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::srl::is_bracket;
use crate::error::{Error, Result};
use crate::vocab::is_control;

const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Words and bracket symbols.
    Full,
    Words,
    Labels,
}

impl View {
    pub const ALL: [View; 3] = [View::Full, View::Words, View::Labels];
}

/// Drops control symbols, then the symbol class the view ignores.
pub fn strip_view<S: AsRef<str>>(tokens: &[S], view: View) -> Vec<&str> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_control(t))
        .filter(|t| match view {
            View::Full => true,
            View::Words => !is_bracket(t),
            View::Labels => is_bracket(t),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub view: View,
    /// In `[0, 100]`.
    pub score: f64,
    /// Matched and total n-grams for orders 1..4.
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Pairs dropped because the reference was empty in this view.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuTriple {
    pub full: BleuReport,
    pub words: BleuReport,
    pub labels: BleuReport,
}

fn clipped(hyp: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    if hyp.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<&[&str], usize> = HashMap::new();
    if reference.len() >= n {
        for w in reference.windows(n) {
            *ref_counts.entry(w).or_default() += 1;
        }
    }
    let mut hyp_counts: HashMap<&[&str], usize> = HashMap::new();
    for w in hyp.windows(n) {
        *hyp_counts.entry(w).or_default() += 1;
    }
    let matched = hyp_counts.iter().map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0))).sum();
    (matched, hyp.len() - n + 1)
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Corpus BLEU-4 with clipped counts and brevity penalty, scaled to
/// `[0, 100]`. Any order without a match scores 0. Pairs whose reference is
/// empty in this view are excluded; if nothing remains the score is 100 when
/// every hypothesis is empty too, else 0.
pub fn bleu_corpus<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>], view: View) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::Shape {
            op: "bleu_corpus",
            detail: format!("{} hypotheses vs {} references", hypotheses.len(), references.len()),
        });
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len, mut excluded, mut stray) = (0, 0, 0, false);
    for (h, r) in hypotheses.iter().zip(references) {
        let h = strip_view(h, view);
        let r = strip_view(r, view);
        if r.is_empty() {
            excluded += 1;
            stray |= !h.is_empty();
            continue;
        }
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let (m, t) = clipped(&h, &r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if excluded > 0 {
        warn!("bleu ({view:?} view): {excluded} pair(s) with empty reference excluded");
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let bp = brevity_penalty(hyp_len, ref_len);
    let score = if ref_len == 0 {
        if stray {
            0.0
        } else {
            100.0
        }
    } else if precisions.contains(&0.0) {
        0.0
    } else {
        100.0 * bp * (precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64).exp()
    };
    Ok(BleuReport {
        view,
        score,
        matches,
        totals,
        precisions,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
        excluded,
    })
}

pub fn bleu_triple<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> Result<BleuTriple> {
    Ok(BleuTriple {
        full: bleu_corpus(hypotheses, references, View::Full)?,
        words: bleu_corpus(hypotheses, references, View::Words)?,
        labels: bleu_corpus(hypotheses, references, View::Labels)?,
    })
}

/// Sentence BLEU-4 with add-one smoothing on orders 2..4, over the full view.
pub fn bleu_sentence<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Result<f64> {
    let h = strip_view(hypothesis, View::Full);
    let r = strip_view(reference, View::Full);
    if r.is_empty() {
        return Err(Error::invalid("sentence BLEU needs a non-empty reference"));
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, t) = clipped(&h, &r, n);
        let p = if n == 1 {
            if t == 0 || m == 0 {
                return Ok(0.0);
            }
            m as f64 / t as f64
        } else {
            (m + 1) as f64 / (t + 1) as f64
        };
        log_sum += p.ln();
    }
    Ok(100.0 * brevity_penalty(h.len(), r.len()) * (log_sum / MAX_ORDER as f64).exp())
}
