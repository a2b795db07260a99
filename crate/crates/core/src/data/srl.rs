//! SRL sentences and their bracketed linearization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opens a labeled argument region.
pub const OPEN: &str = "(#";
/// Role assigned to regions recovered from ill-formed decoder output.
pub const UNK_ROLE: &str = "UNK-role";

/// One labeled argument region, inclusive on both ends.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Argument {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Argument {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Argument {
            start,
            end,
            label: label.into(),
        }
    }
}

/// A tokenized sentence with exactly one marked predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlSentence {
    pub tokens: Vec<String>,
    pub language: String,
    pub predicate_index: usize,
    pub predicate_sense: Option<String>,
    pub arguments: Vec<Argument>,
}

impl SrlSentence {
    pub fn new(tokens: Vec<String>, language: impl Into<String>, predicate_index: usize, arguments: Vec<Argument>) -> Self {
        let mut s = SrlSentence {
            tokens,
            language: language.into(),
            predicate_index,
            predicate_sense: None,
            arguments,
        };
        s.arguments.sort();
        s
    }

    /// Checks predicate range, region bounds and non-overlap.
    pub fn validate(&self) -> Result<()> {
        if self.predicate_index >= self.tokens.len() {
            return Err(Error::invalid(format!(
                "predicate index {} outside sentence of {} tokens",
                self.predicate_index,
                self.tokens.len()
            )));
        }
        let mut sorted: Vec<&Argument> = self.arguments.iter().collect();
        sorted.sort();
        let mut last_end: Option<usize> = None;
        for a in sorted {
            if a.start > a.end || a.end >= self.tokens.len() {
                return Err(Error::invalid(format!(
                    "argument ({}, {}, {}) outside sentence of {} tokens",
                    a.start,
                    a.end,
                    a.label,
                    self.tokens.len()
                )));
            }
            if let Some(e) = last_end {
                if a.start <= e {
                    return Err(Error::invalid(format!(
                        "overlapping argument regions at token {}",
                        a.start
                    )));
                }
            }
            last_end = Some(a.end);
        }
        Ok(())
    }

    pub fn is_dependency_style(&self) -> bool {
        self.arguments.iter().all(|a| a.start == a.end)
    }
}

/// A stream of words interleaved with `(#` and `LABEL)` symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearizedSeq {
    pub symbols: Vec<String>,
    pub language_tag: String,
}

impl LinearizedSeq {
    pub fn new(symbols: Vec<String>, language_tag: impl Into<String>) -> Self {
        LinearizedSeq {
            symbols,
            language_tag: language_tag.into(),
        }
    }

    pub fn parse(text: &str, language_tag: impl Into<String>) -> Self {
        Self::new(text.split_whitespace().map(str::to_string).collect(), language_tag)
    }

    /// Words only, bracket symbols removed.
    pub fn words(&self) -> Vec<String> {
        self.symbols.iter().filter(|s| !is_bracket(s)).cloned().collect()
    }

    pub fn to_text(&self) -> String {
        self.symbols.join(" ")
    }
}

/// Label carried by a closing symbol such as `A0)` or `AM-TMP)`.
pub fn closing_label(sym: &str) -> Option<&str> {
    let label = sym.strip_suffix(')')?;
    if label.is_empty()
        || !label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return None;
    }
    Some(label)
}

pub fn closing_symbol(label: &str) -> String {
    format!("{label})")
}

/// True for `(#` and closing label symbols.
pub fn is_bracket(sym: &str) -> bool {
    sym == OPEN || closing_label(sym).is_some()
}

pub fn linearize(s: &SrlSentence, language_tag: &str) -> Result<LinearizedSeq> {
    s.validate()?;
    let mut args: Vec<&Argument> = s.arguments.iter().collect();
    args.sort();
    let mut out = Vec::with_capacity(s.tokens.len() + 2 * args.len());
    let mut next = args.iter().peekable();
    let mut open: Option<&Argument> = None;
    for (i, tok) in s.tokens.iter().enumerate() {
        if open.is_none() {
            if let Some(a) = next.next_if(|a| a.start == i) {
                out.push(OPEN.to_string());
                open = Some(a);
            }
        }
        out.push(tok.clone());
        if let Some(a) = open {
            if a.end == i {
                out.push(closing_symbol(&a.label));
                open = None;
            }
        }
    }
    Ok(LinearizedSeq::new(out, language_tag))
}

/// What [`delinearize`] had to fix.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RepairLog {
    pub unclosed: usize,
    pub orphan_closes: usize,
    pub empty_regions: usize,
    pub reopened: usize,
}

impl RepairLog {
    pub fn is_clean(&self) -> bool {
        *self == RepairLog::default()
    }

    pub fn absorb(&mut self, other: &RepairLog) {
        self.unclosed += other.unclosed;
        self.orphan_closes += other.orphan_closes;
        self.empty_regions += other.empty_regions;
        self.reopened += other.reopened;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delinearized {
    pub sentence: SrlSentence,
    pub repairs: RepairLog,
}

impl Delinearized {
    pub fn is_clean(&self) -> bool {
        self.repairs.is_clean()
    }
}

/// Recovers a sentence from a symbol stream, repairing ill-formed input.
///
/// An unclosed `(#` is closed at the end of the sentence with [`UNK_ROLE`];
/// an orphan `LABEL)` is dropped; a `(#` inside an open region closes the
/// open one with [`UNK_ROLE`]; regions without words are dropped.
pub fn delinearize(seq: &LinearizedSeq, predicate_index: usize) -> Delinearized {
    let mut tokens = Vec::with_capacity(seq.symbols.len());
    let mut args = Vec::new();
    let mut repairs = RepairLog::default();
    let mut open: Option<usize> = None;

    for sym in &seq.symbols {
        if sym == OPEN {
            if let Some(start) = open.take() {
                repairs.reopened += 1;
                if start < tokens.len() {
                    args.push(Argument::new(start, tokens.len() - 1, UNK_ROLE));
                } else {
                    repairs.empty_regions += 1;
                }
            }
            open = Some(tokens.len());
        } else if let Some(label) = closing_label(sym) {
            match open.take() {
                Some(start) if start < tokens.len() => {
                    args.push(Argument::new(start, tokens.len() - 1, label));
                }
                Some(_) => repairs.empty_regions += 1,
                None => repairs.orphan_closes += 1,
            }
        } else {
            tokens.push(sym.clone());
        }
    }
    if let Some(start) = open {
        repairs.unclosed += 1;
        if start < tokens.len() {
            args.push(Argument::new(start, tokens.len() - 1, UNK_ROLE));
        } else {
            repairs.empty_regions += 1;
        }
    }
    let language = seq
        .language_tag
        .strip_suffix("-SRL")
        .unwrap_or(&seq.language_tag)
        .to_string();
    Delinearized {
        sentence: SrlSentence::new(tokens, language, predicate_index, args),
        repairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn example() -> SrlSentence {
        SrlSentence::new(
            words("The cat chased a mouse"),
            "EN",
            2,
            vec![Argument::new(0, 1, "A0"), Argument::new(3, 4, "A1")],
        )
    }

    #[test]
    fn linearize_example() {
        let lin = linearize(&example(), "EN-SRL").unwrap();
        assert_eq!(lin.to_text(), "(# The cat A0) chased (# a mouse A1)");
        let back = delinearize(&lin, 2);
        assert!(back.is_clean());
        assert_eq!(back.sentence, example());
    }

    #[test]
    fn no_arguments_is_identity() {
        let s = SrlSentence::new(words("it rains"), "EN", 1, vec![]);
        assert_eq!(linearize(&s, "EN-SRL").unwrap().symbols, s.tokens);
    }

    #[test]
    fn overlap_rejected() {
        let s = SrlSentence::new(
            words("a b c"),
            "EN",
            0,
            vec![Argument::new(0, 1, "A0"), Argument::new(1, 2, "A1")],
        );
        assert!(linearize(&s, "EN-SRL").is_err());
    }

    #[test]
    fn unclosed_region_repaired() {
        let d = delinearize(&LinearizedSeq::parse("(# The cat chased", "EN-SRL"), 2);
        assert_eq!(d.sentence.arguments, vec![Argument::new(0, 2, UNK_ROLE)]);
        assert_eq!(d.repairs.unclosed, 1);
        assert!(!d.is_clean());
    }

    #[test]
    fn orphan_close_dropped() {
        let d = delinearize(&LinearizedSeq::parse("The A0) cat", "EN-SRL"), 0);
        assert_eq!(d.sentence.tokens, words("The cat"));
        assert!(d.sentence.arguments.is_empty());
        assert_eq!(d.repairs.orphan_closes, 1);
    }

    #[test]
    fn reopen_and_empty_regions() {
        let d = delinearize(&LinearizedSeq::parse("(# a (# b A0) (# A1) c", "EN-SRL"), 2);
        assert_eq!(
            d.sentence.arguments,
            vec![Argument::new(0, 0, UNK_ROLE), Argument::new(1, 1, "A0")]
        );
        assert_eq!(d.repairs.reopened, 1);
        assert_eq!(d.repairs.empty_regions, 1);
    }

    #[test]
    fn bracket_classification() {
        assert!(is_bracket("(#"));
        assert!(is_bracket("AM-TMP)"));
        assert!(is_bracket("C-A1)"));
        assert!(!is_bracket(")"));
        assert!(!is_bracket("(a)"));
        assert!(!is_bracket("cat"));
    }

    fn arb_sentence() -> impl Strategy<Value = SrlSentence> {
        (1usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec("[a-z]{1,5}", n),
                0..n,
                proptest::collection::vec((0..n, 0usize..3, 0usize..4), 0..4),
            )
                .prop_map(move |(tokens, pred, raw)| {
                    let mut args: Vec<Argument> = Vec::new();
                    let mut spans: Vec<(usize, usize, usize)> =
                        raw.into_iter().map(|(s, l, lab)| (s, (s + l).min(n - 1), lab)).collect();
                    spans.sort();
                    let mut last: Option<usize> = None;
                    for (s, e, lab) in spans {
                        if last.is_none_or(|le| s > le) {
                            args.push(Argument::new(s, e, format!("A{lab}")));
                            last = Some(e);
                        }
                    }
                    SrlSentence::new(tokens, "EN", pred, args)
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(s in arb_sentence()) {
            let lin = linearize(&s, "EN-SRL").unwrap();
            let words: Vec<String> = lin.words();
            prop_assert_eq!(&words, &s.tokens);
            // brackets balance without nesting
            let mut open = false;
            for sym in &lin.symbols {
                if sym == OPEN { prop_assert!(!open); open = true; }
                else if closing_label(sym).is_some() { prop_assert!(open); open = false; }
            }
            prop_assert!(!open);
            let back = delinearize(&lin, s.predicate_index);
            prop_assert!(back.is_clean());
            prop_assert_eq!(back.sentence, s);
        }

        #[test]
        fn delinearize_total(syms in proptest::collection::vec(prop_oneof![
            Just("(#".to_string()), Just("A0)".to_string()), Just("AM-TMP)".to_string()),
            "[a-z]{1,3}", Just(")".to_string()),
        ], 0..30), pred in 0usize..40) {
            let d = delinearize(&LinearizedSeq::new(syms, "DE-SRL"), pred);
            for a in &d.sentence.arguments {
                prop_assert!(a.start <= a.end && a.end < d.sentence.tokens.len());
            }
        }
    }
}
