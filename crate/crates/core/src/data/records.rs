//! Generation records: one JSON object per line with the fields
//! `source`, `output`, `stripped`, `backtrans`, `bleu`, `kept`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::srl::LinearizedSeq;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub source_tokens: Vec<String>,
    pub generated: LinearizedSeq,
    pub stripped_words: Vec<String>,
    pub back_translation: Vec<String>,
    pub sentence_bleu: f64,
    pub kept: bool,
}

impl GenerationRecord {
    /// Builds a record, deriving the stripped words and the verdict.
    pub fn new(source_tokens: Vec<String>, generated: LinearizedSeq, back_translation: Vec<String>, sentence_bleu: f64, threshold: f64) -> Self {
        let stripped_words = generated.words();
        GenerationRecord {
            source_tokens,
            generated,
            stripped_words,
            back_translation,
            sentence_bleu,
            kept: sentence_bleu >= threshold,
        }
    }

    pub fn check(&self, threshold: f64) -> bool {
        self.kept == (self.sentence_bleu >= threshold) && self.stripped_words == self.generated.words()
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    source: String,
    output: String,
    stripped: String,
    backtrans: String,
    bleu: f64,
    kept: bool,
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl GenerationRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Wire {
            source: self.source_tokens.join(" "),
            output: self.generated.to_text(),
            stripped: self.stripped_words.join(" "),
            backtrans: self.back_translation.join(" "),
            bleu: self.sentence_bleu,
            kept: self.kept,
        })
        .expect("record serializes")
    }

    pub fn from_json(line: &str, language_tag: &str) -> std::result::Result<Self, serde_json::Error> {
        let w: Wire = serde_json::from_str(line)?;
        Ok(GenerationRecord {
            source_tokens: split(&w.source),
            generated: LinearizedSeq::parse(&w.output, language_tag),
            stripped_words: split(&w.stripped),
            back_translation: split(&w.backtrans),
            sentence_bleu: w.bleu,
            kept: w.kept,
        })
    }
}

pub fn write_records(path: impl AsRef<Path>, records: &[GenerationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{}", r.to_json()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>, language_tag: &str) -> Result<Vec<GenerationRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| GenerationRecord::from_json(l, language_tag).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_invariants() {
        let gen = LinearizedSeq::parse("(# die Katze A0) schläft", "DE-SRL");
        let r = GenerationRecord::new(
            vec!["the".into(), "cat".into(), "sleeps".into()],
            gen,
            vec!["the".into(), "cat".into(), "sleeps".into()],
            10.0,
            10.0,
        );
        assert!(r.kept);
        assert_eq!(r.stripped_words, vec!["die", "Katze", "schläft"]);
        assert!(r.check(10.0));
        let line = r.to_json();
        for key in ["\"source\"", "\"output\"", "\"stripped\"", "\"backtrans\"", "\"bleu\"", "\"kept\""] {
            assert!(line.contains(key), "{line}");
        }
        assert_eq!(GenerationRecord::from_json(&line, "DE-SRL").unwrap(), r);
    }
}
