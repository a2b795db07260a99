//! Parallel corpora and translation tokens.
//!
//! One pair per line, tab separated:
//!
//! ```text
//! source_lang <TAB> target_indicator <TAB> source tokens <TAB> target tokens [<TAB> predicate index]
//! ```
//!
//! A target indicator ending in `-SRL` marks a labeled pair whose target is
//! a linearized sequence; the predicate index (0-based, over the unprefixed
//! source) is then required. Plain indicators mark translation-only pairs.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::srl::{is_bracket, LinearizedSeq};
use crate::error::{Error, Result};

/// Language or language+format identity, e.g. `DE` or `DE-SRL`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Indicator {
    pub lang: String,
    pub srl: bool,
}

impl Indicator {
    pub fn plain(lang: &str) -> Result<Self> {
        Self::validate_lang(lang)?;
        Ok(Indicator {
            lang: lang.to_string(),
            srl: false,
        })
    }

    pub fn srl(lang: &str) -> Result<Self> {
        Self::validate_lang(lang)?;
        Ok(Indicator {
            lang: lang.to_string(),
            srl: true,
        })
    }

    fn validate_lang(lang: &str) -> Result<()> {
        if (2..=3).contains(&lang.len()) && lang.chars().all(|c| c.is_ascii_uppercase()) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "unknown language code `{lang}` (expected 2-3 uppercase letters)"
            )))
        }
    }

    /// The source-prefix token, e.g. `<2DE-SRL>`.
    pub fn translation_token(&self) -> String {
        format!("<2{self}>")
    }

    pub fn language(&self) -> &str {
        &self.lang
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.srl {
            write!(f, "{}-SRL", self.lang)
        } else {
            f.write_str(&self.lang)
        }
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_suffix("-SRL") {
            Some(lang) => Indicator::srl(lang),
            None => Indicator::plain(s),
        }
    }
}

impl TryFrom<String> for Indicator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Indicator> for String {
    fn from(i: Indicator) -> String {
        i.to_string()
    }
}

/// True for tokens of the form `<2XX>` / `<2XX-SRL>`.
pub fn is_translation_token(tok: &str) -> bool {
    tok.strip_prefix("<2")
        .and_then(|t| t.strip_suffix('>'))
        .is_some_and(|inner| inner.parse::<Indicator>().is_ok())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Labeled,
    Translation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Labeled(LinearizedSeq),
    Translation(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPair {
    pub source_lang: Indicator,
    pub target: Indicator,
    pub source: Vec<String>,
    pub target_seq: Target,
    pub predicate_index: Option<usize>,
}

impl ParallelPair {
    pub fn kind(&self) -> PairKind {
        match self.target_seq {
            Target::Labeled(_) => PairKind::Labeled,
            Target::Translation(_) => PairKind::Translation,
        }
    }

    pub fn target_symbols(&self) -> &[String] {
        match &self.target_seq {
            Target::Labeled(l) => &l.symbols,
            Target::Translation(t) => t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target_symbols().is_empty() {
            return Err(Error::invalid("parallel pair with an empty side"));
        }
        match (&self.target_seq, self.target.srl) {
            (Target::Labeled(_), true) => match self.predicate_index {
                Some(p) if p < self.source.len() => Ok(()),
                Some(p) => Err(Error::invalid(format!(
                    "predicate index {p} outside source of {} tokens",
                    self.source.len()
                ))),
                None => Err(Error::invalid("labeled pair without a predicate index")),
            },
            (Target::Translation(t), false) => {
                if let Some(b) = t.iter().find(|s| is_bracket(s)) {
                    Err(Error::invalid(format!("translation pair contains bracket symbol `{b}`")))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::invalid("pair kind does not match target indicator")),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            self.source_lang,
            self.target,
            self.source.join(" "),
            self.target_symbols().join(" ")
        );
        if let Some(p) = self.predicate_index {
            line.push('\t');
            line.push_str(&p.to_string());
        }
        line
    }
}

/// Source tokens with the translation token for the pair's target prepended.
pub fn prefix_translation_token(pair: &ParallelPair) -> Result<Vec<String>> {
    prefix_tokens(&pair.source, &pair.target)
}

pub fn prefix_tokens(source: &[String], target: &Indicator) -> Result<Vec<String>> {
    if source.first().is_some_and(|t| is_translation_token(t)) {
        return Err(Error::invalid(format!(
            "source already starts with translation token `{}`",
            source[0]
        )));
    }
    let mut out = Vec::with_capacity(source.len() + 1);
    out.push(target.translation_token());
    out.extend_from_slice(source);
    Ok(out)
}

pub fn parse_parallel_line(line: &str, path: &Path, lineno: usize) -> Result<ParallelPair> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(4..=5).contains(&fields.len()) {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    let err = |e: Error| Error::parse(path, lineno, e.to_string());
    let source_lang: Indicator = fields[0].parse().map_err(err)?;
    let target: Indicator = fields[1].parse().map_err(err)?;
    let source: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
    let tgt: Vec<String> = fields[3].split_whitespace().map(str::to_string).collect();
    let predicate_index = match fields.get(4).map(|s| s.trim()) {
        None | Some("") | Some("-") => None,
        Some(p) => Some(
            p.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("bad predicate index `{p}`")))?,
        ),
    };
    let target_seq = if target.srl {
        Target::Labeled(LinearizedSeq::new(tgt, target.to_string()))
    } else {
        Target::Translation(tgt)
    };
    let pair = ParallelPair {
        source_lang,
        target,
        source,
        target_seq,
        predicate_index,
    };
    pair.validate().map_err(err)?;
    Ok(pair)
}

pub fn read_parallel(path: impl AsRef<Path>) -> Result<Vec<ParallelPair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_parallel_line(l, path, i + 1))
        .collect()
}

pub fn write_parallel(path: impl AsRef<Path>, pairs: &[ParallelPair]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.to_line());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
