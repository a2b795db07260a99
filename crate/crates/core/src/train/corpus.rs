use log::warn;

use crate::data::conll::{read_conll_dep, read_conll_span, DepReaderConfig};
use crate::data::parallel::{prefix_tokens, read_parallel, Indicator, ParallelPair};
use crate::data::srl::{linearize, SrlSentence};
use crate::error::Result;
use crate::metrics::F1Mode;
use crate::model::Instance;
use crate::train::config::{CorpusFormat, CorpusSpec};

/// Instances from one corpus file.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub instances: Vec<Instance>,
    pub f1_mode: F1Mode,
}

impl Corpus {
    pub fn new(name: impl Into<String>, instances: Vec<Instance>, f1_mode: F1Mode) -> Self {
        Corpus {
            name: name.into(),
            instances,
            f1_mode,
        }
    }
}

/// A monolingual labeling instance: `<2XX-SRL> w1 .. wn` to the
/// linearized sentence.
pub fn instance_from_sentence(s: &SrlSentence) -> Result<Instance> {
    let source_lang = Indicator::plain(&s.language)?;
    let target_lang = Indicator::srl(&s.language)?;
    let target = linearize(s, &target_lang.to_string())?;
    Ok(Instance {
        source: prefix_tokens(&s.tokens, &target_lang)?,
        predicate: Some(s.predicate_index + 1),
        source_lang,
        target_lang,
        target: target.symbols,
    })
}

pub fn instance_from_pair(p: &ParallelPair) -> Result<Instance> {
    Ok(Instance {
        source: prefix_tokens(&p.source, &p.target)?,
        predicate: p.predicate_index.map(|i| i + 1),
        source_lang: p.source_lang.clone(),
        target_lang: p.target.clone(),
        target: p.target_symbols().to_vec(),
    })
}

/// Parallel-format line for an instance (used to dump failing batches).
pub fn instance_to_line(inst: &Instance) -> String {
    let mut line = format!(
        "{}\t{}\t{}\t{}",
        inst.source_lang,
        inst.target_lang,
        inst.source[1..].join(" "),
        inst.target.join(" ")
    );
    if let Some(p) = inst.predicate {
        line.push_str(&format!("\t{}", p - 1));
    }
    line
}

/// True when the target labels the source in its own language, so decoded
/// words align positionally with the source.
pub fn is_copy_mode(inst: &Instance) -> bool {
    inst.target_lang.srl && inst.source_lang.lang == inst.target_lang.lang
}

pub fn load_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    let name = spec.path.display().to_string();
    let instances = match spec.format {
        CorpusFormat::Conll09 => {
            let lang = spec.language.clone().unwrap_or_default();
            read_conll_dep(&spec.path, &DepReaderConfig::new(lang))?
                .iter()
                .map(instance_from_sentence)
                .collect::<Result<Vec<_>>>()?
        }
        CorpusFormat::Conll05 => {
            let corpus = read_conll_span(&spec.path, spec.language.as_deref().unwrap_or_default())?;
            if !corpus.skipped.is_empty() {
                warn!("{name}: {} discontinuous frame(s) skipped", corpus.skipped.len());
            }
            corpus
                .sentences
                .iter()
                .flat_map(|s| s.expand())
                .map(|s| instance_from_sentence(&s))
                .collect::<Result<Vec<_>>>()?
        }
        CorpusFormat::Parallel => read_parallel(&spec.path)?
            .iter()
            .map(instance_from_pair)
            .collect::<Result<Vec<_>>>()?,
    };
    if instances.is_empty() {
        warn!("{name}: no instances");
    }
    Ok(Corpus::new(name, instances, spec.f1_mode()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::srl::Argument;

    #[test]
    fn sentence_instance_is_prefixed_and_shifted() {
        let s = SrlSentence::new(
            vec!["the".into(), "cat".into(), "sleeps".into()],
            "EN",
            2,
            vec![Argument::new(1, 1, "A0")],
        );
        let inst = instance_from_sentence(&s).unwrap();
        assert_eq!(inst.source, vec!["<2EN-SRL>", "the", "cat", "sleeps"]);
        assert_eq!(inst.predicate, Some(3));
        assert_eq!(inst.target.join(" "), "the (# cat A0) sleeps");
        assert!(is_copy_mode(&inst));
        assert_eq!(instance_to_line(&inst), "EN\tEN-SRL\tthe cat sleeps\tthe (# cat A0) sleeps\t2");
    }
}
