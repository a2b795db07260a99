//! Shared symbol table: words `V`, bracket/label symbols `L`, and the
//! per-instance copy extension `X` (the source tokens).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::data::parallel::is_translation_token;
use crate::data::srl::{closing_label, closing_symbol, OPEN};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const HEADER: &str = "xsrl-vocab";
const VERSION: u32 = 1;

/// Default minimum frequency: a word must occur more than 5 times.
pub const DEFAULT_MIN_COUNT: usize = 6;

pub fn is_control(sym: &str) -> bool {
    matches!(sym, PAD | UNK | BOS | EOS) || is_translation_token(sym)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(words: Vec<String>, labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len() + labels.len());
        for (i, s) in words.iter().chain(&labels).enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Format(format!("symbol `{s}` listed twice")));
            }
        }
        for s in [PAD, UNK, BOS, EOS] {
            if !index.get(s).is_some_and(|&i| i < words.len()) {
                return Err(Error::Format(format!("vocabulary lacks `{s}`")));
            }
        }
        Ok(Vocabulary { words, labels, index })
    }

    /// Number of word types `N` (including control symbols).
    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Number of label symbols `M`.
    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// `N + M`: size of the generation space.
    pub fn len(&self) -> usize {
        self.words.len() + self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, sym: &str) -> Option<usize> {
        self.index.get(sym).copied()
    }

    pub fn id_or_unk(&self, sym: &str) -> usize {
        self.id(sym).unwrap_or_else(|| self.unk())
    }

    pub fn symbol(&self, id: usize) -> &str {
        if id < self.words.len() {
            &self.words[id]
        } else {
            &self.labels[id - self.words.len()]
        }
    }

    pub fn is_label(&self, id: usize) -> bool {
        id >= self.words.len() && id < self.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pad(&self) -> usize {
        self.index[PAD]
    }

    pub fn unk(&self) -> usize {
        self.index[UNK]
    }

    pub fn bos(&self) -> usize {
        self.index[BOS]
    }

    pub fn eos(&self) -> usize {
        self.index[EOS]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} {VERSION} {} {}\n[words]\n", self.words.len(), self.labels.len());
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out.push_str("[labels]\n");
        for l in &self.labels {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty vocabulary file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != HEADER {
            return Err(Error::Format(format!("bad vocabulary header `{header}`")));
        }
        let version: u32 = parts[1].parse().map_err(|_| Error::Format("bad version".into()))?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "vocabulary version {version} is not supported (expected {VERSION})"
            )));
        }
        let n: usize = parts[2].parse().map_err(|_| Error::Format("bad word count".into()))?;
        let m: usize = parts[3].parse().map_err(|_| Error::Format("bad label count".into()))?;
        let mut take_section = |name: &str, count: usize| -> Result<Vec<String>> {
            match lines.next() {
                Some(l) if l == name => {}
                _ => return Err(Error::Format(format!("missing `{name}` section"))),
            }
            let items: Vec<String> = lines.by_ref().take(count).map(str::to_string).collect();
            if items.len() != count {
                return Err(Error::Format(format!(
                    "truncated vocabulary: `{name}` has {} of {count} entries",
                    items.len()
                )));
            }
            Ok(items)
        };
        let words = take_section("[words]", n)?;
        let labels = take_section("[labels]", m)?;
        Self::from_parts(words, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Counts symbols over all training streams.
#[derive(Debug, Default)]
pub struct VocabBuilder {
    counts: BTreeMap<String, usize>,
    labels: BTreeSet<String>,
    translation_tokens: BTreeSet<String>,
}

impl VocabBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one token stream (source or linearized target).
    pub fn add_tokens<'a>(&mut self, tokens: impl IntoIterator<Item = &'a String>) {
        for t in tokens {
            if t == OPEN {
                continue;
            }
            if let Some(label) = closing_label(t) {
                self.labels.insert(label.to_string());
            } else if is_translation_token(t) {
                self.translation_tokens.insert(t.clone());
            } else if !is_control(t) {
                *self.counts.entry(t.clone()).or_default() += 1;
            }
        }
    }

    /// Declares role labels (e.g. a corpus label set) without counting.
    pub fn declare_labels<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, labels: I) {
        self.labels.extend(labels.into_iter().map(Into::into));
    }

    pub fn add_translation_token(&mut self, token: impl Into<String>) {
        self.translation_tokens.insert(token.into());
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty() && self.labels.is_empty()
    }

    /// Words occurring at least `min_count` times enter `V`; every label
    /// symbol enters `L`.
    pub fn build(&self, min_count: usize) -> Result<Vocabulary> {
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        if self.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        let mut words: Vec<String> = [PAD, UNK, BOS, EOS].iter().map(|s| s.to_string()).collect();
        words.extend(self.translation_tokens.iter().cloned());
        let mut frequent: Vec<(&String, usize)> = self
            .counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(w, &c)| (w, c))
            .collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        words.extend(frequent.into_iter().map(|(w, _)| w.clone()));
        let mut labels = vec![OPEN.to_string()];
        labels.extend(self.labels.iter().map(|l| closing_symbol(l)));
        Vocabulary::from_parts(words, labels)
    }
}

pub fn build_vocab<'a, C, S>(corpora: C, min_count: usize) -> Result<Vocabulary>
where
    C: IntoIterator<Item = S>,
    S: IntoIterator<Item = &'a String>,
{
    let mut b = VocabBuilder::new();
    for stream in corpora {
        b.add_tokens(stream);
    }
    b.build(min_count)
}

/// The source tokens of one instance, addressable by copy position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceExtension {
    pub tokens: Vec<String>,
}

impl InstanceExtension {
    pub fn new(tokens: Vec<String>) -> Self {
        InstanceExtension { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn positions(&self, sym: &str) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| *t == sym)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A target symbol with both of its possible identities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSymbol {
    pub text: String,
    /// Id in `V ∪ L`, if the symbol is there.
    pub vocab_id: Option<usize>,
    /// Source positions holding the symbol.
    pub copy_positions: Vec<usize>,
}

impl TargetSymbol {
    pub fn is_unk(&self) -> bool {
        self.vocab_id.is_none() && self.copy_positions.is_empty()
    }

    /// Decoder input id when this symbol is fed back.
    pub fn input_id(&self, vocab: &Vocabulary) -> usize {
        self.vocab_id.unwrap_or_else(|| vocab.unk())
    }

    /// Slots of the joint `[generate; copy]` distribution that emit this
    /// symbol; an unreachable symbol falls back to `UNK`.
    pub fn output_slots(&self, vocab: &Vocabulary) -> Vec<usize> {
        let n = vocab.len();
        let mut slots: Vec<usize> = self.vocab_id.into_iter().collect();
        slots.extend(self.copy_positions.iter().map(|p| n + p));
        if slots.is_empty() {
            slots.push(vocab.unk());
        }
        slots
    }
}

pub fn encode_target(symbols: &[String], vocab: &Vocabulary, ext: &InstanceExtension) -> Vec<TargetSymbol> {
    symbols
        .iter()
        .map(|s| TargetSymbol {
            text: s.clone(),
            vocab_id: vocab.id(s).filter(|&i| i != vocab.unk()),
            copy_positions: ext.positions(s),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn vocab() -> Vocabulary {
        let mut corpus = Vec::new();
        for _ in 0..5 {
            corpus.push(stream("five"));
        }
        for _ in 0..6 {
            corpus.push(stream("six (# six A0)"));
        }
        corpus.push(stream("once (# once AM-TMP)"));
        let mut b = VocabBuilder::new();
        for s in &corpus {
            b.add_tokens(s);
        }
        b.add_translation_token("<2DE-SRL>");
        b.build(DEFAULT_MIN_COUNT).unwrap()
    }

    #[test]
    fn frequency_threshold() {
        let v = vocab();
        assert_eq!(v.id("five"), None);
        assert!(v.id("six").is_some());
        assert_eq!(v.id_or_unk("five"), v.unk());
        // labels enter regardless of frequency
        assert!(v.id("AM-TMP)").is_some_and(|i| v.is_label(i)));
        assert!(v.id("(#").is_some_and(|i| v.is_label(i)));
        assert!(v.id("<2DE-SRL>").is_some_and(|i| !v.is_label(i)));
        assert_eq!(v.symbol(v.id("six").unwrap()), "six");
    }

    #[test]
    fn words_and_labels_disjoint() {
        let v = vocab();
        for w in v.words() {
            assert!(!v.labels().contains(w));
        }
        assert_eq!(v.len(), v.n_words() + v.n_labels());
    }

    #[test]
    fn empty_corpus_rejected() {
        let none: Vec<Vec<String>> = vec![];
        assert!(build_vocab(&none, 1).is_err());
    }

    #[test]
    fn encode_target_identities() {
        let v = vocab();
        let ext = InstanceExtension::new(stream("<2DE-SRL> x six y z six"));
        let enc = encode_target(&stream("six z q"), &v, &ext);
        assert_eq!(enc[0].vocab_id, v.id("six"));
        assert_eq!(enc[0].copy_positions, vec![2, 5]);
        assert_eq!(enc[0].output_slots(&v), vec![v.id("six").unwrap(), v.len() + 2, v.len() + 5]);
        assert_eq!(enc[1].vocab_id, None);
        assert_eq!(enc[1].output_slots(&v), vec![v.len() + 4]);
        assert_eq!(enc[1].input_id(&v), v.unk());
        assert!(enc[2].is_unk());
        assert_eq!(enc[2].output_slots(&v), vec![v.unk()]);
    }

    #[test]
    fn save_load_round_trip() {
        let v = vocab();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        v.save(&p).unwrap();
        let first = fs::read(&p).unwrap();
        let back = Vocabulary::load(&p).unwrap();
        assert_eq!(back, v);
        back.save(&p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
    }

    #[test]
    fn truncated_and_wrong_version() {
        let text = vocab().to_text();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(Vocabulary::from_text(&cut).unwrap_err().to_string().contains("truncated"));
        let bumped = text.replacen("xsrl-vocab 1", "xsrl-vocab 9", 1);
        assert!(Vocabulary::from_text(&bumped).unwrap_err().to_string().contains("version"));
    }
}
