//! Small synthetic languages with gold role annotation.
//!
//! Three languages share one lexicon through a word-for-word bijection:
//! `En` and `Fr` are verb-medial, `De` puts the verb last. Frames are
//! rendered into any of them with the same role structure, which makes the
//! corpora usable for monolingual, multilingual and cross-lingual runs.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::conll::{ColumnMap, DepSentence, Frame as ConllFrame, SpanFrame, SpanSentence, EMPTY};
use crate::data::parallel::{Indicator, ParallelPair, Target};
use crate::data::srl::{linearize, Argument, SrlSentence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lang {
    En,
    De,
    Fr,
}

impl Lang {
    pub const ALL: [Lang; 3] = [Lang::En, Lang::De, Lang::Fr];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "EN",
            Lang::De => "DE",
            Lang::Fr => "FR",
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

type Entry = [&'static str; 3];

const DETS: &[Entry] = &[["the", "der", "le"], ["a", "ein", "un"]];

const ADJS: &[Entry] = &[
    ["big", "gross", "grand"],
    ["small", "klein", "petit"],
    ["red", "rot", "rouge"],
    ["old", "alt", "vieux"],
    ["young", "jung", "jeune"],
];

const NOUNS: &[Entry] = &[
    ["cat", "katze", "chat"],
    ["dog", "hund", "chien"],
    ["bird", "vogel", "oiseau"],
    ["child", "kind", "enfant"],
    ["teacher", "lehrer", "professeur"],
    ["farmer", "bauer", "fermier"],
    ["doctor", "arzt", "medecin"],
    ["king", "koenig", "roi"],
    ["queen", "koenigin", "reine"],
    ["horse", "pferd", "cheval"],
    ["apple", "apfel", "pomme"],
    ["book", "buch", "livre"],
    ["letter", "brief", "lettre"],
    ["ball", "kugel", "balle"],
    ["car", "auto", "voiture"],
    ["boat", "boot", "bateau"],
    ["tree", "baum", "arbre"],
    ["stone", "stein", "pierre"],
    ["cup", "becher", "tasse"],
    ["key", "schluessel", "cle"],
];

const PLACES: &[Entry] = &[
    ["garden", "garten", "jardin"],
    ["park", "anlage", "parc"],
    ["city", "stadt", "ville"],
    ["river", "fluss", "riviere"],
    ["forest", "wald", "foret"],
    ["house", "haus", "maison"],
];

const PREPS: &[Entry] = &[["in", "im", "dans"], ["near", "bei", "pres"], ["under", "unter", "sous"]];

const VERBS: &[Entry] = &[
    ["sees", "sieht", "voit"],
    ["likes", "mag", "aime"],
    ["takes", "nimmt", "prend"],
    ["finds", "findet", "trouve"],
    ["carries", "traegt", "porte"],
    ["wants", "will", "veut"],
    ["holds", "haelt", "tient"],
    ["pushes", "schiebt", "pousse"],
    ["follows", "folgt", "suit"],
    ["calls", "ruft", "appelle"],
];

/// Verbs fall into groups of two; each group labels its object differently.
pub const VERB_GROUPS: usize = 5;
const OBJECT_LABELS: [&str; VERB_GROUPS] = ["A1", "A2", "A3", "A4", "A5"];
pub const SUBJECT_LABEL: &str = "A0";
pub const LOCATION_LABEL: &str = "AM-LOC";

pub fn verb_count() -> usize {
    VERBS.len()
}

pub fn verbs_in_group(group: usize) -> Vec<usize> {
    (0..VERBS.len()).filter(|v| v / 2 == group).collect()
}

pub fn object_label(verb: usize) -> &'static str {
    OBJECT_LABELS[verb / 2]
}

/// Every word form of one language.
pub fn inventory(lang: Lang) -> BTreeSet<&'static str> {
    [DETS, ADJS, NOUNS, PLACES, PREPS, VERBS]
        .iter()
        .flat_map(|table| table.iter().map(move |e| e[lang.column()]))
        .collect()
}

/// Word-for-word translation; `None` for words outside the lexicon.
pub fn translate_word(word: &str, from: Lang, to: Lang) -> Option<&'static str> {
    [DETS, ADJS, NOUNS, PLACES, PREPS, VERBS]
        .iter()
        .flat_map(|t| t.iter())
        .find(|e| e[from.column()] == word)
        .map(|e| e[to.column()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NounPhrase {
    pub det: usize,
    pub adj: Option<usize>,
    pub noun: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub subject: NounPhrase,
    pub verb: usize,
    pub object: NounPhrase,
    /// Preposition and place.
    pub location: Option<(usize, NounPhrase)>,
}

fn random_np<R: Rng>(rng: &mut R, nouns: &[Entry]) -> NounPhrase {
    NounPhrase {
        det: rng.gen_range(0..DETS.len()),
        adj: rng.gen_bool(0.3).then(|| rng.gen_range(0..ADJS.len())),
        noun: rng.gen_range(0..nouns.len()),
    }
}

pub fn random_frame<R: Rng>(rng: &mut R, verbs: &[usize]) -> Frame {
    let subject = random_np(rng, NOUNS);
    let verb = *verbs.choose(rng).expect("at least one verb");
    let object = random_np(rng, NOUNS);
    let location = rng
        .gen_bool(0.4)
        .then(|| (rng.gen_range(0..PREPS.len()), random_np(rng, PLACES)));
    Frame {
        subject,
        verb,
        object,
        location,
    }
}

/// `n` distinct frames using only `verbs`, excluding any in `avoid`.
pub fn distinct_frames<R: Rng>(rng: &mut R, n: usize, verbs: &[usize], avoid: &BTreeSet<Frame>) -> Vec<Frame> {
    let mut seen = avoid.clone();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let f = random_frame(rng, verbs);
        if seen.insert(f) {
            out.push(f);
        }
    }
    out
}

fn np_words(np: &NounPhrase, nouns: &[Entry], lang: Lang) -> Vec<String> {
    let c = lang.column();
    let mut w = vec![DETS[np.det][c].to_string()];
    let noun = nouns[np.noun][c].to_string();
    match (np.adj, lang) {
        (Some(a), Lang::Fr) => {
            w.push(noun);
            w.push(ADJS[a][c].to_string());
        }
        (Some(a), _) => {
            w.push(ADJS[a][c].to_string());
            w.push(noun);
        }
        (None, _) => w.push(noun),
    }
    w
}

/// Renders a frame as an annotated sentence in `lang`.
pub fn render(frame: &Frame, lang: Lang) -> SrlSentence {
    let c = lang.column();
    let subject = (np_words(&frame.subject, NOUNS, lang), SUBJECT_LABEL);
    let object = (np_words(&frame.object, NOUNS, lang), object_label(frame.verb));
    let location = frame.location.map(|(p, np)| {
        let mut w = vec![PREPS[p][c].to_string()];
        w.extend(np_words(&np, PLACES, lang));
        (w, LOCATION_LABEL)
    });
    let verb = VERBS[frame.verb][c].to_string();

    let mut parts: Vec<Option<(Vec<String>, &str)>> = Vec::new();
    match lang {
        Lang::En | Lang::Fr => {
            parts.push(Some(subject));
            parts.push(None);
            parts.push(Some(object));
            parts.extend(location.map(Some));
        }
        Lang::De => {
            parts.push(Some(subject));
            parts.extend(location.map(Some));
            parts.push(Some(object));
            parts.push(None);
        }
    }
    let mut tokens = Vec::new();
    let mut args = Vec::new();
    let mut predicate = 0;
    for part in parts {
        match part {
            Some((words, label)) => {
                let start = tokens.len();
                tokens.extend(words);
                args.push(Argument::new(start, tokens.len() - 1, label));
            }
            None => {
                predicate = tokens.len();
                tokens.push(verb.clone());
            }
        }
    }
    SrlSentence::new(tokens, lang.code(), predicate, args)
}

/// A pair from `frame` rendered in `from` to `to`: labeled (`XX-SRL`
/// target) or plain translation.
pub fn pair(frame: &Frame, from: Lang, to: Lang, labeled: bool) -> ParallelPair {
    let src = render(frame, from);
    let tgt = render(frame, to);
    let source_lang = Indicator::plain(from.code()).expect("valid code");
    if labeled {
        let target = Indicator::srl(to.code()).expect("valid code");
        let seq = linearize(&tgt, &target.to_string()).expect("generated sentence is well formed");
        ParallelPair {
            source_lang,
            target,
            source: src.tokens,
            target_seq: Target::Labeled(seq),
            predicate_index: Some(src.predicate_index),
        }
    } else {
        ParallelPair {
            source_lang,
            target: Indicator::plain(to.code()).expect("valid code"),
            source: src.tokens,
            target_seq: Target::Translation(tgt.tokens),
            predicate_index: None,
        }
    }
}

/// CoNLL-09 block for one sentence; each argument keeps only its head,
/// the last token of the region.
pub fn to_dep_sentence(s: &SrlSentence) -> DepSentence {
    let heads: Vec<Argument> = s.arguments.iter().map(|a| Argument::new(a.end, a.end, a.label.clone())).collect();
    let rows = s
        .tokens
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let is_pred = i == s.predicate_index;
            let role = heads.iter().find(|a| a.end == i).map_or(EMPTY, |a| a.label.as_str());
            let mut row = vec![(i + 1).to_string(), w.clone(), w.clone(), w.clone()];
            row.extend(["_", "_", "_", "_", "0", "0", "_", "_"].map(String::from));
            row.push(if is_pred { "Y".into() } else { EMPTY.into() });
            row.push(if is_pred { format!("{w}.01") } else { EMPTY.into() });
            row.push(role.to_string());
            row
        })
        .collect();
    DepSentence {
        rows,
        frames: vec![ConllFrame {
            predicate_index: s.predicate_index,
            sense: Some(format!("{}.01", s.tokens[s.predicate_index])),
            arguments: heads,
        }],
        language: s.language.clone(),
        columns: ColumnMap::default(),
    }
}

/// CoNLL-05 block for one sentence with a single-token verb span.
pub fn to_span_sentence(s: &SrlSentence) -> SpanSentence {
    let p = s.predicate_index;
    SpanSentence {
        tokens: s.tokens.clone(),
        predicates: (0..s.tokens.len()).map(|i| if i == p { s.tokens[i].clone() } else { "-".into() }).collect(),
        frames: vec![SpanFrame {
            predicate_index: p,
            verb_span: (p, p),
            arguments: s.arguments.clone(),
        }],
        language: s.language.clone(),
    }
}

/// Random well-formed sentence over a small alphabet with non-overlapping
/// labeled regions, for round-trip checks.
pub fn random_sentence<R: Rng>(rng: &mut R, max_len: usize) -> SrlSentence {
    const WORDS: &[&str] = &["a", "b", "c", "dog", "ran", "x1", "ünï", "the"];
    const LABELS: &[&str] = &["A0", "A1", "A2", "AM-TMP", "AM-LOC", "C-A1", "R-A0"];
    let n = rng.gen_range(1..=max_len.max(1));
    let tokens: Vec<String> = (0..n).map(|_| WORDS.choose(rng).expect("non-empty").to_string()).collect();
    let mut args = Vec::new();
    let mut i = 0;
    while i < n {
        if rng.gen_bool(0.3) {
            let end = rng.gen_range(i..n.min(i + 4));
            args.push(Argument::new(i, end, *LABELS.choose(rng).expect("non-empty")));
            i = end + 1;
        } else {
            i += 1;
        }
    }
    SrlSentence::new(tokens, "EN", rng.gen_range(0..n), args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inventories_are_disjoint_and_translation_is_a_bijection() {
        let sets: Vec<_> = Lang::ALL.iter().map(|&l| inventory(l)).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(sets[i].is_disjoint(&sets[j]), "{i} {j}: {:?}", sets[i].intersection(&sets[j]).collect::<Vec<_>>());
            }
            assert_eq!(sets[i].len(), sets[0].len());
        }
        for w in &sets[0] {
            let de = translate_word(w, Lang::En, Lang::De).unwrap();
            assert_eq!(translate_word(de, Lang::De, Lang::En), Some(*w));
        }
    }

    #[test]
    fn renderings_share_roles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let f = random_frame(&mut rng, &(0..verb_count()).collect::<Vec<_>>());
            let en = render(&f, Lang::En);
            let de = render(&f, Lang::De);
            en.validate().unwrap();
            de.validate().unwrap();
            let labels = |s: &SrlSentence| s.arguments.iter().map(|a| a.label.clone()).collect::<BTreeSet<_>>();
            assert_eq!(labels(&en), labels(&de));
            assert_eq!(de.predicate_index, de.tokens.len() - 1);
            assert_eq!(en.tokens.len(), de.tokens.len());
        }
    }

    #[test]
    fn french_adjective_follows_noun() {
        let f = Frame {
            subject: NounPhrase { det: 0, adj: Some(0), noun: 0 },
            verb: 0,
            object: NounPhrase { det: 1, adj: None, noun: 1 },
            location: None,
        };
        assert_eq!(render(&f, Lang::Fr).tokens.join(" "), "le chat grand voit un chien");
        assert_eq!(render(&f, Lang::En).tokens.join(" "), "the big cat sees a dog");
        assert_eq!(render(&f, Lang::De).tokens.join(" "), "der gross katze ein hund sieht");
    }

    #[test]
    fn conll_renderings_read_back() {
        use crate::data::conll::{format_conll_dep, format_conll_span, parse_conll_dep, parse_conll_span, DepReaderConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = render(&random_frame(&mut rng, &[0, 1]), Lang::De);
        let path = std::path::Path::new("mem");
        let dep = parse_conll_dep(&format_conll_dep(&[to_dep_sentence(&s)]), path, &DepReaderConfig::new("DE")).unwrap();
        assert_eq!(dep[0].tokens(), s.tokens);
        let heads: Vec<usize> = dep[0].frames[0].arguments.iter().map(|a| a.start).collect();
        assert_eq!(heads, s.arguments.iter().map(|a| a.end).collect::<Vec<_>>());
        let span = parse_conll_span(&format_conll_span(&[to_span_sentence(&s)]), path, "DE").unwrap();
        assert_eq!(span.expand()[0].arguments, s.arguments);
    }
}
