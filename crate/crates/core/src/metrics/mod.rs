//! BLEU in three views, SRL F1 and threshold filtering.

mod bleu;
mod f1;

pub use bleu::{bleu_corpus, bleu_sentence, bleu_triple, strip_view, BleuReport, BleuTriple, View};
pub use f1::{srl_f1, srl_f1_corpus, F1Mode, F1Report, LabelCounts};

use crate::data::records::GenerationRecord;

/// Splits records into `(kept, rejected)`, preserving input order.
pub fn filter_records(records: Vec<GenerationRecord>, threshold: f64) -> (Vec<GenerationRecord>, Vec<GenerationRecord>) {
    records.into_iter().partition(|r| r.sentence_bleu >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::srl::LinearizedSeq;

    fn rec(bleu: f64) -> GenerationRecord {
        GenerationRecord::new(vec!["a".into()], LinearizedSeq::parse("a", "DE-SRL"), vec!["a".into()], bleu, 10.0)
    }

    #[test]
    fn threshold_boundary() {
        let (kept, rejected) = filter_records(vec![rec(10.0), rec(9.999), rec(55.0), rec(0.0)], 10.0);
        assert_eq!(kept.iter().map(|r| r.sentence_bleu).collect::<Vec<_>>(), vec![10.0, 55.0]);
        assert_eq!(rejected.iter().map(|r| r.sentence_bleu).collect::<Vec<_>>(), vec![9.999, 0.0]);
    }
}
