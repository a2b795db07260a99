//! File formats and the SRL linearization.

pub mod conll;
pub mod embeddings;
pub mod parallel;
pub mod records;
pub mod srl;

pub use conll::{read_conll_dep, read_conll_span, ColumnMap, DepReaderConfig, DepSentence, SpanSentence};
pub use parallel::{prefix_translation_token, Indicator, PairKind, ParallelPair};
pub use records::GenerationRecord;
pub use srl::{delinearize, linearize, Argument, Delinearized, LinearizedSeq, SrlSentence};
