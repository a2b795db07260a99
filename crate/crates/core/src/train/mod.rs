//! Training: corpora, batching, the optimizer and the epoch loop.

mod batch;
mod config;
mod corpus;
mod eval;
mod optim;
mod run;

pub use batch::{batch_gradients, make_batches, BatchSpec};
pub use config::{CorpusFormat, CorpusSpec, Mode, TrainConfig};
pub use corpus::{
    instance_from_pair, instance_from_sentence, instance_to_line, is_copy_mode, load_corpus, Corpus,
};
pub use eval::{evaluate_dev, DevReport};
pub use optim::Adam;
pub use run::{build_vocabulary, init_model, resume_training, train_loop, train_on, StopReason, TrainOutcome, BEST, LAST, LOG};
