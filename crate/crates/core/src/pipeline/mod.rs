//! Command implementations behind the `xsrl` binary.
//!
//! Each command is a plain function over paths and options so it can be
//! driven from tests as well as from the CLI. Commands that write files
//! also write a [`PipelineRun`] manifest next to their primary output.

mod augment;
mod checks;
mod generate;
mod label;
mod score;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric::Precision;
use crate::train::{train_loop, resume_training, TrainConfig, TrainOutcome};

pub use augment::{augment_on, cmd_augment, normalize_portions, AugmentReport, AugmentRequest, AugmentRow};
pub use checks::{cmd_gradcheck, gradient_suite, GradCheckSummary};
pub use generate::{cmd_generate, DEFAULT_THRESHOLD, generate_with, read_generation_input, GenerateRequest, GenerateSummary, GenerationInput};
pub use label::{cmd_label, label_dep, label_span, LabelFormat, LabelRequest, LabelSummary};
pub use score::{cmd_score, score_files, ScoreKind, ScoreReport, ScoreRequest};

/// Options every command accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    pub seed: u64,
    pub threads: usize,
    pub precision: Precision,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 1,
            threads: 1,
            precision: Precision::F32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: format!("{:x}", Sha256::digest(&data)),
        })
    }
}

/// What a command did, with enough detail to run it again.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineRun {
    pub command: String,
    pub version: &'static str,
    pub options: RunOptions,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
}

/// Times a command and writes its manifest when it finishes.
pub struct Recorder {
    command: String,
    started: SystemTime,
    clock: Instant,
}

impl Recorder {
    pub fn start(command: impl Into<String>) -> Self {
        Recorder {
            command: command.into(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn finish(
        self,
        manifest: &Path,
        options: RunOptions,
        config: serde_json::Value,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Result<PipelineRun> {
        let digest = |ps: &[&Path]| ps.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>();
        let run = PipelineRun {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            options,
            config,
            inputs: digest(inputs)?,
            outputs: digest(outputs)?,
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
        };
        let body = serde_json::to_string_pretty(&run).expect("manifest serializes");
        fs::write(manifest, body + "\n").map_err(|e| Error::io(manifest, e))?;
        Ok(run)
    }
}

/// `<path>.manifest.json`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub(crate) fn to_json<S: Serialize>(v: &S) -> serde_json::Value {
    serde_json::to_value(v).expect("value serializes")
}

/// Trains from a config file. `seed` and `precision` override the file.
pub fn cmd_train(config: &Path, seed: Option<u64>, precision: Option<Precision>, threads: usize, resume: bool) -> Result<TrainOutcome> {
    let rec = Recorder::start(if resume { "train --resume" } else { "train" });
    let mut cfg = TrainConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = precision {
        cfg.precision = p;
    }
    let outcome = if resume { resume_training(&cfg)? } else { train_loop(&cfg)? };
    let mut inputs: Vec<&Path> = vec![config];
    inputs.extend(cfg.corpora.iter().map(|c| c.path.as_path()));
    if let Some(d) = &cfg.dev {
        inputs.push(&d.path);
    }
    let outputs = [outcome.best_checkpoint.as_path(), outcome.last_checkpoint.as_path(), outcome.log.as_path()];
    let options = RunOptions {
        seed: cfg.seed,
        threads,
        precision: cfg.precision,
    };
    rec.finish(&cfg.output_dir.join("manifest.json"), options, to_json(&cfg), &inputs, &outputs)?;
    Ok(outcome)
}

/// Writes the vocabulary a config's corpora would produce.
pub fn cmd_vocab(config: &Path, output: &Path, threads: usize) -> Result<crate::vocab::Vocabulary> {
    let rec = Recorder::start("vocab");
    let cfg = TrainConfig::load(config)?;
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let corpora = cfg.corpora.iter().map(crate::train::load_corpus).collect::<Result<Vec<_>>>()?;
    let dev = cfg.dev.as_ref().map(crate::train::load_corpus).transpose()?;
    let vocab = crate::train::build_vocabulary(&cfg, &corpora, dev.as_ref())?;
    vocab.save(output)?;
    let mut inputs: Vec<&Path> = vec![config];
    inputs.extend(cfg.corpora.iter().map(|c| c.path.as_path()));
    let options = RunOptions {
        seed: cfg.seed,
        threads,
        precision: cfg.precision,
    };
    rec.finish(&manifest_path(output), options, to_json(&cfg), &inputs, &[output])?;
    Ok(vocab)
}
