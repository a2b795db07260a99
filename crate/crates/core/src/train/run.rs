use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::embeddings::load_embeddings;
use crate::data::parallel::Indicator;
use crate::error::{Error, Result};
use crate::model::checkpoint::{load_checkpoint, save_checkpoint};
use crate::model::{Instance, LossStats, Model};
use crate::numeric::{Precision, Real};
use crate::train::batch::{batch_gradients, make_batches, BatchSpec};
use crate::train::config::{Mode, TrainConfig};
use crate::train::corpus::{instance_to_line, is_copy_mode, load_corpus, Corpus};
use crate::train::eval::{evaluate_dev, DevReport};
use crate::train::optim::Adam;
use crate::vocab::{VocabBuilder, Vocabulary};

pub const BEST: &str = "best.ckpt";
pub const LAST: &str = "last.ckpt";
pub const LOG: &str = "metrics.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochBudget,
    StepBudget,
    Patience,
    TargetAccuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub epochs: usize,
    pub steps: u64,
    pub stopped: StopReason,
    /// Mean per-sentence loss and token accuracy of the last full epoch.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub best_dev: Option<f64>,
    pub last_dev: Option<DevReport>,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub log: PathBuf,
}

/// Resumable loop position, stored in the checkpoint metadata.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Progress {
    epoch: usize,
    batch: usize,
    step: u64,
    adam_t: u64,
    best: Option<f64>,
    bad_evals: usize,
    epoch_loss: f64,
    epoch_tokens: usize,
    epoch_correct: usize,
    epoch_sentences: usize,
    log_lines: usize,
}

fn mode_problems(mode: Mode, corpora: &[Corpus]) -> Vec<String> {
    let all: Vec<&Instance> = corpora.iter().flat_map(|c| &c.instances).collect();
    let mut errs = Vec::new();
    if mode == Mode::Translation {
        if let Some(i) = all.iter().find(|i| i.target_lang.srl) {
            errs.push(format!("translation training accepts only unlabeled targets, found {}", i.target_lang));
        }
        if all.is_empty() {
            errs.push("training data is empty".to_string());
        }
        return errs;
    }
    if !all.iter().any(|i| i.target_lang.srl) {
        errs.push("training data contains no labeled instances".to_string());
    }
    let langs: BTreeSet<&str> = all.iter().map(|i| i.source_lang.lang.as_str()).collect();
    match mode {
        Mode::Monolingual | Mode::Multilingual => {
            if let Some(i) = all.iter().find(|i| !is_copy_mode(i)) {
                errs.push(format!(
                    "{mode:?} training accepts only same-language labeled pairs, found {} -> {}",
                    i.source_lang, i.target_lang
                ));
            }
            if mode == Mode::Monolingual && langs.len() > 1 {
                errs.push(format!("monolingual training found several languages: {langs:?}"));
            }
        }
        Mode::Crosslingual | Mode::Translation => {}
    }
    errs
}

/// Vocabulary over all training symbols plus every translation token in use.
pub fn build_vocabulary(cfg: &TrainConfig, corpora: &[Corpus], dev: Option<&Corpus>) -> Result<Vocabulary> {
    let mut b = VocabBuilder::new();
    for inst in corpora.iter().flat_map(|c| &c.instances) {
        b.add_tokens(&inst.source);
        b.add_tokens(&inst.target);
    }
    for inst in corpora.iter().chain(dev).flat_map(|c| &c.instances) {
        b.add_translation_token(inst.target_lang.translation_token());
    }
    b.build(cfg.min_count)
}

fn indicators(cfg: &TrainConfig, corpora: &[Corpus], dev: Option<&Corpus>) -> Vec<Indicator> {
    let mut set: BTreeSet<Indicator> = cfg.model.indicators.iter().cloned().collect();
    for inst in corpora.iter().chain(dev).flat_map(|c| &c.instances) {
        set.insert(inst.source_lang.clone());
        set.insert(inst.target_lang.clone());
    }
    set.into_iter().collect()
}

/// Builds a fresh model for `cfg` and the given corpora.
pub fn init_model<T: Real>(cfg: &TrainConfig, corpora: &[Corpus], dev: Option<&Corpus>) -> Result<Model<T>> {
    let vocab = build_vocabulary(cfg, corpora, dev)?;
    let mut mc = cfg.model.clone();
    mc.indicators = indicators(cfg, corpora, dev);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let mut model = Model::new(mc, vocab, &mut rng)?;
    if let Some(path) = &cfg.embeddings {
        let vectors = load_embeddings(path, cfg.model.word_dim)?;
        let hits = model.load_pretrained(&vectors)?;
        info!("pre-trained vectors set for {hits} of {} words", model.vocab.n_words());
    }
    Ok(model)
}

fn load_all(cfg: &TrainConfig) -> Result<(Vec<Corpus>, Option<Corpus>)> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let corpora = cfg.corpora.iter().map(load_corpus).collect::<Result<Vec<_>>>()?;
    let dev = cfg.dev.as_ref().map(load_corpus).transpose()?;
    Ok((corpora, dev))
}

/// Loads the configured corpora and trains from scratch.
pub fn train_loop(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (corpora, dev) = load_all(cfg)?;
    match cfg.precision {
        Precision::F32 => train_on::<f32>(cfg, &corpora, dev.as_ref(), false).map(|(_, o)| o),
        Precision::F64 => train_on::<f64>(cfg, &corpora, dev.as_ref(), false).map(|(_, o)| o),
    }
}

/// Continues from `output_dir/last.ckpt`.
pub fn resume_training(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (corpora, dev) = load_all(cfg)?;
    match cfg.precision {
        Precision::F32 => train_on::<f32>(cfg, &corpora, dev.as_ref(), true).map(|(_, o)| o),
        Precision::F64 => train_on::<f64>(cfg, &corpora, dev.as_ref(), true).map(|(_, o)| o),
    }
}

struct Log {
    path: PathBuf,
    lines: usize,
}

impl Log {
    fn open(path: PathBuf, keep_lines: Option<usize>) -> Result<Self> {
        let lines = match keep_lines {
            Some(n) => {
                let text = fs::read_to_string(&path).unwrap_or_default();
                let kept: Vec<&str> = text.lines().take(n).collect();
                let mut body = kept.join("\n");
                if !kept.is_empty() {
                    body.push('\n');
                }
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                kept.len()
            }
            None => {
                fs::write(&path, "").map_err(|e| Error::io(&path, e))?;
                0
            }
        };
        Ok(Log { path, lines })
    }

    fn write(&mut self, value: serde_json::Value) -> Result<()> {
        let mut f = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        writeln!(f, "{value}").map_err(|e| Error::io(&self.path, e))?;
        self.lines += 1;
        Ok(())
    }
}

fn dump_batch(dir: &Path, epoch: usize, batch: usize, insts: &[&Instance]) -> PathBuf {
    let path = dir.join(format!("nonfinite-epoch{epoch}-batch{batch}.tsv"));
    let body: String = insts.iter().map(|i| instance_to_line(i) + "\n").collect();
    if let Err(e) = fs::write(&path, body) {
        warn!("could not dump batch to {}: {e}", path.display());
    }
    path
}

/// Trains on in-memory corpora. Returns the model as of the last step.
pub fn train_on<T: Real>(
    cfg: &TrainConfig,
    corpora: &[Corpus],
    dev: Option<&Corpus>,
    resume: bool,
) -> Result<(Model<T>, TrainOutcome)> {
    let problems = mode_problems(cfg.mode, corpora);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let best_path = out.join(BEST);
    let last_path = out.join(LAST);

    let (mut model, mut adam, mut prog) = if resume {
        let ck = load_checkpoint::<T>(&last_path)?;
        let prog: Progress = serde_json::from_value(ck.extra)
            .map_err(|e| Error::Format(format!("{}: bad training state: {e}", last_path.display())))?;
        let mut adam = Adam::new(&ck.model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
        adam.import(&ck.model.params, &ck.side, prog.adam_t)?;
        (ck.model, adam, prog)
    } else {
        let model = init_model::<T>(cfg, corpora, dev)?;
        let adam = Adam::new(&model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
        (model, adam, Progress::default())
    };
    let mut log = Log::open(out.join(LOG), resume.then_some(prog.log_lines))?;
    model.vocab.save(out.join("vocab.txt"))?;

    let spec = BatchSpec {
        batch_size: cfg.batch_size,
        mt_data_cap: (cfg.mode != Mode::Translation).then_some(cfg.mt_data_cap),
    };
    let save_last = |model: &Model<T>, adam: &Adam<T>, prog: &Progress| -> Result<()> {
        let state = serde_json::to_value(prog).expect("progress serializes");
        save_checkpoint(&last_path, model, &adam.export(&model.params), state)
    };

    let mut stopped = StopReason::EpochBudget;
    let mut last_dev = None;
    let (mut train_loss, mut train_accuracy) = (f64::NAN, 0.0);
    'epochs: while prog.epoch < cfg.epochs {
        let epoch = prog.epoch;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        let batches = make_batches(corpora, &spec, &mut rng);

        while prog.batch < batches.len() {
            let b = prog.batch;
            let insts: Vec<&Instance> = batches[b].iter().map(|&(c, i)| &corpora[c].instances[i]).collect();
            let fail = |op: String| {
                let dump = dump_batch(out, epoch, b, &insts);
                Error::NonFinite {
                    op: format!("{op} (epoch {epoch}, batch {b}; batch written to {})", dump.display()),
                }
            };
            let (mut grads, stats) = match batch_gradients(&model, &insts) {
                Ok(r) => r,
                Err(Error::NonFinite { op }) => return Err(fail(op)),
                Err(e) => return Err(e),
            };
            if !stats.loss.is_finite() || !grads.all_finite() {
                return Err(fail("loss".into()));
            }
            let norm = grads.clip_global_norm(T::lit(cfg.clip_norm));
            adam.step(&mut model.params, &grads);
            if !model.params.all_finite() {
                return Err(fail("parameter update".into()));
            }
            prog.step += 1;
            prog.batch += 1;
            prog.adam_t = adam.t;
            prog.epoch_loss += stats.loss;
            prog.epoch_tokens += stats.tokens;
            prog.epoch_correct += stats.correct;
            prog.epoch_sentences += insts.len();
            log.write(json!({
                "kind": "step",
                "epoch": epoch,
                "batch": b,
                "step": prog.step,
                "loss": stats.loss / insts.len() as f64,
                "accuracy": stats.accuracy(),
                "grad_norm": norm.as_f64(),
            }))?;
            prog.log_lines = log.lines;

            let budget_hit = cfg.max_steps > 0 && prog.step >= cfg.max_steps as u64;
            if budget_hit || (cfg.checkpoint_every > 0 && prog.step % cfg.checkpoint_every as u64 == 0) {
                save_last(&model, &adam, &prog)?;
            }
            if budget_hit {
                stopped = StopReason::StepBudget;
                break 'epochs;
            }
        }

        let epoch_stats = LossStats {
            loss: prog.epoch_loss,
            tokens: prog.epoch_tokens,
            correct: prog.epoch_correct,
        };
        train_loss = prog.epoch_loss / prog.epoch_sentences.max(1) as f64;
        train_accuracy = epoch_stats.accuracy();
        let report = dev.map(|d| evaluate_dev(&model, d, cfg.search)).transpose()?;
        let improved = match (&report, prog.best) {
            (Some(r), Some(best)) => r.value > best,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if let Some(r) = &report {
            if improved {
                prog.best = Some(r.value);
                prog.bad_evals = 0;
            } else {
                prog.bad_evals += 1;
            }
        }
        if improved {
            save_checkpoint(&best_path, &model, &[], serde_json::Value::Null)?;
        }
        log.write(json!({
            "kind": "epoch",
            "epoch": epoch,
            "step": prog.step,
            "train_loss": train_loss,
            "train_accuracy": train_accuracy,
            "dev": report,
            "best_dev": prog.best,
        }))?;
        info!(
            "epoch {epoch}: loss {train_loss:.4} acc {train_accuracy:.4}{}",
            report.as_ref().map_or(String::new(), |r| format!(" dev {} {:.4}", r.metric, r.value))
        );
        last_dev = report;

        prog.epoch += 1;
        prog.batch = 0;
        prog.epoch_loss = 0.0;
        prog.epoch_tokens = 0;
        prog.epoch_correct = 0;
        prog.epoch_sentences = 0;
        prog.log_lines = log.lines;
        save_last(&model, &adam, &prog)?;

        if dev.is_some() && prog.bad_evals >= cfg.patience.max(1) {
            stopped = StopReason::Patience;
            break;
        }
        if cfg.target_accuracy.is_some_and(|t| train_accuracy >= t) {
            stopped = StopReason::TargetAccuracy;
            break;
        }
    }
    if !best_path.exists() {
        save_checkpoint(&best_path, &model, &[], serde_json::Value::Null)?;
    }

    let outcome = TrainOutcome {
        epochs: prog.epoch,
        steps: prog.step,
        stopped,
        train_loss,
        train_accuracy,
        best_dev: prog.best,
        last_dev,
        best_checkpoint: best_path,
        last_checkpoint: last_path,
        log: log.path,
    };
    Ok((model, outcome))
}
