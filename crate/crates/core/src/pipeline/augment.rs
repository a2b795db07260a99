//! Retraining with growing portions of generated data.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::checkpoint::load_checkpoint;
use crate::numeric::{Precision, Real};
use crate::pipeline::{to_json, Recorder, RunOptions};
use crate::train::{evaluate_dev, load_corpus, train_on, Corpus, CorpusFormat, CorpusSpec, TrainConfig, BEST};

#[derive(Clone, Debug, Serialize)]
pub struct AugmentRequest {
    pub config: PathBuf,
    /// Labeled parallel corpus written by `generate`.
    pub generated: PathBuf,
    pub test: CorpusSpec,
    /// Fractions of the generated corpus, ascending.
    pub portions: Vec<f64>,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AugmentRow {
    pub name: String,
    /// `None` for the baseline.
    pub portion: Option<f64>,
    pub added: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AugmentReport {
    pub generated: usize,
    pub test_instances: usize,
    pub rows: Vec<AugmentRow>,
}

impl fmt::Display for AugmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>8} {:>8} {:>8} {:>8}", "setting", "added", "P", "R", "F1")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>8} {:>8.2} {:>8.2} {:>8.2}",
                r.name,
                r.added,
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1
            )?;
        }
        Ok(())
    }
}

/// Checks the portions and clamps those above 1 with a warning.
pub fn normalize_portions(portions: &[f64]) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for (i, p) in portions.iter().enumerate() {
        if !p.is_finite() || *p < 0.0 {
            errs.push(format!("portion {i} must be a non-negative fraction, got {p}"));
        }
        if i > 0 && portions[i - 1] >= *p {
            errs.push(format!("portions must be ascending, {} is followed by {p}", portions[i - 1]));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok(portions
        .iter()
        .map(|&p| {
            if p > 1.0 {
                warn!("portion {p} exceeds the generated corpus, clamped to 1");
                1.0
            } else {
                p
            }
        })
        .collect())
}

fn portion_name(p: f64) -> String {
    format!("+{}%", (p * 100.0 * 100.0).round() / 100.0)
}

/// Trains a baseline on `base`, then one model per portion of `generated`
/// plus one with all of it, and scores each on `test`.
pub fn augment_on<T: Real>(
    cfg: &TrainConfig,
    base: &[Corpus],
    generated: &Corpus,
    test: &Corpus,
    portions: &[f64],
    output_dir: &Path,
) -> Result<AugmentReport> {
    let portions = normalize_portions(portions)?;
    let n = generated.instances.len();
    let mut plan: Vec<(String, Option<f64>, usize)> = vec![("baseline".into(), None, 0)];
    for &p in &portions {
        plan.push((portion_name(p), Some(p), (p * n as f64).round() as usize));
    }
    plan.push(("+ALL".into(), Some(1.0), n));

    let mut rows = Vec::with_capacity(plan.len());
    for (i, (name, portion, added)) in plan.into_iter().enumerate() {
        let dir = output_dir.join(format!("row-{i}"));
        let run_cfg = TrainConfig {
            output_dir: dir.clone(),
            ..cfg.clone()
        };
        let mut corpora = base.to_vec();
        if portion.is_some() {
            corpora.push(Corpus::new(
                generated.name.clone(),
                generated.instances[..added].to_vec(),
                generated.f1_mode,
            ));
        }
        info!("augment row {name}: {added} generated instances");
        train_on::<T>(&run_cfg, &corpora, None, false)?;
        let checkpoint = dir.join(BEST);
        let model = load_checkpoint::<T>(&checkpoint)?.model;
        let report = evaluate_dev(&model, test, cfg.search)?;
        let f1 = report
            .f1
            .ok_or_else(|| Error::invalid("augmentation test set must label its own language"))?;
        rows.push(AugmentRow {
            name,
            portion,
            added,
            precision: f1.precision,
            recall: f1.recall,
            f1: f1.f1,
            checkpoint,
        });
    }
    Ok(AugmentReport {
        generated: n,
        test_instances: test.instances.len(),
        rows,
    })
}

pub fn cmd_augment(req: &AugmentRequest, seed: Option<u64>, precision: Option<Precision>, threads: usize) -> Result<AugmentReport> {
    let rec = Recorder::start("augment");
    let mut cfg = TrainConfig::load(&req.config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = precision {
        cfg.precision = p;
    }
    let mut errs = cfg.validate();
    for p in [&req.generated, &req.test.path] {
        if !p.exists() {
            errs.push(format!("file not found: {}", p.display()));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let base = cfg.corpora.iter().map(load_corpus).collect::<Result<Vec<_>>>()?;
    let generated = load_corpus(&CorpusSpec {
        path: req.generated.clone(),
        format: CorpusFormat::Parallel,
        language: None,
        f1_mode: None,
    })?;
    let test = load_corpus(&req.test)?;
    fs::create_dir_all(&req.output_dir).map_err(|e| Error::io(&req.output_dir, e))?;
    let report = match cfg.precision {
        Precision::F32 => augment_on::<f32>(&cfg, &base, &generated, &test, &req.portions, &req.output_dir)?,
        Precision::F64 => augment_on::<f64>(&cfg, &base, &generated, &test, &req.portions, &req.output_dir)?,
    };
    let json_path = req.output_dir.join("report.json");
    let text_path = req.output_dir.join("report.txt");
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&text_path, report.to_string()).map_err(|e| Error::io(&text_path, e))?;

    let mut inputs: Vec<&Path> = vec![&req.config, &req.generated, &req.test.path];
    inputs.extend(cfg.corpora.iter().map(|c| c.path.as_path()));
    let options = RunOptions {
        seed: cfg.seed,
        threads,
        precision: cfg.precision,
    };
    let config = serde_json::json!({ "request": to_json(req), "train": to_json(&cfg) });
    rec.finish(&req.output_dir.join("manifest.json"), options, config, &inputs, &[&json_path, &text_path])?;
    Ok(report)
}
