use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::F1Mode;
use crate::model::{ModelConfig, SearchConfig};
use crate::numeric::Precision;
use crate::vocab::DEFAULT_MIN_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Labeled data in a single language.
    #[default]
    Monolingual,
    /// Labeled data in several languages, each labeled in its own language.
    Multilingual,
    /// Labeled data plus translation-only pairs across languages.
    Crosslingual,
    /// Translation-only pairs; used for back-translation models.
    Translation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// Dependency-style tab-separated columns, one token per line.
    Conll09,
    /// Span-style bracket columns.
    Conll05,
    /// `source_lang \t target \t source \t target_seq [\t predicate]` lines.
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub path: PathBuf,
    pub format: CorpusFormat,
    /// Language code for CoNLL files, e.g. `EN`.
    #[serde(default)]
    pub language: Option<String>,
    /// F1 matching for dev evaluation; defaults to span for `conll05`.
    #[serde(default)]
    pub f1_mode: Option<F1Mode>,
}

impl CorpusSpec {
    pub fn f1_mode(&self) -> F1Mode {
        self.f1_mode.unwrap_or(match self.format {
            CorpusFormat::Conll05 => F1Mode::Span,
            _ => F1Mode::Dep,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    #[serde(rename = "corpus")]
    pub corpora: Vec<CorpusSpec>,
    pub dev: Option<CorpusSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub precision: Precision,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps; 0 means no limit.
    pub max_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    /// Translation-only pairs per epoch, as a fraction of the labeled count.
    pub mt_data_cap: f64,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    pub min_count: usize,
    /// Save a resumable checkpoint every this many steps; 0 means only at
    /// epoch ends.
    pub checkpoint_every: usize,
    /// Stop once an epoch's teacher-forced token accuracy reaches this.
    pub target_accuracy: Option<f64>,
    /// Pre-trained word vectors (`word v1 v2 ...` per line).
    pub embeddings: Option<PathBuf>,
    pub model: ModelConfig,
    pub search: SearchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Monolingual,
            corpora: Vec::new(),
            dev: None,
            output_dir: PathBuf::from("run"),
            seed: 1,
            precision: Precision::F32,
            batch_size: 16,
            epochs: 50,
            max_steps: 0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 5.0,
            mt_data_cap: 0.5,
            patience: 5,
            min_count: DEFAULT_MIN_COUNT,
            checkpoint_every: 0,
            target_accuracy: None,
            embeddings: None,
            model: ModelConfig::default(),
            search: SearchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msgs) => Error::Config(msgs.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })?;
        // relative corpus paths resolve against the config file
        if let Some(dir) = path.parent() {
            for c in cfg.corpora.iter_mut().chain(cfg.dev.iter_mut()) {
                if c.path.is_relative() {
                    c.path = dir.join(&c.path);
                }
            }
            if let Some(e) = cfg.embeddings.as_mut() {
                if e.is_relative() {
                    *e = dir.join(&*e);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.corpora.is_empty() {
            errs.push("at least one [[corpus]] is required".to_string());
        }
        for (i, c) in self.corpora.iter().chain(self.dev.iter()).enumerate() {
            if c.format != CorpusFormat::Parallel && c.language.is_none() {
                errs.push(format!("corpus {i} ({}): `language` is required for CoNLL input", c.path.display()));
            }
            if !c.path.exists() {
                errs.push(format!("corpus file not found: {}", c.path.display()));
            }
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            errs.push("epochs must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            errs.push("learning_rate must be a finite non-negative number".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            errs.push("beta1 and beta2 must lie in [0, 1)".into());
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            errs.push("clip_norm must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mt_data_cap) {
            errs.push(format!("mt_data_cap must lie in [0, 1], got {}", self.mt_data_cap));
        }
        if let Some(a) = self.target_accuracy {
            if !(0.0..=1.0).contains(&a) {
                errs.push("target_accuracy must lie in [0, 1]".into());
            }
        }
        if self.search.beam_width == 0 || self.search.max_len == 0 {
            errs.push("search.beam_width and search.max_len must be positive".into());
        }
        if let Some(e) = &self.embeddings {
            if !e.exists() {
                errs.push(format!("embeddings file not found: {}", e.display()));
            }
        }
        let mut model = self.model.clone();
        if model.indicators.is_empty() {
            // filled from the data at load time
            model.indicators.push("EN".parse().expect("valid"));
        }
        errs.extend(model.validate());
        errs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let cfg = TrainConfig::from_toml(
            r#"
            mode = "crosslingual"
            seed = 7
            batch_size = 4
            mt_data_cap = 0.25
            [[corpus]]
            path = "en.conll"
            format = "conll09"
            language = "EN"
            [[corpus]]
            path = "en-de.tsv"
            format = "parallel"
            [model]
            word_dim = 16
            indicators = ["EN", "DE-SRL"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Crosslingual);
        assert_eq!(cfg.corpora.len(), 2);
        assert_eq!(cfg.model.word_dim, 16);
        assert_eq!(cfg.model.encoder_hidden, 64);
        assert_eq!(cfg.learning_rate, 1e-3);
        assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_mode_and_lists_all_problems() {
        assert!(matches!(TrainConfig::from_toml("mode = \"bilingual\""), Err(Error::Config(_))));
        let cfg = TrainConfig {
            batch_size: 0,
            mt_data_cap: 1.5,
            corpora: vec![CorpusSpec {
                path: "/nonexistent/x.conll".into(),
                format: CorpusFormat::Conll09,
                language: None,
                f1_mode: None,
            }],
            ..TrainConfig::default()
        };
        let errs = cfg.validate();
        assert!(errs.iter().any(|e| e.contains("/nonexistent/x.conll")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("language")));
        assert!(errs.iter().any(|e| e.contains("batch_size")));
        assert!(errs.iter().any(|e| e.contains("mt_data_cap")));
    }
}
