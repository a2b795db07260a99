use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use xsrl::data::parallel::Indicator;
use xsrl::model::SearchConfig;
use xsrl::numeric::Precision;
use xsrl::pipeline::{
    cmd_augment, cmd_generate, cmd_gradcheck, cmd_label, cmd_score, cmd_train, cmd_vocab, AugmentRequest, GenerateRequest,
    LabelFormat, LabelRequest, RunOptions, ScoreKind, ScoreRequest, DEFAULT_THRESHOLD,
};
use xsrl::train::{CorpusFormat, CorpusSpec};

#[derive(Parser)]
#[command(name = "xsrl", version, about = "Encoder-decoder semantic role labeling")]
struct Cli {
    /// Random seed; overrides the config file where there is one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for decoding and gradient computation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Floating-point width: 32 or 64.
    #[arg(long, global = true, value_parser = parse_precision)]
    precision: Option<Precision>,
    #[command(subcommand)]
    command: Command,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: xsrl::Error| e.to_string())
}

#[derive(Args)]
struct Search {
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long, default_value_t = 100)]
    max_len: usize,
}

impl Search {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            beam_width: self.beam,
            max_len: self.max_len,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConllFormat {
    Conll09,
    Conll05,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bleu,
    F1Dep,
    F1Span,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the run's last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Label every predicate of a CoNLL file.
    Label {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "conll09")]
        format: ConllFormat,
        #[arg(long)]
        language: String,
        /// Output indicator, e.g. `DE-SRL`; defaults to `<language>-SRL`.
        #[arg(long)]
        target: Option<Indicator>,
        #[command(flatten)]
        search: Search,
    },
    /// Translate-and-label, then filter by back-translation BLEU.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Translation model from the target language back to the source.
        #[arg(long)]
        reverse: Option<PathBuf>,
        /// Lines of `lang <TAB> predicate index <TAB> tokens`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: Indicator,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        kept: PathBuf,
        #[command(flatten)]
        search: Search,
    },
    /// Retrain with growing portions of generated data and report F1.
    Augment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum, default_value = "conll09")]
        test_format: ConllFormat,
        #[arg(long)]
        test_language: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75])]
        portions: Vec<f64>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Score hypotheses against references.
    Score {
        #[arg(long = "hyp")]
        hypotheses: PathBuf,
        #[arg(long = "ref")]
        references: PathBuf,
        #[arg(long, value_enum, default_value = "bleu")]
        kind: Kind,
        #[arg(long, default_value = "")]
        language: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the vocabulary a config would build.
    Vocab {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn label_format(f: ConllFormat) -> LabelFormat {
    match f {
        ConllFormat::Conll09 => LabelFormat::Conll09,
        ConllFormat::Conll05 => LabelFormat::Conll05,
    }
}

fn print_json<S: serde::Serialize>(v: &S) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

enum Failure {
    Error(xsrl::Error),
    Check,
}

impl From<xsrl::Error> for Failure {
    fn from(e: xsrl::Error) -> Self {
        Failure::Error(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let opts = RunOptions {
        seed: cli.seed.unwrap_or(1),
        threads: cli.threads,
        precision: cli.precision.unwrap_or_default(),
    };
    match cli.command {
        Command::Train { config, resume } => {
            let out = cmd_train(&config, cli.seed, cli.precision, cli.threads, resume)?;
            print_json(&out);
        }
        Command::Label {
            checkpoint,
            input,
            output,
            format,
            language,
            target,
            search,
        } => {
            let req = LabelRequest {
                checkpoint,
                input,
                output,
                format: label_format(format),
                language,
                target,
                search: search.config(),
            };
            print_json(&cmd_label(&req, opts)?);
        }
        Command::Generate {
            checkpoint,
            reverse,
            input,
            target,
            threshold,
            records,
            kept,
            search,
        } => {
            let req = GenerateRequest {
                checkpoint,
                reverse_checkpoint: reverse,
                input,
                target,
                threshold,
                records,
                kept,
                search: search.config(),
            };
            print_json(&cmd_generate(&req, opts)?);
        }
        Command::Augment {
            config,
            generated,
            test,
            test_format,
            test_language,
            portions,
            output_dir,
        } => {
            let format = match test_format {
                ConllFormat::Conll09 => CorpusFormat::Conll09,
                ConllFormat::Conll05 => CorpusFormat::Conll05,
            };
            let req = AugmentRequest {
                config,
                generated,
                test: CorpusSpec {
                    path: test,
                    format,
                    language: Some(test_language),
                    f1_mode: None,
                },
                portions,
                output_dir,
            };
            print!("{}", cmd_augment(&req, cli.seed, cli.precision, cli.threads)?);
        }
        Command::Score {
            hypotheses,
            references,
            kind,
            language,
            output,
        } => {
            let kind = match kind {
                Kind::Bleu => ScoreKind::Bleu,
                Kind::F1Dep => ScoreKind::F1Dep,
                Kind::F1Span => ScoreKind::F1Span,
            };
            let req = ScoreRequest {
                hypotheses,
                references,
                kind,
                language,
                output,
            };
            print!("{}", cmd_score(&req, opts)?);
        }
        Command::Vocab { config, output } => {
            let v = cmd_vocab(&config, &output, cli.threads)?;
            println!("{} symbols ({} words, {} labels)", v.len(), v.n_words(), v.n_labels());
        }
        Command::Gradcheck { step, tolerance, output } => {
            let summary = cmd_gradcheck(step, tolerance, opts, output.as_deref())?;
            println!("{summary}");
            if !summary.passed {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            error!("could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            error!("{e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
