use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xsrl::data::conll::{read_conll_dep, read_conll_span, write_conll_dep, write_conll_span, DepReaderConfig};
use xsrl::data::parallel::{write_parallel, Indicator};
use xsrl::data::srl::SrlSentence;
use xsrl::model::{ModelConfig, SearchConfig};
use xsrl::numeric::Precision;
use xsrl::pipeline::{
    augment_on, cmd_generate, cmd_label, cmd_score, GenerateRequest, LabelFormat, LabelRequest, RunOptions, ScoreKind, ScoreRequest,
};
use xsrl::synthetic::{distinct_frames, pair, random_sentence, render, to_dep_sentence, to_span_sentence, verb_count, Frame, Lang};
use xsrl::train::{instance_from_pair, instance_from_sentence, train_on, Corpus, CorpusFormat, CorpusSpec, Mode, TrainConfig, BEST};
use xsrl::metrics::F1Mode;

fn frames(seed: u64, n: usize) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct_frames(&mut rng, n, &(0..verb_count()).collect::<Vec<_>>(), &BTreeSet::new())
}

fn tiny() -> ModelConfig {
    ModelConfig {
        word_dim: 16,
        predicate_dim: 4,
        language_dim: 4,
        encoder_hidden: 16,
        encoder_layers: 1,
        decoder_hidden: 32,
        attention_dim: 16,
        ..ModelConfig::default()
    }
}

fn train(dir: &Path, corpora: Vec<Corpus>, mode: Mode, epochs: usize, target: Option<f64>) -> PathBuf {
    let cfg = TrainConfig {
        mode,
        output_dir: dir.to_path_buf(),
        epochs,
        batch_size: 4,
        min_count: 1,
        learning_rate: 1e-2,
        target_accuracy: target,
        model: tiny(),
        ..TrainConfig::default()
    };
    train_on::<f32>(&cfg, &corpora, None, false).unwrap();
    dir.join(BEST)
}

fn english(fs: &[Frame]) -> Vec<SrlSentence> {
    fs.iter().map(|f| render(f, Lang::En)).collect()
}

fn corpus(sentences: &[SrlSentence], mode: F1Mode) -> Corpus {
    Corpus::new("en", sentences.iter().map(|s| instance_from_sentence(s).unwrap()).collect(), mode)
}

fn opts() -> RunOptions {
    RunOptions {
        seed: 1,
        threads: 1,
        precision: Precision::F32,
    }
}

fn label_request(checkpoint: &Path, input: PathBuf, output: PathBuf, format: LabelFormat) -> LabelRequest {
    LabelRequest {
        checkpoint: checkpoint.to_path_buf(),
        input,
        output,
        format,
        language: "EN".into(),
        target: None,
        search: SearchConfig::default(),
    }
}

#[test]
fn overfit_model_labels_its_training_file_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sentences = english(&frames(4, 8));
    let ckpt = train(&d.join("run"), vec![corpus(&sentences, F1Mode::Span)], Mode::Monolingual, 300, Some(1.0));

    let spans: Vec<_> = sentences.iter().map(to_span_sentence).collect();
    write_conll_span(d.join("gold.conll05"), &spans).unwrap();
    let req = label_request(&ckpt, d.join("gold.conll05"), d.join("pred.conll05"), LabelFormat::Conll05);
    let summary = cmd_label(&req, opts()).unwrap();
    assert_eq!(summary.predicates, 8);
    assert!(d.join("pred.conll05.manifest.json").exists());

    let report = cmd_score(
        &ScoreRequest {
            hypotheses: d.join("pred.conll05"),
            references: d.join("gold.conll05"),
            kind: ScoreKind::F1Span,
            language: "EN".into(),
            output: d.join("score.json"),
        },
        opts(),
    )
    .unwrap();
    assert_eq!(report.f1.unwrap().f1, 1.0);
    let relabeled = read_conll_span(d.join("pred.conll05"), "EN").unwrap().sentences;
    assert_eq!(relabeled.len(), spans.len());
    assert_eq!(relabeled[0].tokens, spans[0].tokens);
}

#[test]
fn label_handles_files_without_predicates_and_untrained_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sentences = english(&frames(5, 6));
    let ckpt = train(&d.join("run"), vec![corpus(&sentences, F1Mode::Dep)], Mode::Monolingual, 1, None);

    let mut bare: Vec<_> = sentences.iter().map(to_dep_sentence).collect();
    for s in &mut bare {
        s.frames.clear();
        for row in &mut s.rows {
            row.truncate(14);
            row[12] = "_".into();
            row[13] = "_".into();
        }
    }
    write_conll_dep(d.join("bare.conll09"), &bare).unwrap();
    let req = label_request(&ckpt, d.join("bare.conll09"), d.join("bare.out"), LabelFormat::Conll09);
    let summary = cmd_label(&req, opts()).unwrap();
    assert_eq!(summary.predicates, 0);
    assert_eq!(fs::read_to_string(d.join("bare.out")).unwrap(), "");

    // a barely trained model emits ill-formed streams; labeling must still succeed
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noisy: Vec<_> = (0..30)
        .map(|_| {
            let mut s = random_sentence(&mut rng, 10);
            s.arguments.retain(|a| a.start == a.end && a.start != s.predicate_index);
            to_dep_sentence(&s)
        })
        .collect();
    write_conll_dep(d.join("noisy.conll09"), &noisy).unwrap();
    let mut req = label_request(&ckpt, d.join("noisy.conll09"), d.join("noisy.out"), LabelFormat::Conll09);
    req.search = SearchConfig { beam_width: 3, max_len: 12 };
    let summary = cmd_label(&req, opts()).unwrap();
    assert_eq!(summary.predicates, 30);
    let back = read_conll_dep(d.join("noisy.out"), &DepReaderConfig::default()).unwrap();
    assert_eq!(back.len(), 30);
    for (b, s) in back.iter().zip(&noisy) {
        assert_eq!(b.tokens, s.tokens());
        b.validate().unwrap();
    }

    let mut req = label_request(&ckpt, d.join("noisy.conll09"), d.join("x.out"), LabelFormat::Conll09);
    req.target = Some(Indicator::srl("FR").unwrap());
    let err = cmd_label(&req, opts()).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn generate_threshold_extremes_and_missing_reverse_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fr = frames(6, 8);
    let labeled: Vec<_> = fr.iter().map(|f| instance_from_pair(&pair(f, Lang::En, Lang::De, true)).unwrap()).collect();
    let forward = train(&d.join("fwd"), vec![Corpus::new("l", labeled, F1Mode::Span)], Mode::Crosslingual, 2, None);
    let mt: Vec<_> = fr.iter().map(|f| instance_from_pair(&pair(f, Lang::De, Lang::En, false)).unwrap()).collect();
    let reverse = train(&d.join("rev"), vec![Corpus::new("t", mt, F1Mode::Span)], Mode::Translation, 2, None);

    let lines: String = english(&fr).iter().map(|s| format!("EN\t{}\t{}\n", s.predicate_index, s.tokens.join(" "))).collect();
    fs::write(d.join("in.tsv"), lines).unwrap();
    let request = |threshold: f64, reverse: Option<PathBuf>| GenerateRequest {
        checkpoint: forward.clone(),
        reverse_checkpoint: reverse,
        input: d.join("in.tsv"),
        target: Indicator::srl("DE").unwrap(),
        threshold,
        records: d.join("records.jsonl"),
        kept: d.join("kept.tsv"),
        search: SearchConfig { beam_width: 1, max_len: 20 },
    };

    let none = cmd_generate(&request(101.0, Some(reverse.clone())), opts()).unwrap();
    assert_eq!((none.total, none.kept), (8, 0));
    assert_eq!(fs::read_to_string(d.join("kept.tsv")).unwrap(), "");
    assert_eq!(fs::read_to_string(d.join("records.jsonl")).unwrap().lines().count(), 8);

    let all = cmd_generate(&request(0.0, Some(reverse)), opts()).unwrap();
    assert_eq!(all.kept, 8);

    let err = cmd_generate(&request(10.0, None), opts()).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("reverse"), "{err}");
}

#[test]
fn augment_report_has_baseline_portions_and_all() {
    let dir = tempfile::tempdir().unwrap();
    let fr = frames(7, 12);
    let sentences = english(&fr[..6]);
    let generated = Corpus::new(
        "gen",
        fr[6..].iter().map(|f| instance_from_pair(&pair(f, Lang::En, Lang::En, true)).unwrap()).collect(),
        F1Mode::Span,
    );
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        min_count: 1,
        model: tiny(),
        ..TrainConfig::default()
    };
    let test = corpus(&sentences, F1Mode::Span);
    let report = augment_on::<f32>(&cfg, std::slice::from_ref(&test), &generated, &test, &[0.25, 0.5], dir.path()).unwrap();
    let names: Vec<_> = report.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["baseline", "+25%", "+50%", "+ALL"]);
    assert_eq!(report.rows.iter().map(|r| r.added).collect::<Vec<_>>(), [0, 2, 3, 6]);
    assert!(augment_on::<f32>(&cfg, std::slice::from_ref(&test), &generated, &test, &[-0.1], dir.path()).is_err());
}

#[test]
fn score_identity_and_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sentences = english(&frames(8, 5));
    write_conll_dep(d.join("a.conll09"), &sentences.iter().map(to_dep_sentence).collect::<Vec<_>>()).unwrap();
    write_conll_dep(d.join("b.conll09"), &sentences[..4].iter().map(to_dep_sentence).collect::<Vec<_>>()).unwrap();
    let req = |hyp: &str, kind| ScoreRequest {
        hypotheses: d.join(hyp),
        references: d.join("a.conll09"),
        kind,
        language: "EN".into(),
        output: d.join("score.json"),
    };
    let f1 = cmd_score(&req("a.conll09", ScoreKind::F1Dep), opts()).unwrap().f1.unwrap();
    assert_eq!((f1.precision, f1.recall, f1.f1), (1.0, 1.0, 1.0));
    assert!(cmd_score(&req("b.conll09", ScoreKind::F1Dep), opts()).unwrap_err().is_validation());

    let seqs: String = sentences.iter().map(|s| format!("{}\n", xsrl::data::srl::linearize(s, "").unwrap().to_text())).collect();
    fs::write(d.join("seq.txt"), &seqs).unwrap();
    let bleu = cmd_score(
        &ScoreRequest {
            hypotheses: d.join("seq.txt"),
            references: d.join("seq.txt"),
            kind: ScoreKind::Bleu,
            language: String::new(),
            output: d.join("bleu.json"),
        },
        opts(),
    )
    .unwrap()
    .bleu
    .unwrap();
    assert_eq!([bleu.full.score, bleu.words.score, bleu.labels.score], [100.0, 100.0, 100.0]);
}

fn xsrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xsrl")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    fs::write(d.join("bad.toml"), "mode = \"sideways\"\n").unwrap();
    let out = xsrl(d, &["train", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sideways"));

    let cfg = TrainConfig {
        corpora: vec![CorpusSpec {
            path: "absent.conll09".into(),
            format: CorpusFormat::Conll09,
            language: Some("EN".into()),
            f1_mode: None,
        }],
        ..TrainConfig::default()
    };
    fs::write(d.join("missing.toml"), cfg.to_toml()).unwrap();
    let out = xsrl(d, &["train", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.conll09"));

    assert_eq!(xsrl(d, &["train", "--config", "nowhere.toml"]).status.code(), Some(1));
    assert_eq!(xsrl(d, &["--precision", "16", "gradcheck"]).status.code(), Some(2));
    assert_eq!(xsrl(d, &["label"]).status.code(), Some(2));

    let out = xsrl(d, &["gradcheck", "--output", "grad.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("full_loss"));
    assert!(d.join("grad.json").exists());
}

#[test]
fn vocab_and_train_from_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fr = frames(11, 6);
    write_parallel(d.join("pairs.tsv"), &fr.iter().map(|f| pair(f, Lang::En, Lang::Fr, true)).collect::<Vec<_>>()).unwrap();
    let cfg = TrainConfig {
        mode: Mode::Crosslingual,
        corpora: vec![CorpusSpec {
            path: "pairs.tsv".into(),
            format: CorpusFormat::Parallel,
            language: None,
            f1_mode: None,
        }],
        output_dir: "run".into(),
        epochs: 1,
        min_count: 1,
        model: tiny(),
        ..TrainConfig::default()
    };
    fs::write(d.join("run.toml"), cfg.to_toml()).unwrap();
    let out = xsrl(d, &["--seed", "3", "vocab", "--config", "run.toml", "--output", "vocab.txt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(d.join("vocab.txt")).unwrap().contains("<2FR-SRL>"));

    let out = xsrl(d, &["--seed", "3", "--precision", "64", "train", "--config", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["epochs"], 1);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["options"]["seed"], 3);
    assert_eq!(manifest["options"]["precision"], "64");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}
