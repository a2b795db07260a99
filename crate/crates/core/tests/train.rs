use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xsrl::metrics::F1Mode;
use xsrl::model::{Instance, ModelConfig};
use xsrl::numeric::{Gradients, Tape};
use xsrl::synthetic::{distinct_frames, pair, render, verb_count, Lang};
use xsrl::train::{
    batch_gradients, init_model, instance_from_pair, instance_from_sentence, make_batches, train_on, Adam, BatchSpec,
    Corpus, Mode, TrainConfig,
};

fn frames(seed: u64, n: usize) -> Vec<xsrl::synthetic::Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct_frames(&mut rng, n, &(0..verb_count()).collect::<Vec<_>>(), &BTreeSet::new())
}

fn mono_corpus(seed: u64, n: usize) -> Corpus {
    let inst = frames(seed, n)
        .iter()
        .map(|f| instance_from_sentence(&render(f, Lang::En)).unwrap())
        .collect();
    Corpus::new("en", inst, F1Mode::Span)
}

fn translation_corpus(seed: u64, n: usize) -> Corpus {
    let inst = frames(seed, n)
        .iter()
        .map(|f| instance_from_pair(&pair(f, Lang::En, Lang::De, false)).unwrap())
        .collect();
    Corpus::new("en-de", inst, F1Mode::Span)
}

fn small_config(dir: &std::path::Path) -> TrainConfig {
    TrainConfig {
        output_dir: dir.to_path_buf(),
        batch_size: 4,
        epochs: 2,
        min_count: 1,
        precision: xsrl::numeric::Precision::F64,
        model: ModelConfig {
            word_dim: 8,
            predicate_dim: 2,
            language_dim: 2,
            encoder_hidden: 6,
            encoder_layers: 1,
            decoder_hidden: 8,
            attention_dim: 6,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn epoch_losses(dir: &std::path::Path) -> Vec<f64> {
    std::fs::read_to_string(dir.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["kind"] == "epoch")
        .map(|v| v["train_loss"].as_f64().unwrap())
        .collect()
}

#[test]
fn uncapped_mix_is_even_within_binomial_tolerance() {
    let a = mono_corpus(1, 5000);
    let b = translation_corpus(2, 5000);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batches = make_batches(&[a, b], &BatchSpec { batch_size: 16, mt_data_cap: Some(1.0) }, &mut rng);
    let draws: Vec<(usize, usize)> = batches.into_iter().flatten().collect();
    assert_eq!(draws.len(), 10_000);
    let first = &draws[..5000];
    let from_a = first.iter().filter(|(c, _)| *c == 0).count() as f64;
    // 4 sigma of Binomial(5000, 0.5)
    assert!((from_a - 2500.0).abs() < 4.0 * (5000.0f64 * 0.25).sqrt(), "{from_a}");
}

#[test]
fn zero_cap_drops_translation_pairs() {
    let corpora = [mono_corpus(1, 30), translation_corpus(2, 30)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batches = make_batches(&corpora, &BatchSpec { batch_size: 4, mt_data_cap: Some(0.0) }, &mut rng);
    assert!(batches.iter().flatten().all(|(c, _)| *c == 0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let half = make_batches(&corpora, &BatchSpec { batch_size: 4, mt_data_cap: Some(0.5) }, &mut rng);
    assert_eq!(half.iter().flatten().filter(|(c, _)| *c == 1).count(), 15);
}

#[test]
fn singleton_batches_form_a_permutation_and_replay_identically() {
    let corpora = [mono_corpus(3, 40)];
    let spec = BatchSpec { batch_size: 1, mt_data_cap: Some(0.5) };
    let run = |seed| make_batches(&corpora, &spec, &mut ChaCha8Rng::seed_from_u64(seed));
    let batches = run(5);
    assert!(batches.iter().all(|b| b.len() == 1));
    let mut seen: Vec<usize> = batches.iter().map(|b| b[0].1).collect();
    assert_ne!(seen, (0..40).collect::<Vec<_>>());
    seen.sort();
    assert_eq!(seen, (0..40).collect::<Vec<_>>());
    assert_eq!(run(5), batches);
}

#[test]
fn zero_learning_rate_keeps_parameters_and_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { learning_rate: 0.0, ..small_config(dir.path()) };
    let corpora = [mono_corpus(4, 12)];
    let (model, _) = train_on::<f64>(&cfg, &corpora, None, false).unwrap();
    let fresh = init_model::<f64>(&cfg, &corpora, None).unwrap();
    assert_eq!(model.params, fresh.params);
    let losses = epoch_losses(dir.path());
    assert_eq!(losses.len(), 2);
    assert!((losses[0] - losses[1]).abs() < 1e-12);
}

#[test]
fn one_step_changes_only_parameters_with_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let corpora = [mono_corpus(5, 12)];
    let mut model = init_model::<f64>(&cfg, &corpora, None).unwrap();
    let batch: Vec<&Instance> = corpora[0].instances.iter().take(2).collect();
    let (grads, _) = batch_gradients(&model, &batch).unwrap();
    let before = model.params.clone();
    let mut adam = Adam::new(&model.params, 1e-3, 0.9, 0.999, 1e-8);
    adam.step(&mut model.params, &grads);
    let mut untouched = 0;
    for id in model.params.ids() {
        let (g, a, b) = (grads.get(id).data(), before.get(id).data(), model.params.get(id).data());
        for i in 0..g.len() {
            if g[i] == 0.0 {
                assert_eq!(a[i], b[i]);
                untouched += 1;
            } else {
                assert_ne!(a[i], b[i]);
            }
        }
    }
    assert!(untouched > 0, "embedding rows of unused words have no gradient");
}

#[test]
fn clipping_bounds_the_global_norm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let corpora = [mono_corpus(6, 8)];
    let model = init_model::<f64>(&cfg, &corpora, None).unwrap();
    let batch: Vec<&Instance> = corpora[0].instances.iter().collect();
    let (mut grads, _) = batch_gradients(&model, &batch).unwrap();
    grads.scale(1e3);
    let before = grads.global_norm();
    assert!(before > 0.5);
    assert_eq!(grads.clip_global_norm(0.5), before);
    assert!(grads.global_norm() <= 0.5);
}

#[test]
fn batch_gradient_is_mean_of_instance_gradients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let corpora = [mono_corpus(7, 6)];
    let model = init_model::<f64>(&cfg, &corpora, None).unwrap();
    let batch: Vec<&Instance> = corpora[0].instances.iter().collect();
    let (g, stats) = batch_gradients(&model, &batch).unwrap();
    let mut manual = Gradients::zeros_like(&model.params);
    let mut loss = 0.0;
    for inst in &batch {
        let mut tape = Tape::new(&model.params);
        let (l, _) = model.forward_loss(&mut tape, inst).unwrap();
        loss += tape.scalar(l);
        tape.backward_into(l, &mut manual).unwrap();
    }
    manual.scale(1.0 / batch.len() as f64);
    assert!((stats.loss - loss).abs() < 1e-9);
    for id in model.params.ids() {
        for (a, b) in g.get(id).data().iter().zip(manual.get(id).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn resume_mid_epoch_matches_uninterrupted_run() {
    let corpora = [mono_corpus(8, 14)];
    let full_dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { epochs: 3, ..small_config(full_dir.path()) };
    train_on::<f64>(&cfg, &corpora, None, false).unwrap();
    let full_log = std::fs::read_to_string(full_dir.path().join("metrics.jsonl")).unwrap();

    let part_dir = tempfile::tempdir().unwrap();
    let first = TrainConfig { epochs: 3, max_steps: 6, ..small_config(part_dir.path()) };
    let (_, out) = train_on::<f64>(&first, &corpora, None, false).unwrap();
    assert_eq!(out.steps, 6);
    let rest = TrainConfig { epochs: 3, ..small_config(part_dir.path()) };
    let (_, out) = train_on::<f64>(&rest, &corpora, None, true).unwrap();
    assert_eq!(out.epochs, 3);
    let resumed_log = std::fs::read_to_string(part_dir.path().join("metrics.jsonl")).unwrap();
    assert_eq!(resumed_log, full_log);
}

#[test]
fn training_reduces_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { epochs: 6, learning_rate: 1e-2, ..small_config(dir.path()) };
    train_on::<f64>(&cfg, &[mono_corpus(9, 16)], None, false).unwrap();
    let losses = epoch_losses(dir.path());
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
}

#[test]
fn mode_rules_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mixed = [mono_corpus(1, 4), translation_corpus(2, 4)];
    assert!(matches!(train_on::<f64>(&cfg, &mixed, None, false), Err(xsrl::Error::Config(_))));
    let only_mt = [translation_corpus(2, 4)];
    let cross = TrainConfig { mode: Mode::Crosslingual, ..small_config(dir.path()) };
    assert!(train_on::<f64>(&cross, &only_mt, None, false).is_err());
    let tr = TrainConfig { mode: Mode::Translation, epochs: 1, ..small_config(dir.path()) };
    assert!(train_on::<f64>(&tr, &only_mt, None, false).is_ok());
}
