use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xsrl::data::parallel::Indicator;
use xsrl::model::checkpoint::{load_checkpoint, save_checkpoint};
use xsrl::model::{Instance, Model, ModelConfig, SearchConfig};
use xsrl::numeric::{grad_check, Tape, Tensor};
use xsrl::vocab::VocabBuilder;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn ind(s: &str) -> Indicator {
    s.parse().unwrap()
}

fn tiny_config() -> ModelConfig {
    ModelConfig {
        word_dim: 6,
        predicate_dim: 2,
        language_dim: 3,
        encoder_hidden: 4,
        encoder_layers: 2,
        decoder_hidden: 5,
        attention_dim: 4,
        indicators: vec![ind("EN"), ind("DE"), ind("EN-SRL"), ind("DE-SRL")],
        ..ModelConfig::default()
    }
}

fn tiny_model(seed: u64) -> Model<f64> {
    let mut b = VocabBuilder::new();
    b.add_tokens(&toks("<2EN-SRL> <2DE-SRL> the cat sat on the mat (# A0) A1)"));
    let vocab = b.build(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::new(tiny_config(), vocab, &mut rng).unwrap()
}

fn instance() -> Instance {
    Instance {
        source: toks("<2EN-SRL> the zebra sat"),
        predicate: Some(3),
        source_lang: ind("EN"),
        target_lang: ind("EN-SRL"),
        target: toks("(# the zebra A0) sat"),
    }
}

fn encoded_states(m: &Model<f64>, tokens: &[String], pred: Option<usize>, lang: &str) -> Vec<f64> {
    let mut tape = Tape::new(&m.params);
    let src = m.encode(&mut tape, tokens, pred, &ind(lang)).unwrap();
    tape.value(src.states).to_vec()
}

#[test]
fn predicate_flag_changes_encoding() {
    let m = tiny_model(1);
    let t = toks("<2EN-SRL> the cat sat");
    assert_ne!(encoded_states(&m, &t, Some(3), "EN"), encoded_states(&m, &t, Some(2), "EN"));
}

#[test]
fn encode_rejects_empty_and_out_of_range() {
    let m = tiny_model(1);
    let mut tape = Tape::new(&m.params);
    assert!(m.encode(&mut tape, &[], None, &ind("EN")).is_err());
    assert!(m.encode(&mut tape, &toks("<2EN-SRL> cat"), Some(2), &ind("EN")).is_err());
}

#[test]
fn equal_language_rows_give_equal_encodings() {
    let mut m = tiny_model(2);
    let id = m.params.id("embed.language").unwrap();
    let table = m.params.get_mut(id);
    let first = table.row(0).to_vec();
    for r in 1..4 {
        table.row_mut(r).copy_from_slice(&first);
    }
    let t = toks("<2EN-SRL> the cat sat");
    assert_eq!(encoded_states(&m, &t, Some(3), "EN"), encoded_states(&m, &t, Some(3), "DE"));
}

#[test]
fn attention_single_position_and_uniform() {
    let mut m = tiny_model(3);
    let mut tape = Tape::new(&m.params);
    let src = m.encode(&mut tape, &toks("cat"), None, &ind("EN")).unwrap();
    let q = tape.vector(vec![0.3; 5]);
    let (ctx, alpha) = m.attend(&mut tape, &src, q).unwrap();
    assert_eq!(tape.value(alpha), &[1.0]);
    assert_eq!(tape.value(ctx), tape.value(src.states));

    let v = m.params.id("attention.v").unwrap();
    *m.params.get_mut(v) = Tensor::zeros(&[4]);
    let mut tape = Tape::new(&m.params);
    let src = m.encode(&mut tape, &toks("the cat sat on"), None, &ind("EN")).unwrap();
    let q = tape.vector(vec![0.3; 5]);
    let (_, alpha) = m.attend(&mut tape, &src, q).unwrap();
    for a in tape.value(alpha) {
        assert!((a - 0.25).abs() < 1e-12);
    }
}

#[test]
fn attention_gradients_match_finite_differences() {
    let mut m = tiny_model(4);
    let net = m.clone();
    let report = grad_check(
        &mut m.params,
        |tape| {
            let src = net.encode(tape, &toks("the cat sat"), Some(2), &ind("EN"))?;
            let q = tape.vector(vec![0.2, -0.1, 0.4, 0.05, -0.3]);
            let (ctx, _) = net.attend(tape, &src, q)?;
            let w = tape.input(1, 8, (0..8).map(|i| 0.1 * i as f64 - 0.3).collect())?;
            tape.matvec(w, ctx)
        },
        1e-6,
        1e-4,
        Some(24),
    )
    .unwrap();
    assert!(report.passed, "{report}");
}

#[test]
fn joint_distribution_closes_and_aggregates_copies() {
    let m = tiny_model(5);
    let mut tape = Tape::new(&m.params);
    let source = toks("<2EN-SRL> zebra the zebra");
    let src = m.encode(&mut tape, &source, Some(1), &ind("EN")).unwrap();
    let state = m.initial_state(&mut tape, &src, &ind("EN-SRL")).unwrap();
    let step = m.decode_step(&mut tape, &state, &src).unwrap();
    let joint = tape.value(step.joint).to_vec();
    let agg = m.aggregate(&joint, &src);
    let n = m.vocab.len();
    assert!(agg.iter().all(|p| *p >= 0.0));
    assert!((agg.iter().sum::<f64>() - 1.0).abs() < 1e-6);

    // "zebra" is out of vocabulary: only copy slots 1 and 3 feed it.
    assert_eq!(src.copy_targets[1], n + 1);
    assert_eq!(src.copy_targets[3], n + 1);
    assert_eq!(agg[n + 1], joint[n + 1] + joint[n + 3]);
    assert_eq!(agg[n + 3], 0.0);

    // "the" is in V: generate mass plus its copy slot.
    let the = m.vocab.id("the").unwrap();
    assert_eq!(agg[the], joint[the] + joint[n + 2]);
}

#[test]
fn loss_is_non_negative_and_deterministic() {
    let m = tiny_model(6);
    let run = || {
        let mut tape = Tape::new(&m.params);
        let (loss, stats) = m.forward_loss(&mut tape, &instance()).unwrap();
        assert_eq!(stats.tokens, 6);
        tape.scalar(loss)
    };
    let a = run();
    assert!(a >= 0.0);
    assert_eq!(a.to_bits(), run().to_bits());
}

#[test]
fn full_loss_gradients_match_finite_differences() {
    let mut m = tiny_model(7);
    let net = m.clone();
    let inst = Instance {
        source: toks("<2EN-SRL> cat sat"),
        predicate: Some(2),
        source_lang: ind("EN"),
        target_lang: ind("EN-SRL"),
        target: toks("(# cat A0)"),
    };
    let report = grad_check(&mut m.params, |tape| net.forward_loss(tape, &inst).map(|(l, _)| l), 1e-5, 1e-3, Some(40)).unwrap();
    assert!(report.passed, "{report}");
}

#[test]
fn target_indicator_changes_distribution() {
    let m = tiny_model(8);
    let dist = |lang: &str| {
        let mut tape = Tape::new(&m.params);
        let src = m.encode(&mut tape, &toks("<2EN-SRL> the cat"), Some(2), &ind("EN")).unwrap();
        let st = m.initial_state(&mut tape, &src, &ind(lang)).unwrap();
        let step = m.decode_step(&mut tape, &st, &src).unwrap();
        tape.value(step.joint).to_vec()
    };
    assert_ne!(dist("EN-SRL"), dist("DE-SRL"));
}

#[test]
fn greedy_truncates_at_max_len() {
    for seed in 0..20 {
        let m = tiny_model(seed);
        let d = m.greedy_decode(&toks("<2EN-SRL> the cat"), Some(2), &ind("EN"), &ind("EN-SRL"), 1).unwrap();
        assert!(d.symbols.len() <= 1);
        assert_eq!(d.truncated, d.symbols.len() == 1);
        assert_eq!(d.attention.len(), d.symbols.len());
    }
    let m = tiny_model(0);
    assert!(m.greedy_decode(&toks("cat"), None, &ind("EN"), &ind("EN-SRL"), 0).is_err());
}

#[test]
fn beam_width_one_is_greedy_and_wider_never_worse() {
    let m = tiny_model(9);
    let sentences = ["the cat sat", "cat on the mat", "the zebra sat on the mat", "mat"];
    for (i, s) in sentences.iter().enumerate() {
        let mut t = toks(s);
        t.insert(0, "<2EN-SRL>".into());
        let pred = Some(1 + i % (t.len() - 1));
        let g = m.greedy_decode(&t, pred, &ind("EN"), &ind("EN-SRL"), 12).unwrap();
        let b1 = m.beam_decode(&t, pred, &ind("EN"), &ind("EN-SRL"), SearchConfig { beam_width: 1, max_len: 12 }).unwrap();
        assert_eq!(g, b1);
        let b4 = m.beam_decode(&t, pred, &ind("EN"), &ind("EN-SRL"), SearchConfig { beam_width: 4, max_len: 12 }).unwrap();
        assert!(b4.score >= g.score - 1e-12);
    }
    assert!(m
        .beam_decode(&toks("cat"), None, &ind("EN"), &ind("EN-SRL"), SearchConfig { beam_width: 0, max_len: 5 })
        .is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let m = tiny_model(10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let side = vec![("adam.m/bridge.b".to_string(), Tensor::vector(vec![1.5; 5]))];
    save_checkpoint(&path, &m, &side, serde_json::json!({"epoch": 3})).unwrap();
    let ck = load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(ck.model.params, m.params);
    assert_eq!(ck.model.vocab, m.vocab);
    assert_eq!(ck.side, side);
    assert_eq!(ck.extra["epoch"], 3);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_checkpoint::<f64>(&path).is_err());
}
