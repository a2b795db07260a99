use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use xsrl::metrics::F1Mode;
use xsrl::model::ModelConfig;
use xsrl::numeric::Precision;
use xsrl::synthetic::{distinct_frames, render, verb_count, Lang};
use xsrl::train::{instance_from_sentence, train_on, Corpus, TrainConfig, BEST};
use xsrl_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { xsrl_string_free(p) };
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(xsrl_last_error()) }.to_str().unwrap().to_string()
}

fn trained_checkpoint(dir: &std::path::Path) -> std::path::PathBuf {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let frames = distinct_frames(&mut rng, 6, &(0..verb_count()).collect::<Vec<_>>(), &BTreeSet::new());
    let inst = frames.iter().map(|f| instance_from_sentence(&render(f, Lang::En)).unwrap()).collect();
    let cfg = TrainConfig {
        output_dir: dir.to_path_buf(),
        epochs: 1,
        batch_size: 3,
        min_count: 1,
        precision: Precision::F64,
        model: ModelConfig {
            word_dim: 6,
            predicate_dim: 2,
            language_dim: 2,
            encoder_hidden: 4,
            encoder_layers: 1,
            decoder_hidden: 6,
            attention_dim: 4,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    train_on::<f64>(&cfg, &[Corpus::new("en", inst, F1Mode::Span)], None, false).unwrap();
    dir.join(BEST)
}

#[test]
fn load_label_and_free() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(trained_checkpoint(dir.path()).to_str().unwrap());
    let mut model: *mut XsrlModel = ptr::null_mut();
    assert_eq!(unsafe { xsrl_model_load(path.as_ptr(), &mut model) }, XsrlStatus::Ok);
    assert!(!model.is_null());

    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe {
        xsrl_model_label(model, c("the big cat sees a dog").as_ptr(), 3, c("EN").as_ptr(), c("EN-SRL").as_ptr(), 2, 8, &mut out)
    };
    assert_eq!(status, XsrlStatus::Ok, "{}", last_error());
    let symbols = take(out);
    assert!(symbols.split(' ').count() <= 8);

    let status = unsafe {
        xsrl_model_label(model, c("the cat").as_ptr(), 5, c("EN").as_ptr(), c("EN-SRL").as_ptr(), 1, 8, &mut out)
    };
    assert_eq!(status, XsrlStatus::InvalidInput);
    assert!(out.is_null());
    assert!(last_error().contains("predicate 5"));

    let status = unsafe {
        xsrl_model_label(model, c("the cat").as_ptr(), 0, c("EN").as_ptr(), c("FR-SRL").as_ptr(), 1, 8, &mut out)
    };
    assert_eq!(status, XsrlStatus::InvalidInput);
    assert!(last_error().contains("FR-SRL"));
    unsafe { xsrl_model_free(model) };
}

#[test]
fn load_errors_are_reported() {
    let mut model: *mut XsrlModel = ptr::null_mut();
    let missing = c("/nonexistent/model.ckpt");
    assert_eq!(unsafe { xsrl_model_load(missing.as_ptr(), &mut model) }, XsrlStatus::Io);
    assert!(model.is_null());
    assert!(last_error().contains("/nonexistent/model.ckpt"));
    assert_eq!(unsafe { xsrl_model_load(ptr::null(), &mut model) }, XsrlStatus::NullArgument);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let junk = c(junk.to_str().unwrap());
    assert_eq!(unsafe { xsrl_model_load(junk.as_ptr(), &mut model) }, XsrlStatus::Format);
}

#[test]
fn linearize_and_delinearize_round_trip() {
    let mut out: *mut c_char = ptr::null_mut();
    let args = c(r#"[[0, 1, "A0"], [3, 4, "A1"]]"#);
    let status = unsafe { xsrl_linearize(c("The cat chased a mouse").as_ptr(), 2, args.as_ptr(), &mut out) };
    assert_eq!(status, XsrlStatus::Ok);
    let seq = take(out);
    assert_eq!(seq, "(# The cat A0) chased (# a mouse A1)");

    let status = unsafe { xsrl_delinearize(c(&seq).as_ptr(), 2, &mut out) };
    assert_eq!(status, XsrlStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["arguments"], serde_json::json!([[0, 1, "A0"], [3, 4, "A1"]]));
    assert_eq!(v["repairs"]["unclosed"], 0);

    let status = unsafe { xsrl_linearize(c("a b").as_ptr(), 0, c(r#"[[0, 5, "A0"]]"#).as_ptr(), &mut out) };
    assert_eq!(status, XsrlStatus::InvalidInput);
    let status = unsafe { xsrl_linearize(c("a b").as_ptr(), 0, c("not json").as_ptr(), &mut out) };
    assert_eq!(status, XsrlStatus::Format);
}

#[test]
fn bleu_entry_points() {
    let mut score = -1.0;
    let status = unsafe { xsrl_bleu_sentence(c("the cat sat on the mat").as_ptr(), c("the cat sat on the mat").as_ptr(), &mut score) };
    assert_eq!(status, XsrlStatus::Ok);
    assert!((score - 100.0).abs() < 1e-9);

    let hyps = [c("(# the big black cat A0) sat on (# the old mat AM-LOC) (# today AM-TMP)")];
    let ptrs: Vec<*const c_char> = hyps.iter().map(|s| s.as_ptr()).collect();
    let mut out = [0.0f64; 3];
    let status = unsafe { xsrl_bleu_corpus(ptrs.as_ptr(), ptrs.as_ptr(), 1, out.as_mut_ptr()) };
    assert_eq!(status, XsrlStatus::Ok);
    assert_eq!(out, [100.0, 100.0, 100.0]);

    assert_eq!(unsafe { xsrl_bleu_sentence(c("a").as_ptr(), c("").as_ptr(), &mut score) }, XsrlStatus::InvalidInput);
    assert_eq!(unsafe { xsrl_bleu_corpus(ptr::null(), ptr::null(), 1, out.as_mut_ptr()) }, XsrlStatus::NullArgument);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/xsrl.h")).unwrap();
    for name in [
        "XSRL_STATUS_OK",
        "typedef struct XsrlModel XsrlModel",
        "xsrl_model_load",
        "xsrl_model_label",
        "xsrl_linearize",
        "xsrl_delinearize",
        "xsrl_bleu_corpus",
        "xsrl_last_error",
        "xsrl_string_free",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let v = unsafe { CStr::from_ptr(xsrl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
