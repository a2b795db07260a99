//! C interface: load a checkpoint, label sentences, and compute BLEU.
//!
//! Every function returns an [`XsrlStatus`]. On failure the message is kept
//! per thread and can be read with [`xsrl_last_error`]. Strings handed out
//! by the library must be released with [`xsrl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use xsrl::data::parallel::{prefix_tokens, Indicator};
use xsrl::data::srl::{delinearize, linearize, Argument, LinearizedSeq, SrlSentence};
use xsrl::metrics::{bleu_sentence, bleu_triple};
use xsrl::model::checkpoint::load_checkpoint;
use xsrl::model::{Model, SearchConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XsrlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Format = 5,
    Numeric = 6,
    Panic = 7,
}

/// A loaded model. Opaque to C.
pub struct XsrlModel {
    inner: Model<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &xsrl::Error) -> XsrlStatus {
    use xsrl::Error as E;
    match e {
        E::Io { .. } => XsrlStatus::Io,
        E::Parse { .. } | E::Format(_) => XsrlStatus::Format,
        E::NonFinite { .. } => XsrlStatus::Numeric,
        _ => XsrlStatus::InvalidInput,
    }
}

struct Failure(XsrlStatus, String);

impl From<xsrl::Error> for Failure {
    fn from(e: xsrl::Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> XsrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            XsrlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            XsrlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(XsrlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(XsrlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn indicator(s: &str) -> Result<Indicator, Failure> {
    Ok(s.parse::<Indicator>()?)
}

unsafe fn hand_out(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(XsrlStatus::Format, "output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn null_out<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(XsrlStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn xsrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn xsrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xsrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a checkpoint written by training.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsrl_model_load(path: *const c_char, out: *mut *mut XsrlModel) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let ck = load_checkpoint::<f64>(path)?;
        *out = Box::into_raw(Box::new(XsrlModel { inner: ck.model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`xsrl_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xsrl_model_free(model: *mut XsrlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Decodes one sentence with a marked predicate. `tokens` is
/// space-separated, `predicate` a 0-based token index, `source_lang` a
/// plain code such as `EN`, and `target` an indicator such as `DE-SRL`.
/// Writes the output symbols, space-separated, to `out`.
///
/// # Safety
/// String arguments must be NUL-terminated; `model` must be a live handle
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsrl_model_label(
    model: *const XsrlModel,
    tokens: *const c_char,
    predicate: usize,
    source_lang: *const c_char,
    target: *const c_char,
    beam_width: usize,
    max_len: usize,
    out: *mut *mut c_char,
) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        *out = ptr::null_mut();
        let model = model
            .as_ref()
            .ok_or_else(|| Failure(XsrlStatus::NullArgument, "model is null".into()))?;
        let tokens = words(text(tokens, "tokens")?);
        if predicate >= tokens.len() {
            return Err(Failure(
                XsrlStatus::InvalidInput,
                format!("predicate {predicate} outside sentence of {} tokens", tokens.len()),
            ));
        }
        let source = indicator(text(source_lang, "source_lang")?)?;
        let target = indicator(text(target, "target")?)?;
        let input = prefix_tokens(&tokens, &target)?;
        let search = SearchConfig { beam_width, max_len };
        let d = model.inner.decode(&input, Some(predicate + 1), &source, &target, search)?;
        hand_out(d.symbols.join(" "), out)
    })
}

/// Serializes a sentence: `args` is a JSON array of `[start, end, label]`
/// triples over token positions (inclusive).
///
/// # Safety
/// String arguments must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsrl_linearize(tokens: *const c_char, predicate: usize, args: *const c_char, out: *mut *mut c_char) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        *out = ptr::null_mut();
        let tokens = words(text(tokens, "tokens")?);
        let triples: Vec<(usize, usize, String)> = serde_json::from_str(text(args, "args")?)
            .map_err(|e| Failure(XsrlStatus::Format, format!("args: {e}")))?;
        let args = triples.into_iter().map(|(s, e, l)| Argument::new(s, e, l)).collect();
        let s = SrlSentence::new(tokens, "", predicate, args);
        hand_out(linearize(&s, "")?.to_text(), out)
    })
}

/// Recovers arguments from a symbol stream, repairing ill-formed input.
/// Writes `{"tokens": [...], "arguments": [[start, end, label], ...],
/// "repairs": {...}}` to `out`.
///
/// # Safety
/// `symbols` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsrl_delinearize(symbols: *const c_char, predicate: usize, out: *mut *mut c_char) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        *out = ptr::null_mut();
        let seq = LinearizedSeq::parse(text(symbols, "symbols")?, "");
        let d = delinearize(&seq, predicate);
        let args: Vec<(usize, usize, &str)> = d.sentence.arguments.iter().map(|a| (a.start, a.end, a.label.as_str())).collect();
        let json = serde_json::json!({
            "tokens": d.sentence.tokens,
            "arguments": args,
            "repairs": d.repairs,
        });
        hand_out(json.to_string(), out)
    })
}

/// Smoothed sentence BLEU in `[0, 100]` of space-separated strings.
///
/// # Safety
/// String arguments must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsrl_bleu_sentence(hypothesis: *const c_char, reference: *const c_char, out: *mut f64) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        let h = words(text(hypothesis, "hypothesis")?);
        let r = words(text(reference, "reference")?);
        *out = bleu_sentence(&h, &r)?;
        Ok(())
    })
}

/// Corpus BLEU over `n` pairs; writes the full, words-only and labels-only
/// scores to `out[0..3]`.
///
/// # Safety
/// `hypotheses` and `references` must point to `n` NUL-terminated strings
/// each, and `out` to room for three doubles.
#[no_mangle]
pub unsafe extern "C" fn xsrl_bleu_corpus(
    hypotheses: *const *const c_char,
    references: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> XsrlStatus {
    guard(|| {
        null_out(out)?;
        if n > 0 && (hypotheses.is_null() || references.is_null()) {
            return Err(Failure(XsrlStatus::NullArgument, "sentence array is null".into()));
        }
        let mut hyps = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        for i in 0..n {
            hyps.push(words(text(*hypotheses.add(i), "hypothesis")?));
            refs.push(words(text(*references.add(i), "reference")?));
        }
        let t = bleu_triple(&hyps, &refs)?;
        let scores = [t.full.score, t.words.score, t.labels.score];
        ptr::copy_nonoverlapping(scores.as_ptr(), out, 3);
        Ok(())
    })
}
