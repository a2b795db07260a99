//! Finite-difference checks of every tape primitive and of the full loss.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::parallel::Indicator;
use crate::error::{Error, Result};
use crate::model::{Instance, Model, ModelConfig};
use crate::numeric::ops::CE_EPS;
use crate::numeric::{grad_check, GradCheckReport, ParamSet, Precision, Tape, Var};
use crate::pipeline::{manifest_path, Recorder, RunOptions};
use crate::vocab::VocabBuilder;

#[derive(Clone, Debug, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub report: GradCheckReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckSummary {
    pub step: f64,
    pub tolerance: f64,
    pub checks: Vec<NamedCheck>,
    pub passed: bool,
    pub max_rel_err: f64,
}

impl fmt::Display for GradCheckSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<16} {} max_rel_err={:.3e}",
                c.name,
                if c.report.passed { "ok  " } else { "FAIL" },
                c.report.max_rel_err()
            )?;
        }
        write!(
            f,
            "{}: {} checks, max relative error {:.3e} (tolerance {:.1e}, step {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.max_rel_err,
            self.tolerance,
            self.step
        )
    }
}

/// Reduces any value to a scalar through a fixed, non-uniform weighting so
/// that every output entry gets a distinct upstream gradient.
fn reduce(tape: &mut Tape<'_, f64>, v: Var) -> Result<Var> {
    let flat = tape.concat(&[v]);
    let n = tape.len_of(flat);
    let w = tape.input(1, n, (0..n).map(|i| 0.3 + 0.17 * i as f64 - 0.05 * (i * i) as f64 / n as f64).collect())?;
    tape.matvec(w, flat)
}

type Primitive = fn(&mut Tape<'_, f64>, &Ids) -> Result<Var>;

struct Ids {
    a: crate::numeric::ParamId,
    b: crate::numeric::ParamId,
    x: crate::numeric::ParamId,
    y: crate::numeric::ParamId,
    z: crate::numeric::ParamId,
    u: crate::numeric::ParamId,
    table: crate::numeric::ParamId,
    keys: crate::numeric::ParamId,
    q: crate::numeric::ParamId,
    v: crate::numeric::ParamId,
    lw: crate::numeric::ParamId,
    lb: crate::numeric::ParamId,
    h: crate::numeric::ParamId,
    c: crate::numeric::ParamId,
}

fn primitives() -> Vec<(&'static str, Primitive)> {
    vec![
        ("row", |t, p| t.row(p.table, 1)),
        ("matmul", |t, p| {
            let (a, b) = (t.param(p.a), t.param(p.b));
            t.matmul(a, b)
        }),
        ("matvec", |t, p| {
            let (a, x) = (t.param(p.a), t.param(p.x));
            t.matvec(a, x)
        }),
        ("vecmat", |t, p| {
            let (z, a) = (t.param(p.z), t.param(p.a));
            t.vecmat(z, a)
        }),
        ("add", |t, p| {
            let (x, y) = (t.param(p.x), t.param(p.y));
            t.add(x, y)
        }),
        ("mul", |t, p| {
            let (x, y) = (t.param(p.x), t.param(p.y));
            t.mul(x, y)
        }),
        ("concat", |t, p| {
            let (x, z) = (t.param(p.x), t.param(p.z));
            Ok(t.concat(&[x, z]))
        }),
        ("stack_rows", |t, p| {
            let (x, y) = (t.param(p.x), t.param(p.y));
            t.stack_rows(&[x, y, x])
        }),
        ("slice", |t, p| {
            let x = t.param(p.x);
            t.slice(x, 1, 2)
        }),
        ("tanh", |t, p| {
            let x = t.param(p.x);
            Ok(t.tanh(x))
        }),
        ("sigmoid", |t, p| {
            let x = t.param(p.x);
            Ok(t.sigmoid(x))
        }),
        ("softmax", |t, p| {
            let x = t.param(p.x);
            t.softmax(x)
        }),
        ("lstm", |t, p| {
            let (u, h, c, w, b) = (t.param(p.u), t.param(p.h), t.param(p.c), t.param(p.lw), t.param(p.lb));
            let (h2, c2) = t.lstm(u, h, c, w, b)?;
            Ok(t.concat(&[h2, c2]))
        }),
        ("additive_scores", |t, p| {
            let (k, q, v) = (t.param(p.keys), t.param(p.q), t.param(p.v));
            t.additive_scores(k, q, v)
        }),
        ("cross_entropy", |t, p| {
            let x = t.param(p.x);
            let probs = t.softmax(x)?;
            t.cross_entropy(probs, &[0, 2], CE_EPS)
        }),
        ("sum", |t, p| {
            let (x, y) = (t.param(p.x), t.param(p.y));
            t.sum(&[x, y, x])
        }),
    ]
}

fn primitive_params(seed: u64) -> (ParamSet<f64>, Ids) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    let ids = Ids {
        a: p.add_uniform("a", &[3, 4], 1, &mut rng),
        b: p.add_uniform("b", &[4, 2], 1, &mut rng),
        x: p.add_uniform("x", &[4], 1, &mut rng),
        y: p.add_uniform("y", &[4], 1, &mut rng),
        z: p.add_uniform("z", &[3], 1, &mut rng),
        u: p.add_uniform("u", &[2], 1, &mut rng),
        table: p.add_uniform("table", &[3, 4], 1, &mut rng),
        keys: p.add_uniform("keys", &[3, 4], 1, &mut rng),
        q: p.add_uniform("q", &[4], 1, &mut rng),
        v: p.add_uniform("v", &[4], 1, &mut rng),
        lw: p.add_uniform("lstm.w", &[12, 5], 1, &mut rng),
        lb: p.add_uniform("lstm.b", &[12], 1, &mut rng),
        h: p.add_uniform("h", &[3], 1, &mut rng),
        c: p.add_uniform("c", &[3], 1, &mut rng),
    };
    (p, ids)
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// A small model and one instance whose target copies an unknown word.
fn loss_fixture(seed: u64) -> Result<(Model<f64>, Instance)> {
    let ind = |s: &str| s.parse::<Indicator>();
    let mut b = VocabBuilder::new();
    b.add_tokens(&words("<2EN-SRL> the cat sat on a mat (# A0) A1)"));
    let config = ModelConfig {
        word_dim: 5,
        predicate_dim: 2,
        language_dim: 2,
        encoder_hidden: 3,
        encoder_layers: 2,
        decoder_hidden: 4,
        attention_dim: 3,
        indicators: vec![ind("EN")?, ind("EN-SRL")?],
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::new(config, b.build(1)?, &mut rng)?;
    let inst = Instance {
        source: words("<2EN-SRL> the zebra sat"),
        predicate: Some(3),
        source_lang: ind("EN")?,
        target_lang: ind("EN-SRL")?,
        target: words("(# the zebra A0) sat"),
    };
    Ok((model, inst))
}

/// Checks every primitive and the full teacher-forced loss in 64-bit.
pub fn gradient_suite(step: f64, tolerance: f64, seed: u64) -> Result<GradCheckSummary> {
    let mut checks = Vec::new();
    for (name, f) in primitives() {
        let (mut params, ids) = primitive_params(seed);
        let report = grad_check(
            &mut params,
            |t| {
                let out = f(t, &ids)?;
                reduce(t, out)
            },
            step,
            tolerance,
            None,
        )?;
        checks.push(NamedCheck {
            name: name.to_string(),
            report,
        });
    }

    let (mut model, inst) = loss_fixture(seed)?;
    let net = model.clone();
    let report = grad_check(&mut model.params, |t| net.forward_loss(t, &inst).map(|(l, _)| l), step, tolerance, None)?;
    checks.push(NamedCheck {
        name: "full_loss".to_string(),
        report,
    });

    let max_rel_err = checks.iter().map(|c| c.report.max_rel_err()).fold(0.0, f64::max);
    Ok(GradCheckSummary {
        step,
        tolerance,
        passed: checks.iter().all(|c| c.report.passed),
        checks,
        max_rel_err,
    })
}

pub fn cmd_gradcheck(step: f64, tolerance: f64, opts: RunOptions, output: Option<&Path>) -> Result<GradCheckSummary> {
    if !(step.is_finite() && step > 0.0) || tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::invalid("step and tolerance must be positive"));
    }
    if opts.precision != Precision::F64 {
        log::info!("gradient checks always run in 64-bit");
    }
    let rec = Recorder::start("gradcheck");
    let summary = gradient_suite(step, tolerance, opts.seed)?;
    if let Some(path) = output {
        let body = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
        let options = RunOptions {
            precision: Precision::F64,
            ..opts
        };
        rec.finish(
            &manifest_path(path),
            options,
            serde_json::json!({ "step": step, "tolerance": tolerance }),
            &[],
            &[path],
        )?;
    }
    Ok(summary)
}
