//! Central finite-difference checks of analytic gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{Gradients, ParamSet, Tape, Var};

/// Denominator floor of the relative error, so that two gradients that are
/// both numerically zero compare as equal.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "{:<28} n={:<6} max_rel_err={:.3e} (idx {}, analytic {:.6e}, numeric {:.6e})",
                p.name, p.checked, p.max_rel_err, p.worst_index, p.analytic, p.numeric
            )?;
        }
        write!(
            f,
            "{} at tolerance {:.1e} (max {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.tolerance,
            self.max_rel_err()
        )
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// Compares tape gradients of `f` against central differences.
///
/// `max_per_param` bounds how many entries of each tensor are probed; the
/// probed entries are spread evenly across the tensor.
pub fn grad_check<F>(
    params: &mut ParamSet<f64>,
    f: F,
    step: f64,
    tolerance: f64,
    max_per_param: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss)?
    };
    check_gradients(params, f, &analytic, step, tolerance, max_per_param)
}

/// Like [`grad_check`] but with externally supplied analytic gradients.
pub fn check_gradients<F>(
    params: &mut ParamSet<f64>,
    f: F,
    analytic: &Gradients<f64>,
    step: f64,
    tolerance: f64,
    max_per_param: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<Var>,
{
    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let mut tape = Tape::new(p);
        let loss = f(&mut tape)?;
        if let Some(op) = tape.first_non_finite() {
            return Err(Error::NonFinite { op: op.to_string() });
        }
        Ok(tape.scalar(loss))
    };

    let ids: Vec<_> = params.ids().collect();
    let mut report = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.get(id).len();
        let probes: Vec<usize> = match max_per_param {
            Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
            _ => (0..n).collect(),
        };
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            checked: probes.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &i in &probes {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + step;
            let plus = eval(params);
            params.get_mut(id).data_mut()[i] = orig - step;
            let minus = eval(params);
            params.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * step);
            let a = analytic.get(id).data()[i];
            let err = relative_error(a, numeric);
            if err > check.max_rel_err || (check.max_rel_err == 0.0 && i == probes[0]) {
                check.max_rel_err = err;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        report.push(check);
    }
    let passed = report.iter().all(|p| p.max_rel_err <= tolerance);
    Ok(GradCheckReport {
        step,
        tolerance,
        params: report,
        passed,
    })
}
