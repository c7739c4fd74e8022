//! Continuous Lyapunov candidate from the value function, its even
//! extension, Dini subderivatives, and decrease checks along trajectories.
//!
//! The candidate is the worst-case cost-to-drain
//!
//! ```text
//! V(x) = max over sampled solutions phi from x of  int_0^{|x| tau} |phi(s)| ds
//! ```
//!
//! with decrease density `W(x) = |x|`, so the integral decrease condition
//! holds with equality along maximizing solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::network::Inclusion;
use crate::stability::StabilityCertificate;
use crate::trajectory::{simulate, steps_for, SelectionRule, Trajectory};
use crate::vecops;

/// `int_0^t_end f(phi(s)) ds` by the trapezoid rule on the trajectory grid;
/// the last partial interval uses linear interpolation of `phi`.
pub fn trapezoid_integral(tr: &Trajectory, t_end: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = tr.step();
    let full = ((t_end / h) * (1.0 + 1e-12)).floor() as usize;
    let full = full.min(tr.len() - 1);
    let mut acc = 0.0;
    let mut prev = f(&tr.samples()[0]);
    for k in 1..=full {
        let cur = f(&tr.samples()[k]);
        acc += 0.5 * h * (prev + cur);
        prev = cur;
    }
    let rest = t_end - full as f64 * h;
    if rest > 1e-12 * h && full + 1 < tr.len() {
        let end = f(&tr.at(t_end));
        acc += 0.5 * rest * (prev + end);
    }
    acc
}

/// Value-function candidate at a single state.
pub fn value_function<I: Inclusion + ?Sized>(
    inc: &I,
    cert: &StabilityCertificate,
    x: &[f64],
    rules: &[SelectionRule],
    h: f64,
) -> Result<f64> {
    let horizon = vecops::norm(x) * cert.tau;
    if horizon <= 0.0 {
        if let Some(&bad) = x.iter().find(|v| **v < 0.0) {
            return Err(Error::NegativeState(bad));
        }
        return Ok(0.0);
    }
    let sim_horizon = steps_for(horizon, h).max(1) as f64 * h;
    let mut best = f64::NEG_INFINITY;
    for rule in rules {
        let tr = simulate(inc, x, rule, h, sim_horizon)?;
        best = best.max(trapezoid_integral(&tr, horizon, vecops::norm));
    }
    Ok(best)
}

/// Samples the value function on `[0, b]^n`.
pub fn value_field<I: Inclusion + ?Sized>(
    inc: &I,
    cert: &StabilityCertificate,
    rules: &[SelectionRule],
    h: f64,
    b: f64,
    spacing: f64,
) -> Result<ScalarField> {
    let n = inc.dim();
    ScalarField::try_from_fn(&vec![0.0; n], &vec![b; n], spacing, "V", |x| {
        value_function(inc, cert, x, rules, h)
    })
}

/// Decrease density paired with the value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityRecipe {
    /// `W(x) = |x|`.
    Norm,
}

impl DensityRecipe {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DensityRecipe::Norm => vecops::norm(x),
        }
    }

    pub fn field(&self, lo: &[f64], hi: &[f64], spacing: f64, tag: &str) -> Result<ScalarField> {
        ScalarField::from_fn(lo, hi, spacing, tag, |x| self.eval(x))
    }
}

/// The decrease density matching [`value_function`].
pub fn choose_w<I: Inclusion + ?Sized>(_inc: &I) -> DensityRecipe {
    DensityRecipe::Norm
}

/// `V^e(x) = V(|x|)` on the mirrored box `[-b, b]^n`.
pub fn extend_even(v: &ScalarField) -> Result<ScalarField> {
    for (k, &lo) in v.lo().iter().enumerate() {
        if lo.abs() > 1e-12 * v.spacing()[k] {
            return Err(Error::AsymmetricGrid(format!(
                "axis {} starts at {lo}, expected 0",
                k + 1
            )));
        }
    }
    let counts: Vec<usize> = v.counts().iter().map(|c| 2 * c - 1).collect();
    let lo: Vec<f64> = v.hi().iter().map(|b| -b).collect();
    let tag = format!("{}e", v.tag());
    let mirrored = ScalarField::from_layout(lo, v.spacing().to_vec(), counts.clone(), &tag, |_| Ok(0.0))?;
    let values = (0..mirrored.node_count())
        .map(|i| {
            let idx: Vec<usize> = mirrored
                .multi_index(i)
                .iter()
                .zip(v.counts())
                .map(|(&j, &c)| j.abs_diff(c - 1))
                .collect();
            v.values()[v.flat_index(&idx)]
        })
        .collect();
    Ok(mirrored.with_values(&tag, values))
}

/// Upper estimate of the Dini subderivative `Df(x; v)`.
///
/// Minimum of `(f(x + e v') - f(x)) / e` over the step ladder and over `v`
/// plus `v +- jitter * e_k` for each axis.
pub fn dini_subderivative(
    f: &ScalarField,
    x: &[f64],
    v: &[f64],
    eps_ladder: &[f64],
    dir_jitter: f64,
) -> Result<f64> {
    let fx = f.eval(x)?;
    let mut dirs = vec![v.to_vec()];
    if dir_jitter > 0.0 {
        for k in 0..v.len() {
            for s in [1.0, -1.0] {
                let mut d = v.to_vec();
                d[k] += s * dir_jitter;
                dirs.push(d);
            }
        }
    }
    let mut best = f64::INFINITY;
    for &eps in eps_ladder {
        for d in &dirs {
            let q = (f.eval(&vecops::axpy(x, eps, d))? - fx) / eps;
            best = best.min(q);
        }
    }
    Ok(best)
}

/// Worst violation found by a decrease check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// Largest margin; the check passes when this is at most `tolerance`.
    pub worst_margin: f64,
    /// Grid time(s) of the worst margin.
    pub worst_at: Vec<f64>,
    /// Largest absolute residual, for checks that compare two rates.
    pub max_abs_residual: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl MarginReport {
    pub(crate) fn new(worst_margin: f64, worst_at: Vec<f64>, max_abs_residual: f64, checked: usize, tolerance: f64) -> Self {
        Self {
            worst_margin,
            worst_at,
            max_abs_residual,
            checked,
            tolerance,
            passed: worst_margin <= tolerance,
        }
    }

    /// Combines reports over several trajectories.
    pub fn merge(reports: &[MarginReport]) -> Option<MarginReport> {
        let worst = reports
            .iter()
            .max_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))?;
        Some(MarginReport {
            worst_margin: worst.worst_margin,
            worst_at: worst.worst_at.clone(),
            max_abs_residual: reports.iter().map(|r| r.max_abs_residual).fold(0.0, f64::max),
            checked: reports.iter().map(|r| r.checked).sum(),
            tolerance: worst.tolerance,
            passed: reports.iter().all(|r| r.passed),
        })
    }
}

fn eval_along(field: &ScalarField, tr: &Trajectory) -> Result<Vec<f64>> {
    tr.samples().iter().map(|x| field.eval(x)).collect()
}

/// Checks `V(phi(t)) - V(phi(s)) + int_s^t W(phi) <= tol` for all grid pairs
/// `s <= t`.
pub fn verify_integral_decrease(
    v: &ScalarField,
    w: &ScalarField,
    tr: &Trajectory,
    tol: f64,
) -> Result<MarginReport> {
    let vv = eval_along(v, tr)?;
    let ww = eval_along(w, tr)?;
    let h = tr.step();
    // g_k = V(phi_k) + int_0^{t_k} W; margin(s, t) = g_t - g_s.
    let mut integral = 0.0;
    let mut run_min = f64::INFINITY;
    let mut run_min_at = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0, 0);
    for k in 0..vv.len() {
        if k > 0 {
            integral += 0.5 * h * (ww[k - 1] + ww[k]);
        }
        let g = vv[k] + integral;
        if g < run_min {
            run_min = g;
            run_min_at = k;
        }
        let m = g - run_min;
        if m > worst {
            worst = m;
            worst_at = (run_min_at, k);
        }
    }
    let n = vv.len();
    Ok(MarginReport::new(
        worst,
        vec![tr.time(worst_at.0), tr.time(worst_at.1)],
        worst.abs(),
        n * (n + 1) / 2,
        tol,
    ))
}

/// Difference quotients of `V o phi`: symmetric inside, one-sided at the
/// ends.
pub fn rate_along(v_along: &[f64], h: f64) -> Vec<f64> {
    let n = v_along.len();
    (0..n)
        .map(|k| {
            if n < 2 {
                0.0
            } else if k == 0 {
                (v_along[1] - v_along[0]) / h
            } else if k == n - 1 {
                (v_along[k] - v_along[k - 1]) / h
            } else {
                (v_along[k + 1] - v_along[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Checks `dV/dt(phi(t)) <= -W(phi(t)) + tol` at every grid time, with the
/// rate taken from difference quotients of `V o phi`.
pub fn verify_differential_decrease(
    v: &ScalarField,
    w: &ScalarField,
    tr: &Trajectory,
    tol: f64,
) -> Result<MarginReport> {
    let vv = eval_along(v, tr)?;
    let ww = eval_along(w, tr)?;
    Ok(rate_report(&vv, &ww, tr, tol))
}

pub(crate) fn rate_report(vv: &[f64], ww: &[f64], tr: &Trajectory, tol: f64) -> MarginReport {
    let rates = rate_along(vv, tr.step());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_k = 0;
    let mut max_abs = 0.0_f64;
    for (k, (r, w)) in rates.iter().zip(ww).enumerate() {
        let m = r + w;
        max_abs = max_abs.max(m.abs());
        if m > worst {
            worst = m;
            worst_k = k;
        }
    }
    MarginReport::new(worst, vec![tr.time(worst_k)], max_abs, rates.len(), tol)
}

/// Evaluates `field` at states sampled in parallel; used for the local
/// Lipschitz surrogate.
pub fn lipschitz_estimate(field: &ScalarField, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    pairs
        .par_iter()
        .map(|(a, b)| {
            let d = vecops::dist(a, b);
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok((field.eval(a)? - field.eval(b)?).abs() / d)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}
