//! Neighboring trajectories from perturbed starts and the linear deviation
//! bound `|phi(t) - y - psi(t)| <= |y| c(t)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, fmt_sig};
use crate::network::Inclusion;
use crate::trajectory::{simulate, SelectionRule, Trajectory};
use crate::vecops;

/// `c(t) = e^{L t} - 1`.
pub fn filippov_bound(lipschitz: f64, t: f64) -> f64 {
    (lipschitz * t).exp_m1()
}

/// Closed-form deviation bounds `c(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundFn {
    /// `c(t) = slope * t`.
    Linear { slope: f64 },
    /// `c(t) = e^{L t} - 1`.
    Filippov { lipschitz: f64 },
    /// `c(t) = log(t + e)`.
    LogShift,
}

impl BoundFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            BoundFn::Linear { slope } => slope * t,
            BoundFn::Filippov { lipschitz } => filippov_bound(lipschitz, t),
            BoundFn::LogShift => (t + std::f64::consts::E).ln(),
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            BoundFn::Linear { slope } => format!("linear({})", fmt_sig(slope)),
            BoundFn::Filippov { lipschitz } => format!("exp({} t)-1", fmt_sig(lipschitz)),
            BoundFn::LogShift => "log(t+e)".into(),
        }
    }
}

/// Simulates from `reference(0) - y`, taking at each step the admissible
/// velocity nearest to the reference's realized step velocity.
pub fn track_neighbor<I: Inclusion + ?Sized>(inc: &I, reference: &Trajectory, y: &[f64]) -> Result<Trajectory> {
    if y.len() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: y.len(),
        });
    }
    let start = vecops::sub(reference.start(), y);
    if start.iter().any(|&c| c < 0.0) {
        return Err(Error::StartOutsideOrthant(start));
    }
    let rule = SelectionRule::NearestTo(Arc::new(reference.step_velocities()));
    simulate(inc, &start, &rule, reference.step(), reference.horizon())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRow {
    pub y_index: usize,
    pub t: f64,
    pub ratio: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Small-time behaviour of `c(t)/t` and of the observed ratios, from the
/// three smallest positive grid times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    /// `c(t)/t` at the smallest grid time when `c(0) = 0` and the three
    /// quotients are finite and positive; `None` otherwise.
    pub c_limit: Option<f64>,
    /// Largest `ratio(y, t)/t` over all `y` and the three times.
    pub ratio_slope: f64,
    /// `ratio_slope <= c_limit + tol`, when `c_limit` exists.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub perturbations: Vec<Vec<f64>>,
    pub horizon: f64,
    pub bound: BoundFn,
    pub c_tag: String,
    pub tolerance: f64,
    pub rows: Vec<NeighborRow>,
    /// Largest `ratio - c(t)`.
    pub worst_margin: f64,
    pub slope: SlopeCheck,
    pub pass: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    pass: bool,
    worst_margin: f64,
    c_tag: &'a str,
}

impl NeighborReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y_index,t,ratio,bound,margin\n");
        for r in &self.rows {
            out.push_str(&format!("{},", r.y_index));
            out.push_str(&io::csv_row([r.t, r.ratio, r.bound, r.margin]));
            out.push('\n');
        }
        out
    }

    /// `{pass, worst_margin, c_tag}`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            pass: self.pass,
            worst_margin: self.worst_margin,
            c_tag: &self.c_tag,
        })?)
    }
}

/// Tracks a neighbor for each `y` and checks
/// `|phi(t) - y - psi(t)| / |y| <= c(t) + tol` on grid times in `(0, T]`.
pub fn verify_assumption_a<I: Inclusion + ?Sized>(
    inc: &I,
    reference: &Trajectory,
    ys: &[Vec<f64>],
    horizon: f64,
    c: BoundFn,
    tol: f64,
) -> Result<NeighborReport> {
    let h = reference.step();
    if horizon > reference.horizon() + 1e-9 * h {
        return Err(Error::HorizonTooShort {
            have: reference.horizon(),
            need: horizon,
        });
    }
    let last = ((horizon / h) + 1e-9).floor() as usize;
    let per_y = ys
        .par_iter()
        .enumerate()
        .map(|(j, y)| -> Result<Vec<NeighborRow>> {
            let psi = track_neighbor(inc, reference, y)?;
            let ny = vecops::norm(y);
            Ok((1..=last)
                .map(|k| {
                    let t = reference.time(k);
                    let dev = vecops::norm(&vecops::sub(
                        &vecops::sub(&reference.samples()[k], y),
                        &psi.samples()[k],
                    ));
                    let ratio = if ny > 0.0 {
                        dev / ny
                    } else if dev == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    let bound = c.eval(t);
                    NeighborRow {
                        y_index: j,
                        t,
                        ratio,
                        bound,
                        margin: ratio - bound,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<NeighborRow> = per_y.into_iter().flatten().collect();
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::NEG_INFINITY, f64::max);
    let slope = slope_check(&rows, c, h, last, tol);
    Ok(NeighborReport {
        perturbations: ys.to_vec(),
        horizon,
        bound: c,
        c_tag: c.tag(),
        tolerance: tol,
        pass: rows.iter().all(|r| r.margin <= tol),
        rows,
        worst_margin,
        slope,
    })
}

fn slope_check(rows: &[NeighborRow], c: BoundFn, h: f64, last: usize, tol: f64) -> SlopeCheck {
    let times: Vec<f64> = (1..=last.min(3)).map(|k| k as f64 * h).collect();
    let quotients: Vec<f64> = times.iter().map(|&t| c.eval(t) / t).collect();
    let c_limit = (c.eval(0.0).abs() <= 1e-12
        && !quotients.is_empty()
        && quotients.iter().all(|q| q.is_finite() && *q > 0.0))
    .then(|| quotients[0]);
    let ratio_slope = rows
        .iter()
        .filter(|r| r.t <= times.last().copied().unwrap_or(0.0) * (1.0 + 1e-9))
        .map(|r| r.ratio / r.t)
        .fold(0.0, f64::max);
    SlopeCheck {
        c_limit,
        ratio_slope,
        consistent: c_limit.map(|l| ratio_slope <= l + tol),
    }
}
