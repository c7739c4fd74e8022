//! Asymptotic stability through the uniform drain time.
//!
//! For trajectory spaces that are invariant under scaling and shifting, the
//! zero trajectory is asymptotically stable exactly when there is a `tau > 0`
//! with `phi(|phi(0)| tau + t) = 0` for every trajectory and every `t >= 0`.
//! Scaling reduces the search for `tau` to unit-norm starts. Sampling starts
//! and selection rules can refute stability soundly but only confirms it on
//! the sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Inclusion;
use crate::trajectory::{simulate, SelectionRule, Trajectory};
use crate::vecops;

/// Default drain tolerance for a start `x0`.
pub fn default_drain_tol(x0: &[f64]) -> f64 {
    1e-6 * (1.0 + vecops::norm(x0))
}

/// First grid time from which `|phi(t)| <= tol` holds up to the horizon.
pub fn drain_time(tr: &Trajectory, tol: f64) -> Option<f64> {
    let norms = tr.norms();
    match norms.iter().rposition(|&v| v > tol) {
        None => Some(0.0),
        Some(k) if k + 1 < norms.len() => Some(tr.time(k + 1)),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub start: Vec<f64>,
    pub rule: String,
    pub drain_time: f64,
    /// Norm threshold the drain time was measured against.
    pub tolerance: f64,
}

/// Machine-checkable record of a drain-time estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Drain time per unit initial norm.
    pub tau: f64,
    pub lipschitz: f64,
    /// `max |phi(|phi(0)| tau)|` over the samples.
    pub max_residual: f64,
    /// Tolerance the residual was checked against.
    pub tolerance: f64,
    pub step: f64,
    pub samples: Vec<SampleRecord>,
}

impl StabilityCertificate {
    /// `ceil(L tau)`, the stability gain between `d(0, phi)` and
    /// `d(0, S(t) phi)`.
    pub fn gain(&self) -> f64 {
        (self.lipschitz * self.tau).ceil()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StabilityVerdict {
    Certified(StabilityCertificate),
    /// A sampled trajectory failed to drain and its norm did not decrease.
    Unstable {
        start: Vec<f64>,
        rule: String,
        final_norm: f64,
    },
}

impl StabilityVerdict {
    pub fn certificate(&self) -> Option<&StabilityCertificate> {
        match self {
            StabilityVerdict::Certified(c) => Some(c),
            StabilityVerdict::Unstable { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TauEstimate {
    pub verdict: StabilityVerdict,
    /// The simulated `(start, rule)` paths, in input order (starts outer).
    pub paths: Vec<Trajectory>,
}

/// Estimates `tau` as the largest drain time over unit-norm `starts` and
/// `rules`.
pub fn estimate_tau<I: Inclusion + ?Sized>(
    inc: &I,
    starts: &[Vec<f64>],
    rules: &[SelectionRule],
    h: f64,
    horizon: f64,
) -> Result<TauEstimate> {
    if starts.is_empty() || rules.is_empty() {
        return Err(Error::InvalidArgument("need at least one start and one rule".into()));
    }
    for s in starts {
        let nrm = vecops::norm(s);
        if (nrm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "start {s:?} has norm {nrm}, expected 1"
            )));
        }
    }
    let jobs: Vec<(&Vec<f64>, &SelectionRule)> = starts
        .iter()
        .flat_map(|s| rules.iter().map(move |r| (s, r)))
        .collect();
    let paths: Vec<Trajectory> = jobs
        .par_iter()
        .map(|(s, r)| simulate(inc, s, r, h, horizon))
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(paths.len());
    let mut too_short = None;
    let coarse = inc.speed_bound() * h;
    for ((start, rule), tr) in jobs.iter().zip(&paths) {
        let tol = default_drain_tol(start);
        // Near a corner the clamped Euler step can leave an O(L h) residue
        // bouncing between faces; it counts as drained at that scale.
        let drained = drain_time(tr, tol)
            .map(|t| (t, tol))
            .or_else(|| drain_time(tr, coarse.max(tol)).map(|t| (t, coarse.max(tol))));
        match drained {
            Some((t, used)) => samples.push(SampleRecord {
                start: start.to_vec(),
                rule: rule.label(),
                drain_time: t,
                tolerance: used,
            }),
            None => {
                let final_norm = vecops::norm(tr.last());
                if final_norm >= vecops::norm(start) - tol {
                    return Ok(TauEstimate {
                        verdict: StabilityVerdict::Unstable {
                            start: start.to_vec(),
                            rule: rule.label(),
                            final_norm,
                        },
                        paths,
                    });
                }
                too_short.get_or_insert(tr.horizon());
            }
        }
    }
    if let Some(have) = too_short {
        return Err(Error::HorizonTooShort {
            have,
            need: f64::INFINITY,
        });
    }

    let tau = samples.iter().map(|s| s.drain_time).fold(0.0, f64::max);
    let tolerance = samples.iter().map(|s| s.tolerance).fold(0.0, f64::max);
    let max_residual = paths
        .iter()
        .map(|tr| vecops::norm(&tr.at(vecops::norm(tr.start()) * tau)))
        .fold(0.0, f64::max);
    Ok(TauEstimate {
        verdict: StabilityVerdict::Certified(StabilityCertificate {
            tau,
            lipschitz: inc.speed_bound(),
            max_residual,
            tolerance,
            step: h,
            samples,
        }),
        paths,
    })
}

/// Worst value of `|phi(t)| - L tau |phi(s)|` over grid pairs `s <= t`.
///
/// Nonpositive (up to tolerance) whenever `phi` drains within `tau` per unit
/// norm and moves at speed at most `L`.
pub fn drain_envelope_margin(tr: &Trajectory, lipschitz: f64, tau: f64) -> f64 {
    let norms = tr.norms();
    let mut suffix_max = 0.0_f64;
    let mut worst = f64::NEG_INFINITY;
    for &v in norms.iter().rev() {
        suffix_max = suffix_max.max(v);
        worst = worst.max(suffix_max - lipschitz * tau * v);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsDeltaReport {
    pub gain: f64,
    /// `d(0, phi)`.
    pub base_distance: f64,
    /// Largest `d(0, S(t) phi) - gain * d(0, phi)` over checked grid times.
    pub worst_margin: f64,
    pub worst_time: f64,
    pub checked_times: usize,
    pub passed: bool,
}

/// Checks `d(0, S(t) phi) <= ceil(L tau) d(0, phi) + tol` on every grid time
/// `t` with `t + n_max` inside the horizon.
pub fn verify_epsilon_delta(
    tr: &Trajectory,
    cert: &StabilityCertificate,
    n_max: usize,
    tol: f64,
) -> Result<EpsDeltaReport> {
    let h = tr.step();
    let need = n_max as f64;
    if tr.horizon() < need - 1e-9 {
        return Err(Error::HorizonTooShort {
            have: tr.horizon(),
            need,
        });
    }
    let norms = tr.norms();
    let table = RangeMax::new(&norms);
    let windows: Vec<usize> = (1..=n_max)
        .map(|n| (n as f64 / h + 1e-9).floor() as usize)
        .collect();
    let last_start = norms.len() - 1 - windows[n_max - 1];

    let dist_at = |i: usize| -> f64 {
        windows
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let s = table.max(i, i + w);
                0.5_f64.powi(j as i32 + 1) * s / (1.0 + s)
            })
            .fold(0.0, f64::max)
    };
    let base = dist_at(0);
    let gain = cert.gain();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_time = 0.0;
    for i in 0..=last_start {
        let m = dist_at(i) - gain * base;
        if m > worst {
            worst = m;
            worst_time = tr.time(i);
        }
    }
    Ok(EpsDeltaReport {
        gain,
        base_distance: base,
        worst_margin: worst,
        worst_time,
        checked_times: last_start + 1,
        passed: worst <= tol,
    })
}

/// Sparse table for O(1) range maxima.
struct RangeMax {
    levels: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(v: &[f64]) -> Self {
        let mut levels = vec![v.to_vec()];
        let mut width = 1;
        while 2 * width <= v.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=v.len() - 2 * width)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Maximum over the closed index range `[lo, hi]`.
    fn max(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let lvl = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let w = 1 << lvl;
        self.levels[lvl][lo].max(self.levels[lvl][hi + 1 - w])
    }
}
