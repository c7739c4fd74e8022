//! Mollification of grid fields and partition-of-unity gluing.

mod mollifier;
mod partition;

pub use mollifier::{default_conv_points, make_mollifier, normalization_points, Mollifier};
pub use partition::{
    build_partition, glue, smooth_pieces, GlueReport, Glued, Piece, PieceBound, PartitionOfUnity,
    SmoothedPiece,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lyapunov::{verify_differential_decrease, MarginReport};
use crate::trajectory::Trajectory;

/// Node index range of `f` covering `[lo, hi]`, snapped inward.
pub(crate) fn node_range(f: &ScalarField, lo: &[f64], hi: &[f64]) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut first = Vec::with_capacity(f.dim());
    let mut count = Vec::with_capacity(f.dim());
    for k in 0..f.dim() {
        let s = f.spacing()[k];
        let a = ((lo[k] - f.lo()[k]) / s - 1e-9).ceil().max(0.0) as usize;
        let b = ((hi[k] - f.lo()[k]) / s + 1e-9).floor();
        if b < 0.0 {
            return None;
        }
        let b = (b as usize).min(f.counts()[k] - 1);
        if b < a {
            return None;
        }
        first.push(a);
        count.push(b - a + 1);
    }
    Some((first, count))
}

/// Sub-grid of `f` over `[lo, hi]` with values from `g`.
pub(crate) fn subgrid(
    f: &ScalarField,
    lo: &[f64],
    hi: &[f64],
    tag: &str,
    g: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Option<Result<ScalarField>> {
    let (first, counts) = node_range(f, lo, hi)?;
    let origin: Vec<f64> = (0..f.dim())
        .map(|k| f.lo()[k] + f.spacing()[k] * first[k] as f64)
        .collect();
    Some(ScalarField::from_layout(origin, f.spacing().to_vec(), counts, tag, g))
}

fn convolve_at(f: &ScalarField, quad: &[(Vec<f64>, f64)], x: &[f64]) -> f64 {
    let mut z = vec![0.0; x.len()];
    quad.iter()
        .map(|(y, w)| {
            for k in 0..x.len() {
                z[k] = x[k] - y[k];
            }
            w * f.eval_unchecked(&z)
        })
        .sum()
}

/// `f * k_r` at the nodes of `f` inside `[lo, hi]`; the region must sit at
/// least `r` inside the box of `f`.
pub fn convolve_region(f: &ScalarField, m: &Mollifier, lo: &[f64], hi: &[f64], tag: &str) -> Result<ScalarField> {
    if m.dim() != f.dim() || lo.len() != f.dim() || hi.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: m.dim(),
        });
    }
    let r = m.radius();
    let fhi = f.hi();
    let slack = 1e-9;
    for k in 0..f.dim() {
        let s = f.spacing()[k];
        if lo[k] - r < f.lo()[k] - slack * s || hi[k] + r > fhi[k] + slack * s {
            return Err(Error::BoxTooSmall(r));
        }
    }
    let quad = m.quadrature();
    let out = subgrid(f, lo, hi, tag, |x| Ok(convolve_at(f, &quad, x))).ok_or(Error::BoxTooSmall(r))??;
    Ok(out.with_gradients())
}

/// `f * k_r` on the box of `f` shrunk by `r`, tagged `<tag>_r`.
pub fn convolve(f: &ScalarField, m: &Mollifier) -> Result<ScalarField> {
    let r = m.radius();
    let lo: Vec<f64> = f.lo().iter().map(|a| a + r).collect();
    let hi: Vec<f64> = f.hi().iter().map(|b| b - r).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Err(Error::BoxTooSmall(r));
    }
    convolve_region(f, m, &lo, &hi, &format!("{}_r", f.tag()))
}

/// Sup distances `|f_r - f|` on a sub-box along a radius ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UocReport {
    pub radii: Vec<f64>,
    pub distances: Vec<f64>,
    pub bound: f64,
    pub tolerance: f64,
    /// No distance exceeds its predecessor by more than `tolerance`.
    pub monotone: bool,
    pub below_bound: bool,
    pub passed: bool,
}

pub fn uoc_check(
    f: &ScalarField,
    ladder: &[f64],
    sub_lo: &[f64],
    sub_hi: &[f64],
    bound: f64,
    tol: f64,
) -> Result<UocReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("radius ladder must be strictly decreasing".into()));
    }
    let base = make_mollifier(f.dim(), ladder[0])?;
    let mut distances = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let fr = convolve_region(f, &base.rescaled(r)?, sub_lo, sub_hi, "uoc")?;
        let d = fr
            .nodes()
            .zip(fr.values())
            .map(|(x, v)| (v - f.eval_unchecked(&x)).abs())
            .fold(0.0, f64::max);
        distances.push(d);
    }
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + tol);
    let below_bound = *distances.last().unwrap() <= bound;
    Ok(UocReport {
        radii: ladder.to_vec(),
        distances,
        bound,
        tolerance: tol,
        monotone,
        below_bound,
        passed: monotone && below_bound,
    })
}

/// `dV_r/dt(phi(t)) <= -W(phi(t)) + eps` along `tr`.
pub fn mollified_decrease_check(v_r: &ScalarField, w: &ScalarField, tr: &Trajectory, eps: f64) -> Result<MarginReport> {
    verify_differential_decrease(v_r, w, tr, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub radius: f64,
    pub report: MarginReport,
}

/// Mollified decrease over a radius ladder; `first_passing` is the first
/// radius at which every trajectory passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderDecrease {
    pub eps: f64,
    pub first_passing: Option<f64>,
    pub rungs: Vec<LadderRung>,
}

pub fn decrease_on_ladder(
    ve: &ScalarField,
    w: &ScalarField,
    trajectories: &[Trajectory],
    eps: f64,
    ladder: &[f64],
) -> Result<LadderDecrease> {
    let base = make_mollifier(ve.dim(), *ladder.first().ok_or_else(|| {
        Error::InvalidArgument("empty radius ladder".into())
    })?)?;
    let mut rungs = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let vr = convolve(ve, &base.rescaled(r)?)?;
        let reports = trajectories
            .par_iter()
            .map(|tr| mollified_decrease_check(&vr, w, tr, eps))
            .collect::<Result<Vec<_>>>()?;
        let report = MarginReport::merge(&reports)
            .unwrap_or_else(|| MarginReport::new(f64::NEG_INFINITY, Vec::new(), 0.0, 0, eps));
        rungs.push(LadderRung { radius: r, report });
    }
    let first_passing = rungs.iter().find(|g| g.report.passed).map(|g| g.radius);
    Ok(LadderDecrease {
        eps,
        first_passing,
        rungs,
    })
}

/// `r0, r0/2, ...` with `levels` entries.
pub fn halving_ladder(r0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| r0 / 2f64.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        ScalarField::from_fn(&[lo], &[hi], step, "f", |x| f(x[0])).unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        let f = ScalarField::from_fn(&[-1.0, -1.0], &[1.0, 1.0], 0.05, "c", |_| 2.5).unwrap();
        let fr = convolve(&f, &make_mollifier(2, 0.2).unwrap()).unwrap();
        assert!(fr.values().iter().all(|v| (v - 2.5).abs() < 1e-8));
        assert!(fr.gradients().is_some());
        assert_eq!(fr.tag(), "c_r");
    }

    #[test]
    fn convex_field_is_dominated() {
        let f = line(-2.0, 2.0, 1e-2, |x| x.abs() + x * x);
        let fr = convolve(&f, &make_mollifier(1, 0.3).unwrap()).unwrap();
        for (x, v) in fr.nodes().zip(fr.values()) {
            assert!(*v >= f.eval(&x).unwrap() - 1e-12);
        }
    }

    #[test]
    fn box_too_small() {
        let f = line(0.0, 1.0, 0.1, |x| x);
        assert!(matches!(
            convolve(&f, &make_mollifier(1, 0.6).unwrap()),
            Err(Error::BoxTooSmall(_))
        ));
    }

    #[test]
    fn ladder_must_decrease() {
        let f = line(-1.0, 1.0, 0.1, |x| x);
        assert!(uoc_check(&f, &[0.1, 0.2], &[0.0], &[0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_field_uoc_is_zero() {
        let f = line(-2.0, 2.0, 0.01, |_| 1.0);
        let rep = uoc_check(&f, &[0.4, 0.2, 0.1], &[-1.0], &[1.0], 1e-9, 1e-12).unwrap();
        assert!(rep.distances.iter().all(|d| *d < 1e-12));
        assert!(rep.passed);
    }
}
