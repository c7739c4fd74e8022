use serde::{Deserialize, Serialize};

use super::{convolve_region, make_mollifier, subgrid};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Halvings allowed in the per-piece radius search.
const MAX_HALVINGS: usize = 20;
/// Inflation applied to the sampled gradient bound.
const Q_INFLATION: f64 = 1.01;

/// One element of the cover: an open box `U_i` and its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// 1-based, as in the `2^(i+1)` weighting of the local bounds.
    pub index: usize,
    pub cell: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub q: f64,
    pub eps: Option<f64>,
}

impl Piece {
    /// Strict membership in the open box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v > a && v < b)
    }

    fn in_closure(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v >= a && v <= b)
    }
}

/// Normalized tensor-product bumps subordinate to a grid of overlapping
/// boxes covering `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub pieces_per_axis: usize,
    pub overlap: f64,
    pub pieces: Vec<Piece>,
}

/// `exp(-1/(1-z^2))` on `(a, b)` mapped to `z in (-1, 1)`, with its
/// logarithmic derivative.
fn bump_1d(x: f64, a: f64, b: f64) -> (f64, f64) {
    let z = (2.0 * x - a - b) / (b - a);
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - z * z;
    ((-1.0 / d).exp(), -2.0 * z / (d * d) * 2.0 / (b - a))
}

pub fn build_partition(lo: &[f64], hi: &[f64], pieces: usize, overlap: f64) -> Result<PartitionOfUnity> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::DegenerateBox(format!("bounds {lo:?} / {hi:?}")));
    }
    if let Some(k) = (0..lo.len()).find(|&k| !(hi[k] > lo[k])) {
        return Err(Error::DegenerateBox(format!("axis {k}: [{}, {}]", lo[k], hi[k])));
    }
    if pieces == 0 {
        return Err(Error::InvalidArgument("at least one piece per axis is required".into()));
    }
    if !(overlap > 0.0 && overlap <= 0.5) {
        return Err(Error::InvalidArgument(format!("overlap {overlap} outside (0, 1/2]")));
    }
    let dim = lo.len();
    let total = pieces.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut cell = vec![0; dim];
        let mut rest = flat;
        for k in (0..dim).rev() {
            cell[k] = rest % pieces;
            rest /= pieces;
        }
        let (plo, phi): (Vec<f64>, Vec<f64>) = (0..dim)
            .map(|k| {
                let w = (hi[k] - lo[k]) / pieces as f64;
                let a = lo[k] + w * cell[k] as f64;
                (a - overlap * w, a + w + overlap * w)
            })
            .unzip();
        out.push(Piece {
            index: flat + 1,
            cell,
            lo: plo,
            hi: phi,
            q: 0.0,
            eps: None,
        });
    }
    let mut pou = PartitionOfUnity {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        pieces_per_axis: pieces,
        overlap,
        pieces: out,
    };
    pou.fit_gradient_bounds();
    Ok(pou)
}

impl PartitionOfUnity {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Width of one core cell along each axis.
    pub fn cell_width(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / self.pieces_per_axis as f64)
            .collect()
    }

    /// `psi_i(x)` for every piece, with gradients.
    pub fn weights_and_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dim = self.dim();
        let mut raw = Vec::with_capacity(self.pieces.len());
        let mut draw = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let mut b = 1.0;
            let mut dlog = vec![0.0; dim];
            for k in 0..dim {
                let (v, dl) = bump_1d(x[k], p.lo[k], p.hi[k]);
                b *= v;
                dlog[k] = dl;
            }
            draw.push(dlog.iter().map(|d| d * b).collect::<Vec<f64>>());
            raw.push(b);
        }
        let s: f64 = raw.iter().sum();
        let ds: Vec<f64> = (0..dim).map(|k| draw.iter().map(|g| g[k]).sum()).collect();
        let psi: Vec<f64> = raw.iter().map(|r| r / s).collect();
        let grads = raw
            .iter()
            .zip(&draw)
            .map(|(r, g)| (0..dim).map(|k| (g[k] * s - r * ds[k]) / (s * s)).collect())
            .collect();
        (psi, grads)
    }

    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        self.weights_and_gradients(x).0
    }

    fn fit_gradient_bounds(&mut self) {
        let dim = self.dim();
        let per_axis = self.pieces_per_axis
            * match dim {
                1 => 400,
                2 => 60,
                _ => 20,
            }
            + 1;
        let total = per_axis.pow(dim as u32);
        let mut sup = vec![vec![0.0_f64; dim]; self.pieces.len()];
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut rest = flat;
            for k in (0..dim).rev() {
                let j = rest % per_axis;
                rest /= per_axis;
                x[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * j as f64 / (per_axis - 1) as f64;
            }
            let (_, grads) = self.weights_and_gradients(&x);
            for (s, g) in sup.iter_mut().zip(&grads) {
                for k in 0..dim {
                    s[k] = s[k].max(g[k].abs());
                }
            }
        }
        for (p, s) in self.pieces.iter_mut().zip(&sup) {
            p.q = Q_INFLATION * s.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }

    /// Sets `eps_i = max(min{V^e, W^e on the closed piece} / 4, floor)`,
    /// with minima over nodes of `ve` inside the working box.
    pub fn with_epsilons(mut self, ve: &ScalarField, we: &ScalarField, floor: f64) -> Result<Self> {
        let inside = |x: &[f64]| (0..x.len()).all(|k| x[k] >= self.lo[k] - 1e-12 && x[k] <= self.hi[k] + 1e-12);
        let mut eps = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let keep = |x: &[f64]| inside(x) && p.in_closure(x);
            let mv = ve.min_where(keep);
            let mw = we.min_where(keep);
            let (Some(mv), Some(mw)) = (mv, mw) else {
                return Err(Error::BoxTooSmall(0.0));
            };
            eps.push((0.25 * mv.min(mw)).max(floor));
        }
        for (p, e) in self.pieces.iter_mut().zip(eps) {
            p.eps = Some(e);
        }
        Ok(self)
    }

    /// `U_i` intersected with the working box.
    fn region(&self, p: &Piece) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.dim()).map(|k| p.lo[k].max(self.lo[k])).collect();
        let hi = (0..self.dim()).map(|k| p.hi[k].min(self.hi[k])).collect();
        (lo, hi)
    }
}

/// Local smoothings `(V_i, W_i)` of one piece and the bounds they meet.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPiece {
    pub index: usize,
    pub radius: Option<f64>,
    pub v: ScalarField,
    pub w: ScalarField,
}

fn sup_error(approx: &ScalarField, exact: &ScalarField, piece: &Piece) -> f64 {
    approx
        .nodes()
        .zip(approx.values())
        .filter(|(x, _)| piece.contains(x))
        .map(|(x, v)| (v - exact.eval_unchecked(&x)).abs())
        .fold(0.0, f64::max)
}

/// Convolves `ve` and `we` on each piece, halving the radius until
/// `|V^e - V_i| < eps_i / (2^(i+1) (1 + q_i))` and `|W^e - W_i| < eps_i` on
/// the piece.
pub fn smooth_pieces(ve: &ScalarField, we: &ScalarField, pou: &PartitionOfUnity) -> Result<Vec<SmoothedPiece>> {
    let width = pou.cell_width().into_iter().fold(f64::INFINITY, f64::min);
    let mut out = Vec::with_capacity(pou.pieces.len());
    for p in &pou.pieces {
        let eps = p
            .eps
            .ok_or_else(|| Error::InvalidArgument("partition has no per-piece epsilons".into()))?;
        let (lo, hi) = pou.region(p);
        // Largest radius the fields' boxes allow around this region.
        let room = (0..pou.dim())
            .flat_map(|k| {
                let vh = ve.hi();
                let wh = we.hi();
                [
                    lo[k] - ve.lo()[k],
                    vh[k] - hi[k],
                    lo[k] - we.lo()[k],
                    wh[k] - hi[k],
                ]
            })
            .fold(f64::INFINITY, f64::min);
        if !(room > 0.0) {
            return Err(Error::BoxTooSmall(room));
        }
        let v_req = eps / (2f64.powi(p.index as i32 + 1) * (1.0 + p.q));
        let w_req = eps;
        let mut r = (width / 4.0).min(room);
        let base = make_mollifier(pou.dim(), r)?;
        let mut last = (f64::INFINITY, f64::INFINITY);
        let mut found = None;
        for _ in 0..=MAX_HALVINGS {
            let m = base.rescaled(r)?;
            let vi = convolve_region(ve, &m, &lo, &hi, &format!("V{}", p.index))?;
            let wi = convolve_region(we, &m, &lo, &hi, &format!("W{}", p.index))?;
            let v_err = sup_error(&vi, ve, p);
            let w_err = sup_error(&wi, we, p);
            last = (v_err, w_err);
            if v_err < v_req && w_err < w_req {
                found = Some((vi, wi));
                break;
            }
            r /= 2.0;
        }
        let Some((v, w)) = found else {
            return Err(Error::PieceBoundUnachievable {
                piece: p.index,
                v_err: last.0,
                v_req,
                w_err: last.1,
                w_req,
            });
        };
        out.push(SmoothedPiece {
            index: p.index,
            radius: Some(r),
            v,
            w,
        });
    }
    Ok(out)
}

/// Per-piece constants and the local bounds actually met.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceBound {
    pub index: usize,
    pub radius: Option<f64>,
    pub eps: f64,
    pub q: f64,
    pub v_required: f64,
    pub v_achieved: f64,
    pub w_required: f64,
    pub w_achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlueReport {
    pub pieces: Vec<PieceBound>,
    /// Largest `|V_s - V^e| - V^e / 8` over nodes of the working box.
    pub worst_excess: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GlueReport {
    /// One `key=value` line per piece, then a summary line.
    pub fn to_text(&self) -> String {
        use crate::io::fmt_sig;
        let mut s = String::new();
        for p in &self.pieces {
            s.push_str(&format!(
                "i={} r_i={} eps_i={} q_i={} v_bound={} v_required={} w_bound={} w_required={}\n",
                p.index,
                p.radius.map(fmt_sig).unwrap_or_else(|| "none".into()),
                fmt_sig(p.eps),
                fmt_sig(p.q),
                fmt_sig(p.v_achieved),
                fmt_sig(p.v_required),
                fmt_sig(p.w_achieved),
                fmt_sig(p.w_required),
            ));
        }
        s.push_str(&format!(
            "worst_excess={} tolerance={} passed={}\n",
            fmt_sig(self.worst_excess),
            fmt_sig(self.tolerance),
            self.passed
        ));
        s
    }
}

pub struct Glued {
    pub v: ScalarField,
    pub w: ScalarField,
    pub report: GlueReport,
}

/// `V_s = sum psi_i V_i` and `W_s = (1/5) sum psi_i W_i` on the nodes of
/// `ve` inside the working box.
pub fn glue(
    ve: &ScalarField,
    we: &ScalarField,
    pieces: &[SmoothedPiece],
    pou: &PartitionOfUnity,
    tol: f64,
) -> Result<Glued> {
    if pieces.len() != pou.pieces.len() {
        return Err(Error::InvalidArgument(format!(
            "{} smoothed pieces for a {}-piece partition",
            pieces.len(),
            pou.pieces.len()
        )));
    }
    let blend = |x: &[f64], pick: fn(&SmoothedPiece) -> &ScalarField| -> Result<f64> {
        let psi = pou.weights(x);
        let mut acc = 0.0;
        for (wt, sp) in psi.iter().zip(pieces) {
            if *wt > 0.0 {
                acc += wt * pick(sp).eval(x)?;
            }
        }
        Ok(acc)
    };
    let v = subgrid(ve, &pou.lo, &pou.hi, "Vs", |x| blend(x, |sp| &sp.v))
        .ok_or(Error::BoxTooSmall(0.0))??
        .with_gradients();
    let w = subgrid(ve, &pou.lo, &pou.hi, "Ws", |x| Ok(blend(x, |sp| &sp.w)? / 5.0))
        .ok_or(Error::BoxTooSmall(0.0))??;

    let bounds = pou
        .pieces
        .iter()
        .zip(pieces)
        .map(|(p, sp)| {
            let eps = p.eps.unwrap_or(0.0);
            PieceBound {
                index: p.index,
                radius: sp.radius,
                eps,
                q: p.q,
                v_required: eps / (2f64.powi(p.index as i32 + 1) * (1.0 + p.q)),
                v_achieved: sup_error(&sp.v, ve, p),
                w_required: eps,
                w_achieved: sup_error(&sp.w, we, p),
            }
        })
        .collect();
    let worst_excess = v
        .nodes()
        .zip(v.values())
        .map(|(x, vs)| {
            let e = ve.eval_unchecked(&x);
            (vs - e).abs() - e / 8.0
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Glued {
        v,
        w,
        report: GlueReport {
            pieces: bounds,
            worst_excess,
            tolerance: tol,
            passed: worst_excess <= tol,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_piece_is_identically_one() {
        let pou = build_partition(&[-1.0], &[1.0], 1, 0.25).unwrap();
        assert_eq!(pou.pieces.len(), 1);
        assert_eq!(pou.pieces[0].q, 0.0);
        for x in [-1.0, -0.3, 0.0, 0.9, 1.0] {
            assert_eq!(pou.weights(&[x]), vec![1.0]);
        }
    }

    #[test]
    fn weights_sum_to_one_and_vanish_outside() {
        let pou = build_partition(&[-3.0, 0.0], &[3.0, 2.0], 3, 0.3).unwrap();
        assert_eq!(pou.pieces.len(), 9);
        for i in 0..=30 {
            for j in 0..=10 {
                let x = [-3.0 + 0.2 * i as f64, 0.2 * j as f64];
                let psi = pou.weights(&x);
                assert!((psi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (p, w) in pou.pieces.iter().zip(&psi) {
                    assert!(*w >= 0.0);
                    if !p.contains(&x) {
                        assert_eq!(*w, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(build_partition(&[1.0], &[1.0], 2, 0.2), Err(Error::DegenerateBox(_))));
        assert!(build_partition(&[0.0], &[1.0], 2, 0.0).is_err());
        assert!(build_partition(&[0.0], &[1.0], 2, 0.6).is_err());
        assert!(build_partition(&[0.0], &[1.0], 0, 0.2).is_err());
    }

    #[test]
    fn identity_gluing() {
        let ve = ScalarField::from_fn(&[-2.0], &[2.0], 0.01, "Ve", |x| x[0] * x[0]).unwrap();
        let we = ScalarField::from_fn(&[-2.0], &[2.0], 0.01, "We", |x| x[0].abs()).unwrap();
        let pou = build_partition(&[-2.0], &[2.0], 2, 0.25)
            .unwrap()
            .with_epsilons(&ve, &we, 1e-6)
            .unwrap();
        let pieces: Vec<_> = pou
            .pieces
            .iter()
            .map(|p| SmoothedPiece {
                index: p.index,
                radius: None,
                v: ve.clone(),
                w: we.clone(),
            })
            .collect();
        let g = glue(&ve, &we, &pieces, &pou, 1e-12).unwrap();
        for (a, b) in g.v.values().iter().zip(ve.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g.w.values().iter().zip(we.values()) {
            assert!((a - b / 5.0).abs() < 1e-12);
        }
        assert!(g.report.passed);
        assert!(g.report.to_text().lines().count() == 3);
    }
}
