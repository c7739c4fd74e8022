//! Velocity sets in vertex representation and Euclidean projection onto their
//! convex hull.
//!
//! Projection uses Wolfe's minimum-norm-point method: it walks through
//! affinely independent vertex subsets (faces of the hull), solving the
//! affine least-squares problem on each, so it terminates with the exact
//! nearest point up to rounding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::polytope::{lex_cmp, DEDUP_TOL};
use crate::vecops;

/// Convex hull of finitely many velocity vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySet {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}

impl VelocitySet {
    /// Builds the hull of `points`, merging near-duplicates and sorting the
    /// remaining generators lexicographically.
    pub fn from_points(dim: usize, points: impl IntoIterator<Item = Vec<f64>>) -> Self {
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for p in points {
            debug_assert_eq!(p.len(), dim);
            if !vertices.iter().any(|v| vecops::dist(v, &p) <= DEDUP_TOL) {
                vertices.push(p);
            }
        }
        vertices.sort_by(|a, b| lex_cmp(a, b));
        Self { dim, vertices }
    }

    pub fn singleton(v: Vec<f64>) -> Self {
        Self {
            dim: v.len(),
            vertices: vec![v],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Generators of the hull. Every extreme point is among them.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Closest hull point to `target`. Panics on an empty set.
    pub fn nearest(&self, target: &[f64]) -> Vec<f64> {
        assert!(!self.is_empty(), "nearest point of an empty velocity set");
        let shifted: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|v| vecops::sub(v, target))
            .collect();
        let x = min_norm_point(&shifted);
        vecops::add(&x, target)
    }

    pub fn min_norm(&self) -> Vec<f64> {
        self.nearest(&vec![0.0; self.dim])
    }

    pub fn distance(&self, v: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        vecops::dist(&self.nearest(v), v)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.distance(v) <= tol
    }

    /// Largest Euclidean norm over the generators.
    pub fn max_speed(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| vecops::norm(v))
            .fold(0.0, f64::max)
    }
}

const Z1: f64 = 1e-12;
const Z2: f64 = 1e-10;
const Z3: f64 = 1e-10;

/// Minimum-norm point of `conv(points)`.
pub fn min_norm_point(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    if points.len() == 1 {
        return points[0].clone();
    }
    let scale = points
        .iter()
        .map(|p| vecops::dot(p, p))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return vec![0.0; n];
    }

    let start = (0..points.len())
        .min_by(|&a, &b| {
            vecops::dot(&points[a], &points[a]).total_cmp(&vecops::dot(&points[b], &points[b]))
        })
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..10_000 {
        // Major cycle: most improving generator.
        let (j, best) = (0..points.len())
            .map(|j| (j, vecops::dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let xx = vecops::dot(&x, &x);
        if best > xx - Z2 * scale || active.contains(&j) {
            return x;
        }
        active.push(j);
        weights.push(0.0);

        // Minor cycles: move to the affine minimizer while it stays in the
        // relative interior, otherwise drop the blocking generators.
        loop {
            let alpha = affine_minimizer(points, &active);
            if alpha.iter().all(|&a| a > Z1) {
                weights = alpha;
                x = combine(points, &active, &weights);
                break;
            }
            let mut theta = 1.0_f64;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= Z1 {
                    let denom = w - a;
                    if denom > 0.0 {
                        theta = theta.min(w / denom);
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w += theta * (a - *w);
            }
            let mut keep_idx = Vec::new();
            let mut keep_w = Vec::new();
            for (i, &w) in active.iter().zip(&weights) {
                if w > Z3 {
                    keep_idx.push(*i);
                    keep_w.push(w);
                }
            }
            if keep_idx.is_empty() {
                // Numerical breakdown; fall back to the best single generator.
                keep_idx.push(active[0]);
                keep_w.push(1.0);
            }
            let total: f64 = keep_w.iter().sum();
            keep_w.iter_mut().for_each(|w| *w /= total);
            active = keep_idx;
            weights = keep_w;
            x = combine(points, &active, &weights);
            if active.len() == 1 {
                break;
            }
        }
    }
    x
}

fn combine(points: &[Vec<f64>], active: &[usize], weights: &[f64]) -> Vec<f64> {
    let n = points[0].len();
    let mut x = vec![0.0; n];
    for (&i, &w) in active.iter().zip(weights) {
        for (xk, pk) in x.iter_mut().zip(&points[i]) {
            *xk += w * pk;
        }
    }
    x
}

/// Weights `a` with `sum a = 1` minimizing `|sum a_i p_i|`.
fn affine_minimizer(points: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for r in 0..k {
        for c in 0..k {
            m[(r, c)] = vecops::dot(&points[active[r]], &points[active[c]]);
        }
        m[(r, k)] = 1.0;
        m[(k, r)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| m.svd(true, true).solve(&rhs, 1e-14).ok())
        .unwrap_or_else(|| {
            let mut s = DVector::zeros(k + 1);
            s[0] = 1.0;
            s
        });
    sol.iter().take(k).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_projection() {
        let s = VelocitySet::from_points(1, vec![vec![0.0], vec![1.0]]);
        assert_eq!(s.nearest(&[-2.0]), vec![0.0]);
        assert_eq!(s.nearest(&[3.0]), vec![1.0]);
        assert!((s.nearest(&[0.25])[0] - 0.25).abs() < 1e-12);
        assert_eq!(s.min_norm(), vec![0.0]);
    }

    #[test]
    fn triangle_projection_onto_edge() {
        let s = VelocitySet::from_points(
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        );
        let p = s.min_norm();
        assert!(vecops::dist(&p, &[0.5, 0.5]) < 1e-10, "{p:?}");
        assert!(s.contains(&[0.9, 0.9], 1e-12));
        assert!((s.distance(&[0.0, 0.0]) - 0.5_f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn interior_target_is_fixed() {
        let s = VelocitySet::from_points(
            2,
            vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]],
        );
        let q = s.nearest(&[0.3, -0.2]);
        assert!(vecops::dist(&q, &[0.3, -0.2]) < 1e-10);
    }

    #[test]
    fn duplicates_merge() {
        let s = VelocitySet::from_points(1, vec![vec![1.0], vec![1.0 + 1e-12], vec![-1.0]]);
        assert_eq!(s.vertices().len(), 2);
    }
}
