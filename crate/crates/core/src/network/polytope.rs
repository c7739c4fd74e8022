//! H-represented polytopes `{u : A u <= b, E u = f}` with vertex enumeration
//! by active-set search.
//!
//! A vertex of a pointed polyhedron in dimension `d` is a feasible point at
//! which all equality rows plus `d - rank(E)` linearly independent inequality
//! rows are active. At desk scale (`d <= 6`, a few dozen rows) enumerating
//! all such subsets is cheap and has no degeneracy pitfalls. Boundedness is
//! decided the same way by searching for extreme rays of the recession cone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

pub const MAX_DIM: usize = 6;

/// Feasibility tolerance for enumerated vertices.
pub const FEAS_TOL: f64 = 1e-9;
/// Vertices closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-8;

const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    dim: usize,
    ineq_rows: Vec<Vec<f64>>,
    ineq_rhs: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    /// The axis-aligned box `lo <= u <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut p = Self::new(dim);
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            p.push_le(e.clone(), hi[k]);
            e[k] = -1.0;
            p.push_le(e, -lo[k]);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds the row `a . u <= b`.
    pub fn push_le(&mut self, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.dim);
        self.ineq_rows.push(a);
        self.ineq_rhs.push(b);
    }

    /// Adds the row `a . u = b`.
    pub fn push_eq(&mut self, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.dim);
        self.eq_rows.push(a);
        self.eq_rhs.push(b);
    }

    pub fn inequalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.ineq_rows
            .iter()
            .map(Vec::as_slice)
            .zip(self.ineq_rhs.iter().copied())
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq_rows
            .iter()
            .map(Vec::as_slice)
            .zip(self.eq_rhs.iter().copied())
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_rows.len()
    }

    /// Largest constraint violation at `u` (zero when feasible).
    pub fn violation(&self, u: &[f64]) -> f64 {
        let ineq = self
            .inequalities()
            .map(|(a, b)| (vecops::dot(a, u) - b) / vecops::norm(a).max(1.0))
            .fold(0.0_f64, f64::max);
        let eq = self
            .equalities()
            .map(|(a, b)| (vecops::dot(a, u) - b).abs() / vecops::norm(a).max(1.0))
            .fold(0.0_f64, f64::max);
        ineq.max(eq)
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.violation(u) <= tol
    }

    /// Enumerates all vertices, sorted lexicographically.
    ///
    /// Returns an empty list for an empty polytope.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        vertex_enumerate(self)
    }
}

/// Enumerates the vertices of a bounded polytope of dimension at most
/// [`MAX_DIM`].
pub fn vertex_enumerate(p: &Polytope) -> Result<Vec<Vec<f64>>> {
    let d = p.dim;
    if d > MAX_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    if d == 0 {
        return Ok(vec![Vec::new()]);
    }
    let (eq_rows, eq_rhs) = independent_rows(&p.eq_rows, &p.eq_rhs);
    let m = eq_rows.len();
    if m > d {
        return Ok(Vec::new());
    }
    let k = d - m;

    let mut verts: Vec<Vec<f64>> = Vec::new();
    for subset in Combinations::new(p.ineq_rows.len(), k) {
        let mut rows: Vec<&[f64]> = eq_rows.iter().map(Vec::as_slice).collect();
        let mut rhs = eq_rhs.clone();
        for &i in &subset {
            rows.push(&p.ineq_rows[i]);
            rhs.push(p.ineq_rhs[i]);
        }
        let Some(u) = solve_square(&rows, &rhs) else {
            continue;
        };
        if p.violation(&u) > FEAS_TOL {
            continue;
        }
        if !verts.iter().any(|v| vecops::dist(v, &u) <= DEDUP_TOL) {
            verts.push(u);
        }
    }

    if !verts.is_empty() && has_recession_direction(p, &eq_rows, k) {
        return Err(Error::Unbounded);
    }
    // A nonempty polyhedron with a lineality space has no vertices at all;
    // catch that by probing feasibility at a least-squares point.
    if verts.is_empty() && rank(&all_rows(p)) < d && lineality_feasible(p) {
        return Err(Error::Unbounded);
    }

    verts.sort_by(|a, b| lex_cmp(a, b));
    Ok(verts)
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn all_rows(p: &Polytope) -> Vec<Vec<f64>> {
    p.ineq_rows.iter().chain(&p.eq_rows).cloned().collect()
}

fn to_matrix(rows: &[&[f64]], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let svd = to_matrix(&refs, cols).svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax.max(1.0))
        .count()
}

/// Greedy Gram-Schmidt selection of a linearly independent subset of rows.
fn independent_rows(rows: &[Vec<f64>], rhs: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out_rows = Vec::new();
    let mut out_rhs = Vec::new();
    for (row, &b) in rows.iter().zip(rhs) {
        let mut r = row.clone();
        for q in &basis {
            let c = vecops::dot(&r, q);
            r = vecops::axpy(&r, -c, q);
        }
        let nr = vecops::norm(&r);
        if nr > 1e-10 * vecops::norm(row).max(1.0) {
            basis.push(vecops::scaled(&r, 1.0 / nr));
            out_rows.push(row.clone());
            out_rhs.push(b);
        }
    }
    (out_rows, out_rhs)
}

fn solve_square(rows: &[&[f64]], rhs: &[f64]) -> Option<Vec<f64>> {
    let d = rows.len();
    let a = to_matrix(rows, d);
    let scale: f64 = rows.iter().map(|r| vecops::norm(r).max(1e-300)).product();
    let lu = a.clone().full_piv_lu();
    if (lu.determinant() / scale).abs() < SINGULAR_TOL {
        return None;
    }
    let x = lu.solve(&DVector::from_column_slice(rhs))?;
    Some(x.iter().copied().collect())
}

/// True when the recession cone `{dir : A dir <= 0, E dir = 0}` has an
/// extreme ray.
fn has_recession_direction(p: &Polytope, eq_rows: &[Vec<f64>], k: usize) -> bool {
    let d = p.dim;
    if k == 0 {
        return false;
    }
    for subset in Combinations::new(p.ineq_rows.len(), k - 1) {
        let mut rows: Vec<&[f64]> = eq_rows.iter().map(Vec::as_slice).collect();
        for &i in &subset {
            rows.push(&p.ineq_rows[i]);
        }
        let Some(dir) = null_direction(&rows, d) else {
            continue;
        };
        for sign in [1.0, -1.0] {
            let cand = vecops::scaled(&dir, sign);
            let ok = p
                .ineq_rows
                .iter()
                .all(|a| vecops::dot(a, &cand) <= FEAS_TOL * vecops::norm(a).max(1.0));
            if ok {
                return true;
            }
        }
    }
    false
}

/// Unit vector spanning a one-dimensional null space, if that is what the
/// rows leave.
fn null_direction(rows: &[&[f64]], d: usize) -> Option<Vec<f64>> {
    // Pad to a square system so the SVD returns a full right basis.
    let mut padded: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    while padded.len() < d {
        padded.push(vec![0.0; d]);
    }
    let refs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    let svd = to_matrix(&refs, d).svd(false, true);
    let vt = svd.v_t?;
    let smax = svd.singular_values.max().max(1.0);
    let small: Vec<usize> = (0..d)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .collect();
    if small.len() != 1 {
        return None;
    }
    Some(vt.row(small[0]).iter().copied().collect())
}

fn lineality_feasible(p: &Polytope) -> bool {
    // With no vertices and deficient rank, test the least-squares point of
    // the equality system (or the origin) for feasibility. This is only a
    // heuristic for the unusual lineality case.
    let d = p.dim;
    let u = if p.eq_rows.is_empty() {
        vec![0.0; d]
    } else {
        let refs: Vec<&[f64]> = p.eq_rows.iter().map(Vec::as_slice).collect();
        let a = to_matrix(&refs, d);
        let b = DVector::from_column_slice(&p.eq_rhs);
        match a.svd(true, true).solve(&b, 1e-12) {
            Ok(x) => x.iter().copied().collect(),
            Err(_) => return false,
        }
    };
    p.violation(&u) <= FEAS_TOL
}

/// Lexicographic k-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
