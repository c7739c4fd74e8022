//! Work-conserving fluid networks as differential inclusions.
//!
//! For a network with `J` stations and `n` fluid classes the admissible
//! allocations at level `x >= 0` are
//!
//! ```text
//! U(x) = { u >= 0 : C u <= e, (C x)^T (e - C u) = 0 }
//! ```
//!
//! and the velocity set is `G(x) = { alpha - (I - P^T) M u : u in U(x) }`
//! intersected with the contingent cone of the orthant at `x`. Both are kept
//! as polytopes: the allocation set in H-form, the velocity set as the image
//! of its vertices.

pub mod hull;
pub mod polytope;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use hull::VelocitySet;
pub use polytope::{vertex_enumerate, Polytope};

use crate::error::{Error, NetworkViolation, Result};
use crate::vecops;

/// A matrix in a network file: either one flat row-major array or an array
/// of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixData {
    fn flatten(&self) -> Vec<f64> {
        match self {
            MatrixData::Flat(v) => v.clone(),
            MatrixData::Rows(r) => r.iter().flatten().copied().collect(),
        }
    }
}

/// Raw network description as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidNetworkSpec {
    pub stations: usize,
    pub classes: usize,
    pub constituency: MatrixData,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub routing: MatrixData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl FluidNetworkSpec {
    /// Single station serving a single class with no feedback.
    pub fn single_station(alpha: f64, mu: f64) -> Self {
        Self {
            stations: 1,
            classes: 1,
            constituency: MatrixData::Flat(vec![1.0]),
            alpha: vec![alpha],
            mu: vec![mu],
            routing: MatrixData::Flat(vec![0.0]),
            lipschitz: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A network that passed [`validate_network`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidNetwork {
    pub spec: FluidNetworkSpec,
    /// Constituency rows, `J x n`.
    pub constituency: Vec<Vec<f64>>,
    /// Routing rows, `n x n`.
    pub routing: Vec<Vec<f64>>,
    /// `(I - P^T) M`, `n x n`.
    pub drain_map: Vec<Vec<f64>>,
    pub spectral_radius: f64,
    /// Bound on achievable speeds, either supplied or derived.
    pub lipschitz: f64,
}

impl FluidNetwork {
    pub fn stations(&self) -> usize {
        self.spec.stations
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn alpha(&self) -> &[f64] {
        &self.spec.alpha
    }
}

/// Checks every structural invariant and computes the spectral radius of
/// the routing matrix and a speed bound.
pub fn validate_network(spec: &FluidNetworkSpec) -> Result<FluidNetwork, Vec<NetworkViolation>> {
    let j = spec.stations;
    let n = spec.classes;
    let mut errs = Vec::new();

    if j == 0 || n == 0 {
        errs.push(NetworkViolation::Shape(
            "stations and classes must be positive".into(),
        ));
        return Err(errs);
    }
    if j > n {
        errs.push(NetworkViolation::Shape(format!(
            "{j} stations exceed {n} classes"
        )));
    }
    let c_flat = spec.constituency.flatten();
    let p_flat = spec.routing.flatten();
    if c_flat.len() != j * n {
        errs.push(NetworkViolation::Shape(format!(
            "constituency has {} entries, expected {}",
            c_flat.len(),
            j * n
        )));
    }
    if p_flat.len() != n * n {
        errs.push(NetworkViolation::Shape(format!(
            "routing has {} entries, expected {}",
            p_flat.len(),
            n * n
        )));
    }
    if spec.alpha.len() != n || spec.mu.len() != n {
        errs.push(NetworkViolation::Shape(format!(
            "alpha/mu must have {n} entries"
        )));
    }
    if !errs.is_empty() {
        return Err(errs);
    }

    let constituency: Vec<Vec<f64>> = c_flat.chunks(n).map(<[f64]>::to_vec).collect();
    let routing: Vec<Vec<f64>> = p_flat.chunks(n).map(<[f64]>::to_vec).collect();

    if c_flat.iter().any(|&c| c != 0.0 && c != 1.0) {
        errs.push(NetworkViolation::ConstituencyMalformed(
            "entries must be 0 or 1".into(),
        ));
    }
    for k in 0..n {
        let ones = (0..j).filter(|&s| constituency[s][k] == 1.0).count();
        if ones != 1 {
            errs.push(NetworkViolation::ConstituencyMalformed(format!(
                "class {} is served at {ones} stations",
                k + 1
            )));
        }
    }
    for (name, v) in [("alpha", &spec.alpha), ("mu", &spec.mu)] {
        for (k, &x) in v.iter().enumerate() {
            if !(x >= 0.0) || !x.is_finite() {
                errs.push(NetworkViolation::NegativeRate(format!(
                    "{name}[{}] = {x}",
                    k + 1
                )));
            }
        }
    }
    if let Some(l) = spec.lipschitz {
        if !(l > 0.0) || !l.is_finite() {
            errs.push(NetworkViolation::NegativeRate(format!("lipschitz = {l}")));
        }
    }
    let mut routing_ok = true;
    for (r, row) in routing.iter().enumerate() {
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            routing_ok = false;
            errs.push(NetworkViolation::Routing(format!(
                "row {} has entries outside [0,1]",
                r + 1
            )));
        }
        let s: f64 = row.iter().sum();
        if s > 1.0 + 1e-12 {
            routing_ok = false;
            errs.push(NetworkViolation::Routing(format!(
                "row {} sums to {s}",
                r + 1
            )));
        }
    }
    let rho = if routing_ok {
        let rho = spectral_radius(&routing);
        if rho >= 1.0 - 1e-10 {
            errs.push(NetworkViolation::SpectralRadiusTooLarge { rho });
        }
        rho
    } else {
        f64::NAN
    };
    if !errs.is_empty() {
        return Err(errs);
    }

    let drain_map: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let id = if r == c { 1.0 } else { 0.0 };
                    (id - routing[c][r]) * spec.mu[c]
                })
                .collect()
        })
        .collect();
    let lipschitz = spec.lipschitz.unwrap_or_else(|| {
        let b = DMatrix::from_fn(n, n, |r, c| drain_map[r][c]);
        let op = b.svd(false, false).singular_values.max();
        vecops::norm(&spec.alpha) + op * (j as f64).sqrt()
    });

    Ok(FluidNetwork {
        spec: spec.clone(),
        constituency,
        routing,
        drain_map,
        spectral_radius: rho,
        lipschitz,
    })
}

/// Spectral radius of a nonnegative square matrix.
///
/// Power iteration on `P + I` (which is aperiodic and has Perron root
/// `rho(P) + 1`) with Collatz-Wielandt bounds `min_i (Px)_i/x_i <= rho <=
/// max_i (Px)_i/x_i`, stopped at a gap of `1e-10`. Defective spectra make the
/// bounds converge sublinearly; after the iteration budget the eigenvalues
/// of the Schur form are used instead.
pub fn spectral_radius(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    let mut x = vec![1.0; n];
    for _ in 0..20_000 {
        let px: Vec<f64> = p.iter().map(|row| vecops::dot(row, &x)).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (a, b) in px.iter().zip(&x) {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= 1e-10 {
            return hi;
        }
        let next: Vec<f64> = px.iter().zip(&x).map(|(a, b)| a + b).collect();
        let s = next.iter().copied().fold(0.0, f64::max);
        x = next.iter().map(|v| v / s).collect();
    }
    let m = DMatrix::from_fn(n, n, |r, c| p[r][c]);
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn check_state(x: &[f64], n: usize) -> Result<f64> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let tol = vecops::zero_tol(x);
    if let Some(&bad) = x.iter().find(|&&v| v < -tol || v.is_nan()) {
        return Err(Error::NegativeState(bad));
    }
    Ok(tol)
}

/// Which coordinates are empty and which stations hold fluid at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActivityPattern {
    pub zero_coords: u64,
    pub busy_stations: u64,
}

impl FluidNetwork {
    pub fn pattern(&self, x: &[f64]) -> Result<ActivityPattern> {
        let tol = check_state(x, self.classes())?;
        let mut zero_coords = 0u64;
        for (i, &v) in x.iter().enumerate() {
            if v <= tol {
                zero_coords |= 1 << i;
            }
        }
        let mut busy_stations = 0u64;
        for (s, row) in self.constituency.iter().enumerate() {
            if vecops::dot(row, x) > tol {
                busy_stations |= 1 << s;
            }
        }
        Ok(ActivityPattern {
            zero_coords,
            busy_stations,
        })
    }

    fn allocation_for(&self, pat: ActivityPattern) -> Polytope {
        let n = self.classes();
        let mut p = Polytope::new(n);
        for k in 0..n {
            let mut row = vec![0.0; n];
            row[k] = -1.0;
            p.push_le(row, 0.0);
        }
        for (s, row) in self.constituency.iter().enumerate() {
            if pat.busy_stations & (1 << s) != 0 {
                p.push_eq(row.clone(), 1.0);
            } else {
                p.push_le(row.clone(), 1.0);
            }
        }
        p
    }

    /// Allocation constraints plus the orthant-cone rows `(alpha - B u)_i >=
    /// 0` for empty coordinates, all in allocation space.
    pub fn velocity_preimage(&self, pat: ActivityPattern) -> Polytope {
        let mut p = self.allocation_for(pat);
        for i in 0..self.classes() {
            if pat.zero_coords & (1 << i) != 0 {
                p.push_le(self.drain_map[i].clone(), self.spec.alpha[i]);
            }
        }
        p
    }

    pub fn velocity(&self, u: &[f64]) -> Vec<f64> {
        self.spec
            .alpha
            .iter()
            .zip(&self.drain_map)
            .map(|(a, row)| a - vecops::dot(row, u))
            .collect()
    }

    pub fn rhs_for_pattern(&self, pat: ActivityPattern) -> Result<VelocitySet> {
        let pre = self.velocity_preimage(pat);
        let verts = pre.vertices()?;
        if verts.is_empty() {
            return Err(Error::EmptyVelocitySet(Vec::new()));
        }
        Ok(VelocitySet::from_points(
            self.classes(),
            verts.iter().map(|u| self.velocity(u)),
        ))
    }

    /// Largest number of velocity-set generators over all activity patterns.
    pub fn max_vertex_count(&self) -> usize {
        let n = self.classes();
        let mut best = 1;
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if mask & (1 << i) != 0 { 0.0 } else { 1.0 })
                .collect();
            if let Ok(set) = rhs_set(self, &x) {
                best = best.max(set.vertices().len());
            }
        }
        best
    }
}

/// Admissible allocation rates at `x`.
///
/// The work-conservation equality is split per station: `(Cu)_j = 1`
/// whenever station `j` holds fluid.
pub fn allocation_set(net: &FluidNetwork, x: &[f64]) -> Result<Polytope> {
    Ok(net.allocation_for(net.pattern(x)?))
}

/// Contingent cone of the nonnegative orthant at `x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthantCone {
    pub dim: usize,
    pub zero_index_set: Vec<usize>,
}

impl OrthantCone {
    pub fn is_whole_space(&self) -> bool {
        self.zero_index_set.is_empty()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.zero_index_set.iter().all(|&i| v[i] >= -tol)
    }
}

pub fn contingent_cone(x: &[f64]) -> OrthantCone {
    let tol = vecops::zero_tol(x);
    OrthantCone {
        dim: x.len(),
        zero_index_set: (0..x.len()).filter(|&i| x[i] <= tol).collect(),
    }
}

/// Velocity set `G(x)`.
pub fn rhs_set(net: &FluidNetwork, x: &[f64]) -> Result<VelocitySet> {
    let pat = net.pattern(x)?;
    net.rhs_for_pattern(pat).map_err(|e| match e {
        Error::EmptyVelocitySet(_) => Error::EmptyVelocitySet(x.to_vec()),
        other => other,
    })
}

/// A set-valued right-hand side with compact convex polytopic values.
pub trait Inclusion: Send + Sync {
    fn dim(&self) -> usize;

    fn velocity_set(&self, x: &[f64]) -> Result<VelocitySet>;

    /// Bound on every achievable speed.
    fn speed_bound(&self) -> f64;

    /// States with the same key have the same velocity set.
    fn cache_key(&self, _x: &[f64]) -> Option<u128> {
        None
    }
}

impl Inclusion for FluidNetwork {
    fn dim(&self) -> usize {
        self.classes()
    }

    fn velocity_set(&self, x: &[f64]) -> Result<VelocitySet> {
        rhs_set(self, x)
    }

    fn speed_bound(&self) -> f64 {
        self.lipschitz
    }

    fn cache_key(&self, x: &[f64]) -> Option<u128> {
        self.pattern(x)
            .ok()
            .map(|p| ((p.zero_coords as u128) << 64) | p.busy_stations as u128)
    }
}

type VertexFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// An inclusion given directly by the generators of its values.
pub struct VertexMap {
    dim: usize,
    speed_bound: f64,
    generators: Box<VertexFn>,
}

impl VertexMap {
    pub fn new(
        dim: usize,
        speed_bound: f64,
        generators: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            speed_bound,
            generators: Box::new(generators),
        }
    }

    /// `F(x) = {v}` for every `x`.
    pub fn constant(v: Vec<f64>) -> Self {
        let dim = v.len();
        let speed = vecops::norm(&v);
        Self::new(dim, speed.max(f64::MIN_POSITIVE), move |_| vec![v.clone()])
    }
}

impl std::fmt::Debug for VertexMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VertexMap")
            .field("dim", &self.dim)
            .field("speed_bound", &self.speed_bound)
            .finish_non_exhaustive()
    }
}

impl Inclusion for VertexMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity_set(&self, x: &[f64]) -> Result<VelocitySet> {
        check_state(x, self.dim)?;
        let pts = (self.generators)(x);
        if pts.is_empty() {
            return Err(Error::EmptyVelocitySet(x.to_vec()));
        }
        Ok(VelocitySet::from_points(self.dim, pts))
    }

    fn speed_bound(&self) -> f64 {
        self.speed_bound
    }
}

/// Memoizes velocity sets by [`Inclusion::cache_key`].
pub(crate) struct RhsCache<'a, I: Inclusion + ?Sized> {
    inc: &'a I,
    memo: HashMap<u128, VelocitySet>,
}

impl<'a, I: Inclusion + ?Sized> RhsCache<'a, I> {
    pub(crate) fn new(inc: &'a I) -> Self {
        Self {
            inc,
            memo: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, x: &[f64]) -> Result<VelocitySet> {
        match self.inc.cache_key(x) {
            Some(key) => {
                if let Some(s) = self.memo.get(&key) {
                    return Ok(s.clone());
                }
                let s = self.inc.velocity_set(x)?;
                self.memo.insert(key, s.clone());
                Ok(s)
            }
            None => self.inc.velocity_set(x),
        }
    }
}

/// Outcome of an upper-semicontinuity probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum UscOutcome {
    Pass,
    /// `(state, velocity)` is a limit of graph points that is not itself in
    /// the graph.
    Witness {
        state: Vec<f64>,
        velocity: Vec<f64>,
        distance: f64,
    },
}

/// Looks for a limit point of `graph(F)` along `approach` that escapes
/// `F(x)`.
///
/// Each generator of the last velocity set is followed back through the tail
/// of the sequence by nearest generators; the path is extrapolated linearly
/// in `|x_k - x|` to distance zero. A limit farther than `tol` from `F(x)`
/// is a witness that the graph is not closed.
pub fn usc_probe<I: Inclusion + ?Sized>(
    inc: &I,
    x: &[f64],
    approach: &[Vec<f64>],
    tol: f64,
) -> Result<UscOutcome> {
    if approach.is_empty() {
        return Err(Error::SequenceNotConverging);
    }
    let dists: Vec<f64> = approach.iter().map(|xk| vecops::dist(xk, x)).collect();
    let first = dists[0];
    let last = *dists.last().unwrap();
    if !(last <= 0.25 * first && last <= 0.1 * (1.0 + vecops::norm(x))) {
        return Err(Error::SequenceNotConverging);
    }

    let target = inc.velocity_set(x)?;
    let tail_len = (approach.len() / 4).max(2).min(approach.len());
    let tail = approach.len() - tail_len..approach.len();
    let sets: Vec<VelocitySet> = approach[tail.clone()]
        .iter()
        .map(|xk| inc.velocity_set(xk))
        .collect::<Result<_>>()?;
    let tail_d = &dists[tail];

    let mut worst: Option<(Vec<f64>, f64)> = None;
    for cand in sets.last().unwrap().vertices() {
        let path: Vec<Vec<f64>> = sets
            .iter()
            .map(|s| {
                s.vertices()
                    .iter()
                    .min_by(|a, b| vecops::dist(a, cand).total_cmp(&vecops::dist(b, cand)))
                    .unwrap()
                    .clone()
            })
            .collect();
        let limit = extrapolate_to_zero(tail_d, &path);
        let gap = target.distance(&limit);
        if gap > tol && worst.as_ref().is_none_or(|(_, g)| gap > *g) {
            worst = Some((limit, gap));
        }
    }
    Ok(match worst {
        Some((velocity, distance)) => UscOutcome::Witness {
            state: x.to_vec(),
            velocity: velocity.iter().map(|v| clean_zero(*v)).collect(),
            distance,
        },
        None => UscOutcome::Pass,
    })
}

fn clean_zero(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Per-coordinate least-squares line through `(d_k, v_k)`, evaluated at 0.
fn extrapolate_to_zero(d: &[f64], path: &[Vec<f64>]) -> Vec<f64> {
    let m = d.len() as f64;
    let dm = d.iter().sum::<f64>() / m;
    let sdd: f64 = d.iter().map(|x| (x - dm) * (x - dm)).sum();
    let dim = path[0].len();
    (0..dim)
        .map(|c| {
            let vm = path.iter().map(|p| p[c]).sum::<f64>() / m;
            if sdd <= 1e-300 {
                return vm;
            }
            let sdv: f64 = d
                .iter()
                .zip(path)
                .map(|(x, p)| (x - dm) * (p[c] - vm))
                .sum();
            vm - (sdv / sdd) * dm
        })
        .collect()
}
