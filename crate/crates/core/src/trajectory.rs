//! Sampled trajectories of an inclusion and the operations of the trajectory
//! space: scaling, shifting, concatenation, and the metric of uniform
//! convergence on compact time intervals.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::network::{Inclusion, RhsCache, VelocitySet};
use crate::vecops;

/// Slack allowed in the per-step Lipschitz check.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;

/// Uniformly sampled Lipschitz path in the nonnegative orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    step: f64,
    samples: Vec<Vec<f64>>,
    lipschitz: f64,
}

impl Trajectory {
    pub fn new(step: f64, samples: Vec<Vec<f64>>, lipschitz: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("trajectory needs at least one sample".into()));
        }
        let n = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self {
            step,
            samples,
            lipschitz,
        })
    }

    /// Samples `f(k h)` for `k = 0..=round(horizon / h)`.
    pub fn from_fn(step: f64, horizon: f64, lipschitz: f64, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let n = steps_for(horizon, step);
        let samples = (0..=n).map(|k| f(k as f64 * step)).collect();
        Self {
            step,
            samples,
            lipschitz,
        }
    }

    /// The constant path `x` on `[0, horizon]`.
    pub fn constant(x: Vec<f64>, step: f64, horizon: f64) -> Self {
        Self::from_fn(step, horizon, 0.0, |_| x.clone())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.samples.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.step * k as f64
    }

    pub fn start(&self) -> &[f64] {
        &self.samples[0]
    }

    pub fn last(&self) -> &[f64] {
        self.samples.last().unwrap()
    }

    /// Linear interpolation between samples; clamps to the end points.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let pos = (t / self.step).max(0.0);
        let k = pos.floor() as usize;
        if k + 1 >= self.samples.len() {
            return self.last().to_vec();
        }
        let w = pos - k as f64;
        if w <= 1e-12 {
            return self.samples[k].clone();
        }
        vecops::lerp(&self.samples[k], &self.samples[k + 1], w)
    }

    /// Forward difference `(x_{k+1} - x_k) / h`.
    pub fn step_velocity(&self, k: usize) -> Vec<f64> {
        vecops::scaled(
            &vecops::sub(&self.samples[k + 1], &self.samples[k]),
            1.0 / self.step,
        )
    }

    pub fn step_velocities(&self) -> Vec<Vec<f64>> {
        (0..self.samples.len().saturating_sub(1))
            .map(|k| self.step_velocity(k))
            .collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(|x| vecops::norm(x)).collect()
    }

    /// Largest observed speed `|x_{k+1} - x_k| / h`.
    pub fn max_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| vecops::dist(&w[0], &w[1]) / self.step)
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x1,...,xn`.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header(self.dim()).join(",");
        out.push('\n');
        for (k, x) in self.samples.iter().enumerate() {
            out.push_str(&io::csv_row(
                std::iter::once(self.time(k)).chain(x.iter().copied()),
            ));
            out.push('\n');
        }
        out
    }

    /// Reads a dump written by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str, lipschitz: f64) -> Result<Self> {
        let header = text.lines().next().unwrap_or_default();
        let n = header.split(',').count().saturating_sub(1);
        let rows = io::parse_csv(text, &csv_header(n))?;
        if rows.len() < 2 {
            return Err(Error::Parse("trajectory dump needs two rows".into()));
        }
        let step = rows[1][0] - rows[0][0];
        Self::new(step, rows.into_iter().map(|r| r[1..].to_vec()).collect(), lipschitz)
    }
}

fn csv_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect()
}

pub(crate) fn steps_for(horizon: f64, step: f64) -> usize {
    let r = horizon / step;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n as usize
    } else {
        r.ceil() as usize
    }
}

/// How a velocity is picked from the velocity set at each Euler step.
#[derive(Clone, PartialEq)]
pub enum SelectionRule {
    MinNorm,
    /// The `i`-th generator in lexicographic order (modulo the count).
    Vertex(usize),
    /// Nearest point to the `k`-th target velocity at step `k`; the last
    /// target is reused past the end.
    NearestTo(Arc<Vec<Vec<f64>>>),
}

impl SelectionRule {
    pub fn label(&self) -> String {
        match self {
            SelectionRule::MinNorm => "min_norm".into(),
            SelectionRule::Vertex(i) => format!("vertex({i})"),
            SelectionRule::NearestTo(_) => "nearest_to".into(),
        }
    }

    fn pick(&self, set: &VelocitySet, k: usize) -> Vec<f64> {
        match self {
            SelectionRule::MinNorm => set.min_norm(),
            SelectionRule::Vertex(i) => set.vertices()[i % set.vertices().len()].clone(),
            SelectionRule::NearestTo(path) => {
                let target = path
                    .get(k)
                    .or(path.last())
                    .cloned()
                    .unwrap_or_else(|| vec![0.0; set.dim()]);
                set.nearest(&target)
            }
        }
    }

    /// Min-norm plus one vertex rule per generator slot.
    pub fn default_set(max_vertices: usize) -> Vec<SelectionRule> {
        std::iter::once(SelectionRule::MinNorm)
            .chain((0..max_vertices.max(1)).map(SelectionRule::Vertex))
            .collect()
    }
}

impl fmt::Debug for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Explicit Euler integration of `x' in F(x)`.
///
/// Each step takes `x_{k+1} = max(x_k + h v_k, 0)`, where `v_k` comes from
/// the selection rule. A velocity that lifts an empty buffer off its zero
/// face but is not admissible in the state it leads to (after which only
/// draining is) is replaced by the rule's choice among the generators that
/// do persist, if there are any.
/// This keeps extreme selections from chattering on a zero face. The clamp
/// may only absorb overshoot of coordinates that started within `L h` of
/// zero.
pub fn simulate<I: Inclusion + ?Sized>(
    inc: &I,
    x0: &[f64],
    rule: &SelectionRule,
    h: f64,
    horizon: f64,
) -> Result<Trajectory> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if horizon < h * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} shorter than one step {h}"
        )));
    }
    if x0.len() != inc.dim() {
        return Err(Error::DimensionMismatch {
            expected: inc.dim(),
            got: x0.len(),
        });
    }
    let lip = inc.speed_bound();
    let n_steps = steps_for(horizon, h);
    let mut cache = RhsCache::new(inc);
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut x = x0.to_vec();
    samples.push(x.clone());
    for k in 0..n_steps {
        let set = cache.get(&x)?;
        let mut v = rule.pick(&set, k);
        if !persists(&mut cache, inc, &x, &v, h)? {
            let mut keep = Vec::new();
            for g in set.vertices() {
                if persists(&mut cache, inc, &x, g, h)? {
                    keep.push(g.clone());
                }
            }
            if !keep.is_empty() {
                v = rule.pick(&VelocitySet::from_points(set.dim(), keep), k);
            }
        }
        x = euler_step(&x, &v, h, lip)?;
        samples.push(x.clone());
    }
    Ok(Trajectory {
        step: h,
        samples,
        lipschitz: lip,
    })
}

fn euler_step(x: &[f64], v: &[f64], h: f64, lip: f64) -> Result<Vec<f64>> {
    let mut next = vecops::axpy(x, h, v);
    for (i, xi) in next.iter_mut().enumerate() {
        if *xi < 0.0 {
            if x[i] > lip * h * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::ClampTooLarge {
                    coord: i,
                    overshoot: -*xi,
                });
            }
            *xi = 0.0;
        }
    }
    Ok(next)
}

fn persists<I: Inclusion + ?Sized>(
    cache: &mut RhsCache<'_, I>,
    inc: &I,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Result<bool> {
    let next: Vec<f64> = vecops::axpy(x, h, v).into_iter().map(|c| c.max(0.0)).collect();
    // Only departures from a zero face can chatter.
    if !x.iter().zip(&next).any(|(a, b)| *a == 0.0 && *b > 0.0) {
        return Ok(true);
    }
    if let (Some(a), Some(b)) = (inc.cache_key(x), inc.cache_key(&next)) {
        if a == b {
            return Ok(true);
        }
    }
    let after = cache.get(&next)?;
    Ok(after.distance(v) <= 1e-9 * (1.0 + vecops::norm(v)))
}

/// `t -> phi(r t) / r` on the same step grid.
pub fn scale(tr: &Trajectory, r: f64) -> Result<Trajectory> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {r}")));
    }
    if (r - 1.0).abs() < 1e-15 {
        return Ok(tr.clone());
    }
    let horizon = tr.horizon() / r;
    let n = (horizon / tr.step * (1.0 + 1e-12)).floor() as usize;
    let samples = (0..=n)
        .map(|k| vecops::scaled(&tr.at(r * k as f64 * tr.step), 1.0 / r))
        .collect();
    Ok(Trajectory {
        step: tr.step,
        samples,
        lipschitz: tr.lipschitz,
    })
}

/// `t -> phi(t + s)`: the dynamical-system action of the shift.
pub fn shift(tr: &Trajectory, s: f64) -> Result<Trajectory> {
    let horizon = tr.horizon();
    if s < 0.0 || s > horizon * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::ShiftBeyondHorizon { shift: s, horizon });
    }
    let pos = s / tr.step;
    let k0 = pos.round();
    let samples = if (pos - k0).abs() <= 1e-9 {
        tr.samples[(k0 as usize).min(tr.len() - 1)..].to_vec()
    } else {
        let n = ((horizon - s) / tr.step).floor() as usize;
        (0..=n).map(|k| tr.at(s + k as f64 * tr.step)).collect()
    };
    Ok(Trajectory {
        step: tr.step,
        samples,
        lipschitz: tr.lipschitz,
    })
}

/// Follows `first` up to `t_star`, then `second` shifted to start there.
pub fn concat(first: &Trajectory, t_star: f64, second: &Trajectory) -> Result<Trajectory> {
    if (first.step - second.step).abs() > 1e-12 * first.step {
        return Err(Error::StepMismatch(first.step, second.step));
    }
    let pos = t_star / first.step;
    let k = pos.round();
    if (pos - k).abs() > 1e-9 || k < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "t* = {t_star} is not on the step grid"
        )));
    }
    let k = k as usize;
    if k >= first.len() {
        return Err(Error::ShiftBeyondHorizon {
            shift: t_star,
            horizon: first.horizon(),
        });
    }
    let gap = vecops::dist(&first.samples[k], second.start());
    if gap > 1e-9 * (1.0 + vecops::norm(second.start())) {
        return Err(Error::EndpointMismatch(gap));
    }
    let mut samples = first.samples[..=k].to_vec();
    samples.extend_from_slice(&second.samples[1..]);
    Ok(Trajectory {
        step: first.step,
        samples,
        lipschitz: first.lipschitz.max(second.lipschitz),
    })
}

/// `sup_{t in [0, N]} |phi(t)|` over the sample grid.
pub fn sup_norm(tr: &Trajectory, n: f64) -> f64 {
    tr.samples
        .iter()
        .enumerate()
        .take_while(|(k, _)| tr.time(*k) <= n + 1e-9 * tr.step)
        .map(|(_, x)| vecops::norm(x))
        .fold(0.0, f64::max)
}

/// Every step moves at most `L h` (with a relative slack of `1e-6`) and
/// every sample is in the orthant up to `1e-12`.
pub fn lipschitz_check(tr: &Trajectory) -> bool {
    let bound = tr.lipschitz * tr.step * (1.0 + LIPSCHITZ_SLACK);
    tr.samples
        .windows(2)
        .all(|w| vecops::dist(&w[0], &w[1]) <= bound + 1e-15)
        && tr.samples.iter().flatten().all(|&c| c >= -1e-12)
}

/// The metric of uniform convergence on compacts,
/// `max_N 2^-N |a - b|_N / (1 + |a - b|_N)` for `N = 1..=n_max`.
///
/// Terms beyond `n_max` are at most `2^-n_max`.
pub fn metric_d(a: &Trajectory, b: &Trajectory, n_max: usize) -> Result<f64> {
    if (a.step - b.step).abs() > 1e-12 * a.step {
        return Err(Error::StepMismatch(a.step, b.step));
    }
    let need = n_max as f64;
    for tr in [a, b] {
        if tr.horizon() < need - 1e-9 {
            return Err(Error::HorizonTooShort {
                have: tr.horizon(),
                need,
            });
        }
    }
    let diffs: Vec<f64> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| vecops::dist(x, y))
        .collect();
    Ok(metric_from_pointwise(&diffs, a.step, n_max))
}

/// Metric value for a pointwise distance profile sampled at step `h`.
pub(crate) fn metric_from_pointwise(diffs: &[f64], h: f64, n_max: usize) -> f64 {
    let mut best = 0.0_f64;
    let mut running = 0.0_f64;
    let mut k = 0;
    for big_n in 1..=n_max {
        let limit = big_n as f64;
        while k < diffs.len() && k as f64 * h <= limit + 1e-9 * h {
            running = running.max(diffs[k]);
            k += 1;
        }
        let term = 0.5_f64.powi(big_n as i32) * running / (1.0 + running);
        best = best.max(term);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{validate_network, FluidNetworkSpec, VertexMap};

    fn reference() -> crate::network::FluidNetwork {
        validate_network(&FluidNetworkSpec::single_station(1.0, 2.0)).unwrap()
    }

    fn drain(x0: f64, h: f64, horizon: f64) -> Trajectory {
        Trajectory::from_fn(h, horizon, 1.0, |t| vec![(x0 - t).max(0.0)])
    }

    #[test]
    fn empty_station_stays_empty() {
        let tr = simulate(&reference(), &[0.0], &SelectionRule::MinNorm, 1e-2, 1.0).unwrap();
        assert!(tr.samples().iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn vertex_rules_do_not_chatter_at_zero() {
        let net = reference();
        for rule in SelectionRule::default_set(2) {
            let tr = simulate(&net, &[0.5], &rule, 1e-2, 2.0).unwrap();
            assert!(tr.last()[0].abs() < 1e-9, "{rule}: {:?}", tr.last());
        }
    }

    #[test]
    fn pure_inflow_integrates_exactly() {
        let net = validate_network(&FluidNetworkSpec::single_station(1.0, 0.0)).unwrap();
        let tr = simulate(&net, &[0.0], &SelectionRule::Vertex(0), 0.01, 2.0).unwrap();
        for (k, x) in tr.samples().iter().enumerate() {
            assert!((x[0] - tr.time(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_clamp_is_an_error() {
        let map = VertexMap::new(1, 1.0, |_| vec![vec![-50.0]]);
        let err = simulate(&map, &[1.0], &SelectionRule::MinNorm, 0.1, 1.0).unwrap_err();
        assert!(matches!(err, Error::ClampTooLarge { .. }));
    }

    #[test]
    fn scale_of_drain_path() {
        let tr = drain(3.0, 1e-3, 6.0);
        let s = scale(&tr, 3.0).unwrap();
        for (k, x) in s.samples().iter().enumerate() {
            let t = s.time(k);
            assert!((x[0] - (1.0 - t).max(0.0)).abs() < 1e-9);
        }
        assert_eq!(scale(&tr, 1.0).unwrap(), tr);
    }

    #[test]
    fn shift_of_drain_path() {
        let tr = drain(3.0, 1e-3, 5.0);
        let s = shift(&tr, 1.0).unwrap();
        for (k, x) in s.samples().iter().enumerate() {
            assert!((x[0] - (2.0 - s.time(k)).max(0.0)).abs() < 1e-9);
        }
        assert_eq!(shift(&tr, 0.0).unwrap(), tr);
        assert!(matches!(shift(&tr, 6.0), Err(Error::ShiftBeyondHorizon { .. })));
    }

    #[test]
    fn shift_off_grid_interpolates() {
        let tr = drain(3.0, 0.1, 5.0);
        let s = shift(&tr, 0.05).unwrap();
        assert!((s.start()[0] - 2.95).abs() < 1e-12);
    }

    #[test]
    fn concat_pieces() {
        let first = drain(2.0, 1e-2, 3.0);
        let zero = Trajectory::constant(vec![0.0], 1e-2, 1.0);
        let glued = concat(&first, 2.0, &zero).unwrap();
        assert!((glued.horizon() - 3.0).abs() < 1e-9);
        for (k, x) in glued.samples().iter().enumerate() {
            assert!((x[0] - (2.0 - glued.time(k)).max(0.0)).abs() < 1e-9);
        }
        assert_eq!(concat(&first, 0.0, &drain(2.0, 1e-2, 1.0)).unwrap(), drain(2.0, 1e-2, 1.0));
        assert!(matches!(
            concat(&first, 1.0, &zero),
            Err(Error::EndpointMismatch(_))
        ));
    }

    #[test]
    fn metric_of_constant_offset() {
        let c = 0.7;
        let a = Trajectory::constant(vec![c], 0.01, 12.0);
        let b = Trajectory::constant(vec![0.0], 0.01, 12.0);
        let d = metric_d(&a, &b, 10).unwrap();
        assert!((d - 0.5 * c / (1.0 + c)).abs() < 1e-15);
        assert_eq!(metric_d(&a, &a, 10).unwrap(), 0.0);
        assert!(matches!(
            metric_d(&a, &b, 20),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn sup_norms() {
        assert_eq!(sup_norm(&drain(3.0, 1e-3, 5.0), 1.0), 3.0);
        assert_eq!(sup_norm(&Trajectory::constant(vec![0.0, 0.0], 0.1, 2.0), 2.0), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let tr = simulate(&reference(), &[1.3], &SelectionRule::MinNorm, 0.01, 2.0).unwrap();
        let back = Trajectory::from_csv(&tr.to_csv(), tr.lipschitz()).unwrap();
        assert_eq!(back.len(), tr.len());
        for (a, b) in tr.samples().iter().zip(back.samples()) {
            assert!(io::same_at_12_digits(a[0], b[0]) || (a[0] - b[0]).abs() < 1e-15);
        }
        assert!(tr.to_csv().starts_with("t,x1\n0,1.3\n"));
    }
}
