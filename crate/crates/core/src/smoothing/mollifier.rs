use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

/// Midpoint points per axis used to fix the normalization constant.
pub fn normalization_points(dim: usize) -> usize {
    match dim {
        1 => 512,
        2 => 256,
        _ => 96,
    }
}

/// Default midpoint points per axis for convolution quadrature.
pub fn default_conv_points(dim: usize) -> usize {
    match dim {
        1 => 128,
        2 => 48,
        _ => 20,
    }
}

/// Radial bump `k(x) = C exp(-1 / (1 - |x|^2))` on the unit ball, scaled to
/// `k_r(x) = r^-n k(x / r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    dim: usize,
    radius: f64,
    norm_const: f64,
    conv_points: usize,
}

fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

/// Midpoint nodes of `[-1, 1]^n` with `q` points per axis, and the cell
/// volume.
fn unit_grid(dim: usize, q: usize) -> (Vec<Vec<f64>>, f64) {
    let h = 2.0 / q as f64;
    let axis: Vec<f64> = (0..q).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    (pts, h.powi(dim as i32))
}

pub fn make_mollifier(dim: usize, radius: f64) -> Result<Mollifier> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::NonpositiveRadius(radius));
    }
    if dim == 0 || dim > 3 {
        return Err(Error::InvalidArgument(format!(
            "mollifier dimension must be 1..=3, got {dim}"
        )));
    }
    let (pts, vol) = unit_grid(dim, normalization_points(dim));
    let mass: f64 = pts.iter().map(|p| bump(vecops::dot(p, p))).sum::<f64>() * vol;
    Ok(Mollifier {
        dim,
        radius,
        norm_const: 1.0 / mass,
        conv_points: default_conv_points(dim),
    })
}

impl Mollifier {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn with_conv_points(mut self, q: usize) -> Self {
        self.conv_points = q.max(2);
        self
    }

    pub fn conv_points(&self) -> usize {
        self.conv_points
    }

    /// Same profile at a different radius.
    pub fn rescaled(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonpositiveRadius(radius));
        }
        Ok(Self {
            radius,
            ..self.clone()
        })
    }

    /// `k_r(y)`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let r = self.radius;
        let s2 = vecops::dot(y, y) / (r * r);
        self.norm_const * bump(s2) / r.powi(self.dim as i32)
    }

    /// `int |y|^p k_r(y) dy` by midpoint quadrature with `q` points per axis.
    pub fn moment(&self, p: i32, q: usize) -> f64 {
        let (pts, vol) = unit_grid(self.dim, q);
        let r = self.radius;
        let vol_r = vol * r.powi(self.dim as i32);
        pts.iter()
            .map(|u| {
                let y = vecops::scaled(u, r);
                vecops::norm(&y).powi(p) * self.eval(&y)
            })
            .sum::<f64>()
            * vol_r
    }

    /// `int k_r` with `q` midpoint points per axis.
    pub fn integral(&self, q: usize) -> f64 {
        self.moment(0, q)
    }

    /// Quadrature nodes `y_j` in the support with weights summing to one.
    pub fn quadrature(&self) -> Vec<(Vec<f64>, f64)> {
        let (pts, _) = unit_grid(self.dim, self.conv_points);
        let mut out: Vec<(Vec<f64>, f64)> = pts
            .into_iter()
            .filter_map(|u| {
                let w = bump(vecops::dot(&u, &u));
                (w > 0.0).then(|| (vecops::scaled(&u, self.radius), w))
            })
            .collect();
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut out {
            *w /= total;
        }
        out
    }
}
