//! Grid-sampled scalar fields on axis-aligned boxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Relative slack (in grid spacings) for box membership.
const BOX_SLACK: f64 = 1e-9;

/// Box, spacing and tag of a field; the JSON sidecar of a field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
    pub tag: String,
}

/// Node values on a uniform tensor grid, evaluated between nodes by
/// multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lo: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
    values: Vec<f64>,
    tag: String,
    gradients: Option<Vec<Vec<f64>>>,
}

/// Number of nodes and adjusted spacing for `[lo, hi]` at roughly `step`.
fn axis_layout(lo: f64, hi: f64, step: f64) -> Result<(usize, f64)> {
    if !(hi > lo) || !(step > 0.0) {
        return Err(Error::DegenerateBox(format!("[{lo}, {hi}] with step {step}")));
    }
    let cells = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    Ok((cells + 1, (hi - lo) / cells as f64))
}

impl ScalarField {
    /// Samples `f` at every node of `[lo, hi]` with spacing at most `step`.
    pub fn from_fn(
        lo: &[f64],
        hi: &[f64],
        step: f64,
        tag: &str,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        let mut counts = Vec::with_capacity(lo.len());
        let mut spacing = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            let (c, s) = axis_layout(a, b, step)?;
            counts.push(c);
            spacing.push(s);
        }
        Self::from_layout(lo.to_vec(), spacing, counts, tag, |x| Ok(f(x)))
    }

    /// Like [`ScalarField::from_fn`] for a fallible sampler.
    pub fn try_from_fn(
        lo: &[f64],
        hi: &[f64],
        step: f64,
        tag: &str,
        f: impl Fn(&[f64]) -> Result<f64> + Sync,
    ) -> Result<Self> {
        let mut counts = Vec::with_capacity(lo.len());
        let mut spacing = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            let (c, s) = axis_layout(a, b, step)?;
            counts.push(c);
            spacing.push(s);
        }
        Self::from_layout(lo.to_vec(), spacing, counts, tag, f)
    }

    pub(crate) fn from_layout(
        lo: Vec<f64>,
        spacing: Vec<f64>,
        counts: Vec<usize>,
        tag: &str,
        f: impl Fn(&[f64]) -> Result<f64> + Sync,
    ) -> Result<Self> {
        let mut field = Self {
            lo,
            spacing,
            counts,
            values: Vec::new(),
            tag: tag.to_string(),
            gradients: None,
        };
        let total = field.node_count();
        field.values = (0..total)
            .into_par_iter()
            .map(|i| f(&field.node(i)))
            .collect::<Result<_>>()?;
        if let Some(bad) = field.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("field value {bad} is not finite")));
        }
        Ok(field)
    }

    /// Same grid, new values.
    pub fn with_values(&self, tag: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            lo: self.lo.clone(),
            spacing: self.spacing.clone(),
            counts: self.counts.clone(),
            values,
            tag: tag.to_string(),
            gradients: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.lo[k] + self.spacing[k] * (self.counts[k] - 1) as f64)
            .collect()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Per-axis indices of flat node `i` (first axis slowest).
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = i % self.counts[k];
            i /= self.counts[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .enumerate()
            .map(|(k, &j)| self.lo[k] + self.spacing[k] * j as f64)
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.node_count()).map(|i| self.node(i))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let hi = self.hi();
        x.len() == self.dim()
            && (0..self.dim()).all(|k| {
                let slack = BOX_SLACK * self.spacing[k];
                x[k] >= self.lo[k] - slack && x[k] <= hi[k] + slack
            })
    }

    /// Multilinear interpolation; errors outside the box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideBox(x.to_vec()));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let pos = ((x[k] - self.lo[k]) / self.spacing[k]).max(0.0);
            let cells = self.counts[k] - 1;
            let j = (pos.floor() as usize).min(cells.saturating_sub(1));
            base[k] = j;
            frac[k] = if cells == 0 { 0.0 } else { (pos - j as f64).min(1.0) };
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                if up && self.counts[k] == 1 {
                    w = 0.0;
                    break;
                }
                idx[k] = base[k] + up as usize;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.values[self.flat_index(&idx)];
            }
        }
        acc
    }

    /// Central-difference gradients at every node (one-sided on the
    /// boundary).
    pub fn node_gradients(&self) -> Vec<Vec<f64>> {
        (0..self.node_count())
            .map(|i| {
                let idx = self.multi_index(i);
                (0..self.dim())
                    .map(|k| {
                        let c = self.counts[k];
                        if c == 1 {
                            return 0.0;
                        }
                        let (a, b) = match idx[k] {
                            0 => (0, 1),
                            j if j == c - 1 => (j - 1, j),
                            j => (j - 1, j + 1),
                        };
                        let mut ia = idx.clone();
                        let mut ib = idx.clone();
                        ia[k] = a;
                        ib[k] = b;
                        (self.values[self.flat_index(&ib)] - self.values[self.flat_index(&ia)])
                            / (self.spacing[k] * (b - a) as f64)
                    })
                    .collect()
            })
            .collect()
    }

    /// Attaches central-difference gradient data.
    pub fn with_gradients(mut self) -> Self {
        self.gradients = Some(self.node_gradients());
        self
    }

    pub fn gradients(&self) -> Option<&[Vec<f64>]> {
        self.gradients.as_deref()
    }

    /// Largest value over nodes accepted by `keep`.
    pub fn max_where(&self, keep: impl Fn(&[f64]) -> bool) -> Option<f64> {
        self.nodes()
            .zip(&self.values)
            .filter(|(x, _)| keep(x))
            .map(|(_, &v)| v)
            .reduce(f64::max)
    }

    pub fn min_where(&self, keep: impl Fn(&[f64]) -> bool) -> Option<f64> {
        self.nodes()
            .zip(&self.values)
            .filter(|(x, _)| keep(x))
            .map(|(_, &v)| v)
            .reduce(f64::min)
    }

    pub fn meta(&self) -> FieldMeta {
        FieldMeta {
            lo: self.lo.clone(),
            hi: self.hi(),
            spacing: self.spacing.clone(),
            counts: self.counts.clone(),
            tag: self.tag.clone(),
        }
    }

    /// CSV with header `x1,...,xn,value`, nodes in lexicographic order.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header(self.dim()).join(",");
        out.push('\n');
        for (i, &v) in self.values.iter().enumerate() {
            out.push_str(&io::csv_row(self.node(i).into_iter().chain([v])));
            out.push('\n');
        }
        out
    }

    pub fn meta_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta())?)
    }

    /// Rebuilds a field from its CSV dump and sidecar.
    pub fn from_dump(csv: &str, meta_json: &str) -> Result<Self> {
        let meta: FieldMeta = serde_json::from_str(meta_json)?;
        let rows = io::parse_csv(csv, &csv_header(meta.lo.len()))?;
        let total: usize = meta.counts.iter().product();
        if rows.len() != total {
            return Err(Error::Parse(format!(
                "field dump has {} rows, sidecar expects {total}",
                rows.len()
            )));
        }
        Ok(Self {
            lo: meta.lo,
            spacing: meta.spacing,
            counts: meta.counts,
            values: rows.iter().map(|r| *r.last().unwrap()).collect(),
            tag: meta.tag,
            gradients: None,
        })
    }
}

fn csv_header(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("value".to_string()))
        .collect()
}
