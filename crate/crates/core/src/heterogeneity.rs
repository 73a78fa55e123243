//! Spectrum normalization and Jensen-Shannon comparison of blockwise
//! densities.
//!
//! Densities are discretized to probability masses with trapezoidal weights
//! and compared with the base-2 Jensen-Shannon divergence, which lies in
//! `[0, 1]`. The heterogeneity score `js0` is the mean over all unordered
//! block pairs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::density::{trapezoid_weights, union_grid, SpectralDensity};
use crate::error::{Error, Result};
use crate::slq::SpectralMeasure;

/// How each spectrum is scaled before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Divide by the 10th largest eigenvalue; needs at least ten eigenvalues.
    TenthLargest,
    /// Divide by the largest absolute eigenvalue.
    MaxAbs,
    None,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::TenthLargest => "tenth_largest",
            Normalization::MaxAbs => "max_abs",
            Normalization::None => "none",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tenth_largest" => Ok(Self::TenthLargest),
            "max_abs" => Ok(Self::MaxAbs),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

/// Scale actually applied to one spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleChoice {
    pub scale: f64,
    /// Mode that produced `scale` (differs from the request on fallback).
    pub mode: Normalization,
    pub warning: Option<String>,
}

/// Scale of a spectral measure describing a `dim`-dimensional operator.
///
/// `TenthLargest` takes the node at which the upper-tail mass reaches
/// `10 / dim`; on uniform eigenvalue weights that is exactly the 10th largest
/// eigenvalue.
pub fn spectrum_scale(measure: &SpectralMeasure, dim: usize, mode: Normalization) -> Result<ScaleChoice> {
    let max_abs = measure.nodes.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let choice = match mode {
        Normalization::None => ScaleChoice {
            scale: 1.0,
            mode,
            warning: None,
        },
        Normalization::MaxAbs => ScaleChoice {
            scale: max_abs,
            mode,
            warning: None,
        },
        Normalization::TenthLargest if dim < 10 => ScaleChoice {
            scale: max_abs,
            mode: Normalization::MaxAbs,
            warning: Some(format!(
                "spectrum of dimension {dim} has fewer than 10 eigenvalues; fell back to max_abs"
            )),
        },
        Normalization::TenthLargest => ScaleChoice {
            scale: measure.upper_quantile(10.0 / dim as f64),
            mode,
            warning: None,
        },
    };
    if !(choice.scale > 0.0) || !choice.scale.is_finite() {
        return Err(Error::NonPositiveScale(choice.scale));
    }
    Ok(choice)
}

/// Eigenvalues divided by their scale under `mode`.
pub fn normalize_eigenvalues(eigs: &[f64], mode: Normalization) -> Result<(Vec<f64>, ScaleChoice)> {
    if eigs.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let choice = spectrum_scale(&SpectralMeasure::from_eigenvalues(eigs), eigs.len(), mode)?;
    Ok((eigs.iter().map(|l| l / choice.scale).collect(), choice))
}

/// Per-point contribution `½ a log₂(2a/(a+b)) + ½ b log₂(2b/(a+b))`,
/// evaluated with ordered operands so that it is exactly symmetric.
#[inline]
fn js_term(a: f64, b: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let m = a + b;
    if m == 0.0 {
        return 0.0;
    }
    let mut t = 0.0;
    if a > 0.0 {
        t += a * (2.0 * a / m).log2();
    }
    if b > 0.0 {
        t += b * (2.0 * b / m).log2();
    }
    0.5 * t
}

fn masses(d: &SpectralDensity) -> Vec<f64> {
    let w = trapezoid_weights(d.grid());
    let mut p: Vec<f64> = d.values().iter().zip(&w).map(|(v, w)| v * w).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Base-2 Jensen-Shannon divergence between two densities. Densities on
/// different grids are first resampled onto the union grid.
pub fn js_distance(p: &SpectralDensity, q: &SpectralDensity) -> Result<f64> {
    if p.grid() == q.grid() {
        return js_on_shared_grid(p, q);
    }
    let grid = union_grid(p.grid(), q.grid());
    js_on_shared_grid(&p.resample(&grid)?, &q.resample(&grid)?)
}

fn js_on_shared_grid(p: &SpectralDensity, q: &SpectralDensity) -> Result<f64> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    for d in [p, q] {
        if let Some((index, &value)) = d.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
    }
    let (pm, qm) = (masses(p), masses(q));
    let js: f64 = pm.iter().zip(&qm).map(|(&a, &b)| js_term(a, b)).sum();
    Ok(js.clamp(0.0, 1.0))
}

/// Square root of the divergence (a metric). Not used for `js0`.
pub fn js_metric(p: &SpectralDensity, q: &SpectralDensity) -> Result<f64> {
    js_distance(p, q).map(f64::sqrt)
}

/// Pairwise divergences among blockwise densities.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub labels: Vec<String>,
    /// Symmetric, zero diagonal.
    pub pairwise: Vec<Vec<f64>>,
    /// Mean of the strict upper triangle.
    pub js0: f64,
    pub normalization: Normalization,
}

impl HeterogeneityReport {
    pub fn blocks(&self) -> usize {
        self.labels.len()
    }

    /// Report for a relabeling: block `perm[i]` becomes block `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        let pairwise = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.pairwise[i][j]).collect())
            .collect();
        Self {
            labels,
            pairwise,
            js0: mean_upper(&Self::upper_entries_of(&self.pairwise, perm)),
            normalization: self.normalization,
        }
    }

    fn upper_entries_of(m: &[Vec<f64>], perm: &[usize]) -> Vec<f64> {
        let mut out = Vec::new();
        for a in 0..perm.len() {
            for b in (a + 1)..perm.len() {
                out.push(m[perm[a]][perm[b]]);
            }
        }
        out
    }
}

fn mean_upper(entries: &[f64]) -> f64 {
    // sorted summation keeps js0 independent of block order
    let mut sorted = entries.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// All-pairs divergences and their mean.
pub fn pairwise_heatmap(
    densities: &[SpectralDensity],
    labels: Option<Vec<String>>,
    normalization: Normalization,
) -> Result<HeterogeneityReport> {
    let l = densities.len();
    if l < 2 {
        return Err(Error::InvalidArgument(
            "a heatmap needs at least two blocks".into(),
        ));
    }
    let labels = match labels {
        Some(v) if v.len() == l => v,
        Some(v) => {
            return Err(Error::DimensionMismatch {
                expected: l,
                got: v.len(),
            })
        }
        None => (0..l).map(|i| format!("block{i}")).collect(),
    };
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|a| ((a + 1)..l).map(move |b| (a, b)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(a, b)| js_distance(&densities[a], &densities[b]))
        .collect::<Result<Vec<_>>>()?;
    let mut pairwise = vec![vec![0.0; l]; l];
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        pairwise[a][b] = v;
        pairwise[b][a] = v;
    }
    Ok(HeterogeneityReport {
        labels,
        pairwise,
        js0: mean_upper(&values),
        normalization,
    })
}
