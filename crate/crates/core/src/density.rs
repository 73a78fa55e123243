//! Smoothed eigenvalue densities on a real grid.

use crate::error::{Error, Result};

/// Fraction of the kernel mass that may fall outside the grid before a
/// density is rejected.
pub const MAX_MASS_LEAKAGE: f64 = 1e-2;

/// Eigenvalue density sampled on a strictly increasing grid, unit trapezoidal
/// mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    kernel_width: f64,
}

impl SpectralDensity {
    /// Wraps raw samples and renormalizes them to unit mass.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, kernel_width: f64) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !(kernel_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel width must be positive, got {kernel_width}"
            )));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if value < 0.0 {
                return Err(Error::NegativeDensity { index, value });
            }
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument("density has zero mass".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self {
            grid,
            values,
            kernel_width,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Linear interpolation onto `grid` (zero outside the support), then
    /// renormalized.
    pub fn resample(&self, grid: &[f64]) -> Result<Self> {
        if grid == self.grid.as_slice() {
            return Ok(self.clone());
        }
        validate_grid(grid)?;
        let values = grid.iter().map(|&t| self.interpolate(t)).collect();
        Self::new(grid.to_vec(), values, self.kernel_width)
    }

    /// Divides the abscissa by `scale`; values are renormalized so mass stays
    /// one.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::NonPositiveScale(scale));
        }
        let grid = self.grid.iter().map(|t| t / scale).collect();
        let values = self.values.iter().map(|v| v * scale).collect();
        Self::new(grid, values, self.kernel_width / scale)
    }

    pub fn interpolate(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t < g[0] || t > g[g.len() - 1] {
            return 0.0;
        }
        let k = g.partition_point(|&x| x <= t);
        if k == 0 {
            return self.values[0];
        }
        if k >= g.len() {
            return self.values[g.len() - 1];
        }
        let (t0, t1) = (g[k - 1], g[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    /// Trapezoidal `∫ |p - q|` on a shared grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(trapezoid(&self.grid, &diff))
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!(
                "grid is not strictly increasing at index {}",
                i + 1
            )));
        }
    }
    Ok(())
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

/// Trapezoidal quadrature weights for a (possibly non-uniform) grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Sorted union of two grids (exact duplicates merged).
pub fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// `Σ_i w_i N(t; θ_i, σ)` on `grid`, renormalized to unit mass. Fails when
/// more than [`MAX_MASS_LEAKAGE`] of the kernel mass lies off the grid.
pub fn gaussian_smoothing(
    nodes: &[f64],
    weights: &[f64],
    sigma: f64,
    grid: &[f64],
) -> Result<SpectralDensity> {
    validate_grid(grid)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let total: f64 = weights.iter().sum();
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| {
            nodes
                .iter()
                .zip(weights)
                .map(|(&theta, &w)| {
                    let z = (t - theta) / sigma;
                    w * norm * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let mass = trapezoid(grid, &values);
    let leaked = (1.0 - mass / total).abs();
    if leaked > MAX_MASS_LEAKAGE {
        return Err(Error::GridTooNarrow { leaked });
    }
    SpectralDensity::new(grid.to_vec(), values, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_has_unit_mass() {
        let grid = uniform_grid(-5.0, 5.0, 1001);
        let d = gaussian_smoothing(&[0.0, 1.0], &[0.5, 0.5], 0.3, &grid).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert!(d.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let grid = uniform_grid(0.0, 1.0, 101);
        let err = gaussian_smoothing(&[1.0], &[1.0], 0.2, &grid).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow { .. }));
    }

    #[test]
    fn rejects_negative_values_and_bad_grids() {
        assert!(SpectralDensity::new(vec![0.0, 1.0], vec![1.0, -0.1], 1.0).is_err());
        assert!(SpectralDensity::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn rescaling_keeps_mass() {
        let grid = uniform_grid(0.0, 10.0, 501);
        let d = gaussian_smoothing(&[5.0], &[1.0], 0.5, &grid).unwrap();
        let r = d.rescaled(5.0).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert!((r.grid()[500] - 2.0).abs() < 1e-15);
        assert!(d.rescaled(0.0).is_err());
    }

    #[test]
    fn resample_onto_finer_grid() {
        let grid = uniform_grid(-4.0, 4.0, 401);
        let d = gaussian_smoothing(&[0.0], &[1.0], 0.5, &grid).unwrap();
        let fine = uniform_grid(-4.0, 4.0, 1601);
        let r = d.resample(&fine).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert!((r.interpolate(0.0) - d.interpolate(0.0)).abs() < 1e-3);
    }
}
