//! Stochastic Lanczos quadrature.
//!
//! Each Rademacher probe `v` runs `m` Lanczos steps on the operator; the
//! eigenpairs of the resulting tridiagonal `T` give a Gauss quadrature rule
//! (Ritz values as nodes, squared first eigenvector components as weights)
//! for the spectral measure `vᵀ δ(t - A) v`. Averaging the rules over probes
//! and broadening each node with a Gaussian kernel yields the density.
//!
//! Probes draw from ChaCha streams keyed by `(seed, probe index)` and are
//! reduced in index order, so results do not depend on the thread schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{gaussian_smoothing, uniform_grid, SpectralDensity};
use crate::eigen::tridiagonal_eigen;
use crate::error::{Error, Result};
use crate::heterogeneity::{spectrum_scale, Normalization, ScaleChoice};
use crate::operator::{axpy, dot, norm, BlockPartition, PrincipalBlock, SymmetricOperator};

/// Relative tolerance (against the running ‖A‖ estimate) below which an
/// off-diagonal coefficient ends the recursion.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Kernel width as a fraction of the grid span.
pub const DEFAULT_WIDTH_FRACTION: f64 = 0.01;

pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Padding added on each side of the estimated support, as a fraction of its
/// span.
const SUPPORT_PADDING: f64 = 0.05;

/// Output of `m` Lanczos steps: `T = tridiag(betas, alphas, betas)`.
#[derive(Debug, Clone)]
pub struct LanczosFactorization {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Orthonormal Lanczos vectors, kept when reorthogonalizing.
    pub basis: Option<Vec<Vec<f64>>>,
}

impl LanczosFactorization {
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }
}

/// Run the symmetric Lanczos recursion from the unit vector `v0`.
///
/// With `reorth` every new vector is re-orthogonalized (two classical
/// Gram-Schmidt passes) against the full basis, which is then returned.
pub fn lanczos<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    v0: &[f64],
    steps: usize,
    reorth: bool,
) -> Result<LanczosFactorization> {
    let n = op.dim();
    if v0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v0.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("Lanczos needs at least one step".into()));
    }
    if steps > n {
        return Err(Error::InvalidArgument(format!(
            "{steps} Lanczos steps exceed the dimension {n}"
        )));
    }
    let v0_norm = norm(v0);
    if (v0_norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitStart(v0_norm));
    }

    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps.saturating_sub(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(if reorth { steps } else { 2 });
    let mut prev: Vec<f64> = vec![0.0; n];
    let mut current = v0.to_vec();
    let mut w = vec![0.0; n];
    let mut anorm: f64 = 0.0;

    for j in 0..steps {
        op.apply_into(&current, &mut w);
        anorm = anorm.max(norm(&w));
        let alpha = dot(&current, &w);
        axpy(-alpha, &current, &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &prev, &mut w);
        }
        if reorth {
            for _ in 0..2 {
                for q in basis.iter().chain(std::iter::once(&current)) {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
        }
        alphas.push(alpha);
        if j + 1 == steps {
            if reorth {
                basis.push(current);
            }
            break;
        }
        let beta = norm(&w);
        if beta <= BREAKDOWN_TOL * anorm {
            if reorth {
                basis.push(current);
            }
            break;
        }
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
        if reorth {
            basis.push(std::mem::replace(&mut current, next));
        } else {
            prev = std::mem::replace(&mut current, next);
            continue;
        }
        prev.copy_from_slice(basis.last().unwrap());
    }

    Ok(LanczosFactorization {
        alphas,
        betas,
        basis: reorth.then_some(basis),
    })
}

/// Gauss quadrature rule extracted from a Lanczos tridiagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzQuadrature {
    /// Ritz values, ascending.
    pub nodes: Vec<f64>,
    /// Squared first components of T's eigenvectors; sum to one.
    pub weights: Vec<f64>,
}

pub fn ritz_quadrature(fact: &LanczosFactorization) -> Result<RitzQuadrature> {
    if fact.alphas.is_empty() {
        return Err(Error::EmptyFactorization);
    }
    let eig = tridiagonal_eigen(&fact.alphas, &fact.betas);
    let mut weights: Vec<f64> = eig.vectors[0].iter().map(|x| x * x).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(RitzQuadrature {
        nodes: eig.values,
        weights,
    })
}

/// Discrete spectral measure: nodes with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralMeasure {
    /// Uniform weights on exact eigenvalues.
    pub fn from_eigenvalues(eigs: &[f64]) -> Self {
        let w = 1.0 / eigs.len() as f64;
        Self {
            nodes: eigs.to_vec(),
            weights: vec![w; eigs.len()],
        }
    }

    /// Probe average of quadrature rules, concatenated in probe order.
    pub fn from_quadratures(rules: &[RitzQuadrature]) -> Self {
        let scale = 1.0 / rules.len() as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for rule in rules {
            nodes.extend_from_slice(&rule.nodes);
            weights.extend(rule.weights.iter().map(|w| w * scale));
        }
        Self { nodes, weights }
    }

    pub fn min(&self) -> f64 {
        self.nodes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|t| t / scale).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Smallest node whose upper-tail mass reaches `mass`.
    pub fn upper_quantile(&self, mass: f64) -> f64 {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| self.nodes[b].total_cmp(&self.nodes[a]));
        let mut acc = 0.0;
        for &i in &order {
            acc += self.weights[i];
            if acc >= mass * (1.0 - 1e-9) {
                return self.nodes[i];
            }
        }
        self.nodes[*order.last().unwrap()]
    }

    /// Broadened density on `grid`.
    pub fn smooth(&self, sigma: f64, grid: &[f64]) -> Result<SpectralDensity> {
        gaussian_smoothing(&self.nodes, &self.weights, sigma, grid)
    }
}

/// Knobs of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SlqConfig {
    /// Lanczos steps per probe (capped at the operator dimension).
    pub steps: usize,
    pub probes: usize,
    pub seed: u64,
    /// Gaussian kernel width; `None` means `DEFAULT_WIDTH_FRACTION` of the
    /// grid span.
    pub kernel_width: Option<f64>,
    pub grid_points: usize,
}

impl SlqConfig {
    pub fn full(seed: u64) -> Self {
        Self {
            steps: 80,
            probes: 10,
            seed,
            kernel_width: None,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    /// Reduced-cost preset: one probe, ten steps.
    pub fn cheap(seed: u64) -> Self {
        Self {
            steps: 10,
            probes: 1,
            ..Self::full(seed)
        }
    }
}

impl Default for SlqConfig {
    fn default() -> Self {
        Self::full(0)
    }
}

/// Rademacher probe `±1/√d` for probe `index`.
pub fn rademacher_probe(dim: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let v = 1.0 / (dim as f64).sqrt();
    (0..dim).map(|_| if rng.gen::<bool>() { v } else { -v }).collect()
}

/// One quadrature rule per probe, in probe order.
pub fn probe_quadratures<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    cfg: &SlqConfig,
) -> Result<Vec<RitzQuadrature>> {
    if cfg.probes == 0 {
        return Err(Error::InvalidArgument("at least one probe is required".into()));
    }
    let n = op.dim();
    let steps = cfg.steps.min(n).max(1);
    (0..cfg.probes as u64)
        .into_par_iter()
        .map(|p| {
            let v0 = rademacher_probe(n, cfg.seed, p);
            let fact = lanczos(op, &v0, steps, true)?;
            ritz_quadrature(&fact)
        })
        .collect()
}

/// Grid and kernel width covering `[lo, hi]`.
///
/// The support is padded by 5% of its span, then by `3σ` on each side. With
/// the default width `σ = 0.01 · span(grid)` this closes to
/// `span(grid) = padded / 0.94`.
pub fn auto_grid(lo: f64, hi: f64, points: usize, kernel_width: Option<f64>) -> (Vec<f64>, f64) {
    let mut span = hi - lo;
    let magnitude = lo.abs().max(hi.abs());
    if span <= 1e-12 * magnitude.max(1e-300) {
        // point mass: give it a nominal width
        span = if magnitude > 0.0 { 0.1 * magnitude } else { 1.0 };
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * span * (1.0 + 2.0 * SUPPORT_PADDING);
    let (lo, hi) = (center - half, center + half);
    let sigma = match kernel_width {
        Some(s) => s,
        None => DEFAULT_WIDTH_FRACTION * (hi - lo) / (1.0 - 6.0 * DEFAULT_WIDTH_FRACTION),
    };
    let grid = uniform_grid(lo - 3.0 * sigma, hi + 3.0 * sigma, points.max(2));
    (grid, sigma)
}

/// SLQ eigenvalue density of `op`.
///
/// When `grid` is `None` the grid is derived from the extreme Ritz values.
pub fn slq_density<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    cfg: &SlqConfig,
    grid: Option<&[f64]>,
) -> Result<SpectralDensity> {
    let measure = SpectralMeasure::from_quadratures(&probe_quadratures(op, cfg)?);
    match grid {
        Some(g) => {
            let sigma = cfg
                .kernel_width
                .unwrap_or(DEFAULT_WIDTH_FRACTION * (g[g.len() - 1] - g[0]));
            measure.smooth(sigma, g)
        }
        None => {
            let (g, sigma) = auto_grid(measure.min(), measure.max(), cfg.grid_points, cfg.kernel_width);
            measure.smooth(sigma, &g)
        }
    }
}

/// Per-block densities on one shared grid, each normalized by its own
/// spectral scale.
#[derive(Debug, Clone)]
pub struct BlockwiseSpectra {
    pub densities: Vec<SpectralDensity>,
    pub scales: Vec<ScaleChoice>,
    pub normalization: Normalization,
}

impl BlockwiseSpectra {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.scales.iter().filter_map(|s| s.warning.as_deref())
    }
}

/// Blockwise measures from SLQ on each principal block `[A]_l`.
pub fn blockwise_measures<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    partition: &BlockPartition,
    cfg: &SlqConfig,
) -> Result<Vec<SpectralMeasure>> {
    if partition.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: partition.dim(),
        });
    }
    partition
        .ranges()
        .enumerate()
        .map(|(l, range)| {
            let block = PrincipalBlock::new(op, range)?;
            let block_cfg = SlqConfig {
                seed: block_seed(cfg.seed, l as u64),
                ..cfg.clone()
            };
            Ok(SpectralMeasure::from_quadratures(&probe_quadratures(
                &block, &block_cfg,
            )?))
        })
        .collect()
}

/// Normalizes each measure by its scale and smooths all of them onto a grid
/// spanning their union.
pub fn densities_on_shared_grid(
    measures: &[SpectralMeasure],
    dims: &[usize],
    mode: Normalization,
    grid_points: usize,
    kernel_width: Option<f64>,
) -> Result<BlockwiseSpectra> {
    let scales = measures
        .iter()
        .zip(dims)
        .map(|(m, &d)| spectrum_scale(m, d, mode))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<SpectralMeasure> = measures
        .iter()
        .zip(&scales)
        .map(|(m, s)| m.scaled(s.scale))
        .collect();
    let lo = scaled.iter().map(|m| m.min()).fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().map(|m| m.max()).fold(f64::NEG_INFINITY, f64::max);
    let (grid, sigma) = auto_grid(lo, hi, grid_points, kernel_width);
    let densities = scaled
        .iter()
        .map(|m| m.smooth(sigma, &grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockwiseSpectra {
        densities,
        scales,
        normalization: mode,
    })
}

/// SLQ densities of every principal block of `op`.
pub fn blockwise_densities<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    partition: &BlockPartition,
    cfg: &SlqConfig,
    mode: Normalization,
) -> Result<BlockwiseSpectra> {
    let measures = blockwise_measures(op, partition, cfg)?;
    densities_on_shared_grid(&measures, partition.sizes(), mode, cfg.grid_points, cfg.kernel_width)
}

/// Seed of block `l`'s probe family.
pub fn block_seed(seed: u64, block: u64) -> u64 {
    // splitmix64 finalizer over (seed, block)
    let mut z = seed ^ block.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
