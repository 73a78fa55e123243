//! Quadratic optimizer laboratory.
//!
//! Strongly convex quadratics `L(w) = ½ wᵀHw − hᵀw` with block-diagonal `H`,
//! gradient descent, Adam without momentum (fixed or exponentially averaged
//! second moment, `ε = 0`), step-size grid search, and the convergence-rate
//! constants that compare the two.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::operator::{
    condition_number, random_orthogonal, BlockDiagonal, BlockPartition, DenseSymmetric,
    SymmetricOperator,
};

/// Excess loss below which a run with a target counts as converged.
const UNDERFLOW_LOSS: f64 = 1e-300;

/// Loss ratio treated as divergence before it overflows.
const DIVERGENCE_RATIO: f64 = 1e100;

/// Block-diagonal strongly convex quadratic with its cached solution and
/// spectra.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    hessian: BlockDiagonal,
    h: Vec<f64>,
    w_star: Vec<f64>,
    l_star: f64,
    eigenvalues: Vec<f64>,
    block_eigenvalues: Vec<Vec<f64>>,
    kappa: f64,
    block_kappas: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(blocks: Vec<DenseSymmetric>, h: Vec<f64>) -> Result<Self> {
        let hessian = BlockDiagonal::new(blocks)?;
        let dim = hessian.dim();
        if h.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: h.len(),
            });
        }
        let mut w_star = vec![0.0; dim];
        let mut block_eigenvalues = Vec::with_capacity(hessian.blocks().len());
        for (block, range) in hessian.blocks().iter().zip(hessian.partition().ranges()) {
            if !block.is_finite() {
                return Err(Error::NonFinite(range.start));
            }
            let eig = symmetric_eigen(&block.to_rows());
            let smallest = eig.values[0];
            if smallest <= 0.0 {
                return Err(Error::NotPositiveDefinite(smallest));
            }
            // w*_l = V Λ⁻¹ Vᵀ h_l
            let hl = &h[range.clone()];
            let n = block.dim();
            let coeffs: Vec<f64> = (0..n)
                .map(|k| (0..n).map(|i| eig.vectors[i][k] * hl[i]).sum::<f64>() / eig.values[k])
                .collect();
            for i in 0..n {
                w_star[range.start + i] = (0..n).map(|k| eig.vectors[i][k] * coeffs[k]).sum();
            }
            let mut desc = eig.values;
            desc.reverse();
            block_eigenvalues.push(desc);
        }
        let mut eigenvalues: Vec<f64> = block_eigenvalues.iter().flatten().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let kappa = condition_number(&eigenvalues)?;
        let block_kappas = block_eigenvalues
            .iter()
            .map(|e| condition_number(e))
            .collect::<Result<Vec<_>>>()?;
        let l_star = -0.5 * h.iter().zip(&w_star).map(|(a, b)| a * b).sum::<f64>();
        Ok(Self {
            hessian,
            h,
            w_star,
            l_star,
            eigenvalues,
            block_eigenvalues,
            kappa,
            block_kappas,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn hessian(&self) -> &BlockDiagonal {
        &self.hessian
    }

    pub fn partition(&self) -> &BlockPartition {
        self.hessian.partition()
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.h
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.w_star
    }

    pub fn optimum(&self) -> f64 {
        self.l_star
    }

    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Per-block eigenvalues, each descending.
    pub fn block_eigenvalues(&self) -> &[Vec<f64>] {
        &self.block_eigenvalues
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn block_kappas(&self) -> &[f64] {
        &self.block_kappas
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        let hw = self.hessian.apply(w);
        w.iter()
            .zip(&hw)
            .zip(&self.h)
            .map(|((wi, hwi), hi)| 0.5 * wi * hwi - hi * wi)
            .sum()
    }

    /// `L(w) − L*`, evaluated as `½ (w−w*)ᵀ H (w−w*)` to avoid cancellation.
    pub fn excess_loss(&self, w: &[f64]) -> f64 {
        let e: Vec<f64> = w.iter().zip(&self.w_star).map(|(a, b)| a - b).collect();
        let he = self.hessian.apply(&e);
        0.5 * e.iter().zip(&he).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.apply(w);
        g.iter_mut().zip(&self.h).for_each(|(gi, hi)| *gi -= hi);
        g
    }

    /// The problem `(cH, ch)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.hessian.blocks().iter().map(|b| b.scaled(c)).collect(),
            self.h.iter().map(|v| v * c).collect(),
        )
    }

    /// Classical optimal constant step `2 / (λ_1 + λ_d)`.
    pub fn optimal_gd_step(&self) -> f64 {
        2.0 / (self.eigenvalues[0] + self.eigenvalues[self.eigenvalues.len() - 1])
    }

    /// Standard normal initial point.
    pub fn gaussian_init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// The four quadratic cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Heterogeneous blocks from user-supplied spectra.
    One,
    /// Homogeneous blocks from user-supplied spectra.
    Two,
    /// `{1,2,3}, {99,100,101}, {4998,4999,5000}`.
    Three,
    /// `{1,99,4998}, {2,100,4999}, {3,101,5000}`.
    Four,
}

impl Case {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            3 => Ok(Case::Three),
            4 => Ok(Case::Four),
            other => Err(Error::InvalidArgument(format!("invalid case id {other}"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Case::One => 1,
            Case::Two => 2,
            Case::Three => 3,
            Case::Four => 4,
        }
    }
}

pub const CASE3_SPECTRA: [[f64; 3]; 3] = [
    [1.0, 2.0, 3.0],
    [99.0, 100.0, 101.0],
    [4998.0, 4999.0, 5000.0],
];

pub const CASE4_SPECTRA: [[f64; 3]; 3] = [
    [1.0, 99.0, 4998.0],
    [2.0, 100.0, 4999.0],
    [3.0, 101.0, 5000.0],
];

/// Blocks and eigenvalue range for the spectrum-file cases.
pub const SAMPLED_CASE_BLOCKS: usize = 4;
pub const SAMPLED_CASE_BLOCK_DIM: usize = 25;
pub const SAMPLED_CASE_RANGE: (f64, f64) = (1.0, 5000.0);

/// Build one of the four cases with `h = 0` and `H_l = Q_l Λ_l Q_lᵀ`, `Q_l`
/// Haar orthogonal from `seed`.
///
/// Cases 1 and 2 need one eigenvalue list per block (at least 25 values
/// each); 25 values are drawn without replacement from each list and all 100
/// are mapped affinely onto `[1, 5000]`.
pub fn make_case(case: Case, seed: u64, spectra: Option<&[Vec<f64>]>) -> Result<QuadraticProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas: Vec<Vec<f64>> = match case {
        Case::Three => CASE3_SPECTRA.iter().map(|b| b.to_vec()).collect(),
        Case::Four => CASE4_SPECTRA.iter().map(|b| b.to_vec()).collect(),
        Case::One | Case::Two => {
            let spectra = spectra.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "case {} needs {SAMPLED_CASE_BLOCKS} per-block spectrum files",
                    case.id()
                ))
            })?;
            sampled_spectra(spectra, &mut rng)?
        }
    };
    let blocks = lambdas
        .iter()
        .map(|lam| {
            let q = random_orthogonal(lam.len(), &mut rng);
            DenseSymmetric::from_eigen(&q, lam)
        })
        .collect();
    let dim: usize = lambdas.iter().map(Vec::len).sum();
    QuadraticProblem::new(blocks, vec![0.0; dim])
}

fn sampled_spectra<R: Rng>(spectra: &[Vec<f64>], rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if spectra.len() != SAMPLED_CASE_BLOCKS {
        return Err(Error::InvalidArgument(format!(
            "expected {SAMPLED_CASE_BLOCKS} spectra, got {}",
            spectra.len()
        )));
    }
    let mut picked = Vec::with_capacity(spectra.len());
    for (l, s) in spectra.iter().enumerate() {
        if s.len() < SAMPLED_CASE_BLOCK_DIM {
            return Err(Error::InvalidArgument(format!(
                "spectrum {l} has {} eigenvalues, need at least {SAMPLED_CASE_BLOCK_DIM}",
                s.len()
            )));
        }
        if let Some(i) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let idx = sample(rng, s.len(), SAMPLED_CASE_BLOCK_DIM);
        picked.push(idx.iter().map(|i| s[i]).collect::<Vec<f64>>());
    }
    let lo = picked.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = picked.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidArgument(
            "sampled eigenvalues are all equal; cannot map onto [1, 5000]".into(),
        ));
    }
    let (a, b) = SAMPLED_CASE_RANGE;
    Ok(picked
        .into_iter()
        .map(|v| v.into_iter().map(|x| a + (x - lo) * (b - a) / (hi - lo)).collect())
        .collect())
}

/// `H = diag(1, 5000)`, `h = 0`: the two-eigenvalue instance on which the GD
/// lower bound is checked.
pub fn hard_instance() -> QuadraticProblem {
    QuadraticProblem::new(vec![DenseSymmetric::diagonal(&[1.0, 5000.0])], vec![0.0, 0.0])
        .expect("diag(1, 5000) is positive definite")
}

/// Initial point of [`hard_instance`] with equal loss energy `½ λ_i w_i²` in
/// both eigendirections.
pub fn hard_instance_init() -> Vec<f64> {
    vec![1.0, 1.0 / 5000f64.sqrt()]
}

fn is_hard_instance(problem: &QuadraticProblem) -> bool {
    problem.dim() == 2
        && problem.hessian().blocks().len() == 1
        && problem.hessian().blocks()[0] == DenseSymmetric::diagonal(&[1.0, 5000.0])
        && problem.linear_term().iter().all(|&v| v == 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Gd,
    /// Adam, `β₁ = 0`, `β₂ = 1`: preconditioner frozen at `|∇L(w⁰)|`.
    AdamFixed,
    /// Adam, `β₁ = 0`, `β₂ < 1`.
    AdamEma,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::AdamFixed => "adam_fixed",
            OptimizerKind::AdamEma => "adam_ema",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Self::Gd),
            "adam_fixed" => Ok(Self::AdamFixed),
            "adam_ema" => Ok(Self::AdamEma),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Optimizer and step size. `β₁` and `ε` are fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub beta2: f64,
}

impl OptimizerConfig {
    pub fn gd(eta: f64) -> Self {
        Self {
            kind: OptimizerKind::Gd,
            eta,
            beta2: 1.0,
        }
    }

    pub fn adam_fixed(eta: f64) -> Self {
        Self {
            kind: OptimizerKind::AdamFixed,
            eta,
            beta2: 1.0,
        }
    }

    pub fn adam_ema(eta: f64, beta2: f64) -> Self {
        Self {
            kind: OptimizerKind::AdamEma,
            eta,
            beta2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        match self.kind {
            OptimizerKind::Gd => Ok(()),
            OptimizerKind::AdamFixed if self.beta2 == 1.0 => Ok(()),
            OptimizerKind::AdamFixed => Err(Error::InvalidArgument(
                "adam_fixed requires beta2 = 1".into(),
            )),
            OptimizerKind::AdamEma if (0.0..1.0).contains(&self.beta2) => Ok(()),
            OptimizerKind::AdamEma => Err(Error::InvalidArgument(format!(
                "adam_ema requires 0 <= beta2 < 1, got {}",
                self.beta2
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// Stopping rule and snapshot policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Stop once the loss ratio is at or below this value; `0` disables.
    pub target: f64,
    pub snapshot_stride: usize,
    /// Iterates kept at the start and at the end of the run.
    pub snapshot_edges: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            target: 1e-8,
            snapshot_stride: 100,
            snapshot_edges: 50,
        }
    }
}

impl RunOptions {
    pub fn new(max_iters: usize, target: f64) -> Self {
        Self {
            max_iters,
            target,
            ..Self::default()
        }
    }
}

/// Loss-ratio history of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub optimizer: OptimizerConfig,
    /// `(L(wᵗ) − L*) / (L(w⁰) − L*)`, starting with exactly 1.
    pub loss_ratios: Vec<f64>,
    /// `L(w⁰) − L*`.
    pub initial_gap: f64,
    /// `(t, wᵗ)` pairs, ascending in `t`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub iterations: usize,
    pub status: RunStatus,
    pub diagnostics: Vec<String>,
}

impl Trajectory {
    pub fn excess_loss(&self, t: usize) -> f64 {
        self.loss_ratios[t] * self.initial_gap
    }

    /// Steps needed to reach `target`, if ever.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.loss_ratios.iter().position(|&r| r <= target)
    }

    pub fn final_ratio(&self) -> f64 {
        *self.loss_ratios.last().unwrap()
    }
}

struct Recorder<'a> {
    problem: &'a QuadraticProblem,
    opts: &'a RunOptions,
    initial_gap: f64,
    ratios: Vec<f64>,
    snapshots: Vec<(usize, Vec<f64>)>,
    tail: VecDeque<(usize, Vec<f64>)>,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a QuadraticProblem, opts: &'a RunOptions, w0: &[f64]) -> Result<Self> {
        let initial_gap = problem.excess_loss(w0);
        if !(initial_gap > 0.0) || !initial_gap.is_finite() {
            return Err(Error::InvalidArgument(
                "initial point must have positive finite excess loss".into(),
            ));
        }
        Ok(Self {
            problem,
            opts,
            initial_gap,
            ratios: vec![1.0],
            snapshots: vec![(0, w0.to_vec())],
            tail: VecDeque::new(),
        })
    }

    /// Records iterate `t`; returns a terminal status if the run must stop.
    fn record(&mut self, t: usize, w: &[f64]) -> Option<RunStatus> {
        let gap = self.problem.excess_loss(w);
        let ratio = gap / self.initial_gap;
        if !ratio.is_finite() || ratio > DIVERGENCE_RATIO {
            return Some(RunStatus::Diverged);
        }
        self.ratios.push(ratio);
        let o = self.opts;
        if t < o.snapshot_edges || (o.snapshot_stride > 0 && t.is_multiple_of(o.snapshot_stride)) {
            self.snapshots.push((t, w.to_vec()));
        } else if o.snapshot_edges > 0 {
            if self.tail.len() == o.snapshot_edges {
                self.tail.pop_front();
            }
            self.tail.push_back((t, w.to_vec()));
        }
        // with no target the run is kept going: adam_ema can return from
        // arbitrarily small losses
        if o.target > 0.0 && (ratio <= o.target || gap < UNDERFLOW_LOSS) {
            return Some(RunStatus::Converged);
        }
        None
    }

    fn finish(mut self, optimizer: OptimizerConfig, status: RunStatus, diagnostics: Vec<String>) -> Trajectory {
        self.snapshots.extend(self.tail);
        self.snapshots.sort_by_key(|s| s.0);
        Trajectory {
            optimizer,
            iterations: self.ratios.len() - 1,
            loss_ratios: self.ratios,
            initial_gap: self.initial_gap,
            snapshots: self.snapshots,
            status,
            diagnostics,
        }
    }
}

fn check_init(problem: &QuadraticProblem, w0: &[f64]) -> Result<()> {
    if w0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: w0.len(),
        });
    }
    Ok(())
}

/// Iterates `w ← w − P ⊙ ∇L(w)` with a per-coordinate step vector `P`.
fn run_preconditioned(
    problem: &QuadraticProblem,
    steps: &[f64],
    w0: &[f64],
    opts: &RunOptions,
    optimizer: OptimizerConfig,
) -> Result<Trajectory> {
    let mut rec = Recorder::new(problem, opts, w0)?;
    let mut w = w0.to_vec();
    let mut status = RunStatus::MaxIters;
    for t in 1..=opts.max_iters {
        let g = problem.gradient(&w);
        for ((wi, gi), pi) in w.iter_mut().zip(&g).zip(steps) {
            *wi -= pi * gi;
        }
        if let Some(s) = rec.record(t, &w) {
            status = s;
            break;
        }
    }
    Ok(rec.finish(optimizer, status, vec![]))
}

/// Gradient descent; `eta = None` uses `2 / (λ_1 + λ_d)`.
pub fn gd_run(
    problem: &QuadraticProblem,
    eta: Option<f64>,
    w0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    check_init(problem, w0)?;
    let cfg = OptimizerConfig::gd(eta.unwrap_or_else(|| problem.optimal_gd_step()));
    cfg.validate()?;
    run_preconditioned(problem, &vec![cfg.eta; problem.dim()], w0, opts, cfg)
}

/// Fixed diagonal preconditioner `|∇L(w⁰)|`.
pub fn initial_preconditioner(problem: &QuadraticProblem, w0: &[f64]) -> Result<Vec<f64>> {
    let g0 = problem.gradient(w0);
    if let Some(i) = g0.iter().position(|&g| g == 0.0) {
        return Err(Error::ZeroGradientCoordinate(i));
    }
    Ok(g0.iter().map(|g| g.abs()).collect())
}

/// Adam with `β₁ = 0`, `β₂ = 1`, `ε = 0`:
/// `wᵗ⁺¹ = wᵗ − η D⁻¹ (Hwᵗ − h)` with `D = diag|∇L(w⁰)|`.
pub fn adam_fixed_run(
    problem: &QuadraticProblem,
    eta: f64,
    w0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    check_init(problem, w0)?;
    let cfg = OptimizerConfig::adam_fixed(eta);
    cfg.validate()?;
    let d = initial_preconditioner(problem, w0)?;
    let steps: Vec<f64> = d.iter().map(|di| eta / di).collect();
    run_preconditioned(problem, &steps, w0, opts, cfg)
}

/// Second-moment recursion `v_0 = g_0²`, `v_t = β₂ v_{t−1} + (1−β₂) g_t²`.
pub fn ema_second_moment(v: &mut [f64], g: &[f64], beta2: f64) {
    for (vi, gi) in v.iter_mut().zip(g) {
        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
    }
}

/// Adam with `β₁ = 0`, `β₂ < 1`, `ε = 0`. Coordinates whose accumulator is
/// exactly zero are left in place and reported in the diagnostics.
pub fn adam_ema_run(
    problem: &QuadraticProblem,
    eta: f64,
    beta2: f64,
    w0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    check_init(problem, w0)?;
    let cfg = OptimizerConfig::adam_ema(eta, beta2);
    cfg.validate()?;
    let mut rec = Recorder::new(problem, opts, w0)?;
    let mut w = w0.to_vec();
    let mut v: Vec<f64> = problem.gradient(w0).iter().map(|g| g * g).collect();
    let mut skipped = vec![0usize; w.len()];
    let mut status = RunStatus::MaxIters;
    for t in 1..=opts.max_iters {
        let g = problem.gradient(&w);
        // the first step uses D⁰ = |g_0|
        if t > 1 {
            ema_second_moment(&mut v, &g, beta2);
        }
        for (i, (wi, gi)) in w.iter_mut().zip(&g).enumerate() {
            if v[i] == 0.0 {
                skipped[i] += 1;
                continue;
            }
            *wi -= eta * gi / v[i].sqrt();
        }
        if let Some(s) = rec.record(t, &w) {
            status = s;
            break;
        }
    }
    let diagnostics = skipped
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, n)| format!("coordinate {i}: zero second moment, update skipped {n} times"))
        .collect();
    Ok(rec.finish(cfg, status, diagnostics))
}

/// Runs any optimizer from its config.
pub fn run(
    problem: &QuadraticProblem,
    cfg: &OptimizerConfig,
    w0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    match cfg.kind {
        OptimizerKind::Gd => gd_run(problem, Some(cfg.eta), w0, opts),
        OptimizerKind::AdamFixed => adam_fixed_run(problem, cfg.eta, w0, opts),
        OptimizerKind::AdamEma => adam_ema_run(problem, cfg.eta, cfg.beta2, w0, opts),
    }
}

/// `count` log-spaced values on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Default step-size grid: 25 log-spaced points on `[1e-6, 1]`.
pub fn default_eta_grid() -> Vec<f64> {
    log_grid(1e-6, 1.0, 25)
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    /// `(eta, iterations)` of the fastest converged run.
    pub best: Option<(f64, usize)>,
    pub runs: Vec<(f64, Trajectory)>,
}

/// Runs every step size; the best run reaches `opts.target` in the fewest
/// iterations (ties go to the smaller step).
pub fn grid_search(
    problem: &QuadraticProblem,
    kind: OptimizerKind,
    etas: &[f64],
    beta2: f64,
    w0: &[f64],
    opts: &RunOptions,
) -> Result<GridSearch> {
    if etas.is_empty() {
        return Err(Error::InvalidArgument("step-size grid is empty".into()));
    }
    let runs = etas
        .par_iter()
        .map(|&eta| {
            let cfg = OptimizerConfig { kind, eta, beta2 };
            run(problem, &cfg, w0, opts).map(|t| (eta, t))
        })
        .collect::<Result<Vec<_>>>()?;
    if runs.iter().all(|(_, t)| t.status == RunStatus::Diverged) {
        return Err(Error::AllDiverged);
    }
    let best = runs
        .iter()
        .filter(|(_, t)| t.status == RunStatus::Converged)
        .map(|(eta, t)| (*eta, t.iterations))
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Ok(GridSearch { best, runs })
}

/// Constants of the GD and fixed-preconditioner Adam rates.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub kappa: f64,
    pub block_kappas: Vec<f64>,
    /// `C_{l,1} = min_i |∇L(w⁰)_{l,i}| / λ_{l,1}`.
    pub c1: Vec<f64>,
    /// `C_{l,2} = max_i |∇L(w⁰)_{l,i}| / λ_{l,1}`.
    pub c2: Vec<f64>,
    /// `max_l C_{l,2}² / min_l C_{l,1}²`.
    pub r: f64,
    /// Step size at which the Adam rate holds: `min_l C_{l,1}`.
    pub eta_theory: f64,
    /// `min_l 1 / C_{l,1}`, kept for comparison; Adam is not stable there in
    /// general.
    pub eta_reciprocal: f64,
    /// `1 − 2/(κ+1)`.
    pub gd_factor: f64,
    /// `max_l (1 − 1/(r κ_l))`.
    pub adam_factor: f64,
    pub hard_instance: bool,
}

impl TheoryReport {
    /// Flat `key=value` lines.
    pub fn to_record(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.17e}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut s = String::new();
        s.push_str(&format!("kappa={:.17e}\n", self.kappa));
        s.push_str(&format!("block_kappas={}\n", list(&self.block_kappas)));
        s.push_str(&format!("c1={}\n", list(&self.c1)));
        s.push_str(&format!("c2={}\n", list(&self.c2)));
        s.push_str(&format!("r={:.17e}\n", self.r));
        s.push_str(&format!("eta_theory={:.17e}\n", self.eta_theory));
        s.push_str(&format!("eta_reciprocal={:.17e}\n", self.eta_reciprocal));
        s.push_str(&format!("gd_factor={:.17e}\n", self.gd_factor));
        s.push_str(&format!("adam_factor={:.17e}\n", self.adam_factor));
        s
    }
}

pub fn theory_report(problem: &QuadraticProblem, w0: &[f64]) -> Result<TheoryReport> {
    check_init(problem, w0)?;
    let g0 = problem.gradient(w0);
    if let Some(i) = g0.iter().position(|&g| g == 0.0) {
        return Err(Error::ZeroGradientCoordinate(i));
    }
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for (range, eigs) in problem.partition().ranges().zip(problem.block_eigenvalues()) {
        let top = eigs[0];
        let mags = g0[range].iter().map(|g| g.abs());
        let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
        c1.push(lo / top);
        c2.push(hi / top);
    }
    let min_c1 = c1.iter().copied().fold(f64::INFINITY, f64::min);
    let max_c2 = c2.iter().copied().fold(0.0f64, f64::max);
    let r = max_c2 * max_c2 / (min_c1 * min_c1);
    let kappa = problem.kappa();
    let adam_factor = problem
        .block_kappas()
        .iter()
        .map(|k| 1.0 - 1.0 / (r * k))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TheoryReport {
        kappa,
        block_kappas: problem.block_kappas().to_vec(),
        eta_theory: min_c1,
        eta_reciprocal: c1.iter().map(|c| 1.0 / c).fold(f64::INFINITY, f64::min),
        c1,
        c2,
        r,
        gd_factor: 1.0 - 2.0 / (kappa + 1.0),
        adam_factor,
        hard_instance: is_hard_instance(problem),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Every GD step keeps at least `1 − 2/(κ+1)` of the excess loss.
    GdLower,
    /// Every fixed-preconditioner Adam step keeps at most
    /// `max_l (1 − 1/(r κ_l))` of it.
    AdamUpper,
}

/// Absolute slack on per-step factors.
pub const BOUND_SLACK: f64 = 1e-9;

/// Ratios below this are not resolved well enough to form step factors.
const MIN_RESOLVED_RATIO: f64 = 1e-280;

#[derive(Debug, Clone)]
pub struct BoundVerification {
    pub kind: BoundKind,
    pub bound: f64,
    /// `ratio[t+1] / ratio[t]` for each resolved step.
    pub factors: Vec<f64>,
    pub violations: usize,
    /// Worst signed excess over the bound (positive means violated).
    pub worst_excess: f64,
}

pub fn verify_bounds(
    traj: &Trajectory,
    report: &TheoryReport,
    kind: BoundKind,
) -> Result<BoundVerification> {
    if traj.iterations < 2 {
        return Err(Error::Precondition(
            "trajectory must have at least two steps".into(),
        ));
    }
    let bound = match kind {
        BoundKind::GdLower => {
            if traj.optimizer.kind != OptimizerKind::Gd {
                return Err(Error::Precondition(format!(
                    "gd_lower needs a gd trajectory, got {}",
                    traj.optimizer.kind
                )));
            }
            if !report.hard_instance {
                return Err(Error::Precondition(
                    "gd_lower is defined on the diag(1, 5000) hard instance".into(),
                ));
            }
            report.gd_factor
        }
        BoundKind::AdamUpper => {
            if traj.optimizer.kind != OptimizerKind::AdamFixed {
                return Err(Error::Precondition(format!(
                    "adam_upper needs an adam_fixed trajectory, got {}",
                    traj.optimizer.kind
                )));
            }
            report.adam_factor
        }
    };
    let factors: Vec<f64> = traj
        .loss_ratios
        .windows(2)
        .take_while(|w| w[1] >= MIN_RESOLVED_RATIO)
        .map(|w| w[1] / w[0])
        .collect();
    let excess = |f: f64| match kind {
        BoundKind::GdLower => bound - f,
        BoundKind::AdamUpper => f - bound,
    };
    let violations = factors.iter().filter(|&&f| excess(f) > BOUND_SLACK).count();
    let worst_excess = factors
        .iter()
        .map(|&f| excess(f))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundVerification {
        kind,
        bound,
        factors,
        violations,
        worst_excess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycle {
    pub cycling: bool,
    pub tail_min_loss: f64,
    pub threshold: f64,
}

/// Flags a run whose excess loss stays above `1e-4 η²` over
/// `[transient, transient + window]`.
pub fn detect_limit_cycle(traj: &Trajectory, transient: usize, window: usize) -> Result<LimitCycle> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    if traj.loss_ratios.len() <= transient + window {
        return Err(Error::Precondition(format!(
            "trajectory has {} iterates, need {}",
            traj.loss_ratios.len(),
            transient + window + 1
        )));
    }
    let tail_min_loss = (transient..=transient + window)
        .map(|t| traj.excess_loss(t))
        .fold(f64::INFINITY, f64::min);
    let threshold = 1e-4 * traj.optimizer.eta * traj.optimizer.eta;
    Ok(LimitCycle {
        cycling: tail_min_loss > threshold,
        tail_min_loss,
        threshold,
    })
}

/// `L(w) = ½ w²`.
pub fn scalar_quadratic() -> QuadraticProblem {
    QuadraticProblem::new(vec![DenseSymmetric::identity(1)], vec![0.0])
        .expect("identity is positive definite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_stop(max_iters: usize) -> RunOptions {
        RunOptions::new(max_iters, 0.0)
    }

    #[test]
    fn case3_spectrum_and_condition_numbers() {
        let p = make_case(Case::Three, 17, None).unwrap();
        let want = [5000.0, 4999.0, 4998.0, 101.0, 100.0, 99.0, 3.0, 2.0, 1.0];
        for (got, w) in p.eigenvalues().iter().zip(want) {
            assert!(((got - w) / w).abs() < 1e-8);
        }
        assert!(((p.kappa() - 5000.0) / 5000.0).abs() < 1e-6);
        let expect = [3.0, 101.0 / 99.0, 5000.0 / 4998.0];
        for (k, e) in p.block_kappas().iter().zip(expect) {
            assert!((k - e).abs() < 1e-6 && *k <= 3.01);
        }
    }

    #[test]
    fn case4_shares_case3_eigenvalues() {
        let p3 = make_case(Case::Three, 2, None).unwrap();
        let p4 = make_case(Case::Four, 2, None).unwrap();
        for (a, b) in p3.eigenvalues().iter().zip(p4.eigenvalues()) {
            assert!(((a - b) / b).abs() < 1e-8);
        }
        assert_eq!(p4.block_eigenvalues().len(), 3);
        assert!(((p4.block_eigenvalues()[0][0] - 4998.0) / 4998.0).abs() < 1e-8);
    }

    #[test]
    fn sampled_cases_need_spectra() {
        assert!(make_case(Case::One, 0, None).is_err());
        let short = vec![vec![1.0; 10]; 4];
        assert!(make_case(Case::Two, 0, Some(&short)).is_err());
        let spectra: Vec<Vec<f64>> = (0..4)
            .map(|l| (0..40).map(|i| (l * 40 + i) as f64 + 0.5).collect())
            .collect();
        let p = make_case(Case::One, 0, Some(&spectra)).unwrap();
        assert_eq!(p.dim(), 100);
        assert!(((p.kappa() - 5000.0) / 5000.0).abs() < 1e-6);
    }

    #[test]
    fn unit_step_solves_scalar_problem() {
        let p = scalar_quadratic();
        let t = gd_run(&p, Some(1.0), &[5.0], &RunOptions::default()).unwrap();
        assert_eq!(t.status, RunStatus::Converged);
        assert_eq!(t.iterations, 1);
        assert_eq!(t.loss_ratios, vec![1.0, 0.0]);
    }

    #[test]
    fn default_step_is_optimal_constant() {
        let p = make_case(Case::Three, 0, None).unwrap();
        assert!((p.optimal_gd_step() - 2.0 / 5001.0).abs() < 1e-15);
    }

    #[test]
    fn gd_matches_closed_form() {
        let p = make_case(Case::Four, 5, None).unwrap();
        let w0 = p.gaussian_init(9);
        let eta = 1e-4;
        let t = gd_run(&p, Some(eta), &w0, &no_stop(100)).unwrap();
        // (I - ηH)^t w0 by repeated multiplication on an independent dense copy
        let dense = p.hessian().to_dense().to_rows();
        let mut e = w0.clone();
        for step in 1..=100 {
            let he: Vec<f64> = dense.iter().map(|row| row.iter().zip(&e).map(|(a, b)| a * b).sum()).collect();
            e.iter_mut().zip(&he).for_each(|(x, y)| *x -= eta * y);
            if let Some((_, w)) = t.snapshots.iter().find(|(s, _)| *s == step) {
                for (a, b) in w.iter().zip(&e) {
                    assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn adam_fixed_hand_step() {
        // H = [2], w0 = 3: g0 = 6, D = 6, w1 = 3 - η
        let p = QuadraticProblem::new(vec![DenseSymmetric::diagonal(&[2.0])], vec![0.0]).unwrap();
        let t = adam_fixed_run(&p, 0.5, &[3.0], &no_stop(1)).unwrap();
        assert_eq!(t.snapshots[1], (1, vec![2.5]));
    }

    #[test]
    fn adam_fixed_zero_gradient_coordinate() {
        let p = QuadraticProblem::new(vec![DenseSymmetric::identity(3)], vec![0.0; 3]).unwrap();
        let err = adam_fixed_run(&p, 0.1, &[1.0, 0.0, 2.0], &no_stop(5)).unwrap_err();
        assert!(matches!(err, Error::ZeroGradientCoordinate(1)));
        assert!(err.to_string().contains("coordinate 1"));
    }

    #[test]
    fn ema_accumulator_first_step() {
        let g0 = [3.0, -1.0];
        let g1 = [0.5, 2.0];
        let b2 = 0.9;
        let mut v: Vec<f64> = g0.iter().map(|g| g * g).collect();
        ema_second_moment(&mut v, &g1, b2);
        for i in 0..2 {
            let want = (1.0 - b2) * g1[i] * g1[i] + b2 * g0[i] * g0[i];
            assert!((v[i] - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn sign_descent_two_cycle() {
        let p = scalar_quadratic();
        let eta = 0.1;
        let t = adam_ema_run(&p, eta, 0.0, &[eta / 2.0], &no_stop(1000)).unwrap();
        assert_eq!(t.status, RunStatus::MaxIters);
        for (k, w) in &t.snapshots {
            let want = if k % 2 == 0 { eta / 2.0 } else { -eta / 2.0 };
            assert!((w[0] - want).abs() < 1e-15);
        }
        let lc = detect_limit_cycle(&t, 500, 400).unwrap();
        assert!(lc.cycling);
        assert!(lc.tail_min_loss >= eta * eta / 8.0 - 1e-12);
    }

    #[test]
    fn gd_does_not_cycle() {
        let p = scalar_quadratic();
        let t = gd_run(&p, Some(0.1), &[1.0], &no_stop(2000)).unwrap();
        let lc = detect_limit_cycle(&t, 1000, 500).unwrap();
        assert!(!lc.cycling);
        assert!(detect_limit_cycle(&t, 1000, 0).is_err());
    }

    #[test]
    fn theory_constants() {
        let p = make_case(Case::Three, 0, None).unwrap();
        let w0 = p.gaussian_init(1);
        let rep = theory_report(&p, &w0).unwrap();
        assert!((rep.gd_factor - 4999.0 / 5001.0).abs() < 1e-9);
        assert!(rep.r > 0.0);
        assert!(rep.adam_factor > 0.0 && rep.adam_factor < 1.0);
        assert!(!rep.hard_instance);

        // equal gradient magnitudes in a single block give r = 1
        let single = QuadraticProblem::new(vec![DenseSymmetric::diagonal(&[1.0, 2.0])], vec![0.0; 2]).unwrap();
        let rep = theory_report(&single, &[2.0, -1.0]).unwrap();
        assert_eq!(rep.c1, rep.c2);
        assert_eq!(rep.r, 1.0);
    }

    #[test]
    fn bound_preconditions() {
        let p = make_case(Case::Three, 0, None).unwrap();
        let w0 = p.gaussian_init(1);
        let rep = theory_report(&p, &w0).unwrap();
        let gd = gd_run(&p, None, &w0, &no_stop(10)).unwrap();
        assert!(matches!(
            verify_bounds(&gd, &rep, BoundKind::AdamUpper),
            Err(Error::Precondition(_))
        ));
        // gd_lower only on the hard instance
        assert!(verify_bounds(&gd, &rep, BoundKind::GdLower).is_err());
        let short = gd_run(&p, None, &w0, &no_stop(1)).unwrap();
        let adam = adam_fixed_run(&p, rep.eta_theory, &w0, &no_stop(1)).unwrap();
        assert!(verify_bounds(&short, &rep, BoundKind::GdLower).is_err());
        assert!(verify_bounds(&adam, &rep, BoundKind::AdamUpper).is_err());
    }

    #[test]
    fn grid_search_picks_fastest() {
        let p = scalar_quadratic();
        let g = grid_search(&p, OptimizerKind::Gd, &[0.5, 1.0, 1.5], 1.0, &[1.0], &RunOptions::default()).unwrap();
        assert_eq!(g.best, Some((1.0, 1)));
        assert_eq!(g.runs.len(), 3);
        assert!(grid_search(&p, OptimizerKind::Gd, &[], 1.0, &[1.0], &RunOptions::default()).is_err());
        assert!(matches!(
            grid_search(&p, OptimizerKind::Gd, &[3.0, 5.0], 1.0, &[1.0], &RunOptions::default()),
            Err(Error::AllDiverged)
        ));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::adam_ema(0.1, 1.0).validate().is_err());
        assert!(OptimizerConfig {
            kind: OptimizerKind::AdamFixed,
            eta: 0.1,
            beta2: 0.9
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::gd(0.0).validate().is_err());
        assert!(OptimizerConfig::adam_ema(0.1, 0.0).validate().is_ok());
    }

    #[test]
    fn snapshots_cover_edges_and_stride() {
        let p = make_case(Case::Four, 0, None).unwrap();
        let w0 = p.gaussian_init(0);
        let t = gd_run(&p, Some(1e-5), &w0, &no_stop(1000)).unwrap();
        let ids: Vec<usize> = t.snapshots.iter().map(|s| s.0).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert!((0..50).all(|i| ids.contains(&i)));
        assert!((951..=1000).all(|i| ids.contains(&i)));
        assert!(ids.contains(&500) && !ids.contains(&501));
        assert_eq!(t.loss_ratios.len(), 1001);
        assert_eq!(t.loss_ratios[0], 1.0);
    }
}
