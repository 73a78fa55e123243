//! Small tanh networks with logistic loss: analytic gradients, finite
//! difference Hessians, the cross-neuron Hessian block formula, and a
//! training loop with SGD (momentum) or Adam.
//!
//! Labels are `±1` and the loss is `ℓ = log(1 + exp(−y f(θ, x)))`, so
//! `p(y|x) = 1 / (1 + exp(−y f))`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heterogeneity::{pairwise_heatmap, HeterogeneityReport, Normalization};
use crate::operator::{exact_eigenvalues, BlockPartition, DenseSymmetric};
use crate::slq::{densities_on_shared_grid, SpectralMeasure, DEFAULT_GRID_POINTS};

/// Largest parameter count accepted by [`hessian_fd`].
pub const MAX_FD_DIM: usize = 500;

/// Labelled samples with `y ∈ {−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidArgument(
                "dataset needs equally many features and labels".into(),
            ));
        }
        let d = xs[0].len();
        for (i, x) in xs.iter().enumerate() {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
        }
        if !ys.contains(&1.0) || !ys.contains(&-1.0) {
            return Err(Error::InvalidArgument("both classes must be present".into()));
        }
        Ok(Self { xs, ys })
    }

    /// Two isotropic unit-variance Gaussian blobs centred at `±separation·u`
    /// for a random unit direction `u`; classes alternate.
    pub fn two_blobs(samples: usize, dim: usize, separation: f64, seed: u64) -> Result<Self> {
        if samples < 2 || dim == 0 {
            return Err(Error::InvalidArgument(
                "need at least two samples and one feature".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= nrm);
        let mut xs = Vec::with_capacity(samples);
        let mut ys = Vec::with_capacity(samples);
        for i in 0..samples {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x = u
                .iter()
                .map(|ui| y * separation * ui + rng.sample::<f64, _>(StandardNormal))
                .collect();
            xs.push(x);
            ys.push(y);
        }
        Self::new(xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn features(&self) -> usize {
        self.xs[0].len()
    }
}

/// A scalar-output model with flat parameters.
pub trait Model: Sync {
    fn num_params(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn input_dim(&self) -> usize;

    /// `f(θ, x)`.
    fn logit(&self, params: &[f64], x: &[f64]) -> f64;

    /// Returns `f(θ, x)` and adds `scale · ∂f/∂θ` into `grad`.
    fn logit_grad(&self, params: &[f64], x: &[f64], scale: f64, grad: &mut [f64]) -> f64;
}

/// `log(1 + exp(−m))` without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss and its gradient at `params` over `batch` (indices
/// into `data`; `None` means all samples).
pub fn loss_grad_at<M: Model + ?Sized>(
    model: &M,
    params: &[f64],
    data: &Dataset,
    batch: Option<&[usize]>,
) -> Result<(f64, Vec<f64>)> {
    let all: Vec<usize>;
    let idx = match batch {
        Some(b) => b,
        None => {
            all = (0..data.len()).collect();
            &all
        }
    };
    if idx.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if data.features() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: data.features(),
        });
    }
    let inv = 1.0 / idx.len() as f64;
    let mut grad = vec![0.0; model.num_params()];
    let mut loss = 0.0;
    let mut scratch = vec![0.0; model.num_params()];
    for &i in idx {
        let y = data.ys[i];
        scratch.iter_mut().for_each(|g| *g = 0.0);
        let f = model.logit_grad(params, &data.xs[i], 1.0, &mut scratch);
        if !f.is_finite() {
            return Err(Error::NonFiniteActivation(i));
        }
        let m = y * f;
        loss += softplus_neg(m) * inv;
        // dℓ/df = −y (1 − p)
        let dl = -y * sigmoid(-m) * inv;
        grad.iter_mut().zip(&scratch).for_each(|(g, s)| *g += dl * s);
    }
    Ok((loss, grad))
}

pub fn loss_grad<M: Model + ?Sized>(model: &M, data: &Dataset, batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
    loss_grad_at(model, model.params(), data, batch)
}

/// Mean `p(y|x)` and accuracy over the whole dataset.
pub fn evaluate<M: Model + ?Sized>(model: &M, data: &Dataset) -> (f64, f64) {
    let mut p = 0.0;
    let mut correct = 0usize;
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let m = y * model.logit(model.params(), x);
        p += sigmoid(m);
        if m > 0.0 {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    (p / n, correct as f64 / n)
}

/// `f(θ, x) = Σ_i v_i tanh(w_iᵀ x)`.
///
/// Flat layout: `w_1, …, w_n` (each `d_in` long) then `v_1, …, v_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    hidden: usize,
    input: usize,
    params: Vec<f64>,
}

impl ToyNet {
    pub fn new(hidden: usize, input: usize, params: Vec<f64>) -> Result<Self> {
        if hidden == 0 || input == 0 {
            return Err(Error::InvalidArgument("widths must be positive".into()));
        }
        let want = hidden * input + hidden;
        if params.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: params.len(),
            });
        }
        Ok(Self {
            hidden,
            input,
            params,
        })
    }

    /// Hidden weights with std `1/√d_in`, output weights with std `1/√n`.
    pub fn random(hidden: usize, input: usize, seed: u64) -> Result<Self> {
        Self::random_scaled(hidden, input, 1.0, seed)
    }

    /// As [`ToyNet::random`] with hidden weights shrunk by `w_scale`.
    pub fn random_scaled(hidden: usize, input: usize, w_scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sw = w_scale / (input as f64).sqrt();
        let sv = 1.0 / (hidden as f64).sqrt();
        let mut params = Vec::with_capacity(hidden * input + hidden);
        params.extend((0..hidden * input).map(|_| sw * rng.sample::<f64, _>(StandardNormal)));
        params.extend((0..hidden).map(|_| sv * rng.sample::<f64, _>(StandardNormal)));
        Self::new(hidden, input, params)
    }

    pub fn from_parts(w: &[Vec<f64>], v: &[f64]) -> Result<Self> {
        let hidden = v.len();
        let input = w.first().map_or(0, Vec::len);
        if w.len() != hidden {
            return Err(Error::DimensionMismatch {
                expected: hidden,
                got: w.len(),
            });
        }
        let mut params: Vec<f64> = w.iter().flatten().copied().collect();
        params.extend_from_slice(v);
        Self::new(hidden, input, params)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// `(w_1..w_n, v)` from the flat vector.
    pub fn unflatten(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let split = self.hidden * self.input;
        let w = self.params[..split]
            .chunks(self.input)
            .map(<[f64]>::to_vec)
            .collect();
        (w, self.params[split..].to_vec())
    }

    pub fn w_range(&self, i: usize) -> std::ops::Range<usize> {
        i * self.input..(i + 1) * self.input
    }

    pub fn v_index(&self, i: usize) -> usize {
        self.hidden * self.input + i
    }

    /// Group labels putting `w_i` and `v_i` of neuron `i` together.
    pub fn neuron_groups(&self) -> Vec<usize> {
        let mut g = Vec::with_capacity(self.num_params());
        for i in 0..self.hidden {
            g.extend(std::iter::repeat_n(i, self.input));
        }
        g.extend(0..self.hidden);
        g
    }

    fn pre_activation(&self, params: &[f64], i: usize, x: &[f64]) -> f64 {
        params[self.w_range(i)].iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

impl Model for ToyNet {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_dim(&self) -> usize {
        self.input
    }

    fn logit(&self, params: &[f64], x: &[f64]) -> f64 {
        (0..self.hidden)
            .map(|i| params[self.v_index(i)] * self.pre_activation(params, i, x).tanh())
            .sum()
    }

    fn logit_grad(&self, params: &[f64], x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let mut f = 0.0;
        for i in 0..self.hidden {
            let z = self.pre_activation(params, i, x);
            let a = z.tanh();
            let vi = params[self.v_index(i)];
            f += vi * a;
            grad[self.v_index(i)] += scale * a;
            let c = scale * vi * (1.0 - a * a);
            for (g, xk) in grad[self.w_range(i)].iter_mut().zip(x) {
                *g += c * xk;
            }
        }
        f
    }
}

/// `p(1−p) v_i v_j φ′(w_iᵀx) φ′(w_jᵀx) x xᵀ`: the `(w_i, w_j)` Hessian block
/// of the single-sample loss for `i ≠ j`.
pub fn cross_neuron_block(net: &ToyNet, x: &[f64], y: f64, i: usize, j: usize) -> Result<Vec<Vec<f64>>> {
    if i == j {
        return Err(Error::InvalidArgument(
            "diagonal neuron blocks carry extra terms; use i != j".into(),
        ));
    }
    if i >= net.hidden || j >= net.hidden {
        return Err(Error::InvalidArgument(format!(
            "neuron index out of range (n = {})",
            net.hidden
        )));
    }
    let p = net.params();
    let prob = sigmoid(y * net.logit(p, x));
    let dphi = |k: usize| {
        let a = net.pre_activation(p, k, x).tanh();
        1.0 - a * a
    };
    let c = prob * (1.0 - prob) * p[net.v_index(i)] * p[net.v_index(j)] * dphi(i) * dphi(j);
    Ok(x.iter().map(|a| x.iter().map(|b| c * a * b).collect()).collect())
}

/// Dense Hessian of the mean loss over a fixed batch.
#[derive(Debug, Clone)]
pub struct HessianSnapshot {
    /// Symmetrized `(H + Hᵀ)/2`.
    pub matrix: DenseSymmetric,
    /// `max |H − Hᵀ|` before symmetrization.
    pub asymmetry: f64,
    pub step: usize,
}

/// Central differences of `grad` column by column with
/// `h_j = 1e-4 (1 + |θ_j|)`, assembled in column order.
pub fn hessian_fd<G>(grad: G, theta: &[f64], step: usize) -> Result<HessianSnapshot>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = theta.len();
    if n > MAX_FD_DIM {
        return Err(Error::InvalidArgument(format!(
            "finite-difference Hessian limited to {MAX_FD_DIM} parameters, got {n}"
        )));
    }
    let columns = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = 1e-4 * (1.0 + theta[j].abs());
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let gp = grad(&plus)?;
            let gm = grad(&minus)?;
            let width = plus[j] - minus[j];
            Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / width).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((columns[j][i] - columns[i][j]).abs());
        }
    }
    let matrix = DenseSymmetric::from_fn(n, |i, j| 0.5 * (columns[j][i] + columns[i][j]));
    Ok(HessianSnapshot {
        matrix,
        asymmetry,
        step,
    })
}

/// FD Hessian of a model's mean loss over `data`.
pub fn model_hessian<M: Model + ?Sized>(model: &M, data: &Dataset, step: usize) -> Result<HessianSnapshot> {
    hessian_fd(
        |theta| loss_grad_at(model, theta, data, None).map(|(_, g)| g),
        model.params(),
        step,
    )
}

/// Frobenius mass of entries whose row and column fall in different groups,
/// divided by the total Frobenius mass.
pub fn offdiag_mass_ratio(matrix: &DenseSymmetric, groups: &[usize]) -> Result<f64> {
    let n = matrix.dim();
    if groups.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: groups.len(),
        });
    }
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = matrix.get(i, j);
            let m = a * a;
            total += m;
            if groups[i] != groups[j] {
                off += m;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::InvalidArgument(
            "zero matrix has no off-diagonal mass ratio".into(),
        ));
    }
    Ok(off / total)
}

/// Group labels of a contiguous partition.
pub fn partition_groups(partition: &BlockPartition) -> Vec<usize> {
    let mut g = Vec::with_capacity(partition.dim());
    for (l, &s) in partition.sizes().iter().enumerate() {
        g.extend(std::iter::repeat_n(l, s));
    }
    g
}

/// Blockwise spectra of a snapshot from exact eigenvalues of each principal
/// block, compared pairwise.
pub fn snapshot_heterogeneity(
    snapshot: &HessianSnapshot,
    partition: &BlockPartition,
    labels: Option<Vec<String>>,
    mode: Normalization,
) -> Result<HeterogeneityReport> {
    if partition.dim() != snapshot.matrix.dim() {
        return Err(Error::DimensionMismatch {
            expected: snapshot.matrix.dim(),
            got: partition.dim(),
        });
    }
    let measures = partition
        .ranges()
        .map(|r| exact_eigenvalues(&snapshot.matrix.principal(r)).map(|e| SpectralMeasure::from_eigenvalues(&e)))
        .collect::<Result<Vec<_>>>()?;
    let spectra = densities_on_shared_grid(&measures, partition.sizes(), mode, DEFAULT_GRID_POINTS, None)?;
    pairwise_heatmap(&spectra.densities, labels, mode)
}

/// Dense tanh network with a linear scalar output.
///
/// Flat layout per layer: weight matrix `(out × in)` row-major, then bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// `widths = [d_in, h_1, …, 1]`. Layer `ℓ` (1-based) draws weights with
    /// std `c^{ℓ−1}/√fan_in`; biases start at zero.
    pub fn scaled(widths: &[usize], c: f64, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument("widths must be positive".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArgument("output width must be 1".into()));
        }
        if !(c >= 1.0) {
            return Err(Error::InvalidArgument(format!("scale c must be >= 1, got {c}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = c.powi(l as i32) / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| std * rng.sample::<f64, _>(StandardNormal)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params,
        })
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// One block per weight matrix and one per bias vector, in flat order.
    pub fn parameter_partition(&self) -> BlockPartition {
        let sizes = self
            .widths
            .windows(2)
            .flat_map(|p| [p[0] * p[1], p[1]])
            .collect();
        BlockPartition::new(sizes).expect("positive widths")
    }

    pub fn block_labels(&self) -> Vec<String> {
        (1..=self.layers())
            .flat_map(|l| [format!("W{l}"), format!("b{l}")])
            .collect()
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let last = self.layers() - 1;
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fi, fo) = (pair[0], pair[1]);
            let w = &params[off..off + fi * fo];
            let b = &params[off + fi * fo..off + fi * fo + fo];
            off += fi * fo + fo;
            let input = acts.last().unwrap();
            let out: Vec<f64> = (0..fo)
                .map(|o| {
                    let z = b[o] + w[o * fi..(o + 1) * fi].iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }
}

impl Model for Mlp {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn logit(&self, params: &[f64], x: &[f64]) -> f64 {
        self.forward(params, x).last().unwrap()[0]
    }

    fn logit_grad(&self, params: &[f64], x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward(params, x);
        let layers = self.layers();
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for pair in self.widths.windows(2) {
            offsets.push(off);
            off += pair[0] * pair[1] + pair[1];
        }
        // delta = ∂f/∂z for the current layer
        let mut delta = vec![scale];
        for l in (0..layers).rev() {
            let (fi, fo) = (self.widths[l], self.widths[l + 1]);
            let base = offsets[l];
            let input = &acts[l];
            for o in 0..fo {
                let d = delta[o];
                for k in 0..fi {
                    grad[base + o * fi + k] += d * input[k];
                }
                grad[base + fi * fo + o] += d;
            }
            if l > 0 {
                let w = &params[base..base + fi * fo];
                delta = (0..fi)
                    .map(|k| {
                        let back: f64 = (0..fo).map(|o| w[o * fi + k] * delta[o]).sum();
                        let a = input[k];
                        back * (1.0 - a * a)
                    })
                    .collect();
            }
        }
        acts[layers][0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuralOptimizer {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl NeuralOptimizer {
    pub fn sgd(lr: f64) -> Self {
        Self::Sgd { lr, momentum: 0.9 }
    }

    pub fn adam(lr: f64) -> Self {
        Self::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Sgd { lr, .. } | Self::Adam { lr, .. } => lr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd { .. } => "sgd",
            Self::Adam { .. } => "adam",
        }
    }
}

impl fmt::Display for NeuralOptimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(lr={})", self.name(), self.lr())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    /// Samples per step; `0` means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Take an FD Hessian every this many steps (and at the end); `0`
    /// disables snapshots.
    pub snapshot_stride: usize,
    /// Evaluate full-data loss and accuracy every this many steps (and at
    /// the end); `0` means only at the start and end.
    pub eval_stride: usize,
    /// Stop at the first evaluation whose mean `p(y|x)` reaches this value.
    pub target_mean_p: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            seed: 0,
            snapshot_stride: 0,
            eval_stride: 1,
            target_mean_p: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Steps at which the full-data loss and accuracy were evaluated.
    pub steps: Vec<usize>,
    pub losses: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub snapshots: Vec<HessianSnapshot>,
    pub status: TrainStatus,
}

impl TrainResult {
    pub fn final_accuracy(&self) -> f64 {
        *self.accuracies.last().unwrap()
    }
}

/// Trains in place. Mini-batches are drawn by a seeded shuffle per epoch.
pub fn train<M: Model + ?Sized>(
    model: &mut M,
    data: &Dataset,
    optimizer: NeuralOptimizer,
    opts: &TrainOptions,
) -> Result<TrainResult> {
    if data.features() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: data.features(),
        });
    }
    let n = model.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let batch = if opts.batch_size == 0 { data.len() } else { opts.batch_size.min(data.len()) };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = data.len();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut steps = Vec::new();
    let mut losses = Vec::with_capacity(opts.steps + 1);
    let mut accuracies = Vec::with_capacity(opts.steps + 1);
    let mut snapshots = Vec::new();
    let mut status = TrainStatus::Completed;

    for step in 0..=opts.steps {
        let due = step == 0 || step == opts.steps || (opts.eval_stride > 0 && step % opts.eval_stride == 0);
        if due {
            let loss = match loss_grad(model, data, None) {
                Ok((l, _)) => l,
                Err(Error::NonFiniteActivation(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                status = TrainStatus::Diverged;
                break;
            }
            let (mean_p, acc) = evaluate(model, data);
            steps.push(step);
            losses.push(loss);
            accuracies.push(acc);
            if opts.target_mean_p.is_some_and(|t| mean_p >= t) {
                if opts.snapshot_stride > 0 {
                    snapshots.push(model_hessian(model, data, step)?);
                }
                break;
            }
        }
        if opts.snapshot_stride > 0 && (step % opts.snapshot_stride == 0 || step == opts.steps) {
            snapshots.push(model_hessian(model, data, step)?);
        }
        if step == opts.steps {
            break;
        }
        if cursor + batch > data.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let (_, g) = match loss_grad(model, data, Some(idx)) {
            Ok(v) => v,
            Err(Error::NonFiniteActivation(_)) => {
                status = TrainStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let t = (step + 1) as i32;
        let p = model.params_mut();
        match optimizer {
            NeuralOptimizer::Sgd { lr, momentum } => {
                for ((pi, gi), mi) in p.iter_mut().zip(&g).zip(m1.iter_mut()) {
                    *mi = momentum * *mi + gi;
                    *pi -= lr * *mi;
                }
            }
            NeuralOptimizer::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..n {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
            }
        }
        if p.iter().any(|v| !v.is_finite()) {
            status = TrainStatus::Diverged;
            break;
        }
    }
    Ok(TrainResult {
        steps,
        losses,
        accuracies,
        snapshots,
        status,
    })
}
