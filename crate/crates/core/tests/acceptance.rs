//! End-to-end acceptance checks. Runs sequentially (several checks are
//! timed) and prints one PASS/FAIL line per check; exits nonzero if any
//! check fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blockhess::cli::{self, ScaledMlpSetup};
use blockhess::density::{trapezoid_weights, SpectralDensity};
use blockhess::heterogeneity::{js_distance, Normalization};
use blockhess::operator::{exact_eigenvalues, DenseSymmetric};
use blockhess::quadlab::{self, BoundKind, Case, OptimizerKind, QuadraticProblem, RunOptions, RunStatus};
use blockhess::slq::{self, SlqConfig};
use blockhess::toynet::{self, Dataset, Model, NeuralOptimizer, ToyNet, TrainOptions};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let o = Outcome { name, pass, detail };
    println!(
        "[{}] {}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.name,
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o
}

// ---------- independent oracles ----------

/// Cyclic Jacobi eigenvalues of a dense symmetric matrix, ascending.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `(1/n) Σ_i N(t; λ_i, σ²)` on `grid`, renormalized to unit trapezoid mass.
fn smoothed_oracle(eigs: &[f64], sigma: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt() * eigs.len() as f64);
    let mut v: Vec<f64> = grid
        .iter()
        .map(|&t| eigs.iter().map(|&l| (-0.5 * ((t - l) / sigma).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    let mass: f64 = v.iter().zip(trapezoid_weights(grid)).map(|(a, w)| a * w).sum();
    v.iter_mut().for_each(|x| *x /= mass);
    v
}

fn js_oracle(p: &[f64], q: &[f64], grid: &[f64]) -> f64 {
    let w = trapezoid_weights(grid);
    let pm: Vec<f64> = p.iter().zip(&w).map(|(a, b)| a * b).collect();
    let qm: Vec<f64> = q.iter().zip(&w).map(|(a, b)| a * b).collect();
    let (sp, sq): (f64, f64) = (pm.iter().sum(), qm.iter().sum());
    let kl = |a: &[f64], sa: f64, m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| (x / sa) * ((x / sa) / y).log2())
            .sum()
    };
    let m: Vec<f64> = pm.iter().zip(&qm).map(|(a, b)| 0.5 * (a / sp + b / sq)).collect();
    0.5 * kl(&pm, sp, &m) + 0.5 * kl(&qm, sq, &m)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

// ---------- checks ----------

fn slq_fidelity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let a = DenseSymmetric::random_gaussian(200, &mut rng);
    let cfg = SlqConfig::full(1);
    let start = Instant::now();
    let density = slq::slq_density(&a, &cfg, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let eigs = jacobi_eigenvalues(a.to_rows());
    let oracle = smoothed_oracle(&eigs, density.kernel_width(), density.grid());
    let w = trapezoid_weights(density.grid());
    let l1: f64 = density
        .values()
        .iter()
        .zip(&oracle)
        .zip(&w)
        .map(|((a, b), w)| (a - b).abs() * w)
        .sum();
    (l1 <= 0.05 && secs <= 5.0, format!("L1 = {l1:.4} (<= 0.05), SLQ time {secs:.2} s (<= 5 s)"))
}

fn case_construction() -> (bool, String) {
    let want3 = [1.0, 2.0, 3.0, 99.0, 100.0, 101.0, 4998.0, 4999.0, 5000.0];
    let want4 = [1.0, 99.0, 4998.0, 2.0, 100.0, 4999.0, 3.0, 101.0, 5000.0];
    let mut worst: f64 = 0.0;
    let mut kappas = Vec::new();
    for (case, want) in [(Case::Three, want3), (Case::Four, want4)] {
        let p = quadlab::make_case(case, 0, None).unwrap();
        let got = exact_eigenvalues(&p.hessian().to_dense()).unwrap();
        let mut want: Vec<f64> = want.to_vec();
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs() / w);
        }
        kappas.push(p.kappa());
    }
    let kappa_ok = kappas.iter().all(|k| (k - 5000.0).abs() <= 5000.0 * 1e-8);
    (
        worst <= 1e-8 && kappa_ok,
        format!("max relative eigenvalue error {worst:.1e} (<= 1e-8), kappa {kappas:?}"),
    )
}

fn gd_rate() -> (bool, String) {
    let want = (4999.0f64 / 5001.0).powi(2);
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for case in [Case::Three, Case::Four] {
        let p = quadlab::make_case(case, 0, None).unwrap();
        let w0 = p.gaussian_init(77);
        let start = Instant::now();
        let t = quadlab::gd_run(&p, None, &w0, &RunOptions::new(20_000, 0.0)).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let r = &t.loss_ratios;
        let n = r.len();
        worst = worst.max((r[n - 1] / r[n - 2] - want).abs());
    }
    (
        worst <= 1e-4 && slowest <= 1.0,
        format!("tail factor deviation {worst:.2e} (<= 1e-4), slowest run {slowest:.3} s (<= 1 s)"),
    )
}

fn gd_lower_bound() -> (bool, String) {
    let p = quadlab::hard_instance();
    let w0 = quadlab::hard_instance_init();
    let bound = 1.0 - 2.0 / 5001.0;
    let squared = bound * bound;
    let mut violations = 0;
    let mut squared_violations = 0;
    let mut first = None;
    for eta in quadlab::log_grid(1e-6, 1.0, 200) {
        let t = quadlab::gd_run(&p, Some(eta), &w0, &RunOptions::new(2_000, 0.0)).unwrap();
        let report = quadlab::theory_report(&p, &w0).unwrap();
        let v = quadlab::verify_bounds(&t, &report, BoundKind::GdLower).unwrap();
        assert!((v.bound - bound).abs() < 1e-15);
        let max_factor = v.factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_factor < bound - quadlab::BOUND_SLACK {
            violations += 1;
            first.get_or_insert((eta, max_factor));
        }
        if max_factor < squared - 1e-9 {
            squared_violations += 1;
        }
    }
    let detail = match first {
        Some((eta, f)) => format!(
            "{violations} of 200 step sizes fall below 1 - 2/5001 (first: eta = {eta:.3e}, max factor {f:.6}); \
             against (1 - 2/5001)^2: {squared_violations} violations"
        ),
        None => format!("no violations; against (1 - 2/5001)^2: {squared_violations} violations"),
    };
    (violations == 0, detail)
}

fn adam_upper_bound() -> (bool, String) {
    let p = quadlab::make_case(Case::Three, 0, None).unwrap();
    let start = Instant::now();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..100u64 {
        let w0 = p.gaussian_init(1000 + s);
        let rep = quadlab::theory_report(&p, &w0).unwrap();
        let t = quadlab::adam_fixed_run(&p, rep.eta_theory, &w0, &RunOptions::new(10_000, 0.0)).unwrap();
        for w in t.loss_ratios.windows(2).take_while(|w| w[1] > 1e-280) {
            let excess = w[1] / w[0] - rep.adam_factor;
            worst = worst.max(excess);
            if excess > 1e-9 {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        violations == 0 && secs <= 60.0,
        format!("{violations} violations, worst excess {worst:.2e}, total {secs:.1} s (<= 60 s)"),
    )
}

fn r_statistic() -> (bool, String) {
    let p = quadlab::make_case(Case::Three, 0, None).unwrap();
    let h = p.hessian().to_dense();
    let tops = [3.0, 101.0, 5000.0];
    let mut hits = 0;
    for s in 0..1000u64 {
        let w0 = p.gaussian_init(1000 + s);
        let g: Vec<f64> = h.to_rows().iter().map(|r| r.iter().zip(&w0).map(|(a, b)| a * b).sum()).collect();
        let mut c1 = f64::INFINITY;
        let mut c2: f64 = 0.0;
        for (l, top) in tops.iter().enumerate() {
            for gi in &g[3 * l..3 * l + 3] {
                c1 = c1.min(gi.abs() / top);
                c2 = c2.max(gi.abs() / top);
            }
        }
        let r = (c2 / c1).powi(2);
        let lib = quadlab::theory_report(&p, &w0).unwrap().r;
        assert!((lib - r).abs() <= 1e-9 * r, "r mismatch {lib} vs {r}");
        if r <= 1000.0 {
            hits += 1;
        }
    }
    let prob = hits as f64 / 1000.0;
    (prob >= 0.62, format!("P(r <= 1000) = {prob:.3} (>= 0.62)"))
}

fn iterations_or_cap(p: &QuadraticProblem, kind: OptimizerKind, w0: &[f64], opts: &RunOptions) -> usize {
    match quadlab::grid_search(p, kind, &quadlab::default_eta_grid(), 0.999, w0, opts) {
        Ok(g) => g.best.map_or(opts.max_iters + 1, |b| b.1),
        Err(_) => opts.max_iters + 1,
    }
}

fn heterogeneity_gap() -> (bool, String) {
    let opts = RunOptions::new(100_000, 1e-6);
    let mut medians = Vec::new();
    for case in [Case::Three, Case::Four] {
        let p = quadlab::make_case(case, 0, None).unwrap();
        let ratios: Vec<f64> = (0..20u64)
            .map(|s| {
                let w0 = p.gaussian_init(5000 + s);
                let gd = iterations_or_cap(&p, OptimizerKind::Gd, &w0, &opts);
                let adam = iterations_or_cap(&p, OptimizerKind::AdamFixed, &w0, &opts);
                gd as f64 / adam as f64
            })
            .collect();
        medians.push(median(&ratios));
    }
    (
        medians[0] >= 3.0 && medians[1] <= 2.0,
        format!(
            "median GD/Adam iterations: heterogeneous {:.2} (>= 3), homogeneous {:.2} (<= 2)",
            medians[0], medians[1]
        ),
    )
}

fn limit_cycle() -> (bool, String) {
    let p = quadlab::scalar_quadratic();
    let opts = RunOptions::new(20_000, 0.0);
    let tail = |eta: f64, beta2: f64| {
        let w0 = if beta2 == 0.0 { vec![eta / 2.0] } else { vec![1.0] };
        let t = quadlab::adam_ema_run(&p, eta, beta2, &w0, &opts).unwrap();
        assert_ne!(t.status, RunStatus::Diverged);
        quadlab::detect_limit_cycle(&t, 10_000, 10_000).unwrap()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for beta2 in [0.0, 0.99] {
        let big = tail(0.1, beta2);
        let small = tail(0.01, beta2);
        ok &= big.tail_min_loss > 1e-4 * 0.01;
        if beta2 == 0.0 {
            ok &= big.tail_min_loss >= 0.01 / 8.0 - 1e-12;
        }
        ok &= small.tail_min_loss < big.tail_min_loss && small.tail_min_loss > 0.0;
        parts.push(format!(
            "beta2 = {beta2}: tail min {:.3e} at eta 0.1, {:.3e} at eta 0.01",
            big.tail_min_loss, small.tail_min_loss
        ));
    }
    (ok, parts.join("; "))
}

fn scale_invariance() -> (bool, String) {
    let base = quadlab::make_case(Case::Three, 0, None).unwrap();
    let h: Vec<f64> = (0..9).map(|i| (i as f64 - 4.0) * 0.37).collect();
    let p = QuadraticProblem::new(base.hessian().blocks().to_vec(), h).unwrap();
    let q = p.scaled(7.3).unwrap();
    let w0 = p.gaussian_init(3);
    let mut opts = RunOptions::new(100, 0.0);
    opts.snapshot_stride = 1;
    let a = quadlab::adam_fixed_run(&p, 0.01, &w0, &opts).unwrap();
    let b = quadlab::adam_fixed_run(&q, 0.01, &w0, &opts).unwrap();
    let mut worst: f64 = 0.0;
    for ((_, x), (_, y)) in a.snapshots.iter().zip(&b.snapshots) {
        for (u, v) in x.iter().zip(y) {
            worst = worst.max((u - v).abs() / u.abs().max(v.abs()).max(1e-300));
        }
    }
    let ga = quadlab::gd_run(&p, Some(1e-4), &w0, &opts).unwrap();
    let gb = quadlab::gd_run(&q, Some(1e-4), &w0, &opts).unwrap();
    let gd_diff = ga
        .snapshots
        .last()
        .unwrap()
        .1
        .iter()
        .zip(&gb.snapshots.last().unwrap().1)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    (
        worst <= 1e-12 && gd_diff > 1e-6 && a.snapshots.len() == 101,
        format!("adam iterate mismatch {worst:.1e} (<= 1e-12); GD witness differs by {gd_diff:.2e}"),
    )
}

fn js_suite() -> (bool, String) {
    let grid: Vec<f64> = (0..2001).map(|i| -10.0 + 0.01 * i as f64).collect();
    let bump = |c: f64, s: f64| -> SpectralDensity {
        let v = grid.iter().map(|t| (-0.5 * ((t - c) / s).powi(2)).exp()).collect();
        SpectralDensity::new(grid.clone(), v, s).unwrap()
    };
    let p = bump(-5.0, 0.3);
    let q = bump(5.0, 0.3);
    let r = bump(-4.5, 0.8);
    let self_zero = js_distance(&p, &p).unwrap() == 0.0;
    let disjoint = js_distance(&p, &q).unwrap();
    let sym = js_distance(&p, &r).unwrap() == js_distance(&r, &p).unwrap();
    let oracle_gap = (js_distance(&p, &r).unwrap() - js_oracle(p.values(), r.values(), &grid)).abs();

    let js0 = |case| {
        let prob = quadlab::make_case(case, 0, None).unwrap();
        let dense = prob.hessian().to_dense();
        let spectra = slq::blockwise_densities(&dense, prob.partition(), &SlqConfig::full(0), Normalization::TenthLargest).unwrap();
        blockhess::heterogeneity::pairwise_heatmap(&spectra.densities, None, Normalization::TenthLargest)
            .unwrap()
            .js0
    };
    let (j3, j4) = (js0(Case::Three), js0(Case::Four));
    (
        self_zero && (disjoint - 1.0).abs() <= 1e-6 && sym && oracle_gap <= 1e-12 && j3 >= 10.0 * j4,
        format!(
            "self {self_zero}, disjoint {disjoint:.9}, symmetric {sym}, oracle gap {oracle_gap:.1e}, \
             js0 heterogeneous {j3:.4} vs homogeneous {j4:.4} (ratio {:.1}, >= 10)",
            j3 / j4
        ),
    )
}

fn cross_block_formula() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let net = ToyNet::random(8, 5, 100 + s).unwrap();
        let data = Dataset::two_blobs(2, 5, 1.0, 200 + s).unwrap();
        let snap = toynet::hessian_fd(
            |theta| toynet::loss_grad_at(&net, theta, &data, Some(&[0])).map(|(_, g)| g),
            net.params(),
            0,
        )
        .unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i == j {
                    continue;
                }
                let analytic = toynet::cross_neuron_block(&net, &data.xs[0], data.ys[0], i, j).unwrap();
                let (ri, rj) = (net.w_range(i), net.w_range(j));
                let scale = analytic.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut err: f64 = 0.0;
                for (a, r) in ri.clone().enumerate() {
                    for (b, c) in rj.clone().enumerate() {
                        err = err.max((snap.matrix.get(r, c) - analytic[a][b]).abs());
                    }
                }
                worst = worst.max(err / scale);
            }
        }
    }
    (worst <= 1e-4, format!("max relative error over 20 nets x 56 pairs {worst:.2e} (<= 1e-4)"))
}

fn block_diagonal_evolution() -> (bool, String) {
    let data = Dataset::two_blobs(200, 5, 1.5, 11).unwrap();
    let mut ratios = Vec::new();
    let mut ends = Vec::new();
    for seed in 0..5u64 {
        let mut net = ToyNet::random(8, 5, seed).unwrap();
        let groups = net.neuron_groups();
        let start = toynet::offdiag_mass_ratio(&toynet::model_hessian(&net, &data, 0).unwrap().matrix, &groups).unwrap();
        let opts = TrainOptions {
            steps: 20_000,
            batch_size: 32,
            seed,
            snapshot_stride: 0,
            eval_stride: 50,
            target_mean_p: Some(0.95),
        };
        toynet::train(&mut net, &data, NeuralOptimizer::adam(0.01), &opts).unwrap();
        let (mean_p, _) = toynet::evaluate(&net, &data);
        assert!(mean_p >= 0.95, "training stalled at mean p {mean_p}");
        let end = toynet::offdiag_mass_ratio(&toynet::model_hessian(&net, &data, 0).unwrap().matrix, &groups).unwrap();
        ratios.push(end / start);
        ends.push(format!("{start:.3}->{end:.3}"));
    }
    let m = median(&ratios);
    (m <= 0.5, format!("median end/start off-block mass {m:.3} (<= 0.5); per seed {}", ends.join(", ")))
}

fn heterogeneity_knob() -> (bool, String) {
    let setup = ScaledMlpSetup::default();
    let cs = [1.0, 2.0, 4.0, 8.0];
    let mut js_medians = Vec::new();
    let mut gaps = Vec::new();
    for &c in &cs {
        let mut js = Vec::new();
        let mut gap = Vec::new();
        for seed in 0..5u64 {
            let run_gap = c == 1.0 || c == 8.0;
            let mut s = setup.clone();
            if !run_gap {
                s.sgd_grid.clear();
                s.adam_grid.clear();
            }
            let u = cli::scaled_mlp_unit(&s, c, seed, 11).unwrap();
            if let Some(j) = u.js0 {
                js.push(j);
            }
            if run_gap {
                gap.push(u.adam_accuracy - u.sgd_accuracy);
            }
        }
        js_medians.push(median(&js));
        if !gap.is_empty() {
            gaps.push(median(&gap));
        }
    }
    let monotone = js_medians.windows(2).all(|w| w[1] >= w[0]);
    let gap_ok = gaps[1] >= gaps[0];
    (
        monotone && gap_ok,
        format!(
            "median js0 over c = 1,2,4,8: {:?} (nondecreasing: {monotone}); median Adam-SGD accuracy gap c=1 {:.4}, c=8 {:.4} (c=8 >= c=1: {gap_ok})",
            js_medians.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            gaps[0],
            gaps[1]
        ),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism() -> (bool, String) {
    let tmp = tempfile::tempdir().unwrap();
    let manifests = [
        ("spectrum", "case = 3\n"),
        ("heatmap", "case = 4\n"),
        ("quadlab", "case = 3\ninits = 4\neta_grid = [1e-4, 1e-3, 1e-2, 1e-1]\nmax_iters = 5000\n"),
        ("toynet", "steps = 200\nsnapshot_stride = 50\n"),
    ];
    let mut files = 0;
    let mut mismatched = Vec::new();
    for (cmd, text) in manifests {
        let cfg = tmp.path().join(format!("{cmd}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let mut outs = Vec::new();
        for jobs in [1, 8] {
            let out = tmp.path().join(format!("{cmd}_{jobs}"));
            let args = cli::Cli::parse_from([
                "blockhess",
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "5",
                "--jobs",
                &jobs.to_string(),
            ]);
            cli::execute(&args).unwrap();
            outs.push(csv_bytes(&out));
        }
        files += outs[0].len();
        if outs[0] != outs[1] {
            mismatched.push(cmd);
        }
    }
    (
        mismatched.is_empty() && files > 0,
        format!("{files} CSVs compared across 1 and 8 workers; mismatched subcommands: {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let outcomes = [
        check("SLQ fidelity", slq_fidelity),
        check("case construction", case_construction),
        check("GD rate", gd_rate),
        check("GD lower bound on hard instance", gd_lower_bound),
        check("fixed-preconditioner Adam upper bound", adam_upper_bound),
        check("r statistic", r_statistic),
        check("heterogeneity gap GD vs Adam", heterogeneity_gap),
        check("Adam limit cycle", limit_cycle),
        check("Adam scale invariance", scale_invariance),
        check("JS suite", js_suite),
        check("cross-neuron Hessian block formula", cross_block_formula),
        check("near-block-diagonal evolution", block_diagonal_evolution),
        check("layer-scaling heterogeneity knob", heterogeneity_knob),
        check("determinism across worker counts", determinism),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join("; ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
