//! Command-line orchestration: manifests, seeds, the worker pool and output
//! files.
//!
//! A manifest is a flat TOML file. Every key is optional; the ones that
//! matter depend on the subcommand (see the README for the schema). Relative
//! paths inside a manifest are resolved against the manifest's directory.
//!
//! Seeds: the global seed `s` derives run seeds as `run_seed(s, i)`. Index 0
//! is the problem or dataset, indices `1, 2, …` are runs in manifest order.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heterogeneity::{pairwise_heatmap, HeterogeneityReport, Normalization};
use crate::io::{self, Table};
use crate::operator::{BlockPartition, DenseSymmetric, PrincipalBlock, SymmetricOperator};
use crate::quadlab::{self, Case, OptimizerKind, QuadraticProblem, RunOptions, RunStatus};
use crate::slq::{self, SlqConfig};
use crate::toynet::{self, Dataset, Mlp, NeuralOptimizer, ToyNet, TrainOptions, TrainStatus};

#[derive(Debug, Parser)]
#[command(name = "blockhess", version, about = "Blockwise Hessian spectra and a quadratic optimizer lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-block SLQ eigenvalue densities.
    Spectrum(CommonArgs),
    /// Pairwise JS divergences between block spectra.
    Heatmap(CommonArgs),
    /// GD / Adam runs on block-diagonal quadratics.
    Quadlab(CommonArgs),
    /// Small-network Hessian structure and the scaled-MLP experiment.
    Toynet(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectrum(_) => "spectrum",
            Self::Heatmap(_) => "heatmap",
            Self::Quadlab(_) => "quadlab",
            Self::Toynet(_) => "toynet",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Spectrum(a) | Self::Heatmap(a) | Self::Quadlab(a) | Self::Toynet(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Manifest (flat TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Global seed; overrides the manifest's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Reduced-cost mode.
    #[arg(long)]
    pub cheap: bool,
}

/// Manifest keys. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: Option<u64>,
    /// Exit nonzero when any run diverges.
    pub strict: Option<bool>,
    pub svg: Option<bool>,

    // operator source
    pub case: Option<u32>,
    /// Per-block eigenvalue files (one value per line) for cases 1 and 2.
    pub spectra: Option<Vec<String>>,
    pub matrix: Option<String>,
    pub partition: Option<Vec<usize>>,
    /// Block indices to compare (heatmap); repeats are allowed.
    pub blocks: Option<Vec<usize>>,
    pub normalization: Option<String>,
    pub lanczos_steps: Option<usize>,
    pub probes: Option<usize>,
    pub grid_points: Option<usize>,
    pub kernel_width: Option<f64>,

    // quadlab
    /// `hard_instance` or `limit_cycle`.
    pub preset: Option<String>,
    /// Comma-separated optimizer names.
    pub optimizer: Option<String>,
    pub eta: Option<f64>,
    pub eta_grid: Option<Vec<f64>>,
    pub beta2: Option<f64>,
    pub inits: Option<usize>,
    pub max_iters: Option<usize>,
    pub target: Option<f64>,

    // toynet
    /// `training` or `scaled_mlp`.
    pub experiment: Option<String>,
    pub dataset: Option<String>,
    pub samples: Option<usize>,
    pub features: Option<usize>,
    pub separation: Option<f64>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub snapshot_stride: Option<usize>,
    pub c: Option<Vec<f64>>,
    pub widths: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub sgd_grid: Option<Vec<f64>>,
    pub adam_grid: Option<Vec<f64>>,
}

impl Manifest {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Per-run seed derived from the global seed.
pub fn run_seed(global: u64, index: u64) -> u64 {
    slq::block_seed(global, index)
}

/// Outcome of one subcommand.
#[derive(Debug, Default)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    /// Runs that diverged or errored.
    pub failures: usize,
    pub notes: Vec<String>,
}

struct Ctx {
    m: Manifest,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
    cheap: bool,
    summary: Summary,
}

impl Ctx {
    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let path = self.out.join(name);
        io::write_table(&path, t)?;
        self.summary.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        let path = self.out.join(name);
        io::atomic_write(&path, s.as_bytes())?;
        self.summary.files.push(path);
        Ok(())
    }

    fn svg(&self) -> bool {
        self.m.svg.unwrap_or(true)
    }

    fn slq(&self) -> SlqConfig {
        let mut cfg = if self.cheap {
            SlqConfig::cheap(run_seed(self.seed, 0))
        } else {
            SlqConfig::full(run_seed(self.seed, 0))
        };
        if let Some(s) = self.m.lanczos_steps {
            cfg.steps = s;
        }
        if let Some(p) = self.m.probes {
            cfg.probes = p;
        }
        if let Some(g) = self.m.grid_points {
            cfg.grid_points = g;
        }
        cfg.kernel_width = self.m.kernel_width;
        cfg
    }
}

/// Runs a parsed command line inside a pool of `--jobs` threads.
pub fn execute(cli: &Cli) -> Result<(Summary, bool)> {
    let args = cli.command.args();
    if args.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    let (m, base) = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (Manifest::parse(&text, p)?, base)
        }
        None => (Manifest::default(), PathBuf::from(".")),
    };
    fs::create_dir_all(&args.out)?;
    let seed = args.seed.or(m.seed).unwrap_or(0);
    let strict = m.strict.unwrap_or(false);

    // echo the resolved manifest; the thread count is not part of it
    let mut echo = m.clone();
    echo.seed = Some(seed);
    let header = format!("# blockhess {}{}\n", cli.command.name(), if args.cheap { " --cheap" } else { "" });
    let body = toml::to_string(&echo).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut ctx = Ctx {
        m,
        base,
        out: args.out.clone(),
        seed,
        cheap: args.cheap,
        summary: Summary::default(),
    };
    ctx.text("manifest.toml", &(header + &body))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Spectrum(_) => run_spectrum(&mut ctx),
        Command::Heatmap(_) => run_heatmap(&mut ctx),
        Command::Quadlab(_) => run_quadlab(&mut ctx),
        Command::Toynet(_) => run_toynet(&mut ctx),
    })?;
    let failed = strict && ctx.summary.failures > 0;
    Ok((ctx.summary, failed))
}

/// An operator together with its block structure.
struct Source {
    matrix: DenseSymmetric,
    partition: BlockPartition,
    labels: Vec<String>,
}

fn read_spectrum_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("not a number: `{t}`"),
            })
        })
        .collect()
}

fn problem_for_case(ctx: &Ctx, id: u32) -> Result<QuadraticProblem> {
    let case = Case::from_id(id)?;
    let spectra = match &ctx.m.spectra {
        Some(files) => Some(
            files
                .iter()
                .map(|f| read_spectrum_file(&ctx.resolve(f)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    quadlab::make_case(case, run_seed(ctx.seed, 0), spectra.as_deref())
}

fn load_source(ctx: &Ctx) -> Result<Source> {
    let (matrix, partition) = match (ctx.m.case, &ctx.m.matrix) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument(
                "set either `case` or `matrix`, not both".into(),
            ))
        }
        (Some(id), None) => {
            let p = problem_for_case(ctx, id)?;
            (p.hessian().to_dense(), p.partition().clone())
        }
        (None, Some(path)) => {
            let m = io::read_matrix(&ctx.resolve(path), 1e-9)?;
            let part = match &ctx.m.partition {
                Some(sizes) => BlockPartition::new(sizes.clone())?,
                None => BlockPartition::new(vec![m.dim()])?,
            };
            if part.dim() != m.dim() {
                return Err(Error::DimensionMismatch {
                    expected: m.dim(),
                    got: part.dim(),
                });
            }
            (m, part)
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "manifest needs `case` or `matrix`".into(),
            ))
        }
    };
    let labels = (0..partition.len()).map(|l| format!("block{l}")).collect();
    Ok(Source {
        matrix,
        partition,
        labels,
    })
}

fn run_spectrum(ctx: &mut Ctx) -> Result<()> {
    let src = load_source(ctx)?;
    let cfg = ctx.slq();
    let mut curves = Vec::new();
    for (l, range) in src.partition.ranges().enumerate() {
        let block = PrincipalBlock::new(&src.matrix, range)?;
        let block_cfg = SlqConfig {
            seed: slq::block_seed(cfg.seed, l as u64),
            ..cfg.clone()
        };
        let density = slq::slq_density(&block, &block_cfg, None)?;
        let v0 = slq::rademacher_probe(block.dim(), block_cfg.seed, 0);
        let fact = slq::lanczos(&block, &v0, block_cfg.steps.min(block.dim()), true)?;
        let label = &src.labels[l];
        ctx.table(&format!("density_{label}.csv"), &io::density_table(&density))?;
        ctx.table(&format!("lanczos_{label}.csv"), &io::factorization_table(&fact))?;
        curves.push((
            label.clone(),
            density.grid().iter().copied().zip(density.values().iter().copied()).collect(),
        ));
    }
    if ctx.svg() {
        ctx.text("spectrum.svg", &io::line_plot_svg("eigenvalue density", &curves, false))?;
    }
    Ok(())
}

fn run_heatmap(ctx: &mut Ctx) -> Result<()> {
    let src = load_source(ctx)?;
    let mode = match &ctx.m.normalization {
        Some(s) => Normalization::from_str(s)?,
        None => Normalization::TenthLargest,
    };
    let cfg = ctx.slq();
    let measures = slq::blockwise_measures(&src.matrix, &src.partition, &cfg)?;
    let picks: Vec<usize> = match &ctx.m.blocks {
        Some(b) => b.clone(),
        None => (0..src.partition.len()).collect(),
    };
    if let Some(&bad) = picks.iter().find(|&&b| b >= src.partition.len()) {
        return Err(Error::InvalidArgument(format!("block index {bad} out of range")));
    }
    let chosen: Vec<_> = picks.iter().map(|&b| measures[b].clone()).collect();
    let dims: Vec<usize> = picks.iter().map(|&b| src.partition.sizes()[b]).collect();
    let spectra = slq::densities_on_shared_grid(&chosen, &dims, mode, cfg.grid_points, cfg.kernel_width)?;
    for w in spectra.warnings() {
        ctx.summary.notes.push(w.to_string());
    }
    let labels = picks.iter().map(|&b| src.labels[b].clone()).collect();
    let report = pairwise_heatmap(&spectra.densities, Some(labels), mode)?;
    write_report(ctx, "", &report)
}

fn write_report(ctx: &mut Ctx, prefix: &str, report: &HeterogeneityReport) -> Result<()> {
    ctx.table(&format!("{prefix}heatmap.csv"), &io::heatmap_table(report))?;
    ctx.table(&format!("{prefix}js0.csv"), &io::js0_table(report))?;
    if ctx.svg() {
        ctx.text(&format!("{prefix}heatmap.svg"), &io::heatmap_svg(report))?;
    }
    Ok(())
}

fn optimizer_kinds(ctx: &Ctx, default: &str) -> Result<Vec<OptimizerKind>> {
    ctx.m
        .optimizer
        .as_deref()
        .unwrap_or(default)
        .split(',')
        .map(|s| OptimizerKind::from_str(s.trim()))
        .collect()
}

fn run_options(ctx: &Ctx) -> RunOptions {
    RunOptions::new(ctx.m.max_iters.unwrap_or(100_000), ctx.m.target.unwrap_or(1e-6))
}

fn run_quadlab(ctx: &mut Ctx) -> Result<()> {
    match ctx.m.preset.as_deref() {
        Some("limit_cycle") => return limit_cycle_preset(ctx),
        Some("hard_instance") => return hard_instance_preset(ctx),
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}` (expected hard_instance or limit_cycle)"
            )))
        }
        None => {}
    }
    let id = ctx
        .m
        .case
        .ok_or_else(|| Error::InvalidArgument("quadlab needs `case` or `preset`".into()))?;
    let problem = problem_for_case(ctx, id)?;
    let kinds = optimizer_kinds(ctx, "gd,adam_fixed")?;
    let beta2 = ctx.m.beta2.unwrap_or(0.999);
    let opts = run_options(ctx);
    let inits = ctx.m.inits.unwrap_or(1);
    if inits == 0 {
        return Err(Error::InvalidArgument("`inits` must be at least 1".into()));
    }
    let grid = match (ctx.m.eta, &ctx.m.eta_grid) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument("set either `eta` or `eta_grid`".into()))
        }
        (Some(e), None) => vec![e],
        (None, Some(g)) => g.clone(),
        (None, None) => quadlab::default_eta_grid(),
    };

    struct InitResult {
        w0_seed: u64,
        searches: Vec<(OptimizerKind, Result<quadlab::GridSearch>)>,
        report: Result<quadlab::TheoryReport>,
        bound: Option<Result<quadlab::BoundVerification>>,
    }
    let results: Vec<InitResult> = (0..inits)
        .into_par_iter()
        .map(|k| {
            let w0_seed = run_seed(ctx.seed, 1 + k as u64);
            let w0 = problem.gaussian_init(w0_seed);
            let searches = kinds
                .iter()
                .map(|&kind| (kind, quadlab::grid_search(&problem, kind, &grid, beta2, &w0, &opts)))
                .collect();
            let report = quadlab::theory_report(&problem, &w0);
            let bound = match (&report, kinds.contains(&OptimizerKind::AdamFixed)) {
                (Ok(rep), true) => Some(
                    quadlab::adam_fixed_run(&problem, rep.eta_theory, &w0, &RunOptions::new(opts.max_iters.min(10_000), 0.0))
                        .and_then(|t| quadlab::verify_bounds(&t, rep, quadlab::BoundKind::AdamUpper)),
                ),
                _ => None,
            };
            InitResult {
                w0_seed,
                searches,
                report,
                bound,
            }
        })
        .collect();

    let mut grid_t = Table::new(["init", "init_seed", "optimizer", "eta", "status", "iterations", "final_ratio"]);
    let mut best_t = Table::new(["init", "optimizer", "best_eta", "iterations"]);
    let mut bounds_t = Table::new(["init", "kind", "eta", "bound", "violations", "worst_excess"]);
    let mut ratio_t = Table::new(["init", "gd_iterations", "adam_fixed_iterations", "ratio"]);
    let mut theory = String::new();
    let mut ratios = Vec::new();
    let mut curves = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let mut best_iters = std::collections::BTreeMap::new();
        for (kind, search) in r.searches {
            let search = match search {
                Ok(s) => s,
                Err(Error::AllDiverged) => {
                    ctx.summary.failures += 1;
                    ctx.summary.notes.push(format!("init {k}: every {kind} run diverged"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (eta, t) in &search.runs {
                if t.status == RunStatus::Diverged {
                    ctx.summary.failures += 1;
                }
                grid_t.push(vec![
                    k.to_string(),
                    r.w0_seed.to_string(),
                    kind.to_string(),
                    eta.to_string(),
                    t.status.as_str().to_string(),
                    t.iterations.to_string(),
                    t.final_ratio().to_string(),
                ]);
            }
            // keep the curve of the best run (or the only run)
            let pick = match search.best {
                Some((eta, iters)) => {
                    best_t.push(vec![k.to_string(), kind.to_string(), eta.to_string(), iters.to_string()]);
                    best_iters.insert(kind.as_str(), iters);
                    search.runs.iter().find(|(e, _)| *e == eta)
                }
                None => {
                    best_t.push(vec![k.to_string(), kind.to_string(), String::new(), String::new()]);
                    search.runs.iter().find(|(_, t)| t.status != RunStatus::Diverged)
                }
            };
            if let Some((_, t)) = pick {
                ctx.table(&format!("run_init{k}_{kind}.csv"), &io::trajectory_table(t))?;
                if k == 0 {
                    curves.push((kind.to_string(), t.loss_ratios.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect()));
                }
            }
        }
        if let (Some(&g), Some(&a)) = (best_iters.get("gd"), best_iters.get("adam_fixed")) {
            let ratio = g as f64 / a.max(1) as f64;
            ratios.push(ratio);
            ratio_t.push(vec![k.to_string(), g.to_string(), a.to_string(), ratio.to_string()]);
        }
        match r.report {
            Ok(rep) => {
                theory.push_str(&format!("[init {k}]\n{}", rep.to_record()));
                if let Some(b) = r.bound {
                    let b = b?;
                    bounds_t.push(vec![
                        k.to_string(),
                        "adam_upper".into(),
                        rep.eta_theory.to_string(),
                        b.bound.to_string(),
                        b.violations.to_string(),
                        b.worst_excess.to_string(),
                    ]);
                }
            }
            Err(e) => theory.push_str(&format!("[init {k}]\nerror={e}\n")),
        }
    }
    ctx.table("grid.csv", &grid_t)?;
    ctx.table("best.csv", &best_t)?;
    ctx.text("theory.txt", &theory)?;
    if !bounds_t.rows.is_empty() {
        ctx.table("bounds.csv", &bounds_t)?;
    }
    if !ratios.is_empty() {
        ctx.table("ratios.csv", &ratio_t)?;
        let mut s = Table::new(["median_gd_over_adam_fixed", "inits"]);
        s.push(vec![median(&ratios).to_string(), ratios.len().to_string()]);
        ctx.table("ratio_summary.csv", &s)?;
    }
    if ctx.svg() && !curves.is_empty() {
        ctx.text("runs.svg", &io::line_plot_svg("loss ratio (init 0, best step size)", &curves, true))?;
    }
    Ok(())
}

fn hard_instance_preset(ctx: &mut Ctx) -> Result<()> {
    let problem = quadlab::hard_instance();
    let w0 = quadlab::hard_instance_init();
    let report = quadlab::theory_report(&problem, &w0)?;
    let grid = ctx.m.eta_grid.clone().unwrap_or_else(|| quadlab::log_grid(1e-6, 1.0, 200));
    let opts = RunOptions::new(ctx.m.max_iters.unwrap_or(2_000), ctx.m.target.unwrap_or(0.0));
    let rows = grid
        .par_iter()
        .map(|&eta| {
            let t = quadlab::gd_run(&problem, Some(eta), &w0, &opts)?;
            let v = quadlab::verify_bounds(&t, &report, quadlab::BoundKind::GdLower)?;
            Ok((eta, t.status, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(["eta", "status", "bound", "max_factor", "violations", "worst_excess"]);
    for (eta, status, v) in rows {
        if status == RunStatus::Diverged {
            ctx.summary.failures += 1;
        }
        let max_factor = v.factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        t.push(vec![
            eta.to_string(),
            status.as_str().to_string(),
            v.bound.to_string(),
            max_factor.to_string(),
            v.violations.to_string(),
            v.worst_excess.to_string(),
        ]);
    }
    ctx.table("bounds.csv", &t)?;
    ctx.text("theory.txt", &report.to_record())
}

fn limit_cycle_preset(ctx: &mut Ctx) -> Result<()> {
    let problem = quadlab::scalar_quadratic();
    let eta = ctx.m.eta.unwrap_or(0.1);
    let beta2 = ctx.m.beta2.unwrap_or(0.0);
    let w0 = if beta2 == 0.0 { vec![eta / 2.0] } else { vec![1.0] };
    let transient = 10_000;
    let window = 10_000;
    let opts = RunOptions::new(transient + window, 0.0);
    let traj = quadlab::adam_ema_run(&problem, eta, beta2, &w0, &opts)?;
    if traj.status == RunStatus::Diverged {
        ctx.summary.failures += 1;
    }
    let lc = quadlab::detect_limit_cycle(&traj, transient, window)?;
    let mut t = Table::new(["eta", "beta2", "cycling", "tail_min_loss", "threshold"]);
    t.push(vec![
        eta.to_string(),
        beta2.to_string(),
        lc.cycling.to_string(),
        lc.tail_min_loss.to_string(),
        lc.threshold.to_string(),
    ]);
    ctx.table("limit_cycle.csv", &t)?;
    ctx.table("run.csv", &io::trajectory_table(&traj))
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

fn neural_optimizer(name: &str, lr: f64) -> Result<NeuralOptimizer> {
    match name {
        "adam" => Ok(NeuralOptimizer::adam(lr)),
        "sgd" => Ok(NeuralOptimizer::sgd(lr)),
        other => Err(Error::InvalidArgument(format!(
            "unknown optimizer `{other}` (expected adam or sgd)"
        ))),
    }
}

fn run_toynet(ctx: &mut Ctx) -> Result<()> {
    match ctx.m.experiment.as_deref().unwrap_or("training") {
        "training" => toynet_training(ctx),
        "scaled_mlp" => toynet_scaled_mlp(ctx),
        other => Err(Error::InvalidArgument(format!(
            "unknown experiment `{other}` (expected training or scaled_mlp)"
        ))),
    }
}

fn load_dataset(ctx: &Ctx, samples: usize, features: usize, separation: f64, seed: u64) -> Result<Dataset> {
    match &ctx.m.dataset {
        Some(p) => io::read_dataset(&ctx.resolve(p)),
        None => Dataset::two_blobs(samples, features, separation, seed),
    }
}

fn toynet_training(ctx: &mut Ctx) -> Result<()> {
    let data = load_dataset(
        ctx,
        ctx.m.samples.unwrap_or(200),
        ctx.m.features.unwrap_or(5),
        ctx.m.separation.unwrap_or(1.5),
        run_seed(ctx.seed, 0),
    )?;
    let hidden = ctx.m.hidden.unwrap_or(8);
    let mut net = ToyNet::random(hidden, data.features(), run_seed(ctx.seed, 1))?;
    let opt = neural_optimizer(
        ctx.m.optimizer.as_deref().unwrap_or("adam"),
        ctx.m.lr.unwrap_or(0.01),
    )?;
    let mut steps = ctx.m.steps.unwrap_or(2000);
    if ctx.cheap {
        steps = (steps / 4).max(1);
    }
    let stride = ctx.m.snapshot_stride.unwrap_or((steps / 10).max(1));
    let opts = TrainOptions {
        steps,
        batch_size: ctx.m.batch_size.unwrap_or(32),
        seed: run_seed(ctx.seed, 2),
        snapshot_stride: stride,
        eval_stride: 1,
        target_mean_p: None,
    };
    let res = toynet::train(&mut net, &data, opt, &opts)?;
    if res.status == TrainStatus::Diverged {
        ctx.summary.failures += 1;
    }
    let groups = net.neuron_groups();
    let split = hidden * data.features();
    let layers = BlockPartition::new(vec![split, hidden])?;
    let mut series = Table::new(["step", "offdiag_mass_ratio", "js0"]);
    for snap in &res.snapshots {
        let ratio = toynet::offdiag_mass_ratio(&snap.matrix, &groups)?;
        let js0 = toynet::snapshot_heterogeneity(snap, &layers, None, Normalization::TenthLargest)
            .map(|r| r.js0.to_string())
            .unwrap_or_default();
        series.push(vec![snap.step.to_string(), ratio.to_string(), js0]);
        ctx.table(&format!("hessian_step{}.csv", snap.step), &io::matrix_table(&snap.matrix))?;
    }
    ctx.table("dataset.csv", &io::dataset_table(&data))?;
    ctx.table("training.csv", &io::training_table(&res))?;
    ctx.table("structure.csv", &series)?;
    if ctx.svg() {
        let curve = res.steps.iter().zip(&res.losses).map(|(&s, &l)| (s as f64, l)).collect();
        ctx.text("training.svg", &io::line_plot_svg("training loss", &[(opt.to_string(), curve)], true))?;
    }
    Ok(())
}

/// Results of one `(c, seed)` unit of the scaled-MLP experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMlpUnit {
    pub c: f64,
    pub seed: u64,
    pub js0: Option<f64>,
    pub sgd_accuracy: f64,
    pub adam_accuracy: f64,
}

/// Settings of the scaled-MLP experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMlpSetup {
    pub widths: Vec<usize>,
    pub samples: usize,
    pub separation: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub sgd_grid: Vec<f64>,
    pub adam_grid: Vec<f64>,
    pub normalization: Normalization,
}

impl Default for ScaledMlpSetup {
    fn default() -> Self {
        Self {
            widths: vec![4, 8, 8, 8, 1],
            samples: 400,
            separation: 1.0,
            steps: 2000,
            batch_size: 32,
            sgd_grid: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1],
            adam_grid: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2],
            normalization: Normalization::TenthLargest,
        }
    }
}

/// JS⁰ of the initial Hessian and best-of-grid held-out accuracies for SGD
/// and Adam. Train and test sets share the blob geometry (`data_seed`) and
/// differ in the sample draw.
pub fn scaled_mlp_unit(setup: &ScaledMlpSetup, c: f64, seed: u64, data_seed: u64) -> Result<ScaledMlpUnit> {
    let d_in = setup.widths[0];
    let all = Dataset::two_blobs(setup.samples * 6, d_in, setup.separation, data_seed)?;
    let (train_x, test_x) = all.xs.split_at(setup.samples);
    let (train_y, test_y) = all.ys.split_at(setup.samples);
    let train = Dataset::new(train_x.to_vec(), train_y.to_vec())?;
    let test = Dataset::new(test_x.to_vec(), test_y.to_vec())?;

    let net0 = Mlp::scaled(&setup.widths, c, seed)?;
    let snap = toynet::model_hessian(&net0, &train, 0)?;
    let js0 = toynet::snapshot_heterogeneity(&snap, &net0.parameter_partition(), Some(net0.block_labels()), setup.normalization)
        .ok()
        .map(|r| r.js0);
    let best = |make: fn(f64) -> NeuralOptimizer, grid: &[f64]| -> Result<f64> {
        let mut best = 0.0f64;
        for &lr in grid {
            let mut net = net0.clone();
            let opts = TrainOptions {
                steps: setup.steps,
                batch_size: setup.batch_size,
                seed,
                snapshot_stride: 0,
                eval_stride: 0,
                target_mean_p: None,
            };
            let r = toynet::train(&mut net, &train, make(lr), &opts)?;
            if r.status == TrainStatus::Completed {
                best = best.max(toynet::evaluate(&net, &test).1);
            }
        }
        Ok(best)
    };
    Ok(ScaledMlpUnit {
        c,
        seed,
        js0,
        sgd_accuracy: best(NeuralOptimizer::sgd, &setup.sgd_grid)?,
        adam_accuracy: best(NeuralOptimizer::adam, &setup.adam_grid)?,
    })
}

fn toynet_scaled_mlp(ctx: &mut Ctx) -> Result<()> {
    let defaults = ScaledMlpSetup::default();
    let mut setup = ScaledMlpSetup {
        widths: ctx.m.widths.clone().unwrap_or(defaults.widths.clone()),
        samples: ctx.m.samples.unwrap_or(defaults.samples),
        separation: ctx.m.separation.unwrap_or(defaults.separation),
        steps: ctx.m.steps.unwrap_or(defaults.steps),
        batch_size: ctx.m.batch_size.unwrap_or(defaults.batch_size),
        sgd_grid: ctx.m.sgd_grid.clone().unwrap_or(defaults.sgd_grid.clone()),
        adam_grid: ctx.m.adam_grid.clone().unwrap_or(defaults.adam_grid.clone()),
        normalization: match &ctx.m.normalization {
            Some(s) => Normalization::from_str(s)?,
            None => defaults.normalization,
        },
    };
    if ctx.cheap {
        setup.steps = (setup.steps / 4).max(1);
    }
    let cs = ctx.m.c.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
    let seeds = ctx.m.seeds.unwrap_or(5);
    let data_seed = run_seed(ctx.seed, 0);
    let jobs: Vec<(f64, u64)> = cs
        .iter()
        .flat_map(|&c| (0..seeds as u64).map(move |s| (c, s)))
        .collect();
    let units = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(c, _))| scaled_mlp_unit(&setup, c, run_seed(ctx.seed, 1 + i as u64), data_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(["c", "seed", "js0", "sgd_accuracy", "adam_accuracy", "gap"]);
    for u in &units {
        t.push(vec![
            u.c.to_string(),
            u.seed.to_string(),
            u.js0.map(|v| v.to_string()).unwrap_or_default(),
            u.sgd_accuracy.to_string(),
            u.adam_accuracy.to_string(),
            (u.adam_accuracy - u.sgd_accuracy).to_string(),
        ]);
    }
    ctx.table("scaled_mlp.csv", &t)?;
    let mut s = Table::new(["c", "median_js0", "median_gap"]);
    let mut js_curve = Vec::new();
    for &c in &cs {
        let mine: Vec<&ScaledMlpUnit> = units.iter().filter(|u| u.c == c).collect();
        let js: Vec<f64> = mine.iter().filter_map(|u| u.js0).collect();
        let gaps: Vec<f64> = mine.iter().map(|u| u.adam_accuracy - u.sgd_accuracy).collect();
        let mj = if js.is_empty() { f64::NAN } else { median(&js) };
        js_curve.push((c, mj));
        s.push(vec![c.to_string(), mj.to_string(), median(&gaps).to_string()]);
    }
    ctx.table("scaled_mlp_summary.csv", &s)?;
    if ctx.svg() {
        ctx.text("scaled_mlp.svg", &io::line_plot_svg("median js0 vs c", &[("js0".into(), js_curve)], false))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_rejects_unknown_keys() {
        assert!(Manifest::parse("case = 3\nbogus = 1\n", Path::new("m.toml")).is_err());
        let m = Manifest::parse("case = 3\noptimizer = \"gd\"\neta_grid = [0.1, 0.2]\n", Path::new("m.toml")).unwrap();
        assert_eq!(m.case, Some(3));
        assert_eq!(m.eta_grid.as_deref(), Some(&[0.1, 0.2][..]));
    }

    #[test]
    fn run_seeds_are_distinct() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| run_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
