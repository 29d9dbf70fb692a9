//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use bloc_core::benchfns::{BenchFunction, BenchmarkSpec};
use bloc_core::corrspace::{corr_to_phi, phi_to_corr, AngularVector, CorrelationMatrix};
use bloc_core::datagen::TruthDesign;
use bloc_core::estimate::{self, Denominator, EstimateConfig, Initialization, LossKind};
use bloc_core::linalg;
use bloc_core::objective::{LossSpec, ObjectiveSpec};
use bloc_core::penalty::{PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA, DEFAULT_SCAD_A};
use bloc_core::rmps::{optimize_with, OptimizerConfig, RestartMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchmark::{run_benchmark, table_row, BenchmarkConfig};
use crate::blackbox::ProcessLoss;
use crate::simulate::{run_simulation, summarize, SimulationConfig, METRIC_NAMES};
use crate::{config, io, pool};

/// Black-box optimization over correlation matrices.
#[derive(Debug, Parser)]
#[command(name = "bloc", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize a loss plus penalty over correlation matrices.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Penalized correlation and covariance estimate from a data matrix.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Replicated simulation study on a synthetic truth.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Optimizer runs on a benchmark function from random starts.
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
    /// Check the angle/correlation round trip on random matrices.
    #[command(name = "roundtrip-check", args_override_self = true)]
    RoundtripCheck(RoundtripArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Flat `key = value` file with defaults for any flag.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Progress messages on standard error.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RestartArg {
    Warm,
    Grid,
}

#[derive(Debug, Clone, Args)]
struct OptArgs {
    #[arg(long)]
    s_initial: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_run: Option<usize>,
    #[arg(long, value_enum)]
    restart: Option<RestartArg>,
    #[arg(long)]
    grid_mesh_initial: Option<f64>,
    #[arg(long)]
    grid_mesh_divisor: Option<f64>,
    #[arg(long)]
    grid_offset: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 or 1 means serial.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Shrink the step only after iterations with no improvement.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict_failure_shrink: Option<bool>,
    /// Skip re-evaluating the current point each iteration.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    cache_current_value: Option<bool>,
}

impl OptArgs {
    fn config(&self) -> Result<OptimizerConfig, CliError> {
        let d = OptimizerConfig::default();
        let cfg = OptimizerConfig {
            s_initial: self.s_initial.unwrap_or(d.s_initial),
            rho: self.rho.unwrap_or(d.rho),
            kappa: self.kappa.unwrap_or(d.kappa),
            tau1: self.tau1.unwrap_or(d.tau1),
            tau2: self.tau2.unwrap_or(d.tau2),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            max_run: self.max_run.unwrap_or(d.max_run),
            restart_mode: match self.restart {
                Some(RestartArg::Grid) => RestartMode::GridRandom,
                Some(RestartArg::Warm) => RestartMode::WarmBest,
                None => d.restart_mode,
            },
            grid_mesh_initial: self.grid_mesh_initial.unwrap_or(d.grid_mesh_initial),
            grid_mesh_divisor: self.grid_mesh_divisor.unwrap_or(d.grid_mesh_divisor),
            grid_offset: self.grid_offset.unwrap_or(d.grid_offset),
            seed: self.seed,
            parallelism: self.parallelism,
            strict_failure_shrink: self.strict_failure_shrink.unwrap_or(d.strict_failure_shrink),
            cache_current_value: self.cache_current_value.unwrap_or(d.cache_current_value),
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PenaltyArg {
    None,
    L1,
    Scad,
    Mcp,
}

#[derive(Debug, Clone, Args)]
struct PenaltyArgs {
    #[arg(long, value_enum)]
    penalty: Option<PenaltyArg>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated grid scanned with the information criterion.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SCAD_A)]
    scad_a: f64,
    #[arg(long, default_value_t = DEFAULT_MCP_GAMMA)]
    mcp_gamma: f64,
    /// Symmetric weight matrix selecting the penalized pairs.
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
}

impl PenaltyArgs {
    fn family(&self, default: PenaltyArg) -> PenaltyFamily {
        match self.penalty.unwrap_or(default) {
            PenaltyArg::None => PenaltyFamily::None,
            PenaltyArg::L1 => PenaltyFamily::L1,
            PenaltyArg::Scad => PenaltyFamily::Scad { a: self.scad_a },
            PenaltyArg::Mcp => PenaltyFamily::Mcp { gamma: self.mcp_gamma },
        }
    }

    fn lambdas(&self) -> Vec<f64> {
        match (&self.lambda_grid, self.lambda) {
            (Some(g), _) => g.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Gaussian,
    Frobenius,
    BlackboxCmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Sample,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DenominatorArg {
    Unbiased,
    Sample,
}

#[derive(Debug, Clone, Args)]
struct OptimizeArgs {
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Target matrix for the built-in losses.
    #[arg(long, value_name = "FILE", conflicts_with = "data")]
    target: Option<PathBuf>,
    /// Data whose sample correlation becomes the target.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Program answering one float per matrix written to its stdin.
    #[arg(long, value_name = "COMMAND")]
    blackbox_cmd: Option<String>,
    /// Dimension, needed for a black-box loss without `--init`.
    #[arg(long)]
    d: Option<usize>,
    /// Starting correlation matrix; the identity by default.
    #[arg(long, value_name = "FILE")]
    init: Option<PathBuf>,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
struct EstimateArgs {
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    loss: LossArg,
    #[arg(long, default_value_t = estimate::DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long, value_enum, default_value = "sample")]
    init: InitArg,
    #[arg(long, value_enum, default_value = "unbiased")]
    denominator: DenominatorArg,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DesignArg {
    BlockRandom5,
    UniformSparse,
    BlockFixed,
    Toeplitz,
    Banded,
}

impl DesignArg {
    fn design(self) -> TruthDesign {
        match self {
            DesignArg::BlockRandom5 => TruthDesign::BlockRandom5,
            DesignArg::UniformSparse => TruthDesign::UniformSparse,
            DesignArg::BlockFixed => TruthDesign::BlockFixed,
            DesignArg::Toeplitz => TruthDesign::Toeplitz,
            DesignArg::Banded => TruthDesign::Banded,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Fraction of zero pairs for the uniform sparse design.
    #[arg(long, default_value_t = 0.95)]
    sparsity: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    loss: LossArg,
    #[arg(long, default_value_t = estimate::DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long, value_enum, default_value = "sample")]
    init: InitArg,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FnArg {
    Ackley,
    Griewank,
    Rosenbrock,
    Rastrigin,
}

#[derive(Debug, Clone, Args)]
struct BenchmarkArgs {
    #[arg(long = "fn", value_enum)]
    function: FnArg,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Multiplier on the matrix entries; the function's usual value by default.
    #[arg(long)]
    scale: Option<f64>,
    #[command(flatten)]
    opt: OptArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
struct RoundtripArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<bloc_core::Error> for CliError {
    fn from(e: bloc_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn require_file(p: &Path, flag: &str) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{flag}: no such file {}", p.display())))
    }
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(|e| CliError::Usage(format!("{e:#}")))
}

fn penalty_spec(args: &PenaltyArgs, default: PenaltyArg, lambda: f64) -> CliResult<PenaltySpec> {
    let mut p = PenaltySpec::new(args.family(default), lambda).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(m) = &args.mask {
        require_file(m, "mask")?;
        p = p.with_mask(io::read_mask(m)?);
    }
    Ok(p)
}

/// Entry point; returns the process exit code (0 success, 1 usage error,
/// 2 runtime error).
pub fn run_cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => run_optimize(a, out, err),
        Command::Estimate(a) => run_estimate(a, out, err),
        Command::Simulate(a) => run_simulate(a, out, err),
        Command::Benchmark(a) => run_benchmark_cmd(a, out, err),
        Command::RoundtripCheck(a) => run_roundtrip(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

#[derive(Serialize)]
struct OptimizeSummary {
    d: usize,
    best_value: f64,
    runs_completed: usize,
    iterations: usize,
    evaluations: usize,
    run_values: Vec<f64>,
    seconds: f64,
}

fn run_optimize(a: &OptimizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let opt = a.opt.config()?;
    let start = Instant::now();
    for (p, flag) in [(&a.target, "target"), (&a.data, "data"), (&a.init, "init")] {
        if let Some(p) = p {
            require_file(p, flag)?;
        }
    }
    let init = a.init.as_deref().map(io::read_corr).transpose()?;
    let target = match (&a.target, &a.data) {
        (Some(t), _) => Some(io::read_matrix(t)?),
        (None, Some(x)) => {
            let (x, _) = io::read_data(x)?;
            Some(estimate::sample_moments(&x, Denominator::Unbiased)?.correlation)
        }
        (None, None) => None,
    };
    let loss = match a.loss {
        LossArg::Gaussian | LossArg::Frobenius => {
            let t = target.ok_or_else(|| CliError::Usage("--target or --data is required for this loss".into()))?;
            if matches!(a.loss, LossArg::Gaussian) {
                let t = bloc_core::corrspace::validate_corr(&t, io::CORR_READ_TOL).map_err(|e| {
                    CliError::Runtime(anyhow!("target unusable for the Gaussian loss ({e}); use --loss frobenius"))
                })?;
                LossSpec::gaussian(t)?
            } else {
                LossSpec::frobenius(t)?
            }
        }
        LossArg::BlackboxCmd => {
            let cmd = a
                .blackbox_cmd
                .as_deref()
                .ok_or_else(|| CliError::Usage("--loss blackbox-cmd needs --blackbox-cmd".into()))?;
            let d = a
                .d
                .or(init.as_ref().map(CorrelationMatrix::dim))
                .ok_or_else(|| CliError::Usage("--d or --init is required for a black-box loss".into()))?;
            ProcessLoss::spawn(cmd, d)?.into_loss()
        }
    };
    let d = loss.dim();
    if d < 2 {
        return Err(CliError::Usage("the dimension must be at least 2".into()));
    }
    let init = init.unwrap_or_else(|| CorrelationMatrix::identity(d));
    let lambdas = a.penalty.lambdas();
    if lambdas.len() != 1 {
        return Err(CliError::Usage("optimize takes a single --lambda".into()));
    }
    let spec = ObjectiveSpec::new(loss, penalty_spec(&a.penalty, PenaltyArg::None, lambdas[0])?)?;
    prepare_out(&a.common.out)?;
    let evaluator = pool::evaluator(opt.parallelism)?;
    let run = optimize_with(&spec, &init, &opt, evaluator.as_ref()).map_err(|e| {
        let _ = io::write_trace(&a.common.out.join("trace.csv"), &e.trace);
        CliError::Runtime(anyhow!(e.source))
    })?;
    if a.common.verbose > 0 {
        for (r, v) in run.run_values.iter().enumerate() {
            let _ = writeln!(err, "run {}: {v}", r + 1);
        }
    }
    let dir = &a.common.out;
    io::write_matrix(&dir.join("gamma_hat.csv"), run.best_corr.as_matrix())?;
    io::write_vector(&dir.join("phi.csv"), run.best_phi.values())?;
    io::write_trace(&dir.join("trace.csv"), &run.trace)?;
    let seconds = start.elapsed().as_secs_f64();
    io::write_json(
        &dir.join("summary.json"),
        &OptimizeSummary {
            d,
            best_value: run.best_value,
            runs_completed: run.runs_completed,
            iterations: run.trace.len(),
            evaluations: run.evaluations,
            run_values: run.run_values.clone(),
            seconds,
        },
    )?;
    writeln!(
        out,
        "best_value={} evaluations={} seconds={seconds:.3}",
        run.best_value, run.evaluations
    )?;
    Ok(())
}

fn loss_kind(l: LossArg) -> CliResult<LossKind> {
    match l {
        LossArg::Gaussian => Ok(LossKind::Gaussian),
        LossArg::Frobenius => Ok(LossKind::Frobenius),
        LossArg::BlackboxCmd => Err(CliError::Usage(
            "black-box losses are only available in `optimize`".into(),
        )),
    }
}

fn init_kind(i: InitArg) -> Initialization {
    match i {
        InitArg::Sample => Initialization::SampleCorrelation,
        InitArg::Identity => Initialization::Identity,
    }
}

fn estimate_config(
    loss: LossArg,
    penalty: &PenaltyArgs,
    opt: &OptArgs,
    zero_tol: f64,
    init: InitArg,
) -> CliResult<EstimateConfig> {
    let lambdas = penalty.lambdas();
    for &l in &lambdas {
        PenaltySpec::new(penalty.family(PenaltyArg::Scad), l).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if !(zero_tol >= 0.0) {
        return Err(CliError::Usage("--zero-tol must be nonnegative".into()));
    }
    let mut cfg = EstimateConfig::new(loss_kind(loss)?, penalty.family(PenaltyArg::Scad), lambdas);
    if let Some(m) = &penalty.mask {
        require_file(m, "mask")?;
        cfg.mask = Some(io::read_mask(m)?);
    }
    cfg.optimizer = opt.config()?;
    cfg.zero_tol = zero_tol;
    cfg.init = init_kind(init);
    Ok(cfg)
}

#[derive(Serialize)]
struct PathEntry {
    lambda: f64,
    loss: f64,
    objective: f64,
    support_size: usize,
    score: f64,
}

#[derive(Serialize)]
struct EstimateSummary {
    n: usize,
    d: usize,
    dropped_rows: usize,
    lambda: f64,
    objective: f64,
    loss: f64,
    support_size: usize,
    zero_tol: f64,
    evaluations: usize,
    runs_completed: usize,
    path: Vec<PathEntry>,
    seconds: f64,
}

fn run_estimate(a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    require_file(&a.data, "data")?;
    let mut cfg = estimate_config(a.loss, &a.penalty, &a.opt, a.zero_tol, a.init)?;
    cfg.denominator = match a.denominator {
        DenominatorArg::Unbiased => Denominator::Unbiased,
        DenominatorArg::Sample => Denominator::Sample,
    };
    let start = Instant::now();
    let (x, dropped) = io::read_data(&a.data)?;
    if dropped > 0 && a.common.verbose > 0 {
        let _ = writeln!(err, "dropped {dropped} rows with missing values");
    }
    prepare_out(&a.common.out)?;
    let evaluator = pool::evaluator(cfg.optimizer.parallelism)?;
    let fit = estimate::estimate(&x, &cfg, evaluator.as_ref())?;
    let dir = &a.common.out;
    io::write_matrix(&dir.join("gamma_hat.csv"), fit.gamma_hat.as_matrix())?;
    io::write_matrix(&dir.join("sigma_hat.csv"), &fit.sigma_hat)?;
    io::write_support(&dir.join("support.csv"), &fit.support)?;
    io::write_trace(&dir.join("trace.csv"), &fit.optimizer.trace)?;
    let sel = fit.selected();
    let seconds = start.elapsed().as_secs_f64();
    io::write_json(
        &dir.join("summary.json"),
        &EstimateSummary {
            n: x.n(),
            d: x.d(),
            dropped_rows: dropped,
            lambda: fit.lambda_used,
            objective: sel.objective,
            loss: sel.loss,
            support_size: sel.support_size,
            zero_tol: fit.zero_tol,
            evaluations: fit.optimizer.evaluations,
            runs_completed: fit.optimizer.runs_completed,
            path: fit
                .path
                .iter()
                .map(|p| PathEntry {
                    lambda: p.lambda,
                    loss: p.loss,
                    objective: p.objective,
                    support_size: p.support_size,
                    score: p.score,
                })
                .collect(),
            seconds,
        },
    )?;
    writeln!(
        out,
        "best_value={} evaluations={} seconds={seconds:.3}",
        fit.optimizer.best_value, fit.optimizer.evaluations
    )?;
    Ok(())
}

fn family_name(f: PenaltyFamily) -> &'static str {
    match f {
        PenaltyFamily::None => "none",
        PenaltyFamily::L1 => "l1",
        PenaltyFamily::Scad { .. } => "scad",
        PenaltyFamily::Mcp { .. } => "mcp",
    }
}

fn run_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let est = estimate_config(a.loss, &a.penalty, &a.opt, a.zero_tol, a.init)?;
    if a.reps == 0 || a.n < 2 || a.d < 2 {
        return Err(CliError::Usage("--reps must be positive, --n and --d at least 2".into()));
    }
    let cfg = SimulationConfig {
        design: a.design.design(),
        dim: a.d,
        n: a.n,
        reps: a.reps,
        sparsity: a.sparsity,
        parallelism: est.optimizer.parallelism,
        seed: a.opt.seed,
        estimate: est,
    };
    prepare_out(&a.common.out)?;
    let start = Instant::now();
    let reps = run_simulation(&cfg)?;
    let design = a.design.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    let method = format!("bloc-{}", family_name(cfg.estimate.family));
    let mut header = vec!["design", "d", "n", "method", "rep", "lambda"];
    header.extend(METRIC_NAMES);
    header.extend(["evaluations", "seconds"]);
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|r| {
            let mut row = vec![
                design.clone(),
                a.d.to_string(),
                a.n.to_string(),
                method.clone(),
                r.rep.to_string(),
                r.lambda.to_string(),
            ];
            row.extend(crate::simulate::metric_values(&r.metrics).iter().map(f64::to_string));
            row.push(r.evaluations.to_string());
            row.push(r.seconds.to_string());
            row
        })
        .collect();
    io::write_table(&a.common.out.join("replications.csv"), &header, &rows)?;
    let summary = summarize(&reps);
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|(name, s)| {
            vec![
                design.clone(),
                a.d.to_string(),
                a.n.to_string(),
                method.clone(),
                (*name).to_owned(),
                s.mean.to_string(),
                s.stderr.to_string(),
            ]
        })
        .collect();
    io::write_table(
        &a.common.out.join("summary.csv"),
        &["design", "d", "n", "method", "metric", "mean", "stderr"],
        &rows,
    )?;
    if a.common.verbose > 0 {
        for (name, s) in &summary {
            let _ = writeln!(err, "{name}: {:.4} ({:.4})", s.mean, s.stderr);
        }
    }
    let evaluations: usize = reps.iter().map(|r| r.evaluations).sum();
    let mcc = summary.iter().find(|(n, _)| *n == "mcc").map_or(f64::NAN, |(_, s)| s.mean);
    writeln!(
        out,
        "mean_mcc={mcc} evaluations={evaluations} seconds={:.3}",
        start.elapsed().as_secs_f64()
    )?;
    Ok(())
}

fn bench_function(f: FnArg) -> BenchFunction {
    match f {
        FnArg::Ackley => BenchFunction::Ackley,
        FnArg::Griewank => BenchFunction::Griewank,
        FnArg::Rosenbrock => BenchFunction::Rosenbrock,
        FnArg::Rastrigin => BenchFunction::Rastrigin,
    }
}

fn run_benchmark_cmd(a: &BenchmarkArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let opt = a.opt.config()?;
    let function = bench_function(a.function);
    let mut spec = BenchmarkSpec::new(function, a.d).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = a.scale {
        spec = spec.with_scale(s);
    }
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    prepare_out(&a.common.out)?;
    let cfg = BenchmarkConfig {
        spec,
        reps: a.reps,
        parallelism: opt.parallelism,
        seed: a.opt.seed,
        optimizer: opt,
    };
    let start = Instant::now();
    let reps = run_benchmark(&cfg)?;
    let row = table_row(&reps);
    io::write_table(
        &a.common.out.join("benchmark.csv"),
        &["function", "d", "reps", "min_value", "mean_value", "stderr", "mean_seconds"],
        &[vec![
            function.name().to_owned(),
            a.d.to_string(),
            a.reps.to_string(),
            row.min.to_string(),
            row.mean.to_string(),
            row.stderr.to_string(),
            row.mean_seconds.to_string(),
        ]],
    )?;
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|r| {
            vec![
                r.rep.to_string(),
                r.run.best_value.to_string(),
                r.run.evaluations.to_string(),
                r.run.runs_completed.to_string(),
                r.seconds.to_string(),
            ]
        })
        .collect();
    io::write_table(
        &a.common.out.join("replications.csv"),
        &["rep", "best_value", "evaluations", "runs", "seconds"],
        &rows,
    )?;
    if a.common.verbose > 0 {
        for r in &reps {
            let _ = writeln!(err, "rep {}: {}", r.rep, r.run.best_value);
        }
    }
    let evaluations: usize = reps.iter().map(|r| r.run.evaluations).sum();
    writeln!(
        out,
        "best_value={} evaluations={evaluations} seconds={:.3}",
        row.min,
        start.elapsed().as_secs_f64()
    )?;
    Ok(())
}

fn run_roundtrip(a: &RoundtripArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.d < 2 {
        return Err(CliError::Usage("--d must be at least 2".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..a.reps {
        let c = phi_to_corr(&AngularVector::random(a.d, &mut rng));
        let back = phi_to_corr(&corr_to_phi(&c)?);
        worst = worst.max(linalg::max_abs_diff(c.as_matrix(), back.as_matrix()));
    }
    writeln!(
        out,
        "max_error={worst:e} reps={} seconds={:.3}",
        a.reps,
        start.elapsed().as_secs_f64()
    )?;
    if worst < a.tol {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow!(
            "round-trip error {worst:e} exceeds {:e}",
            a.tol
        )))
    }
}
