//! Optimizer validation on the benchmark functions from random starts.

use std::time::Instant;

use anyhow::Result;
use bloc_core::benchfns::BenchmarkSpec;
use bloc_core::corrspace::{phi_to_corr, AngularVector};
use bloc_core::rmps::{optimize_with, OptimizerConfig, RunResult, SerialEvaluator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::simulate::Summary;

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub spec: BenchmarkSpec,
    pub reps: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Replications run concurrently on this many workers.
    pub parallelism: usize,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRep {
    pub rep: usize,
    pub run: RunResult,
    pub seconds: f64,
}

/// One row of the results table: best value, standard error of the
/// per-replication values, mean time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRow {
    pub min: f64,
    pub mean: f64,
    pub stderr: f64,
    pub mean_seconds: f64,
}

fn replicate(cfg: &BenchmarkConfig, rep: usize, seed: u64) -> Result<BenchmarkRep> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = phi_to_corr(&AngularVector::random(cfg.spec.dim, &mut rng));
    let mut opt = cfg.optimizer.clone();
    opt.seed = rng.random();
    let run = optimize_with(&cfg.spec, &init, &opt, &SerialEvaluator).map_err(|e| e.source)?;
    Ok(BenchmarkRep {
        rep,
        run,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRep>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.reps).map(|_| rng.random()).collect();
    if cfg.parallelism <= 1 {
        return seeds.iter().enumerate().map(|(r, s)| replicate(cfg, r, *s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build()?;
    pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(r, s)| replicate(cfg, r, *s))
            .collect()
    })
}

pub fn table_row(reps: &[BenchmarkRep]) -> BenchmarkRow {
    let values: Vec<f64> = reps.iter().map(|r| r.run.best_value).collect();
    let s = Summary::of(&values);
    let times: Vec<f64> = reps.iter().map(|r| r.seconds).collect();
    BenchmarkRow {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        mean: s.mean,
        stderr: s.stderr,
        mean_seconds: Summary::of(&times).mean,
    }
}
