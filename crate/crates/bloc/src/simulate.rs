//! Replicated simulation studies: draw a truth, sample data, estimate,
//! score the estimate against the truth.

use std::time::Instant;

use anyhow::Result;
use bloc_core::datagen::{gen_truth, sample_mvn, TruthDesign, TruthSpec};
use bloc_core::estimate::{estimate, EstimateConfig};
use bloc_core::metrics::{compute_metrics, Metrics};
use bloc_core::rmps::SerialEvaluator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub design: TruthDesign,
    pub dim: usize,
    pub n: usize,
    pub reps: usize,
    pub sparsity: f64,
    pub estimate: EstimateConfig,
    pub seed: u64,
    /// Replications run concurrently on this many workers; each estimate
    /// polls serially.
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub rep: usize,
    pub lambda: f64,
    pub metrics: Metrics,
    pub evaluations: usize,
    pub seconds: f64,
}

/// Mean and standard error of one metric across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        if values.is_empty() {
            return Summary { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Summary { mean, stderr }
    }
}

pub const METRIC_NAMES: [&str; 7] = ["tpr", "fpr", "mcc", "rmse", "mad", "frob", "spec"];

pub fn metric_values(m: &Metrics) -> [f64; 7] {
    [m.tpr, m.fpr, m.mcc, m.rmse, m.mad, m.frob, m.spec]
}

/// Per-replication truth and data seeds, drawn from the master seed.
pub fn replication_seeds(seed: u64, reps: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| (rng.random(), rng.random())).collect()
}

fn replicate(cfg: &SimulationConfig, rep: usize, seeds: (u64, u64)) -> Result<Replication> {
    let start = Instant::now();
    let truth = gen_truth(
        &TruthSpec::new(cfg.design, cfg.dim)
            .with_sparsity(cfg.sparsity)
            .with_seed(seeds.0),
    )?;
    let x = sample_mvn(&truth.matrix, cfg.n, seeds.1)?;
    let fit = estimate(&x, &cfg.estimate, &SerialEvaluator)?;
    let metrics = compute_metrics(fit.gamma_hat.as_matrix(), &fit.support, &truth.matrix, &truth.support)?;
    Ok(Replication {
        rep,
        lambda: fit.lambda_used,
        metrics,
        evaluations: fit.optimizer.evaluations,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every replication; results are ordered by replication index
/// whatever the parallelism.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<Vec<Replication>> {
    let seeds = replication_seeds(cfg.seed, cfg.reps);
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

pub fn summarize(reps: &[Replication]) -> Vec<(&'static str, Summary)> {
    METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let v: Vec<f64> = reps.iter().map(|r| metric_values(&r.metrics)[k]).collect();
            (*name, Summary::of(&v))
        })
        .collect()
}
