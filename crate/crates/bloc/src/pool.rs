//! Thread-pool candidate evaluation.

use bloc_core::rmps::{CandidateEvaluator, SerialEvaluator};
use bloc_core::Result;
use rayon::prelude::*;

/// Evaluates candidate batches on a dedicated rayon pool. Results are
/// collected by index, so the optimizer's reduction does not depend on
/// scheduling.
#[derive(Debug)]
pub struct PoolEvaluator {
    pool: rayon::ThreadPool,
}

impl PoolEvaluator {
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(PoolEvaluator { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl CandidateEvaluator for PoolEvaluator {
    fn evaluate(&self, count: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>> {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

/// Serial for `parallelism <= 1`, a pool of that many workers otherwise.
pub fn evaluator(parallelism: usize) -> anyhow::Result<Box<dyn CandidateEvaluator + Send + Sync>> {
    if parallelism <= 1 {
        Ok(Box::new(SerialEvaluator))
    } else {
        Ok(Box::new(PoolEvaluator::new(parallelism)?))
    }
}
