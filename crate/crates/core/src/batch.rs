//! Batch execution of independent scenario runs and classifier queries.
//!
//! With the `parallel` feature the work is spread over the rayon pool; without
//! it everything runs in order on the calling thread. Both paths give identical
//! results since every item owns its state.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::obstacles::{classify, Classification, MeasurementHistory, ObstacleError, ObstacleModelParams, ObstacleState};
use crate::sim::{run_scenario, ScenarioConfig, SimError, SimLog};

/// One classifier query: a history plus the current measurement.
#[derive(Debug, Clone)]
pub struct ClassifyJob {
    pub history: MeasurementHistory,
    pub current: ObstacleState,
    pub params: ObstacleModelParams,
}

pub fn run_batch_sequential(configs: &[ScenarioConfig]) -> Vec<Result<SimLog, SimError>> {
    configs.iter().map(run_scenario).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch_parallel(configs: &[ScenarioConfig]) -> Vec<Result<SimLog, SimError>> {
    configs.par_iter().map(run_scenario).collect()
}

/// Runs every config; output order matches input order.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<SimLog, SimError>> {
    #[cfg(feature = "parallel")]
    {
        run_batch_parallel(configs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(configs)
    }
}

/// `count` copies of `base` with seeds `base.seed, base.seed + 1, ...`.
pub fn seeded_repeats(base: &ScenarioConfig, count: usize) -> Vec<ScenarioConfig> {
    (0..count as u64)
        .map(|i| {
            let mut c = base.clone();
            c.seed = base.seed.wrapping_add(i);
            c
        })
        .collect()
}

fn classify_job(job: &ClassifyJob) -> Result<Classification, ObstacleError> {
    classify(&job.history, &job.current, &job.params)
}

pub fn classify_batch_sequential(jobs: &[ClassifyJob]) -> Vec<Result<Classification, ObstacleError>> {
    jobs.iter().map(classify_job).collect()
}

#[cfg(feature = "parallel")]
pub fn classify_batch_parallel(jobs: &[ClassifyJob]) -> Vec<Result<Classification, ObstacleError>> {
    jobs.par_iter().map(classify_job).collect()
}

pub fn classify_batch(jobs: &[ClassifyJob]) -> Vec<Result<Classification, ObstacleError>> {
    #[cfg(feature = "parallel")]
    {
        classify_batch_parallel(jobs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        classify_batch_sequential(jobs)
    }
}
