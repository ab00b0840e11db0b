//! Scalar summaries of a simulation log.

use serde::{Deserialize, Serialize};

use crate::sim::SimLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSummary {
    pub name: String,
    /// Smallest center-to-center distance over the run, m.
    pub min_distance: f64,
    pub min_distance_time: f64,
    /// Whether the distance ever dropped below the obstacle's physical radius.
    pub collided: bool,
    /// Longest run of consecutive eligible ticks with a wrong class.
    pub max_misclassified_run: usize,
    /// Ticks where the class was eligible for scoring.
    pub eligible_ticks: usize,
    pub misclassified_ticks: usize,
    pub class_changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub ticks: usize,
    pub collided: bool,
    pub obstacles: Vec<ObstacleSummary>,
    /// Solve times in milliseconds over the applied ticks; zero without a solver.
    pub solve_ms_max: f64,
    pub solve_ms_median: f64,
    pub solve_ms_p99: f64,
    pub mean_inner_iterations: f64,
    pub converged_fraction: f64,
    pub solver_failures: usize,
    /// Largest predicted sphere residual among converged solves.
    pub max_sphere_residual: f64,
    /// Largest rate residual among converged solves.
    pub max_rate_residual: f64,
    pub final_position: [f64; 3],
}

/// Nearest-rank percentile of an unsorted sample; `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A tick is eligible for class scoring once the classifier has a full history
/// that lies entirely inside one motion phase (no launch or bounce inside it).
fn obstacle_summary(log: &SimLog, i: usize) -> ObstacleSummary {
    let m = log.history_len;
    let mut min_distance = f64::INFINITY;
    let mut min_distance_time = 0.0;
    let mut run = 0;
    let mut max_run = 0;
    let mut eligible = 0;
    let mut wrong = 0;
    let mut changes = 0;
    for (k, rec) in log.ticks.iter().enumerate() {
        let o = &rec.obstacles[i];
        if o.distance < min_distance {
            min_distance = o.distance;
            min_distance_time = rec.time;
        }
        if k > 0 && log.ticks[k - 1].obstacles[i].class != o.class {
            changes += 1;
        }
        let same_phase = k >= m && log.ticks[k - m].obstacles[i].phase == o.phase;
        if o.errors.is_some() && same_phase {
            eligible += 1;
            if o.class != o.true_class {
                wrong += 1;
                run += 1;
                max_run = max_run.max(run);
            } else {
                run = 0;
            }
        } else {
            run = 0;
        }
    }
    ObstacleSummary {
        name: log.obstacle_names[i].clone(),
        min_distance,
        min_distance_time,
        collided: min_distance < log.obstacle_radii[i],
        max_misclassified_run: max_run,
        eligible_ticks: eligible,
        misclassified_ticks: wrong,
        class_changes: changes,
    }
}

pub fn compute_metrics(log: &SimLog) -> Summary {
    let obstacles: Vec<ObstacleSummary> = (0..log.obstacle_names.len()).map(|i| obstacle_summary(log, i)).collect();
    let solves: Vec<_> = log.ticks.iter().filter_map(|r| r.solver.as_ref()).collect();
    let ms: Vec<f64> = solves.iter().map(|s| s.wall_time * 1e3).collect();
    let converged: Vec<_> = solves.iter().filter(|s| s.converged).collect();
    let last = log.ticks.last().map(|r| r.state.p).unwrap_or_default();
    Summary {
        scenario: log.scenario.clone(),
        seed: log.seed,
        ticks: log.ticks.len(),
        collided: obstacles.iter().any(|o| o.collided),
        obstacles,
        solve_ms_max: ms.iter().copied().fold(0.0, f64::max),
        solve_ms_median: median(&ms),
        solve_ms_p99: percentile(&ms, 0.99),
        mean_inner_iterations: if solves.is_empty() {
            0.0
        } else {
            solves.iter().map(|s| s.inner_iterations as f64).sum::<f64>() / solves.len() as f64
        },
        converged_fraction: if solves.is_empty() {
            1.0
        } else {
            converged.len() as f64 / solves.len() as f64
        },
        solver_failures: solves.iter().filter(|s| s.failure.is_some()).count(),
        max_sphere_residual: converged.iter().map(|s| s.max_sphere_residual).fold(0.0, f64::max),
        max_rate_residual: converged.iter().map(|s| s.max_rate_residual).fold(0.0, f64::max),
        final_position: [last.x, last.y, last.z],
    }
}
