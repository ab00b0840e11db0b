use std::time::Instant;

use super::{project_box_in_place, Panoc, ParametricProblem, SolveOutcome, SolverError};

/// Quadratic penalty outer loop around [`Panoc::solve`].
///
/// Solves at `c = initial_penalty`, then multiplies `c` by
/// `penalty_update_factor` and re-solves from the previous solution while
/// `|F|_inf` exceeds the constraint tolerance and levels remain. Hitting a cap is
/// reported through `converged`, never as an error.
pub fn penalty_solve<P: ParametricProblem>(
    panoc: &mut Panoc,
    problem: &P,
    z0: &[f64],
) -> Result<SolveOutcome, SolverError> {
    let start = Instant::now();
    let cfg = panoc.config().clone();
    if z0.len() != problem.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: problem.dim(),
            got: z0.len(),
        });
    }
    let mut z = z0.to_vec();
    project_box_in_place(&mut z, problem.bounds());

    let mut c = cfg.initial_penalty;
    let mut inner_iterations = 0;
    let mut level = 0;
    loop {
        level += 1;
        let report = panoc.solve(problem, c, &mut z)?;
        inner_iterations += report.iterations;
        let (violation, _) = problem.penalty_norm(&z);
        let feasible = violation <= cfg.constraint_tolerance;
        if feasible || level >= cfg.max_penalty_iterations {
            return Ok(SolveOutcome {
                z_star: z,
                inner_iterations,
                penalty_iterations: level,
                fpr_norm: report.fpr_norm,
                constraint_violation: violation,
                penalty_parameter: c,
                converged: report.converged && feasible,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        c *= cfg.penalty_update_factor;
    }
}
