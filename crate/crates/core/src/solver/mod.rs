//! Box-constrained nonconvex solver with a quadratic penalty for equality
//! constraints.
//!
//! The inner loop is a PANOC-style method: projected-gradient (forward-backward)
//! steps blended with L-BFGS directions on the fixed-point residual, globalised
//! by a line search on the forward-backward envelope. The outer loop minimises
//! `f(z) + c * |F(z)|^2` for an increasing sequence of penalty parameters `c`,
//! warm-starting each level from the previous solution.

mod lbfgs;
mod panoc;
mod penalty;

pub use lbfgs::Lbfgs;
pub use panoc::{InnerReport, Panoc, TraceEntry};
pub use penalty::penalty_solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Componentwise bounds describing the feasible box `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SolverError> {
        if lower.len() != upper.len() {
            return Err(SolverError::InvalidBounds(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(SolverError::InvalidBounds(format!(
                "lower[{i}] = {} exceeds upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Repeats a per-stage box `stages` times.
    pub fn tiled(lower: &[f64], upper: &[f64], stages: usize) -> Result<Self, SolverError> {
        Self::new(lower.repeat(stages), upper.repeat(stages))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// Clamps `z` into the box.
pub fn project_box(z: &[f64], bounds: &BoxBounds) -> Vec<f64> {
    let mut out = z.to_vec();
    project_box_in_place(&mut out, bounds);
    out
}

pub fn project_box_in_place(z: &mut [f64], bounds: &BoxBounds) {
    for ((v, lo), hi) in z.iter_mut().zip(&bounds.lower).zip(&bounds.upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// A parametric problem `min_{z in Z} f(z) + c |F(z)|^2`.
///
/// The parameter is owned by the implementor; the solver only sees the
/// decision variable and the penalty weight. Oracles must be pure functions of
/// their arguments.
pub trait ParametricProblem {
    fn dim(&self) -> usize;

    fn bounds(&self) -> &BoxBounds;

    /// `f(z) + c * |F(z)|^2`.
    fn cost(&self, z: &[f64], c: f64) -> f64;

    /// Writes the exact gradient of [`cost`](Self::cost) into `grad` and
    /// returns the cost at `z`.
    fn cost_gradient(&self, z: &[f64], c: f64, grad: &mut [f64]) -> f64;

    /// `|F(z)|_inf` and the number of constraint components.
    fn penalty_norm(&self, z: &[f64]) -> (f64, usize);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Threshold on the infinity norm of the fixed-point residual.
    pub inner_tolerance: f64,
    /// Threshold on `|F|_inf`.
    pub constraint_tolerance: f64,
    pub max_inner_iterations: usize,
    pub max_penalty_iterations: usize,
    pub initial_penalty: f64,
    pub penalty_update_factor: f64,
    pub lbfgs_memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            inner_tolerance: 1e-4,
            constraint_tolerance: 1e-3,
            max_inner_iterations: 500,
            max_penalty_iterations: 4,
            initial_penalty: 10.0,
            penalty_update_factor: 10.0,
            lbfgs_memory: 10,
        }
    }
}

impl SolverConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.inner_tolerance > 0.0) {
            out.push("solver.inner_tolerance must be > 0".to_string());
        }
        if !(self.constraint_tolerance > 0.0) {
            out.push("solver.constraint_tolerance must be > 0".to_string());
        }
        if self.max_inner_iterations == 0 {
            out.push("solver.max_inner_iterations must be > 0".to_string());
        }
        if self.max_penalty_iterations == 0 {
            out.push("solver.max_penalty_iterations must be > 0".to_string());
        }
        if !(self.initial_penalty > 0.0) {
            out.push("solver.initial_penalty must be > 0".to_string());
        }
        if !(self.penalty_update_factor > 1.0) {
            out.push("solver.penalty_update_factor must be > 1".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub z_star: Vec<f64>,
    /// Summed over all penalty levels.
    pub inner_iterations: usize,
    pub penalty_iterations: usize,
    pub fpr_norm: f64,
    pub constraint_violation: f64,
    /// Penalty weight of the last level solved.
    pub penalty_parameter: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("non-finite {what} at inner iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
    #[error("initial guess has {got} entries, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}
