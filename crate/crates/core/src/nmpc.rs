//! Receding-horizon controller assembled as a single-shooting problem.
//!
//! Decision variable: the `N` input triples `[T, phi_ref, theta_ref]`, flattened
//! stage by stage. States are obtained by rolling out the Euler model from the
//! measured state. Obstacle avoidance and input-rate limits enter as equality
//! constraints of the form `max{0, h} = 0`, handled by the quadratic penalty of
//! the solver; input magnitudes are the box.
//!
//! Constraint stacking order (fixed):
//! 1. for each obstacle `i`, for each stage `j = 1..=N`: the sphere residual of
//!    predicted position `p_j` against center `c_i[j]`;
//! 2. for each stage `j = 0..N-1`: `[phi_{j-1} - phi_j - dphi]+`,
//!    `[phi_j - phi_{j-1} - dphi]+`, `[theta_{j-1} - theta_j - dtheta]+`,
//!    `[theta_j - theta_{j-1} - dtheta]+`, where stage `-1` is the previously
//!    applied input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    rollout, ControlInput, HorizonRollout, UavModelParams, UavState, INPUT_DIM, STATE_DIM,
};
use crate::obstacles::ObstacleTrajectoryParam;
use crate::solver::{
    penalty_solve, project_box_in_place, BoxBounds, Panoc, ParametricProblem, SolveOutcome,
    SolverConfig, SolverError,
};

/// Diagonal weights of the state, input and input-rate costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmpcWeights {
    pub q_x: [f64; STATE_DIM],
    pub q_u: [f64; INPUT_DIM],
    pub q_du: [f64; INPUT_DIM],
}

impl Default for NmpcWeights {
    fn default() -> Self {
        Self {
            q_x: [5.0, 5.0, 30.0, 3.0, 3.0, 3.0, 8.0, 8.0],
            q_u: [5.0, 10.0, 10.0],
            q_du: [5.0, 12.0, 12.0],
        }
    }
}

impl NmpcWeights {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            q_x: self.q_x.map(|w| w * k),
            q_u: self.q_u.map(|w| w * k),
            q_du: self.q_du.map(|w| w * k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmpcConfig {
    pub horizon: usize,
    pub ts: f64,
    pub weights: NmpcWeights,
    pub u_min: [f64; INPUT_DIM],
    pub u_max: [f64; INPUT_DIM],
    /// Largest per-step change of `(phi_ref, theta_ref)`, rad.
    pub delta_max: [f64; 2],
    pub model: UavModelParams,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            horizon: 40,
            ts: 0.05,
            weights: NmpcWeights::default(),
            u_min: [5.0, -0.35, -0.35],
            u_max: [13.5, 0.35, 0.35],
            delta_max: [0.08, 0.08],
            model: UavModelParams::default(),
        }
    }
}

impl NmpcConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push("nmpc.horizon must be >= 1".to_string());
        }
        if !(self.ts > 0.0) {
            out.push(format!("nmpc.ts must be > 0 (got {})", self.ts));
        }
        for i in 0..INPUT_DIM {
            if !(self.u_min[i] <= self.u_max[i]) {
                out.push(format!(
                    "nmpc.u_min[{i}] = {} exceeds nmpc.u_max[{i}] = {}",
                    self.u_min[i], self.u_max[i]
                ));
            }
        }
        if self.u_min[0] < 0.0 {
            out.push("nmpc.u_min[0] (thrust) must be >= 0".to_string());
        }
        if self.delta_max.iter().any(|d| !(*d > 0.0)) {
            out.push(format!("nmpc.delta_max must be > 0 (got {:?})", self.delta_max));
        }
        let w = &self.weights;
        let all: Vec<f64> = w.q_x.iter().chain(&w.q_u).chain(&w.q_du).copied().collect();
        if all.iter().any(|v| !(*v >= 0.0)) {
            out.push("nmpc.weights must all be >= 0".to_string());
        }
        if all.iter().all(|v| *v == 0.0) {
            out.push("nmpc.weights must have at least one positive entry".to_string());
        }
        out.extend(self.model.violations());
        out
    }

    pub fn bounds(&self) -> Result<BoxBounds, SolverError> {
        BoxBounds::tiled(&self.u_min, &self.u_max, self.horizon)
    }

    pub fn hover_input(&self) -> ControlInput {
        ControlInput::hover(self.model.gravity)
    }
}

/// The problem parameter: measured state, previous input, references and
/// predicted obstacle trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcContext {
    pub x0: UavState,
    pub u_prev: ControlInput,
    pub x_ref: UavState,
    pub u_ref: ControlInput,
    pub obstacles: Vec<ObstacleTrajectoryParam>,
}

impl NmpcContext {
    /// Hover reference with no obstacles.
    pub fn hover(x0: UavState, x_ref: UavState, gravity: f64) -> Self {
        Self {
            x0,
            u_prev: ControlInput::hover(gravity),
            x_ref,
            u_ref: ControlInput::hover(gravity),
            obstacles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NmpcError {
    #[error("obstacle {index} has {got} predicted centers, expected {expected}")]
    TrajectoryLength {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in controller context")]
    NonFiniteContext,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_context(ctx: &NmpcContext, cfg: &NmpcConfig) -> Result<(), NmpcError> {
    let expected = cfg.horizon + 1;
    for (index, o) in ctx.obstacles.iter().enumerate() {
        let got = o.centers.len().min(o.safety_radii.len());
        if o.centers.len() != expected || o.safety_radii.len() != expected {
            return Err(NmpcError::TrajectoryLength {
                index,
                got,
                expected,
            });
        }
        if !o.r_obs.is_finite() || o.centers.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(NmpcError::NonFiniteContext);
        }
    }
    if !ctx.x0.is_finite() || !ctx.x_ref.is_finite() || !ctx.u_prev.is_finite() || !ctx.u_ref.is_finite() {
        return Err(NmpcError::NonFiniteContext);
    }
    Ok(())
}

/// `[(r_obs + r_s)^2 - |p - center|^2]+`.
#[inline]
pub fn sphere_residual(p: &[f64], center: &[f64], r_obs: f64, r_s: f64) -> f64 {
    let r = r_obs + r_s;
    let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2);
    (r * r - d2).max(0.0)
}

#[inline]
fn plus(h: f64) -> f64 {
    h.max(0.0)
}

fn step_array(x: &[f64; STATE_DIM], u: &[f64], m: &UavModelParams, ts: f64) -> [f64; STATE_DIM] {
    let (sp, cp) = x[6].sin_cos();
    let (st, ct) = x[7].sin_cos();
    let t = u[0];
    let a = [
        t * cp * st - m.damping[0] * x[3],
        -t * sp - m.damping[1] * x[4],
        t * cp * ct - m.gravity - m.damping[2] * x[5],
    ];
    [
        x[0] + ts * x[3],
        x[1] + ts * x[4],
        x[2] + ts * x[5],
        x[3] + ts * a[0],
        x[4] + ts * a[1],
        x[5] + ts * a[2],
        x[6] + ts * (m.k_phi * u[1] - x[6]) / m.tau_phi,
        x[7] + ts * (m.k_theta * u[2] - x[7]) / m.tau_theta,
    ]
}

fn rollout_arrays(u: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig) -> Vec<[f64; STATE_DIM]> {
    let n = cfg.horizon;
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(ctx.x0.to_array());
    for j in 0..n {
        let next = step_array(&xs[j], &u[INPUT_DIM * j..INPUT_DIM * (j + 1)], &cfg.model, cfg.ts);
        xs.push(next);
    }
    xs
}

fn stage_input<'a>(u: &'a [f64], prev: &'a [f64; INPUT_DIM], j: usize) -> &'a [f64] {
    if j == 0 {
        prev
    } else {
        &u[INPUT_DIM * (j - 1)..INPUT_DIM * j]
    }
}

/// State, input and input-rate cost of the flattened input sequence.
pub fn total_cost(u_seq: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig) -> f64 {
    assert_eq!(u_seq.len(), INPUT_DIM * cfg.horizon, "input sequence length");
    let w = &cfg.weights;
    let xs = rollout_arrays(u_seq, ctx, cfg);
    let x_ref = ctx.x_ref.to_array();
    let u_ref = ctx.u_ref.to_array();
    let u_prev = ctx.u_prev.to_array();
    let mut cost = 0.0;
    for x in &xs[1..] {
        for i in 0..STATE_DIM {
            cost += w.q_x[i] * (x_ref[i] - x[i]).powi(2);
        }
    }
    for j in 0..cfg.horizon {
        let uj = &u_seq[INPUT_DIM * j..INPUT_DIM * (j + 1)];
        let prev = stage_input(u_seq, &u_prev, j);
        for i in 0..INPUT_DIM {
            cost += w.q_u[i] * (u_ref[i] - uj[i]).powi(2);
            cost += w.q_du[i] * (uj[i] - prev[i]).powi(2);
        }
    }
    cost
}

/// Number of entries in the stacked constraint vector.
pub fn constraint_count(ctx: &NmpcContext, cfg: &NmpcConfig) -> usize {
    ctx.obstacles.len() * cfg.horizon + 4 * cfg.horizon
}

/// The stacked constraint vector `F` in the documented order.
pub fn constraint_map(u_seq: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig) -> Vec<f64> {
    assert_eq!(u_seq.len(), INPUT_DIM * cfg.horizon, "input sequence length");
    let xs = rollout_arrays(u_seq, ctx, cfg);
    let mut f = Vec::with_capacity(constraint_count(ctx, cfg));
    for o in &ctx.obstacles {
        for j in 1..=cfg.horizon {
            f.push(sphere_residual(&xs[j][..3], o.centers[j].as_slice(), o.r_obs, o.safety_radii[j]));
        }
    }
    push_rate_residuals(u_seq, ctx, cfg, &mut f);
    f
}

fn push_rate_residuals(u_seq: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig, f: &mut Vec<f64>) {
    let u_prev = ctx.u_prev.to_array();
    for j in 0..cfg.horizon {
        let uj = &u_seq[INPUT_DIM * j..INPUT_DIM * (j + 1)];
        let prev = stage_input(u_seq, &u_prev, j);
        for (k, dmax) in [(1, cfg.delta_max[0]), (2, cfg.delta_max[1])] {
            let d = uj[k] - prev[k];
            f.push(plus(-d - dmax));
            f.push(plus(d - dmax));
        }
    }
}

/// Largest rate residual of an input sequence.
pub fn max_rate_residual(u_seq: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig) -> f64 {
    let mut f = Vec::with_capacity(4 * cfg.horizon);
    push_rate_residuals(u_seq, ctx, cfg, &mut f);
    f.into_iter().fold(0.0, f64::max)
}

/// Largest sphere residual of a predicted rollout over stages `1..=N`.
pub fn max_sphere_residual(predicted: &HorizonRollout, ctx: &NmpcContext) -> f64 {
    let mut worst = 0.0_f64;
    for o in &ctx.obstacles {
        for j in 1..predicted.states.len().min(o.centers.len()) {
            let p = predicted.states[j].p;
            worst = worst.max(sphere_residual(p.as_slice(), o.centers[j].as_slice(), o.r_obs, o.safety_radii[j]));
        }
    }
    worst
}

/// Exact gradient of `total_cost + c |F|^2`, by an adjoint sweep through the
/// rollout. Returns the penalised cost.
pub fn cost_and_penalty_gradient(
    u_seq: &[f64],
    ctx: &NmpcContext,
    cfg: &NmpcConfig,
    c: f64,
    grad: &mut [f64],
) -> f64 {
    let n = cfg.horizon;
    assert_eq!(u_seq.len(), INPUT_DIM * n, "input sequence length");
    assert_eq!(grad.len(), u_seq.len(), "gradient length");
    let w = &cfg.weights;
    let m = &cfg.model;
    let ts = cfg.ts;
    let xs = rollout_arrays(u_seq, ctx, cfg);
    let x_ref = ctx.x_ref.to_array();
    let u_ref = ctx.u_ref.to_array();
    let u_prev = ctx.u_prev.to_array();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut cost = 0.0;

    // Input and rate terms act on the inputs directly.
    for j in 0..n {
        let base = INPUT_DIM * j;
        let prev = if j == 0 {
            u_prev
        } else {
            [u_seq[base - 3], u_seq[base - 2], u_seq[base - 1]]
        };
        for i in 0..INPUT_DIM {
            let e = u_seq[base + i] - u_ref[i];
            cost += w.q_u[i] * e * e;
            grad[base + i] += 2.0 * w.q_u[i] * e;
            let d = u_seq[base + i] - prev[i];
            cost += w.q_du[i] * d * d;
            grad[base + i] += 2.0 * w.q_du[i] * d;
            if j > 0 {
                grad[base - INPUT_DIM + i] -= 2.0 * w.q_du[i] * d;
            }
        }
        for (k, dmax) in [(1, cfg.delta_max[0]), (2, cfg.delta_max[1])] {
            let d = u_seq[base + k] - prev[k];
            let lo = plus(-d - dmax);
            let hi = plus(d - dmax);
            cost += c * (lo * lo + hi * hi);
            let dd = 2.0 * c * (hi - lo);
            grad[base + k] += dd;
            if j > 0 {
                grad[base - INPUT_DIM + k] -= dd;
            }
        }
    }

    // Stage cost gradient with respect to x_j (j >= 1), then the adjoint sweep.
    let stage_grad = |j: usize, cost: &mut f64| -> [f64; STATE_DIM] {
        let x = &xs[j];
        let mut g = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            let e = x[i] - x_ref[i];
            *cost += w.q_x[i] * e * e;
            g[i] = 2.0 * w.q_x[i] * e;
        }
        for o in &ctx.obstacles {
            let center = &o.centers[j];
            let r = o.r_obs + o.safety_radii[j];
            let dp = [x[0] - center.x, x[1] - center.y, x[2] - center.z];
            let h = r * r - (dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2]);
            if h > 0.0 {
                *cost += c * h * h;
                for a in 0..3 {
                    g[a] += -4.0 * c * h * dp[a];
                }
            }
        }
        g
    };

    let mut lambda = stage_grad(n, &mut cost);
    for j in (0..n).rev() {
        let x = &xs[j];
        let base = INPUT_DIM * j;
        let t = u_seq[base];
        let (sp, cp) = x[6].sin_cos();
        let (st, ct) = x[7].sin_cos();
        let dir = [cp * st, -sp, cp * ct];
        let dir_phi = [-sp * st, -cp, -sp * ct];
        let dir_theta = [cp * ct, 0.0, -cp * st];
        let lv = [lambda[3], lambda[4], lambda[5]];

        grad[base] += ts * (dir[0] * lv[0] + dir[1] * lv[1] + dir[2] * lv[2]);
        grad[base + 1] += ts * m.k_phi / m.tau_phi * lambda[6];
        grad[base + 2] += ts * m.k_theta / m.tau_theta * lambda[7];

        if j == 0 {
            break;
        }
        let dot_phi = dir_phi[0] * lv[0] + dir_phi[1] * lv[1] + dir_phi[2] * lv[2];
        let dot_theta = dir_theta[0] * lv[0] + dir_theta[1] * lv[1] + dir_theta[2] * lv[2];
        let mut next = lambda;
        for a in 0..3 {
            next[3 + a] += ts * (lambda[a] - m.damping[a] * lv[a]);
        }
        next[6] += ts * (t * dot_phi - lambda[6] / m.tau_phi);
        next[7] += ts * (t * dot_theta - lambda[7] / m.tau_theta);
        let g = stage_grad(j, &mut cost);
        for i in 0..STATE_DIM {
            lambda[i] = next[i] + g[i];
        }
    }
    cost
}

/// The controller's optimisation problem for one context.
#[derive(Debug, Clone)]
pub struct NmpcProblem {
    cfg: NmpcConfig,
    bounds: BoxBounds,
    ctx: NmpcContext,
}

impl NmpcProblem {
    pub fn new(cfg: NmpcConfig, ctx: NmpcContext) -> Result<Self, NmpcError> {
        check_context(&ctx, &cfg)?;
        let bounds = cfg.bounds()?;
        Ok(Self { cfg, bounds, ctx })
    }

    /// Replaces the parameter without rebuilding anything else.
    pub fn set_context(&mut self, ctx: NmpcContext) -> Result<(), NmpcError> {
        check_context(&ctx, &self.cfg)?;
        self.ctx = ctx;
        Ok(())
    }

    pub fn context(&self) -> &NmpcContext {
        &self.ctx
    }

    pub fn config(&self) -> &NmpcConfig {
        &self.cfg
    }
}

impl ParametricProblem for NmpcProblem {
    fn dim(&self) -> usize {
        INPUT_DIM * self.cfg.horizon
    }

    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    fn cost(&self, z: &[f64], c: f64) -> f64 {
        let f = constraint_map(z, &self.ctx, &self.cfg);
        total_cost(z, &self.ctx, &self.cfg) + c * f.iter().map(|v| v * v).sum::<f64>()
    }

    fn cost_gradient(&self, z: &[f64], c: f64, grad: &mut [f64]) -> f64 {
        cost_and_penalty_gradient(z, &self.ctx, &self.cfg, c, grad)
    }

    fn penalty_norm(&self, z: &[f64]) -> (f64, usize) {
        let f = constraint_map(z, &self.ctx, &self.cfg);
        (f.iter().fold(0.0, |m, v| m.max(v.abs())), f.len())
    }
}

/// What the controller decided at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u0: ControlInput,
    pub predicted: HorizonRollout,
    pub diagnostics: SolveOutcome,
    /// `margins[i][j]`: clearance `|p_j - c_i[j]| - r_obs - r_s[j]` for `j = 0..=N`.
    /// Stage 0 is fixed by the measurement and reported only.
    pub margins: Vec<Vec<f64>>,
    /// Set when the solver aborted and the previous input was held.
    pub failure: Option<String>,
}

fn shift_warm_start(prev: &[f64]) -> Vec<f64> {
    let n = prev.len();
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&prev[INPUT_DIM..]);
    out.extend_from_slice(&prev[n - INPUT_DIM..]);
    out
}

fn hover_sequence(cfg: &NmpcConfig) -> Vec<f64> {
    cfg.hover_input().to_array().repeat(cfg.horizon)
}

fn margins(predicted: &HorizonRollout, ctx: &NmpcContext) -> Vec<Vec<f64>> {
    ctx.obstacles
        .iter()
        .map(|o| {
            predicted
                .states
                .iter()
                .zip(o.centers.iter().zip(&o.safety_radii))
                .map(|(s, (c, rs))| (s.p - c).norm() - o.r_obs - rs)
                .collect()
        })
        .collect()
}

/// Solves one receding-horizon step.
///
/// `warm` is the previous full solution; it is shifted one stage and its last
/// input duplicated. Without it the solve starts from hover inputs.
pub fn control_step(
    ctx: &NmpcContext,
    cfg: &NmpcConfig,
    solver_cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<ControlDecision, NmpcError> {
    let mut panoc = Panoc::new(solver_cfg.clone());
    let problem = NmpcProblem::new(cfg.clone(), ctx.clone())?;
    solve_with(&mut panoc, &problem, warm)
}

fn solve_with(
    panoc: &mut Panoc,
    problem: &NmpcProblem,
    warm: Option<&[f64]>,
) -> Result<ControlDecision, NmpcError> {
    let cfg = problem.config();
    let ctx = problem.context();
    let z0 = match warm {
        Some(prev) if prev.len() == problem.dim() => shift_warm_start(prev),
        _ => hover_sequence(cfg),
    };
    match penalty_solve(panoc, problem, &z0) {
        Ok(outcome) => {
            let inputs: Vec<ControlInput> = outcome
                .z_star
                .chunks(INPUT_DIM)
                .map(ControlInput::from_slice)
                .collect();
            let predicted = rollout(&ctx.x0, &inputs, &cfg.model, cfg.ts);
            Ok(ControlDecision {
                u0: inputs[0],
                margins: margins(&predicted, ctx),
                predicted,
                diagnostics: outcome,
                failure: None,
            })
        }
        Err(err) => {
            let mut hold = ctx.u_prev.to_array();
            project_box_in_place(&mut hold, &BoxBounds::new(cfg.u_min.to_vec(), cfg.u_max.to_vec())?);
            let u0 = ControlInput::from_slice(&hold);
            let z_star = u0.to_array().repeat(cfg.horizon);
            let inputs = vec![u0; cfg.horizon];
            let predicted = rollout(&ctx.x0, &inputs, &cfg.model, cfg.ts);
            let (violation, _) = problem.penalty_norm(&z_star);
            Ok(ControlDecision {
                u0,
                margins: margins(&predicted, ctx),
                predicted,
                diagnostics: SolveOutcome {
                    z_star,
                    inner_iterations: 0,
                    penalty_iterations: 0,
                    fpr_norm: f64::NAN,
                    constraint_violation: violation,
                    penalty_parameter: panoc.config().initial_penalty,
                    converged: false,
                    wall_time: 0.0,
                },
                failure: Some(err.to_string()),
            })
        }
    }
}

/// A controller instance for one vehicle: solver workspace plus warm-start buffer.
#[derive(Debug, Clone)]
pub struct NmpcController {
    problem: NmpcProblem,
    panoc: Panoc,
    warm: Option<Vec<f64>>,
    warm_start: bool,
}

impl NmpcController {
    pub fn new(cfg: NmpcConfig, solver_cfg: SolverConfig) -> Result<Self, NmpcError> {
        let x = UavState::hover_at(nalgebra::Vector3::zeros());
        let ctx = NmpcContext::hover(x, x, cfg.model.gravity);
        Ok(Self {
            problem: NmpcProblem::new(cfg, ctx)?,
            panoc: Panoc::new(solver_cfg),
            warm: None,
            warm_start: true,
        })
    }

    /// Disables shifting the previous solution; every solve starts from hover.
    pub fn without_warm_start(mut self) -> Self {
        self.warm_start = false;
        self
    }

    pub fn config(&self) -> &NmpcConfig {
        self.problem.config()
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn step(&mut self, ctx: NmpcContext) -> Result<ControlDecision, NmpcError> {
        self.problem.set_context(ctx)?;
        let warm = if self.warm_start { self.warm.as_deref() } else { None };
        let decision = solve_with(&mut self.panoc, &self.problem, warm)?;
        if decision.failure.is_none() {
            self.warm = Some(decision.diagnostics.z_star.clone());
        } else {
            self.warm = None;
        }
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacles::{build_trajectory_param, ObstacleModelParams, ObstacleState, TrajectoryClass};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn hover_ctx() -> NmpcContext {
        let x = UavState::hover_at(Vector3::new(0.0, 0.0, 1.0));
        NmpcContext::hover(x, x, 9.81)
    }

    fn zero_state_weights() -> NmpcConfig {
        let mut cfg = NmpcConfig::default();
        cfg.weights.q_x = [0.0; STATE_DIM];
        cfg
    }

    #[test]
    fn zero_cost_at_hover() {
        let cfg = NmpcConfig::default();
        let u = hover_sequence(&cfg);
        assert_eq!(total_cost(&u, &hover_ctx(), &cfg), 0.0);
    }

    #[test]
    fn thrust_perturbation_cost_without_state_weights() {
        let cfg = zero_state_weights();
        let mut u = hover_sequence(&cfg);
        let delta = 0.3;
        u[0] += delta;
        let expected = (5.0 + 2.0 * 5.0) * delta * delta;
        assert_relative_eq!(total_cost(&u, &hover_ctx(), &cfg), expected, epsilon = 1e-12);
    }

    #[test]
    fn cost_is_linear_in_weights() {
        let cfg = NmpcConfig::default();
        let doubled = NmpcConfig {
            weights: cfg.weights.scaled(2.0),
            ..cfg.clone()
        };
        let u: Vec<f64> = (0..120).map(|i| [9.0, 0.1, -0.2][i % 3] + 0.01 * i as f64).collect();
        let ctx = hover_ctx();
        assert_relative_eq!(
            total_cost(&u, &ctx, &doubled),
            2.0 * total_cost(&u, &ctx, &cfg),
            max_relative = 1e-14
        );
    }

    #[test]
    fn sphere_residual_cases() {
        let c = [0.0, 0.0, 1.0];
        assert_eq!(sphere_residual(&[1.0, 0.0, 1.0], &c, 0.3, 0.1), 0.0);
        assert_relative_eq!(sphere_residual(&c, &c, 0.4, 0.0), 0.16, epsilon = 1e-15);
        assert_eq!(sphere_residual(&[0.5, 0.0, 1.0], &c, 0.5, 0.0), 0.0);
    }

    #[test]
    fn constraint_map_zero_without_obstacles() {
        let cfg = NmpcConfig::default();
        let f = constraint_map(&hover_sequence(&cfg), &hover_ctx(), &cfg);
        assert_eq!(f.len(), 4 * cfg.horizon);
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn far_obstacle_block_is_zero() {
        let cfg = NmpcConfig::default();
        let mut ctx = hover_ctx();
        ctx.obstacles.push(ObstacleTrajectoryParam::stationary(Vector3::new(10.0, 0.0, 1.0), 0.4, 0.2, 40));
        let f = constraint_map(&hover_sequence(&cfg), &ctx, &cfg);
        assert_eq!(f.len(), 40 + 160);
        assert!(f[..40].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_roll_step_violates_one_rate_residual() {
        let cfg = NmpcConfig::default();
        let mut u = hover_sequence(&cfg);
        // stages 5.. hold phi_ref = 0.1: one jump of 0.1 between stage 4 and 5
        for j in 5..cfg.horizon {
            u[3 * j + 1] = 0.1;
        }
        let f = constraint_map(&u, &hover_ctx(), &cfg);
        let nonzero: Vec<(usize, f64)> = f.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        // stage 5, second entry ([phi_j - phi_{j-1} - dphi]+)
        assert_eq!(nonzero[0].0, 4 * 5 + 1);
        assert_relative_eq!(nonzero[0].1, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn gradient_zero_at_hover_minimum() {
        let cfg = NmpcConfig::default();
        let mut g = vec![0.0; 120];
        cost_and_penalty_gradient(&hover_sequence(&cfg), &hover_ctx(), &cfg, 100.0, &mut g);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    fn central_difference(u: &[f64], ctx: &NmpcContext, cfg: &NmpcConfig, c: f64) -> Vec<f64> {
        let problem = NmpcProblem::new(cfg.clone(), ctx.clone()).unwrap();
        let mut out = vec![0.0; u.len()];
        let mut probe = u.to_vec();
        for i in 0..u.len() {
            let h = 1e-6 * u[i].abs().max(1.0);
            probe[i] = u[i] + h;
            let fp = problem.cost(&probe, c);
            probe[i] = u[i] - h;
            let fm = problem.cost(&probe, c);
            probe[i] = u[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences_with_active_obstacle() {
        let cfg = NmpcConfig::default();
        let mut ctx = hover_ctx();
        ctx.x0.v = Vector3::new(0.3, -0.2, 0.1);
        ctx.obstacles.push(build_trajectory_param(
            &ObstacleState::new(Vector3::new(-1.0, 0.05, 1.2), Vector3::new(2.0, 0.0, 0.0)),
            TrajectoryClass::Linear,
            0.4,
            0.2,
            40,
            &ObstacleModelParams::default(),
        ));
        let u: Vec<f64> = (0..120)
            .map(|i| match i % 3 {
                0 => 9.81 + 0.5 * ((i as f64) * 0.37).sin(),
                1 => 0.05 * ((i as f64) * 0.11).cos(),
                _ => -0.04 * ((i as f64) * 0.23).sin(),
            })
            .collect();
        let f = constraint_map(&u, &ctx, &cfg);
        assert!(f[..40].iter().any(|v| *v > 0.0), "obstacle should be active");
        let mut g = vec![0.0; 120];
        let cost = cost_and_penalty_gradient(&u, &ctx, &cfg, 100.0, &mut g);
        let problem = NmpcProblem::new(cfg.clone(), ctx.clone()).unwrap();
        assert_relative_eq!(cost, problem.cost(&u, 100.0), max_relative = 1e-12);
        let fd = central_difference(&u, &ctx, &cfg, 100.0);
        let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * scale.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn warm_start_shift_duplicates_last_stage() {
        let prev: Vec<f64> = (0..9).map(|v| v as f64).collect();
        assert_eq!(shift_warm_start(&prev), vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn hover_context_returns_hover_input() {
        let cfg = NmpcConfig::default();
        let d = control_step(&hover_ctx(), &cfg, &SolverConfig::default(), None).unwrap();
        let u = d.u0.to_array();
        let r = cfg.hover_input().to_array();
        for i in 0..3 {
            assert!((u[i] - r[i]).abs() < 1e-3, "{u:?}");
        }
        assert!(d.diagnostics.converged);
    }

    #[test]
    fn displaced_reference_pitches_toward_target() {
        let cfg = NmpcConfig::default();
        let mut ctx = hover_ctx();
        ctx.x_ref.p.x += 1.0;
        let d = control_step(&ctx, &cfg, &SolverConfig::default(), None).unwrap();
        assert!(d.u0.theta_ref > 0.0, "{:?}", d.u0);
        // one-step check of the sign convention: +theta accelerates along +x
        let next = crate::dynamics::discrete_step(
            &UavState { theta: 0.1, ..ctx.x0 },
            &d.u0,
            &cfg.model,
            cfg.ts,
        );
        assert!(next.v.x > 0.0);
    }

    #[test]
    fn mismatched_trajectory_is_rejected() {
        let cfg = NmpcConfig::default();
        let mut ctx = hover_ctx();
        ctx.obstacles.push(ObstacleTrajectoryParam::stationary(Vector3::zeros(), 0.4, 0.2, 10));
        assert!(matches!(
            control_step(&ctx, &cfg, &SolverConfig::default(), None),
            Err(NmpcError::TrajectoryLength { expected: 41, got: 11, .. })
        ));
    }
}
