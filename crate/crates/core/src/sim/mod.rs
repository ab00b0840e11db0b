//! Deterministic closed-loop simulation.
//!
//! Each tick: obstacles are measured and classified, predicted trajectories are
//! built, the configured controller picks an input, and the plant (the same
//! Euler model integrated with `plant_substeps` substeps) and obstacle truth are
//! advanced by one sampling period.

pub mod config;
pub mod construct;
pub mod measure;
pub mod metrics;
pub mod potential_field;

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{discrete_step, ControlInput, UavModelParams, UavState};
use crate::nmpc::{max_rate_residual, max_sphere_residual, NmpcConfig, NmpcContext, NmpcController, NmpcError};
use crate::obstacles::{
    build_trajectory_param, classify, is_collision_course, Measurement, MeasurementHistory,
    ObstacleModelParams, ObstacleState, ObstacleTrajectoryParam, TrajectoryClass,
};

pub use config::{
    ClassifierConfig, ControllerKind, LogConfig, NoiseConfig, ObstacleSpec, ScenarioConfig, StateSpec,
    StaticNmpcConfig, UavSetup, VelocityEstimator,
};
pub use metrics::{compute_metrics, ObstacleSummary, Summary};
pub use potential_field::{PotentialField, PotentialFieldConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error(transparent)]
    Controller(#[from] NmpcError),
}

/// Per-obstacle data of one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTick {
    pub truth: ObstacleState,
    pub measured: ObstacleState,
    /// Motion model the obstacle actually follows at this tick.
    pub true_class: TrajectoryClass,
    /// Increments at launch and at every ground bounce.
    pub phase: u32,
    pub class: TrajectoryClass,
    /// Backward-prediction errors; `None` until the history is full.
    pub errors: Option<[f64; 3]>,
    /// Distance between the UAV center and the obstacle center.
    pub distance: f64,
    pub collision_course: bool,
}

/// Solver diagnostics of one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTick {
    /// Seconds.
    pub wall_time: f64,
    pub inner_iterations: usize,
    pub penalty_iterations: usize,
    pub converged: bool,
    pub constraint_violation: f64,
    /// Recomputed on the predicted rollout.
    pub max_sphere_residual: f64,
    pub max_rate_residual: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// `-1` for the warm-up solve.
    pub tick: i64,
    pub time: f64,
    pub state: UavState,
    /// Input reaching the plant this tick.
    pub applied: ControlInput,
    /// Input decided by the controller this tick.
    pub commanded: ControlInput,
    pub obstacles: Vec<ObstacleTick>,
    pub solver: Option<SolverTick>,
    /// Downsampled predicted UAV positions, when enabled.
    pub prediction: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub scenario: String,
    pub seed: u64,
    pub ts: f64,
    pub controller: ControllerKind,
    /// Classifier history length `M`.
    pub history_len: usize,
    pub obstacle_names: Vec<String>,
    /// Physical radii used for the collision flag.
    pub obstacle_radii: Vec<f64>,
    /// Cold-start solve on the first context, not applied to the plant.
    pub warmup: TickRecord,
    /// One record per tick `0..=duration/ts`.
    pub ticks: Vec<TickRecord>,
}

pub(crate) struct ObstacleTruth {
    spec: ObstacleSpec,
    pub(crate) state: ObstacleState,
    launched: bool,
    phase: u32,
}

impl ObstacleTruth {
    pub(crate) fn new(spec: &ObstacleSpec) -> Self {
        Self {
            spec: spec.clone(),
            state: ObstacleState::new(Vector3::from(spec.position), Vector3::zeros()),
            launched: false,
            phase: 0,
        }
    }

    fn true_class(&self) -> TrajectoryClass {
        if self.launched {
            self.spec.motion
        } else {
            TrajectoryClass::Static
        }
    }

    pub(crate) fn launch_if_due(&mut self, time: f64) {
        if !self.launched && time + 1e-9 >= self.spec.launch_time {
            self.launched = true;
            self.phase += 1;
            self.state.v = Vector3::from(self.spec.velocity);
        }
    }

    pub(crate) fn advance(&mut self, ts: f64, substeps: usize) {
        if !self.launched {
            return;
        }
        let params = self.spec.model_params(ts / substeps as f64);
        for _ in 0..substeps {
            let descending = self.state.v.z < 0.0;
            let next = crate::obstacles::predict_step_forward(&self.state, self.spec.motion, &params);
            if self.spec.motion == TrajectoryClass::Projectile && descending && next.v.z >= 0.0 && next.p.z == params.ground_height {
                self.phase += 1;
            }
            self.state = next;
        }
    }
}

enum Controller {
    Nmpc(Box<NmpcController>),
    Field(PotentialField),
}

fn plant_step(x: &UavState, u: &ControlInput, model: &UavModelParams, ts: f64, substeps: usize) -> UavState {
    let dt = ts / substeps as f64;
    let mut s = *x;
    for _ in 0..substeps {
        s = discrete_step(&s, u, model, dt);
    }
    s
}

/// Runs one scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimLog, SimError> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations));
    }
    let ts = config.ts;
    let ticks = config.tick_count();
    let horizon = config.nmpc.horizon;
    let model = config.nmpc.model;
    let x_ref = config.uav.reference.to_state();
    let hover = ControlInput::hover(model.gravity);

    let mut nmpc_cfg: NmpcConfig = config.nmpc.clone();
    if config.controller == ControllerKind::StaticNmpc {
        if let Some(d) = config.static_nmpc.delta_max {
            nmpc_cfg.delta_max = d;
        }
    }
    let mut controller = match config.controller {
        ControllerKind::PredictiveNmpc | ControllerKind::StaticNmpc => {
            Controller::Nmpc(Box::new(NmpcController::new(nmpc_cfg.clone(), config.solver.clone())?))
        }
        ControllerKind::PotentialField => Controller::Field(PotentialField::new(config.potential_field.clone())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut truths: Vec<ObstacleTruth> = config.obstacles.iter().map(ObstacleTruth::new).collect();
    let mut sensors: Vec<measure::ObstacleSensor> = config
        .obstacles
        .iter()
        .map(|_| measure::ObstacleSensor::new(config.noise.clone(), ts))
        .collect();
    let mut histories: Vec<MeasurementHistory> = config
        .obstacles
        .iter()
        .map(|_| MeasurementHistory::new(config.classifier.history_len, ts))
        .collect();
    let obstacle_params: Vec<ObstacleModelParams> = config.obstacles.iter().map(|o| o.model_params(ts)).collect();

    let mut x = config.uav.start.to_state();
    let mut u_prev = hover;
    let mut delay: VecDeque<ControlInput> = std::iter::repeat_n(hover, config.input_delay_steps).collect();
    let mut records = Vec::with_capacity(ticks + 1);
    let mut warmup = None;

    for k in 0..=ticks {
        let time = k as f64 * ts;
        for t in truths.iter_mut() {
            t.launch_if_due(time);
        }

        // Measure, classify, predict.
        let mut obstacle_ticks = Vec::with_capacity(truths.len());
        let mut params = Vec::with_capacity(truths.len());
        let mut measured_positions = Vec::with_capacity(truths.len());
        for (i, truth) in truths.iter().enumerate() {
            let measured = sensors[i].measure(&truth.state, &mut rng);
            let (class, errors) = match classify(&histories[i], &measured, &obstacle_params[i]) {
                Ok(c) => (c.class, Some(c.errors)),
                Err(_) => (TrajectoryClass::Static, None),
            };
            // Timestamps are generated on a fixed grid, so the push cannot fail.
            let _ = histories[i].push(Measurement { time, state: measured });
            let spec = &config.obstacles[i];
            let param = match config.controller {
                ControllerKind::StaticNmpc => ObstacleTrajectoryParam::stationary(
                    measured.p,
                    config.static_nmpc.obstacle_radius.unwrap_or(spec.r_obs),
                    config.static_nmpc.r_s_max.unwrap_or(spec.r_s_max),
                    horizon,
                ),
                _ => build_trajectory_param(&measured, class, spec.r_obs, spec.r_s_max, horizon, &obstacle_params[i]),
            };
            obstacle_ticks.push(ObstacleTick {
                truth: truth.state,
                measured,
                true_class: truth.true_class(),
                phase: truth.phase,
                class,
                errors,
                distance: (x.p - truth.state.p).norm(),
                collision_course: is_collision_course(&param, &x.p),
            });
            measured_positions.push(measured.p);
            params.push(param);
        }

        // Decide.
        let mut solver_tick = None;
        let mut prediction = None;
        let commanded = match &mut controller {
            Controller::Nmpc(ctrl) => {
                let ctx = NmpcContext {
                    x0: x,
                    u_prev,
                    x_ref,
                    u_ref: hover,
                    obstacles: params,
                };
                if k == 0 {
                    let decision = ctrl.step(ctx.clone())?;
                    warmup = Some(TickRecord {
                        tick: -1,
                        time,
                        state: x,
                        applied: hover,
                        commanded: decision.u0,
                        obstacles: obstacle_ticks.clone(),
                        solver: Some(solver_summary(&decision, &ctx, &nmpc_cfg)),
                        prediction: None,
                    });
                }
                let decision = ctrl.step(ctx.clone())?;
                solver_tick = Some(solver_summary(&decision, &ctx, &nmpc_cfg));
                if config.log.prediction_stride > 0 {
                    prediction = Some(
                        decision
                            .predicted
                            .states
                            .iter()
                            .step_by(config.log.prediction_stride)
                            .map(|s| [s.p.x, s.p.y, s.p.z])
                            .collect(),
                    );
                }
                decision.u0
            }
            Controller::Field(pf) => {
                let u = pf.control(&x, &measured_positions, &x_ref, &model);
                if k == 0 {
                    warmup = Some(TickRecord {
                        tick: -1,
                        time,
                        state: x,
                        applied: hover,
                        commanded: u,
                        obstacles: obstacle_ticks.clone(),
                        solver: None,
                        prediction: None,
                    });
                }
                u
            }
        };

        let applied = if config.input_delay_steps == 0 {
            commanded
        } else {
            delay.push_back(commanded);
            delay.pop_front().expect("delay line is non-empty")
        };

        records.push(TickRecord {
            tick: k as i64,
            time,
            state: x,
            applied,
            commanded,
            obstacles: obstacle_ticks,
            solver: solver_tick,
            prediction,
        });

        // Advance truth.
        x = plant_step(&x, &applied, &model, ts, config.plant_substeps);
        for t in truths.iter_mut() {
            t.advance(ts, config.plant_substeps);
        }
        u_prev = commanded;
    }

    Ok(SimLog {
        scenario: config.name.clone(),
        seed: config.seed,
        ts,
        controller: config.controller,
        history_len: config.classifier.history_len,
        obstacle_names: config.obstacles.iter().map(|o| o.name.clone()).collect(),
        obstacle_radii: config.obstacles.iter().map(|o| o.r_obs).collect(),
        warmup: warmup.expect("tick 0 always runs"),
        ticks: records,
    })
}

fn solver_summary(decision: &crate::nmpc::ControlDecision, ctx: &NmpcContext, cfg: &NmpcConfig) -> SolverTick {
    let d = &decision.diagnostics;
    SolverTick {
        wall_time: d.wall_time,
        inner_iterations: d.inner_iterations,
        penalty_iterations: d.penalty_iterations,
        converged: d.converged,
        constraint_violation: d.constraint_violation,
        max_sphere_residual: max_sphere_residual(&decision.predicted, ctx),
        max_rate_residual: max_rate_residual(&d.z_star, ctx, cfg),
        failure: decision.failure.clone(),
    }
}
