use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::UavState;
use crate::nmpc::NmpcConfig;
use crate::obstacles::{ObstacleModelParams, TrajectoryClass};
use crate::sim::potential_field::PotentialFieldConfig;
use crate::solver::SolverConfig;

fn default_substeps() -> usize {
    10
}
fn default_history_len() -> usize {
    5
}
fn default_r_s_max() -> f64 {
    0.2
}
fn default_restitution() -> f64 {
    0.75
}
fn default_gravity() -> f64 {
    9.81
}

/// A full closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Seconds.
    pub duration: f64,
    /// Controller sampling time, seconds.
    pub ts: f64,
    #[serde(default)]
    pub seed: u64,
    /// Plant integration substeps per tick.
    #[serde(default = "default_substeps")]
    pub plant_substeps: usize,
    /// Ticks between a command and its application to the plant.
    #[serde(default)]
    pub input_delay_steps: usize,
    pub controller: ControllerKind,
    pub uav: UavSetup,
    #[serde(default)]
    pub nmpc: NmpcConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub static_nmpc: StaticNmpcConfig,
    #[serde(default)]
    pub potential_field: PotentialFieldConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub log: LogConfig,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Obstacles classified and predicted over the horizon.
    PredictiveNmpc,
    /// Same controller, but every obstacle is held at its measured position.
    StaticNmpc,
    PotentialField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub p: [f64; 3],
    #[serde(default)]
    pub v: [f64; 3],
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub theta: f64,
}

impl StateSpec {
    pub fn hover_at(p: [f64; 3]) -> Self {
        Self {
            p,
            v: [0.0; 3],
            phi: 0.0,
            theta: 0.0,
        }
    }

    pub fn to_state(&self) -> UavState {
        UavState {
            p: Vector3::from(self.p),
            v: Vector3::from(self.v),
            phi: self.phi,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSetup {
    pub start: StateSpec,
    pub reference: StateSpec,
}

/// Settings of the static-obstacle NMPC baseline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticNmpcConfig {
    /// Replaces every obstacle's radius when set.
    pub obstacle_radius: Option<f64>,
    /// Replaces every obstacle's safety margin when set.
    pub r_s_max: Option<f64>,
    /// Replaces `nmpc.delta_max` when set.
    pub delta_max: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Number of past measurements compared against the backward prediction.
    pub history_len: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            history_len: default_history_len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityEstimator {
    /// True velocity plus Gaussian noise.
    #[default]
    NoisyTruth,
    /// Central difference of noisy positions followed by a 5-sample median.
    FiniteDifferenceMedian,
}

/// Obstacle measurement noise. All zero means exact measurements.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub position_std: f64,
    pub velocity_std: f64,
    pub velocity_estimator: VelocityEstimator,
}

impl NoiseConfig {
    pub fn is_off(&self) -> bool {
        self.position_std == 0.0
            && self.velocity_std == 0.0
            && self.velocity_estimator == VelocityEstimator::NoisyTruth
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    /// Keep every k-th predicted UAV position in the log; 0 keeps none.
    pub prediction_stride: usize,
}

/// One obstacle: how it truly moves and what the controller is told about its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub name: String,
    /// True motion model after launch. Before launch the obstacle is held still.
    pub motion: TrajectoryClass,
    /// Seconds.
    pub launch_time: f64,
    pub position: [f64; 3],
    /// Velocity at launch.
    pub velocity: [f64; 3],
    pub r_obs: f64,
    #[serde(default = "default_r_s_max")]
    pub r_s_max: f64,
    #[serde(default)]
    pub damping: [f64; 3],
    #[serde(default = "default_restitution")]
    pub restitution: f64,
    #[serde(default)]
    pub ground_height: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

impl ObstacleSpec {
    pub fn model_params(&self, ts: f64) -> ObstacleModelParams {
        ObstacleModelParams {
            damping: self.damping,
            gravity: self.gravity,
            restitution: self.restitution,
            ground_height: self.ground_height,
            ts,
        }
    }
}

impl ScenarioConfig {
    /// Names every violated invariant; empty when the scenario can run.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.duration > 0.0) {
            out.push(format!("duration must be > 0 (got {})", self.duration));
        }
        if !(self.ts > 0.0) {
            out.push(format!("ts must be > 0 (got {})", self.ts));
        }
        if (self.ts - self.nmpc.ts).abs() > 1e-12 {
            out.push(format!(
                "ts mismatch: scenario ts = {} but nmpc.ts = {}",
                self.ts, self.nmpc.ts
            ));
        }
        if self.plant_substeps == 0 {
            out.push("plant_substeps must be >= 1".to_string());
        }
        if self.classifier.history_len == 0 {
            out.push("classifier.history_len must be >= 1".to_string());
        }
        if self.noise.position_std < 0.0 || self.noise.velocity_std < 0.0 {
            out.push("noise standard deviations must be >= 0".to_string());
        }
        out.extend(self.nmpc.violations());
        out.extend(self.solver.violations());
        out.extend(self.potential_field.violations());
        if let Some(r) = self.static_nmpc.obstacle_radius {
            if !(r > 0.0) {
                out.push(format!("static_nmpc.obstacle_radius must be > 0 (got {r})"));
            }
        }
        if let Some(r) = self.static_nmpc.r_s_max {
            if !(r >= 0.0) {
                out.push(format!("static_nmpc.r_s_max must be >= 0 (got {r})"));
            }
        }
        if let Some(d) = self.static_nmpc.delta_max {
            if d.iter().any(|v| !(*v > 0.0)) {
                out.push(format!("static_nmpc.delta_max must be > 0 (got {d:?})"));
            }
        }
        for state in [&self.uav.start, &self.uav.reference] {
            if !state.to_state().is_finite() {
                out.push("uav states must be finite".to_string());
            }
        }
        let mut names = std::collections::HashSet::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            let tag = format!("obstacles[{i}] ({})", o.name);
            if !names.insert(o.name.as_str()) {
                out.push(format!("{tag}: duplicate obstacle name"));
            }
            if !(o.r_obs > 0.0) {
                out.push(format!("{tag}: r_obs must be > 0 (got {})", o.r_obs));
            }
            if !(o.r_s_max >= 0.0) {
                out.push(format!("{tag}: r_s_max must be >= 0 (got {})", o.r_s_max));
            }
            if !(0.0..=1.0).contains(&o.restitution) {
                out.push(format!("{tag}: restitution must be in [0, 1] (got {})", o.restitution));
            }
            if o.damping.iter().any(|b| !(*b >= 0.0)) {
                out.push(format!("{tag}: damping must be >= 0 (got {:?})", o.damping));
            }
            if o.damping.iter().any(|b| b * self.ts >= 1.0) {
                out.push(format!("{tag}: ts * damping must be < 1 for backward prediction"));
            }
            if !(o.launch_time >= 0.0) {
                out.push(format!("{tag}: launch_time must be >= 0 (got {})", o.launch_time));
            }
            if !(o.gravity > 0.0) {
                out.push(format!("{tag}: gravity must be > 0 (got {})", o.gravity));
            }
            if o.position.iter().chain(&o.velocity).any(|v| !v.is_finite()) {
                out.push(format!("{tag}: position and velocity must be finite"));
            }
        }
        out
    }

    pub fn tick_count(&self) -> usize {
        (self.duration / self.ts).round() as usize
    }
}
