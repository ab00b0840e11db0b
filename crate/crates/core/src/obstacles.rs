//! Obstacle motion models, trajectory classification and horizon prediction.
//!
//! Three motion classes are supported: static, linear (constant velocity) and
//! projectile (gravity plus linear drag, with a flat-ground bounce). Each class
//! has a forward-Euler predictor and its exact algebraic inverse. The inverse is
//! used to run the current measurement backwards and score each class against
//! the last `M` measurements.

use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl ObstacleState {
    pub fn new(p: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { p, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryClass {
    Static,
    Linear,
    Projectile,
}

impl TrajectoryClass {
    /// In tie-break priority order.
    pub const ALL: [TrajectoryClass; 3] = [
        TrajectoryClass::Static,
        TrajectoryClass::Linear,
        TrajectoryClass::Projectile,
    ];

    /// Stable integer id used in logs.
    pub fn id(self) -> u8 {
        match self {
            TrajectoryClass::Static => 0,
            TrajectoryClass::Linear => 1,
            TrajectoryClass::Projectile => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryClass::Static => "static",
            TrajectoryClass::Linear => "linear",
            TrajectoryClass::Projectile => "projectile",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleModelParams {
    /// Linear drag `(B_x, B_y, B_z)` in 1/s.
    pub damping: [f64; 3],
    pub gravity: f64,
    /// Ratio of post- to pre-impact vertical speed.
    pub restitution: f64,
    pub ground_height: f64,
    pub ts: f64,
}

impl Default for ObstacleModelParams {
    fn default() -> Self {
        Self {
            damping: [0.0; 3],
            gravity: 9.81,
            restitution: 0.75,
            ground_height: 0.0,
            ts: 0.05,
        }
    }
}

impl ObstacleModelParams {
    pub fn with_ts(self, ts: f64) -> Self {
        Self { ts, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObstacleError {
    #[error("backward projectile step is singular: ts * B[{axis}] = {value} >= 1")]
    NonInvertibleDamping { axis: usize, value: f64 },
    #[error("classification needs {need} past measurements, have {have}")]
    NotReady { have: usize, need: usize },
    #[error("measurement at t={time} does not follow t={last} by ts={ts}")]
    BadTimestamp { time: f64, last: f64, ts: f64 },
}

/// Flat-ground bounce. Reflects a descending obstacle that reached the ground.
pub fn apply_bounce(x: &ObstacleState, params: &ObstacleModelParams) -> ObstacleState {
    let mut out = *x;
    if x.p.z <= params.ground_height && x.v.z < 0.0 {
        out.v.z = -params.restitution * x.v.z;
        out.p.z = params.ground_height;
    }
    out
}

fn projectile_acceleration(v: &Vector3<f64>, params: &ObstacleModelParams) -> Vector3<f64> {
    let b = params.damping;
    Vector3::new(-b[0] * v.x, -b[1] * v.y, -params.gravity - b[2] * v.z)
}

/// One forward step of the class model.
pub fn predict_step_forward(
    x: &ObstacleState,
    class: TrajectoryClass,
    params: &ObstacleModelParams,
) -> ObstacleState {
    let ts = params.ts;
    match class {
        TrajectoryClass::Static => ObstacleState::new(x.p, Vector3::zeros()),
        TrajectoryClass::Linear => ObstacleState::new(x.p + x.v * ts, x.v),
        TrajectoryClass::Projectile => {
            let next = ObstacleState::new(x.p + x.v * ts, x.v + projectile_acceleration(&x.v, params) * ts);
            apply_bounce(&next, params)
        }
    }
}

/// Inverse of [`predict_step_forward`], ignoring the bounce branch.
pub fn predict_step_backward(
    x: &ObstacleState,
    class: TrajectoryClass,
    params: &ObstacleModelParams,
) -> Result<ObstacleState, ObstacleError> {
    let ts = params.ts;
    match class {
        TrajectoryClass::Static => Ok(*x),
        TrajectoryClass::Linear => Ok(ObstacleState::new(x.p - x.v * ts, x.v)),
        TrajectoryClass::Projectile => {
            // forward: v' = (1 - ts B) v - ts g e_z ; p' = p + ts v
            let mut v = x.v;
            v.z += ts * params.gravity;
            for axis in 0..3 {
                let keep = 1.0 - ts * params.damping[axis];
                if keep <= 0.0 {
                    return Err(ObstacleError::NonInvertibleDamping {
                        axis,
                        value: ts * params.damping[axis],
                    });
                }
                v[axis] /= keep;
            }
            Ok(ObstacleState::new(x.p - v * ts, v))
        }
    }
}

/// A timestamped position/velocity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub time: f64,
    pub state: ObstacleState,
}

/// The last `capacity` measurements, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementHistory {
    capacity: usize,
    ts: f64,
    samples: VecDeque<Measurement>,
}

impl MeasurementHistory {
    pub fn new(capacity: usize, ts: f64) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            capacity,
            ts,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Appends a measurement, evicting the oldest when full.
    pub fn push(&mut self, m: Measurement) -> Result<(), ObstacleError> {
        if let Some(last) = self.samples.back() {
            let gap = m.time - last.time;
            if gap <= 0.0 || (gap - self.ts).abs() > 1e-6 * self.ts.max(1.0) {
                return Err(ObstacleError::BadTimestamp {
                    time: m.time,
                    last: last.time,
                    ts: self.ts,
                });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(m);
        Ok(())
    }

    /// The measurement `j` steps before the current one (`j = 1` is the newest stored).
    pub fn steps_back(&self, j: usize) -> Option<&Measurement> {
        let n = self.samples.len();
        (j >= 1 && j <= n).then(|| &self.samples[n - j])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.samples.iter()
    }
}

/// Chosen class plus the backward-prediction error of every class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: TrajectoryClass,
    /// Indexed by [`TrajectoryClass::id`].
    pub errors: [f64; 3],
}

impl Classification {
    pub fn error(&self, class: TrajectoryClass) -> f64 {
        self.errors[class.id() as usize]
    }
}

fn l1(a: &Vector3<f64>) -> f64 {
    a.x.abs() + a.y.abs() + a.z.abs()
}

/// Backward-prediction error of one class over the full history.
pub fn trajectory_error(
    history: &MeasurementHistory,
    current: &ObstacleState,
    class: TrajectoryClass,
    params: &ObstacleModelParams,
) -> Result<f64, ObstacleError> {
    let mut state = *current;
    let mut err = 0.0;
    for j in 1..=history.len() {
        state = predict_step_backward(&state, class, params)?;
        let prev = history.steps_back(j).expect("index within history").state;
        err += l1(&(prev.p - state.p)) + l1(&(prev.v - state.v));
    }
    Ok(err)
}

/// Scores every class against the stored history and picks the smallest error.
/// Exact ties go to the simpler model (static, then linear).
pub fn classify(
    history: &MeasurementHistory,
    current: &ObstacleState,
    params: &ObstacleModelParams,
) -> Result<Classification, ObstacleError> {
    if !history.is_full() {
        return Err(ObstacleError::NotReady {
            have: history.len(),
            need: history.capacity(),
        });
    }
    let mut errors = [0.0; 3];
    for class in TrajectoryClass::ALL {
        errors[class.id() as usize] = trajectory_error(history, current, class, params)?;
    }
    let mut best = TrajectoryClass::Static;
    for class in TrajectoryClass::ALL {
        if errors[class.id() as usize] < errors[best.id() as usize] {
            best = class;
        }
    }
    Ok(Classification {
        class: best,
        errors,
    })
}

/// Obstacle description handed to the controller: radius, per-stage safety
/// margins and predicted centers for stages `0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrajectoryParam {
    pub r_obs: f64,
    pub safety_radii: Vec<f64>,
    pub centers: Vec<Vector3<f64>>,
}

impl ObstacleTrajectoryParam {
    /// Number of prediction stages `N`.
    pub fn horizon(&self) -> usize {
        self.centers.len().saturating_sub(1)
    }

    /// Same center for every stage.
    pub fn stationary(center: Vector3<f64>, r_obs: f64, r_s_max: f64, horizon: usize) -> Self {
        Self {
            r_obs,
            safety_radii: linear_safety_radii(r_s_max, horizon),
            centers: vec![center; horizon + 1],
        }
    }

    /// Translates every center by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            r_obs: self.r_obs,
            safety_radii: self.safety_radii.clone(),
            centers: self.centers.iter().map(|c| c + offset).collect(),
        }
    }
}

/// `r_s[j] = r_s_max * j / N` for `j = 0..=N`.
pub fn linear_safety_radii(r_s_max: f64, horizon: usize) -> Vec<f64> {
    (0..=horizon)
        .map(|j| r_s_max * j as f64 / horizon as f64)
        .collect()
}

/// Iterates the class model `horizon` times from `current`.
pub fn build_trajectory_param(
    current: &ObstacleState,
    class: TrajectoryClass,
    r_obs: f64,
    r_s_max: f64,
    horizon: usize,
    params: &ObstacleModelParams,
) -> ObstacleTrajectoryParam {
    assert!(horizon >= 1 && r_obs > 0.0 && r_s_max >= 0.0);
    let mut centers = Vec::with_capacity(horizon + 1);
    let mut state = *current;
    centers.push(state.p);
    for _ in 0..horizon {
        state = predict_step_forward(&state, class, params);
        centers.push(state.p);
    }
    ObstacleTrajectoryParam {
        r_obs,
        safety_radii: linear_safety_radii(r_s_max, horizon),
        centers,
    }
}

/// Smallest clearance `|c_j - p| - r_obs - r_s[j]` over the horizon.
pub fn min_clearance(param: &ObstacleTrajectoryParam, p_uav: &Vector3<f64>) -> f64 {
    param
        .centers
        .iter()
        .zip(&param.safety_radii)
        .map(|(c, rs)| (c - p_uav).norm() - param.r_obs - rs)
        .fold(f64::INFINITY, f64::min)
}

/// Whether the predicted obstacle reaches the protective sphere around `p_uav`.
pub fn is_collision_course(param: &ObstacleTrajectoryParam, p_uav: &Vector3<f64>) -> bool {
    min_clearance(param, p_uav) <= 0.0
}
