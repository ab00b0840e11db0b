//! UAV kinematics in the yaw-compensated world frame.
//!
//! The vehicle is modelled as a thrust vector tilted by roll and pitch, with
//! linear drag and first-order attitude responses to the reference angles.
//! The rotation uses the ZYX convention with yaw fixed at zero, so the thrust
//! direction is `[cos(phi) sin(theta), -sin(phi), cos(phi) cos(theta)]`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Number of scalar components in a [`UavState`].
pub const STATE_DIM: usize = 8;
/// Number of scalar components in a [`ControlInput`].
pub const INPUT_DIM: usize = 3;

/// Vehicle state `[p, v, phi, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub phi: f64,
    pub theta: f64,
}

impl UavState {
    /// Motionless and level at `p`.
    pub fn hover_at(p: Vector3<f64>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            phi: 0.0,
            theta: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z, self.phi, self.theta,
        ]
    }

    pub fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self {
            p: Vector3::new(a[0], a[1], a[2]),
            v: Vector3::new(a[3], a[4], a[5]),
            phi: a[6],
            theta: a[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Mass-normalized thrust (m/s^2) and roll/pitch references (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub thrust: f64,
    pub phi_ref: f64,
    pub theta_ref: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, phi_ref: f64, theta_ref: f64) -> Self {
        Self {
            thrust,
            phi_ref,
            theta_ref,
        }
    }

    /// The input that holds a level vehicle in place.
    pub fn hover(gravity: f64) -> Self {
        Self::new(gravity, 0.0, 0.0)
    }

    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.thrust, self.phi_ref, self.theta_ref]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.phi_ref.is_finite() && self.theta_ref.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavModelParams {
    pub tau_phi: f64,
    pub tau_theta: f64,
    pub k_phi: f64,
    pub k_theta: f64,
    /// Linear drag coefficients `(A_x, A_y, A_z)` in 1/s.
    pub damping: [f64; 3],
    pub gravity: f64,
}

impl Default for UavModelParams {
    fn default() -> Self {
        Self {
            tau_phi: 0.5,
            tau_theta: 0.5,
            k_phi: 1.0,
            k_theta: 1.0,
            damping: [0.1, 0.1, 0.2],
            gravity: 9.81,
        }
    }
}

impl UavModelParams {
    /// Names every violated invariant; empty when the parameters are usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau_phi > 0.0) {
            out.push(format!("model.tau_phi must be > 0 (got {})", self.tau_phi));
        }
        if !(self.tau_theta > 0.0) {
            out.push(format!("model.tau_theta must be > 0 (got {})", self.tau_theta));
        }
        if !(self.gravity > 0.0) {
            out.push(format!("model.gravity must be > 0 (got {})", self.gravity));
        }
        if self.damping.iter().any(|d| !(*d >= 0.0)) {
            out.push(format!("model.damping must be >= 0 (got {:?})", self.damping));
        }
        out
    }
}

/// Unit thrust direction in the world frame for the given roll and pitch.
#[inline]
pub fn thrust_direction(phi: f64, theta: f64) -> Vector3<f64> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Vector3::new(cp * st, -sp, cp * ct)
}

/// Time derivative of the state, returned as `[p_dot, v_dot, phi_dot, theta_dot]`.
pub fn continuous_dynamics(
    x: &UavState,
    u: &ControlInput,
    params: &UavModelParams,
) -> [f64; STATE_DIM] {
    let a = thrust_direction(x.phi, x.theta) * u.thrust;
    let d = params.damping;
    [
        x.v.x,
        x.v.y,
        x.v.z,
        a.x - d[0] * x.v.x,
        a.y - d[1] * x.v.y,
        a.z - params.gravity - d[2] * x.v.z,
        (params.k_phi * u.phi_ref - x.phi) / params.tau_phi,
        (params.k_theta * u.theta_ref - x.theta) / params.tau_theta,
    ]
}

/// One forward-Euler step of length `ts`.
pub fn discrete_step(x: &UavState, u: &ControlInput, params: &UavModelParams, ts: f64) -> UavState {
    debug_assert!(ts > 0.0);
    let dx = continuous_dynamics(x, u, params);
    let next = UavState {
        p: x.p + Vector3::new(dx[0], dx[1], dx[2]) * ts,
        v: x.v + Vector3::new(dx[3], dx[4], dx[5]) * ts,
        phi: x.phi + ts * dx[6],
        theta: x.theta + ts * dx[7],
    };
    debug_assert!(
        next.phi.abs() <= std::f64::consts::PI && next.theta.abs() <= std::f64::consts::PI,
        "attitude left [-pi, pi]: phi={} theta={}",
        next.phi,
        next.theta
    );
    next
}

/// Predicted states and the inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRollout {
    pub states: Vec<UavState>,
    pub inputs: Vec<ControlInput>,
    pub ts: f64,
}

impl HorizonRollout {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }
}

/// Single-shooting rollout: `states[j + 1] = discrete_step(states[j], inputs[j])`.
pub fn rollout(
    x0: &UavState,
    inputs: &[ControlInput],
    params: &UavModelParams,
    ts: f64,
) -> HorizonRollout {
    assert!(!inputs.is_empty(), "rollout needs at least one input");
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    for u in inputs {
        let last = states[states.len() - 1];
        states.push(discrete_step(&last, u, params, ts));
    }
    HorizonRollout {
        states,
        inputs: inputs.to_vec(),
        ts,
    }
}
