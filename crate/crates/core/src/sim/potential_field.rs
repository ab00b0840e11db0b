//! Artificial potential field baseline: point repulsion from each obstacle plus a
//! PD pull toward the hold position, mapped to thrust and attitude references.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, UavModelParams, UavState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialFieldConfig {
    /// Repulsive constant `L`, m/s^2.
    pub repulsive_gain: f64,
    /// Radius of influence `d_s`, m.
    pub influence_radius: f64,
    /// Proportional gain of the attractive term, 1/s^2.
    pub attractive_gain: f64,
    /// Velocity damping of the attractive term, 1/s.
    pub damping_gain: f64,
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
}

impl Default for PotentialFieldConfig {
    fn default() -> Self {
        Self {
            repulsive_gain: 60.0,
            influence_radius: 1.0,
            attractive_gain: 4.0,
            damping_gain: 3.0,
            u_min: [5.0, -0.35, -0.35],
            u_max: [13.5, 0.35, 0.35],
        }
    }
}

impl PotentialFieldConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.repulsive_gain > 0.0) {
            out.push("potential_field.repulsive_gain must be > 0".to_string());
        }
        if !(self.influence_radius > 0.0) {
            out.push("potential_field.influence_radius must be > 0".to_string());
        }
        if (0..3).any(|i| !(self.u_min[i] <= self.u_max[i])) {
            out.push("potential_field.u_min must not exceed u_max".to_string());
        }
        out
    }
}

/// `L (1 - |p'|/d_s)^2 p'/|p'|` for `|p'| < d_s`, with `p' = p - p_obs`.
///
/// Returns `None` when `p == p_obs` inside the influence radius, where the
/// direction is undefined.
pub fn repulsive_force(
    p: &Vector3<f64>,
    p_obs: &Vector3<f64>,
    gain: f64,
    influence_radius: f64,
) -> Option<Vector3<f64>> {
    let rel = p - p_obs;
    let dist = rel.norm();
    if dist >= influence_radius {
        return Some(Vector3::zeros());
    }
    if dist == 0.0 {
        return None;
    }
    Some(rel * (gain * (1.0 - dist / influence_radius).powi(2) / dist))
}

/// Stateful potential-field controller. Remembers the last repulsion direction
/// per obstacle for the degenerate coincident case.
#[derive(Debug, Clone)]
pub struct PotentialField {
    cfg: PotentialFieldConfig,
    last_direction: Vec<Vector3<f64>>,
}

impl PotentialField {
    pub fn new(cfg: PotentialFieldConfig) -> Self {
        Self {
            cfg,
            last_direction: Vec::new(),
        }
    }

    pub fn control(
        &mut self,
        x: &UavState,
        obstacles: &[Vector3<f64>],
        x_ref: &UavState,
        model: &UavModelParams,
    ) -> ControlInput {
        let cfg = &self.cfg;
        if self.last_direction.len() != obstacles.len() {
            self.last_direction = vec![Vector3::z(); obstacles.len()];
        }
        let mut acc = (x_ref.p - x.p) * cfg.attractive_gain + (x_ref.v - x.v) * cfg.damping_gain;
        for (i, p_obs) in obstacles.iter().enumerate() {
            match repulsive_force(&x.p, p_obs, cfg.repulsive_gain, cfg.influence_radius) {
                Some(f) => {
                    if f.norm() > 0.0 {
                        self.last_direction[i] = f.normalize();
                    }
                    acc += f;
                }
                None => acc += self.last_direction[i] * cfg.repulsive_gain,
            }
        }
        // Required thrust vector, compensating gravity and drag.
        let d = model.damping;
        let t = Vector3::new(
            acc.x + d[0] * x.v.x,
            acc.y + d[1] * x.v.y,
            acc.z + model.gravity + d[2] * x.v.z,
        );
        // Small-angle inversion of the thrust direction [theta, -phi, 1] * T.
        let thrust = t.z.clamp(cfg.u_min[0], cfg.u_max[0]);
        let phi_ref = (-t.y / (model.gravity * model.k_phi)).clamp(cfg.u_min[1], cfg.u_max[1]);
        let theta_ref = (t.x / (model.gravity * model.k_theta)).clamp(cfg.u_min[2], cfg.u_max[2]);
        ControlInput::new(thrust, phi_ref, theta_ref)
    }
}
