//! Helpers for building scenarios: launch velocities that hit a target and
//! truth-trajectory sampling to check them.

use nalgebra::Vector3;

use crate::obstacles::{ObstacleState, TrajectoryClass};
use crate::sim::config::ObstacleSpec;
use crate::sim::ObstacleTruth;

/// Drag-free launch velocity reaching `target` from `launch` after `flight_time`.
pub fn aim_projectile(launch: &Vector3<f64>, target: &Vector3<f64>, flight_time: f64, gravity: f64) -> Vector3<f64> {
    assert!(flight_time > 0.0);
    let mut v = (target - launch) / flight_time;
    v.z += 0.5 * gravity * flight_time;
    v
}

/// Samples the truth trajectory of `spec` on the tick grid, `0..=duration/ts`.
pub fn truth_trajectory(spec: &ObstacleSpec, ts: f64, substeps: usize, duration: f64) -> Vec<(f64, ObstacleState)> {
    let ticks = (duration / ts).round() as usize;
    let mut truth = ObstacleTruth::new(spec);
    let mut out = Vec::with_capacity(ticks + 1);
    for k in 0..=ticks {
        let time = k as f64 * ts;
        truth.launch_if_due(time);
        out.push((time, truth.state));
        truth.advance(ts, substeps);
    }
    out
}

/// Closest approach of the sampled truth trajectory to `point`: `(distance, time)`.
pub fn closest_approach(spec: &ObstacleSpec, point: &Vector3<f64>, ts: f64, substeps: usize, duration: f64) -> (f64, f64) {
    truth_trajectory(spec, ts, substeps, duration)
        .into_iter()
        .map(|(t, s)| ((s.p - point).norm(), t))
        .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

fn first_post_bounce_apex(spec: &ObstacleSpec, ts: f64, substeps: usize) -> Option<(f64, ObstacleState)> {
    let mut truth = ObstacleTruth::new(spec);
    truth.launch_if_due(spec.launch_time);
    let dt = ts / substeps as f64;
    let mut bounced = false;
    let mut t = 0.0;
    for _ in 0..(20.0 / dt) as usize {
        let before = truth.state;
        truth.advance(dt, 1);
        t += dt;
        if before.v.z < 0.0 && truth.state.v.z >= 0.0 {
            bounced = true;
        }
        if bounced && before.v.z > 0.0 && truth.state.v.z <= 0.0 {
            return Some((t, truth.state));
        }
    }
    None
}

/// Launch velocity for a projectile thrown upward from `launch`, bouncing once,
/// and reaching its next apex at `target`.
///
/// The vertical speed is found by bisection on the truth propagator so the
/// post-bounce apex height matches `target.z`; the horizontal velocity is then
/// set so that the apex lies over `target`.
pub fn bounce_launch(spec: &ObstacleSpec, target: &Vector3<f64>, ts: f64, substeps: usize) -> Vector3<f64> {
    assert_eq!(spec.motion, TrajectoryClass::Projectile);
    assert!(spec.restitution > 0.0 && target.z > spec.ground_height);
    let with_vz = |vz: f64| {
        let mut s = spec.clone();
        s.velocity = [0.0, 0.0, vz];
        first_post_bounce_apex(&s, ts, substeps)
    };
    let apex_height = |vz: f64| with_vz(vz).map_or(f64::NEG_INFINITY, |(_, st)| st.p.z);
    let (mut lo, mut hi) = (0.0, 1.0);
    while apex_height(hi) < target.z {
        hi *= 2.0;
        assert!(hi < 1e3, "target apex unreachable");
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if apex_height(mid) < target.z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let vz = 0.5 * (lo + hi);
    let (t_apex, _) = with_vz(vz).expect("apex exists for the bracketed speed");
    let launch = Vector3::from(spec.position);
    let horizontal = (target - launch) / t_apex;
    // With horizontal damping the x/y motion is no longer uniform; solve per axis.
    let mut v = Vector3::new(horizontal.x, horizontal.y, vz);
    for axis in 0..2 {
        let b = spec.damping[axis];
        if b > 0.0 {
            let d = target[axis] - launch[axis];
            v[axis] = d * b / (1.0 - (-b * t_apex).exp());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(motion: TrajectoryClass, position: [f64; 3], velocity: [f64; 3]) -> ObstacleSpec {
        ObstacleSpec {
            name: "o".into(),
            motion,
            launch_time: 0.0,
            position,
            velocity,
            r_obs: 0.4,
            r_s_max: 0.2,
            damping: [0.0; 3],
            restitution: 0.75,
            ground_height: 0.0,
            gravity: 9.81,
        }
    }

    #[test]
    fn aimed_throw_hits_target_in_closed_form() {
        let launch = Vector3::new(-4.0, 0.05, 1.0);
        let target = Vector3::new(0.0, 0.0, 1.0);
        let v = aim_projectile(&launch, &target, 1.1, 9.81);
        let t = 1.1;
        let p = launch + v * t - Vector3::new(0.0, 0.0, 0.5 * 9.81 * t * t);
        assert!((p - target).norm() < 1e-12);
    }

    #[test]
    fn aimed_throw_passes_close_under_substepped_truth() {
        let launch = Vector3::new(-4.0, 0.0, 1.0);
        let target = Vector3::new(0.0, 0.0, 1.0);
        let v = aim_projectile(&launch, &target, 1.2, 9.81);
        let s = spec(TrajectoryClass::Projectile, launch.into(), v.into());
        let (d, _) = closest_approach(&s, &target, 0.05, 10, 3.0);
        assert!(d < 0.1, "{d}");
    }

    #[test]
    fn bounce_apex_reaches_target() {
        let target = Vector3::new(0.0, 0.0, 1.0);
        let mut s = spec(TrajectoryClass::Projectile, [-4.0, 0.0, 1.0], [0.0; 3]);
        s.velocity = bounce_launch(&s, &target, 0.05, 10).into();
        assert!(s.velocity[2] > 0.0);
        let (d, _) = closest_approach(&s, &target, 0.05, 10, 4.0);
        assert!(d < 0.1, "{d}");
    }

    #[test]
    fn unlaunched_obstacle_stays_put() {
        let mut s = spec(TrajectoryClass::Linear, [1.0, 2.0, 3.0], [1.0, 0.0, 0.0]);
        s.launch_time = 0.5;
        let traj = truth_trajectory(&s, 0.05, 10, 1.0);
        assert_eq!(traj[9].1.p, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(traj[10].1.p, Vector3::new(1.0, 2.0, 3.0));
        assert!((traj[11].1.p.x - 1.05).abs() < 1e-12);
    }
}
