use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::obstacles::ObstacleState;
use crate::sim::config::{NoiseConfig, VelocityEstimator};

const MEDIAN_WINDOW: usize = 5;

fn gaussian3<R: Rng>(rng: &mut R, std: f64) -> Vector3<f64> {
    if std == 0.0 {
        return Vector3::zeros();
    }
    let n = Normal::new(0.0, std).expect("std checked non-negative");
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-obstacle measurement pipeline.
#[derive(Debug, Clone)]
pub struct ObstacleSensor {
    noise: NoiseConfig,
    ts: f64,
    positions: VecDeque<Vector3<f64>>,
    differences: VecDeque<Vector3<f64>>,
}

impl ObstacleSensor {
    pub fn new(noise: NoiseConfig, ts: f64) -> Self {
        Self {
            noise,
            ts,
            positions: VecDeque::with_capacity(3),
            differences: VecDeque::with_capacity(MEDIAN_WINDOW),
        }
    }

    /// Produces the measurement of `truth` for this tick.
    pub fn measure<R: Rng>(&mut self, truth: &ObstacleState, rng: &mut R) -> ObstacleState {
        if self.noise.is_off() {
            return *truth;
        }
        let p = truth.p + gaussian3(rng, self.noise.position_std);
        let v = match self.noise.velocity_estimator {
            VelocityEstimator::NoisyTruth => truth.v + gaussian3(rng, self.noise.velocity_std),
            VelocityEstimator::FiniteDifferenceMedian => self.filtered_velocity(p),
        };
        ObstacleState::new(p, v)
    }

    fn filtered_velocity(&mut self, p: Vector3<f64>) -> Vector3<f64> {
        if self.positions.len() == 3 {
            self.positions.pop_front();
        }
        self.positions.push_back(p);
        if self.positions.len() < 3 {
            return Vector3::zeros();
        }
        // central difference, centred one tick back
        let cd = (self.positions[2] - self.positions[0]) / (2.0 * self.ts);
        if self.differences.len() == MEDIAN_WINDOW {
            self.differences.pop_front();
        }
        self.differences.push_back(cd);
        let mut out = Vector3::zeros();
        let mut buf: Vec<f64> = Vec::with_capacity(MEDIAN_WINDOW);
        for axis in 0..3 {
            buf.clear();
            buf.extend(self.differences.iter().map(|d| d[axis]));
            out[axis] = median(&mut buf);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_when_noise_off() {
        let mut s = ObstacleSensor::new(NoiseConfig::default(), 0.05);
        let truth = ObstacleState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.5, 0.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(s.measure(&truth, &mut rng), truth);
    }

    #[test]
    fn median_filter_recovers_constant_velocity() {
        let noise = NoiseConfig {
            position_std: 0.0,
            velocity_std: 0.0,
            velocity_estimator: VelocityEstimator::FiniteDifferenceMedian,
        };
        let mut s = ObstacleSensor::new(noise, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = Vector3::new(1.2, -0.4, 0.0);
        let mut last = Vector3::zeros();
        for k in 0..10 {
            let truth = ObstacleState::new(v * (0.05 * k as f64), v);
            last = s.measure(&truth, &mut rng).v;
        }
        assert!((last - v).norm() < 1e-12);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let noise = NoiseConfig {
            position_std: 0.005,
            velocity_std: 0.05,
            velocity_estimator: VelocityEstimator::NoisyTruth,
        };
        let truth = ObstacleState::new(Vector3::zeros(), Vector3::zeros());
        let a = ObstacleSensor::new(noise.clone(), 0.05).measure(&truth, &mut ChaCha8Rng::seed_from_u64(7));
        let b = ObstacleSensor::new(noise, 0.05).measure(&truth, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert!(a.p.norm() > 0.0);
    }
}
