#![allow(dead_code)]

use nalgebra::Vector3;
use uav_nmpc::obstacles::TrajectoryClass;
use uav_nmpc::sim::config::{
    ClassifierConfig, ControllerKind, LogConfig, NoiseConfig, ObstacleSpec, StateSpec, StaticNmpcConfig, UavSetup,
};
use uav_nmpc::sim::construct::aim_projectile;
use uav_nmpc::sim::PotentialFieldConfig;
use uav_nmpc::{NmpcConfig, ScenarioConfig, SolverConfig};

pub const HOVER: [f64; 3] = [0.0, 0.0, 1.0];

pub fn empty_scenario(duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: "test".into(),
        duration,
        ts: 0.05,
        seed: 0,
        plant_substeps: 10,
        input_delay_steps: 0,
        controller: ControllerKind::PredictiveNmpc,
        uav: UavSetup {
            start: StateSpec::hover_at(HOVER),
            reference: StateSpec::hover_at(HOVER),
        },
        nmpc: NmpcConfig::default(),
        solver: SolverConfig {
            initial_penalty: 1000.0,
            ..SolverConfig::default()
        },
        static_nmpc: StaticNmpcConfig::default(),
        potential_field: PotentialFieldConfig::default(),
        classifier: ClassifierConfig::default(),
        noise: NoiseConfig::default(),
        log: LogConfig::default(),
        obstacles: Vec::new(),
    }
}

pub fn ball(launch_time: f64, flight_time: f64) -> ObstacleSpec {
    let launch = Vector3::new(-4.0, 0.05, 1.0);
    let target = Vector3::new(0.0, 0.05, 1.0);
    ObstacleSpec {
        name: "ball".into(),
        motion: TrajectoryClass::Projectile,
        launch_time,
        position: launch.into(),
        velocity: aim_projectile(&launch, &target, flight_time, 9.81).into(),
        r_obs: 0.4,
        r_s_max: 0.2,
        damping: [0.0; 3],
        restitution: 0.75,
        ground_height: 0.0,
        gravity: 9.81,
    }
}

pub fn projectile_scenario(duration: f64) -> ScenarioConfig {
    let mut cfg = empty_scenario(duration);
    cfg.name = "projectile".into();
    cfg.obstacles.push(ball(0.7, 1.3));
    cfg
}

pub fn inert(name: &str, position: [f64; 3]) -> ObstacleSpec {
    ObstacleSpec {
        name: name.into(),
        motion: TrajectoryClass::Static,
        launch_time: 0.0,
        position,
        velocity: [0.0; 3],
        r_obs: 0.4,
        r_s_max: 0.2,
        damping: [0.0; 3],
        restitution: 0.75,
        ground_height: 0.0,
        gravity: 9.81,
    }
}
