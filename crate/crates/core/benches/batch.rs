use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uav_nmpc::batch::{classify_batch_sequential, run_batch_sequential, seeded_repeats, ClassifyJob};
use uav_nmpc::obstacles::{
    predict_step_forward, Measurement, MeasurementHistory, ObstacleModelParams, ObstacleState, TrajectoryClass,
};
use uav_nmpc::sim::config::{
    ClassifierConfig, ControllerKind, LogConfig, NoiseConfig, ObstacleSpec, StateSpec, StaticNmpcConfig, UavSetup,
};
use uav_nmpc::sim::construct::aim_projectile;
use uav_nmpc::sim::PotentialFieldConfig;
use uav_nmpc::{NmpcConfig, ScenarioConfig, SolverConfig};

fn short_projectile() -> ScenarioConfig {
    let launch = Vector3::new(-4.0, 0.05, 1.0);
    let v = aim_projectile(&launch, &Vector3::new(0.0, 0.0, 1.0), 1.1, 9.81);
    ScenarioConfig {
        name: "bench".into(),
        duration: 1.0,
        ts: 0.05,
        seed: 1,
        plant_substeps: 10,
        input_delay_steps: 0,
        controller: ControllerKind::PredictiveNmpc,
        uav: UavSetup {
            start: StateSpec::hover_at([0.0, 0.0, 1.0]),
            reference: StateSpec::hover_at([0.0, 0.0, 1.0]),
        },
        nmpc: NmpcConfig::default(),
        solver: SolverConfig::default(),
        static_nmpc: StaticNmpcConfig::default(),
        potential_field: PotentialFieldConfig::default(),
        classifier: ClassifierConfig::default(),
        noise: NoiseConfig {
            position_std: 0.005,
            ..NoiseConfig::default()
        },
        log: LogConfig::default(),
        obstacles: vec![ObstacleSpec {
            name: "ball".into(),
            motion: TrajectoryClass::Projectile,
            launch_time: 0.0,
            position: launch.into(),
            velocity: v.into(),
            r_obs: 0.4,
            r_s_max: 0.2,
            damping: [0.0; 3],
            restitution: 0.75,
            ground_height: 0.0,
            gravity: 9.81,
        }],
    }
}

fn classify_jobs(count: usize) -> Vec<ClassifyJob> {
    let params = ObstacleModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..count)
        .map(|i| {
            let class = TrajectoryClass::ALL[i % 3];
            let mut s = ObstacleState::new(
                Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(2.0..4.0)),
                Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0)),
            );
            let mut history = MeasurementHistory::new(5, params.ts);
            for k in 0..5 {
                history.push(Measurement { time: k as f64 * params.ts, state: s }).unwrap();
                s = predict_step_forward(&s, class, &params);
            }
            ClassifyJob {
                history,
                current: s,
                params,
            }
        })
        .collect()
}

fn bench_scenarios(c: &mut Criterion) {
    let configs = seeded_repeats(&short_projectile(), 8);
    let mut group = c.benchmark_group("scenario_repeats");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", 8), &configs, |b, cfgs| {
        b.iter(|| run_batch_sequential(cfgs))
    });
    #[cfg(feature = "parallel")]
    group.bench_with_input(BenchmarkId::new("parallel", 8), &configs, |b, cfgs| {
        b.iter(|| uav_nmpc::batch::run_batch_parallel(cfgs))
    });
    group.finish();
}

fn bench_classifier(c: &mut Criterion) {
    let jobs = classify_jobs(10_000);
    let mut group = c.benchmark_group("classify_batch");
    group.bench_with_input(BenchmarkId::new("sequential", jobs.len()), &jobs, |b, jobs| {
        b.iter(|| classify_batch_sequential(jobs))
    });
    #[cfg(feature = "parallel")]
    group.bench_with_input(BenchmarkId::new("parallel", jobs.len()), &jobs, |b, jobs| {
        b.iter(|| uav_nmpc::batch::classify_batch_parallel(jobs))
    });
    group.finish();
}

criterion_group!(benches, bench_scenarios, bench_classifier);
criterion_main!(benches);
