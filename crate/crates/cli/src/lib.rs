//! Scenario files, overrides, batch execution and per-run artifacts for the
//! `uav-nmpc` command.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use uav_nmpc::batch::run_batch;
use uav_nmpc::sim::{compute_metrics, SimError, SimLog, Summary};
use uav_nmpc::ScenarioConfig;

/// First line of every tick CSV. Bump the version when columns change.
pub const CSV_SCHEMA: &str = "uav-nmpc-ticks/1";

pub mod exit {
    pub const OK: u8 = 0;
    pub const COLLISION: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INTERNAL: u8 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: invalid scenario:\n  {}", .violations.join("\n  "))]
    Invalid { path: String, violations: Vec<String> },
    #[error("override `{0}` must look like key.path=value")]
    BadOverride(String),
    #[error("override `{key}`: {message}")]
    OverridePath { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{scenario}: {source}")]
    Sim {
        scenario: String,
        #[source]
        source: SimError,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid { .. } | CliError::BadOverride(_) | CliError::OverridePath { .. } => {
                exit::CONFIG
            }
            CliError::Sim {
                source: SimError::InvalidConfig(_),
                ..
            } => exit::CONFIG,
            _ => exit::INTERNAL,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Expands a scenario argument: a directory yields its `*.toml` files in name
/// order, an existing file yields itself, otherwise `.toml` is appended.
pub fn resolve_scenarios(arg: &Path) -> Result<Vec<PathBuf>, CliError> {
    if arg.is_dir() {
        let mut out: Vec<PathBuf> = fs::read_dir(arg)
            .map_err(io_err(arg))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        out.sort();
        return Ok(out);
    }
    if arg.is_file() {
        return Ok(vec![arg.to_path_buf()]);
    }
    let with_ext = arg.with_extension("toml");
    if with_ext.is_file() {
        return Ok(vec![with_ext]);
    }
    Err(CliError::Config {
        path: arg.display().to_string(),
        message: "no such scenario file or directory".into(),
    })
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `key.path=value` in `root`, creating tables as needed. Numeric path
/// segments index into arrays, e.g. `obstacles.0.r_obs=0.5`.
pub fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| CliError::BadOverride(spec.to_string()))?;
    let key = key.trim();
    let segments: Vec<&str> = key.split('.').collect();
    if key.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::BadOverride(spec.to_string()));
    }
    let value = parse_override_value(raw.trim());
    let path_err = |message: String| CliError::OverridePath {
        key: key.to_string(),
        message,
    };
    let (last, parents) = segments.split_last().expect("non-empty");
    let mut cursor = root
        .entry(parents.first().copied().unwrap_or(last).to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if parents.is_empty() {
        *cursor = value;
        return Ok(());
    }
    for seg in parents[1..].iter().chain(std::iter::once(last)) {
        cursor = match cursor {
            toml::Value::Table(t) => t
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| path_err(format!("`{seg}` is not an array index")))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| path_err(format!("index {i} out of range (len {len})")))?
            }
            _ => return Err(path_err(format!("`{seg}` is below a non-table value"))),
        };
    }
    *cursor = value;
    Ok(())
}

/// Reads a scenario file and applies `overrides` in order.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config_err = |message: String| CliError::Config {
        path: path.display().to_string(),
        message,
    };
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // Re-render so that deserialization errors point at a key and line.
    let merged = toml::to_string(&table).map_err(|e| config_err(e.to_string()))?;
    toml::from_str(&merged).map_err(|e| config_err(e.to_string()))
}

/// Every problem with a scenario file: parse errors or invariant violations.
pub fn validate(path: &Path, overrides: &[String]) -> Vec<String> {
    match load_config(path, overrides) {
        Ok(cfg) => cfg.violations(),
        Err(CliError::Config { message, .. }) => vec![message],
        Err(e) => vec![e.to_string()],
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub scenarios: Vec<PathBuf>,
    pub out: PathBuf,
    /// Replaces each scenario's seed when set.
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
    /// Runs per scenario, all with the same seed.
    pub repeat: usize,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub scenario: String,
    pub repeat: usize,
    pub dir: PathBuf,
    pub summary: Summary,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Column names for a log with `obstacles` obstacles.
pub fn csv_header(obstacles: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "tick", "time", "px", "py", "pz", "vx", "vy", "vz", "phi", "theta", "thrust", "phi_ref", "theta_ref",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..obstacles {
        for c in [
            "distance", "class", "e_static", "e_linear", "e_projectile", "x", "y", "z", "collision_course",
        ] {
            h.push(format!("o{i}_{c}"));
        }
    }
    for c in ["iterations", "penalty_iterations", "converged", "violation"] {
        h.push(c.to_string());
    }
    h
}

/// Writes the per-tick CSV: schema comment, header, warm-up row, one row per tick.
/// Solver wall time is left out so the file depends only on config and seed.
pub fn write_ticks_csv<W: Write>(log: &SimLog, mut out: W) -> Result<(), CliError> {
    let n = log.obstacle_names.len();
    let names = log.obstacle_names.join(",");
    writeln!(
        out,
        "# schema={CSV_SCHEMA} scenario={} seed={} obstacles={names}",
        log.scenario, log.seed
    )
    .map_err(|e| CliError::Io {
        path: "ticks.csv".into(),
        source: e,
    })?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(n))?;
    for rec in std::iter::once(&log.warmup).chain(&log.ticks) {
        let s = &rec.state;
        let u = &rec.applied;
        let mut row: Vec<String> = vec![rec.tick.to_string(), rec.time.to_string()];
        row.extend([s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z, s.phi, s.theta].map(|v| v.to_string()));
        row.extend([u.thrust, u.phi_ref, u.theta_ref].map(|v| v.to_string()));
        for o in &rec.obstacles {
            let e = o.errors;
            row.push(o.distance.to_string());
            row.push(o.class.id().to_string());
            for k in 0..3 {
                row.push(fmt_opt(e.map(|e| e[k])));
            }
            row.extend([o.truth.p.x, o.truth.p.y, o.truth.p.z].map(|v| v.to_string()));
            row.push(u8::from(o.collision_course).to_string());
        }
        match &rec.solver {
            Some(st) => {
                row.push(st.inner_iterations.to_string());
                row.push(st.penalty_iterations.to_string());
                row.push(u8::from(st.converged).to_string());
                row.push(st.constraint_violation.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: "ticks.csv".into(),
        source: e,
    })?;
    Ok(())
}

/// Solver wall time per tick; varies between runs.
pub fn write_timing_csv<W: Write>(log: &SimLog, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "solve_ms", "iterations", "penalty_iterations", "converged"])?;
    for rec in std::iter::once(&log.warmup).chain(&log.ticks) {
        if let Some(st) = &rec.solver {
            w.write_record([
                rec.tick.to_string(),
                (st.wall_time * 1e3).to_string(),
                st.inner_iterations.to_string(),
                st.penalty_iterations.to_string(),
                u8::from(st.converged).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: "timing.csv".into(),
        source: e,
    })?;
    Ok(())
}

fn to_toml<T: Serialize>(value: &T, path: &Path) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes `ticks.csv`, `timing.csv`, `summary.toml` and `resolved.toml` into `dir`.
pub fn write_artifacts(dir: &Path, config: &ScenarioConfig, log: &SimLog) -> Result<Summary, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ticks = dir.join("ticks.csv");
    write_ticks_csv(log, fs::File::create(&ticks).map_err(io_err(&ticks))?)?;
    let timing = dir.join("timing.csv");
    write_timing_csv(log, fs::File::create(&timing).map_err(io_err(&timing))?)?;
    let summary = compute_metrics(log);
    let summary_path = dir.join("summary.toml");
    write_file(&summary_path, &to_toml(&summary, &summary_path)?)?;
    let resolved = dir.join("resolved.toml");
    write_file(&resolved, &to_toml(config, &resolved)?)?;
    Ok(summary)
}

/// Loads and validates every scenario, runs all repeats, and writes
/// `out/<scenario name>/run_<r>/`. Any config problem aborts before running.
pub fn run(manifest: &RunManifest) -> Result<Vec<RunArtifacts>, CliError> {
    if manifest.repeat == 0 {
        return Err(CliError::BadOverride("--repeat must be >= 1".into()));
    }
    let mut configs = Vec::new();
    for path in &manifest.scenarios {
        let mut cfg = load_config(path, &manifest.overrides)?;
        if let Some(seed) = manifest.seed {
            cfg.seed = seed;
        }
        let violations = cfg.violations();
        if !violations.is_empty() {
            return Err(CliError::Invalid {
                path: path.display().to_string(),
                violations,
            });
        }
        configs.push(cfg);
    }
    let jobs: Vec<(usize, ScenarioConfig)> = configs
        .iter()
        .flat_map(|c| (0..manifest.repeat).map(move |r| (r, c.clone())))
        .collect();
    let batch: Vec<ScenarioConfig> = jobs.iter().map(|(_, c)| c.clone()).collect();
    let logs = run_batch(&batch);
    let mut out = Vec::with_capacity(jobs.len());
    for ((r, cfg), log) in jobs.into_iter().zip(logs) {
        let log = log.map_err(|source| CliError::Sim {
            scenario: cfg.name.clone(),
            source,
        })?;
        let dir = manifest.out.join(&cfg.name).join(format!("run_{r}"));
        let summary = write_artifacts(&dir, &cfg, &log)?;
        out.push(RunArtifacts {
            scenario: cfg.name.clone(),
            repeat: r,
            dir,
            summary,
        });
    }
    Ok(out)
}

/// One human-readable line per run.
pub fn describe(run: &RunArtifacts) -> String {
    let s = &run.summary;
    let distances: Vec<String> = s
        .obstacles
        .iter()
        .map(|o| format!("{}={:.3} m @ {:.2} s", o.name, o.min_distance, o.min_distance_time))
        .collect();
    format!(
        "{} run {}: min distance [{}] collided={} solve ms median {:.2} p99 {:.2} max {:.2} -> {}",
        run.scenario,
        run.repeat,
        distances.join(", "),
        s.collided,
        s.solve_ms_median,
        s.solve_ms_p99,
        s.solve_ms_max,
        run.dir.display()
    )
}
