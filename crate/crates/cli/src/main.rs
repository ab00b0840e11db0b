use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uav_nmpc_cli::{describe, exit, resolve_scenarios, run, validate, CliError, RunManifest};

#[derive(Parser)]
#[command(name = "uav-nmpc", version, about = "Run and check UAV obstacle-avoidance scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write per-run CSVs and summaries.
    Run {
        /// Scenario files, directories, or paths without the `.toml` suffix.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Replaces the seed of every scenario.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        /// Dotted-path override, e.g. `nmpc.horizon=10`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check scenario files without running them.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn expand(args: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for a in args {
        out.extend(resolve_scenarios(a)?);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenarios,
            out,
            seed,
            repeat,
            overrides,
        } => {
            let result = expand(&scenarios).and_then(|scenarios| {
                run(&RunManifest {
                    scenarios,
                    out,
                    seed,
                    overrides,
                    repeat,
                })
            });
            match result {
                Ok(runs) => {
                    for r in &runs {
                        println!("{}", describe(r));
                    }
                    if runs.iter().any(|r| r.summary.collided) {
                        exit::COLLISION
                    } else {
                        exit::OK
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Validate { scenarios, overrides } => match expand(&scenarios) {
            Ok(paths) => {
                let mut bad = false;
                for p in paths {
                    let v = validate(&p, &overrides);
                    if v.is_empty() {
                        println!("{}: ok", p.display());
                    } else {
                        bad = true;
                        println!("{}: {} problem(s)", p.display(), v.len());
                        for m in v {
                            println!("  - {m}");
                        }
                    }
                }
                if bad {
                    exit::CONFIG
                } else {
                    exit::OK
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code)
}
