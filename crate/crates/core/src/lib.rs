//! Nonlinear MPC for a multirotor holding position among moving obstacles.
//!
//! - [`dynamics`]: the attitude-reference UAV model and its Euler discretization.
//! - [`obstacles`]: obstacle motion models, backward-prediction classifier and
//!   horizon prediction.
//! - [`solver`]: PANOC for box-constrained problems wrapped in a quadratic penalty loop.
//! - [`nmpc`]: the single-shooting control problem and a receding-horizon controller.
//! - [`sim`]: closed-loop simulation, baselines and metrics.
//! - [`batch`]: independent runs in bulk, in parallel with the `parallel` feature.

pub mod batch;
pub mod dynamics;
pub mod nmpc;
pub mod obstacles;
pub mod sim;
pub mod solver;

pub use dynamics::{ControlInput, UavModelParams, UavState};
pub use nmpc::{control_step, ControlDecision, NmpcConfig, NmpcContext, NmpcController, NmpcError};
pub use obstacles::{ObstacleState, ObstacleTrajectoryParam, TrajectoryClass};
pub use sim::{compute_metrics, run_scenario, ScenarioConfig, SimLog, Summary};
pub use solver::{SolveOutcome, SolverConfig};
