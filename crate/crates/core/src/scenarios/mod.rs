//! Demo scenarios: scripts, the simulation engine, traces and metrics.

pub mod builtin;
pub mod engine;
pub mod metrics;
pub mod script;
pub mod tictactoe;
pub mod trace;

pub use builtin::builtin_script;
pub use engine::{run_scenario, run_scenario_with, EngineConfig, RunError};
pub use metrics::{compute_metrics, Metrics};
pub use script::{ScenarioKind, ScenarioScript, ScriptError};
pub use trace::{Trace, TraceEvent};
