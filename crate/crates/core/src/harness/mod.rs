//! Random trace generation and executable invariant checkers.

pub mod checks;
pub mod config;
pub mod fa12_model;
pub mod gen;
pub mod report;

pub use checks::{check_state, discover_exchanges, pairing, Checker, Exchange, Pairing};
pub use config::{ConfigError, Ranges, ScenarioConfig, Weights};
pub use gen::{check_order_robustness, gen_trace, replay_captured, replay_roots, run_captured, run_checked, Capture, Trace, Wired};
pub use report::{CheckReport, Counterexample, Invariant, Location, Replay, Violation};
