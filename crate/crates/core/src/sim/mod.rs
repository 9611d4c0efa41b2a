//! Deterministic scenario engine: scripted or live operators on a virtual
//! end-effector body.

pub mod config;
pub mod engine;
pub mod eval;
pub mod letters;
pub mod operator;
pub mod scenario;
pub mod session;
pub mod teleop;
pub mod trace;

pub use config::ScenarioConfig;
pub use engine::{BodyState, Engine, StepRecord};
pub use operator::LiveInput;
pub use scenario::{build, load, parse_config, parse_config_str, train, LoadOptions, Scenario};
pub use session::{ClientMessage, Session};
pub use teleop::{teleop_couple, TeleopParams};
pub use trace::{read_trace, run_scenario, run_to_writer, TraceWriter};
