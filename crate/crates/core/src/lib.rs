//! Micropolar peridynamic simulator for fluid-driven and load-driven crack
//! branching in unsaturated porous media.

pub mod cli;
pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod fracture;
pub mod grid;
pub mod io;
pub mod kgd;
pub mod kinematics;
pub mod scenarios;
pub mod solver;

pub use config::{load_scenario_config, ScenarioConfig};
pub use error::{ConfigError, SolverError};
pub use scenarios::build_scenario;
pub use solver::Simulation;
