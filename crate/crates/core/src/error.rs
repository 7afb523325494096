use thiserror::Error;

/// Errors raised while building the grid or loading a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("grid spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("extent {extent} m is not an integer multiple of spacing {spacing} m")]
    Incommensurate { extent: f64, spacing: f64 },
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("could not parse scenario document: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// Errors raised while stepping a simulation.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite {field} at point {point} (step {step}, t = {time:e} s)")]
    Divergence {
        field: &'static str,
        point: usize,
        step: u64,
        time: f64,
    },
    #[error("output failure: {0}")]
    Output(#[from] std::io::Error),
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;
