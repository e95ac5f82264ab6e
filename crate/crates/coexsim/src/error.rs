use thiserror::Error;

/// Errors surfaced by the simulator.
///
/// Configuration problems are collected exhaustively before being reported,
/// so `InvalidConfig` carries every violation found rather than the first.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n{}", issues.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n"))]
    InvalidConfig { issues: Vec<String> },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("numerics: {0}")]
    Numerics(String),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("figure data: {0}")]
    Figure(String),
}

impl SimError {
    pub fn invalid_config(issues: Vec<String>) -> Self {
        SimError::InvalidConfig { issues }
    }

    pub fn numerics(msg: impl Into<String>) -> Self {
        SimError::Numerics(msg.into())
    }

    /// Process exit code for the CLI: 1 for configuration problems, 2 for
    /// everything that went wrong at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidConfig { .. } | SimError::ConfigParse(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
