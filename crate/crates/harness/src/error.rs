use std::path::PathBuf;

use auq_core::controller::ControllerError;
use auq_core::gateway::GatewayError;
use auq_core::metrics::MetricsError;
use auq_core::worldsim::WorldError;
use auq_core::ContractViolation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Contract(#[from] ContractViolation),
    #[error(transparent)]
    Scenario(#[from] WorldError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("episode {episode_id}: {source}")]
    Episode {
        episode_id: String,
        #[source]
        source: ControllerError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Schema { path: PathBuf, line: usize, message: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
