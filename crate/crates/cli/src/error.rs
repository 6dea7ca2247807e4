use std::path::Path;

use permnqs_core::analytic::AnalyticError;
use permnqs_core::exact_diag::EdError;
use permnqs_core::model::ModelError;
use permnqs_core::observables::ObservableError;
use permnqs_core::sampler::SamplerError;
use permnqs_core::trainer::TrainError;
use thiserror::Error;

/// Failure of a subcommand, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Resource(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration errors, 3 for numerical failures, 4 for resource
    /// caps and 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn field(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {message}"))
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn io_path(action: &str, path: &Path, source: std::io::Error) -> Self {
        CliError::io(format!("cannot {action} {}", path.display()), source)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let field = match e {
            ModelError::TooFewSites(_) => "model.L",
            ModelError::InvalidExponent(_) => "model.alpha",
            ModelError::InvalidField(_) => "model.g",
            ModelError::InvalidCoupling(_) => "model.J",
            _ => "model",
        };
        CliError::field(field, e)
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::TooLarge { .. } => CliError::Resource(e.to_string()),
            SamplerError::SectorRequiresFullyConnected { .. } => CliError::field("sampler.mode", e),
            SamplerError::EmptyRun => CliError::field("sampler.n_chains", e),
            SamplerError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ObservableError> for CliError {
    fn from(e: ObservableError) -> Self {
        match e {
            ObservableError::Sampler(s) => s.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<EdError> for CliError {
    fn from(e: EdError) -> Self {
        match e {
            EdError::TooLarge { .. } => CliError::Resource(e.to_string()),
            EdError::RequiresFullyConnected { .. } => CliError::field("ed.method", e),
            EdError::NotConverged { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Paramagnetic { .. } => CliError::field("model.g", e),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig { field, reason } => {
                CliError::field(&format!("trainer.{field}"), reason)
            }
            TrainError::Observable(o) => o.into(),
            TrainError::Ansatz(a) => CliError::field("ansatz", a),
            TrainError::Dimension { .. } => CliError::field("ansatz.K", e),
            TrainError::Diverged { .. } => CliError::Numerical(e.to_string()),
        }
    }
}
