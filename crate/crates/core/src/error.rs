use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AudError>;

#[derive(Debug, Error)]
pub enum AudError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents; `field` names what could not be parsed.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// Well-formed input that violates a data contract.
    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("inference failed for utterance {utt_id}: {message}")]
    Inference { utt_id: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("internal state error: {0}")]
    InternalState(String),
}

impl AudError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AudError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        AudError::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn inference(utt_id: impl Into<String>, message: impl Into<String>) -> Self {
        AudError::Inference {
            utt_id: utt_id.into(),
            message: message.into(),
        }
    }

    /// Attach an utterance id to errors raised below the corpus level.
    pub fn for_utterance(self, utt_id: &str) -> Self {
        match self {
            AudError::Inference { .. } => self,
            AudError::Shape(m) => AudError::Shape(format!("utterance {utt_id}: {m}")),
            AudError::Data(m) => AudError::Data(format!("utterance {utt_id}: {m}")),
            AudError::Domain(m) => AudError::inference(utt_id, m),
            other => other,
        }
    }
}
