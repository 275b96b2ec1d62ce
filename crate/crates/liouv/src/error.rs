use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("norm violation: measured norm {measured} exceeds alpha {alpha}")]
    NormViolation { measured: f64, alpha: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hilbert dimension {requested} exceeds the cap {cap} ({context})")]
    DimensionCap {
        requested: usize,
        cap: usize,
        context: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("phase finding failed: {0}")]
    PhaseFinding(String),
    #[error("ground-state preparation failed: {0}")]
    GroundState(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn at_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
