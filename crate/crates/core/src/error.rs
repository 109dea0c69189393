use thiserror::Error;

/// Errors produced by the homophily library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("training labels contain a single class ({0})")]
    DegenerateLabels(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("column mismatch: model has {expected} coefficients, design has {found} columns")]
    ColumnMismatch { expected: usize, found: usize },

    #[error("empty training set for {0}")]
    EmptyTrainingSet(String),

    #[error("undefined estimand: {0}")]
    UndefinedEstimand(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("missing oracle labels")]
    MissingOracle,

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable code used in result tables for failed replications.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::Numerical(_) => "numerical",
            Error::ColumnMismatch { .. } => "column_mismatch",
            Error::EmptyTrainingSet(_) => "empty_training_set",
            Error::UndefinedEstimand(_) => "undefined_estimand",
            Error::Calibration(_) => "calibration",
            Error::MissingOracle => "missing_oracle",
            Error::UnknownNode(_) => "unknown_node",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
