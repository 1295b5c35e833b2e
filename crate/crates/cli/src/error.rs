use thiserror::Error;

/// Process exit codes. Frozen: scripts depend on them.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const INVALID_DATA: i32 = 4;
    pub const BAD_FOLD_COUNT: i32 = 5;
    pub const TOO_MANY_FOLDS: i32 = 6;
    pub const INVALID_PARAMS: i32 = 7;
    pub const MEMORY_BUDGET: i32 = 8;
    pub const IO: i32 = 9;
    pub const AGREEMENT: i32 = 10;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] kscan::Error),
    #[error("{0}")]
    Usage(String),
    #[error("modes disagree: {0}")]
    Agreement(String),
    #[error("cannot serialize output: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use kscan::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Parse { .. } | E::NoFeatures | E::Format(_) => exit::PARSE,
                E::EmptyDataset(_) | E::SingleClass(_) | E::NonFiniteFeature { .. } => exit::INVALID_DATA,
                E::BadFoldCount(_) => exit::BAD_FOLD_COUNT,
                E::TooManyFolds { .. } => exit::TOO_MANY_FOLDS,
                E::BadParams(_)
                | E::DimensionMismatch { .. }
                | E::InconsistentFolds(_)
                | E::InconsistentInputs(_)
                | E::EmptyNeighborhood
                | E::KTooLarge { .. } => exit::INVALID_PARAMS,
                E::MemoryBudgetExceeded { .. } => exit::MEMORY_BUDGET,
                E::Io(_) => exit::IO,
            },
            CliError::Usage(_) => exit::USAGE,
            CliError::Agreement(_) => exit::AGREEMENT,
            CliError::Json(_) => exit::INTERNAL,
            CliError::Io(_) => exit::IO,
        }
    }
}
