use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] iwatsuka::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// 2 for bad configuration, 3 for a numerical abort, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use iwatsuka::Error as E;
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(E::InvalidParameter(_) | E::Parse(_) | E::RuleTooCoarse { .. }) => 2,
            HarnessError::Core(E::NumericalAbort { .. } | E::Eval(_)) => 3,
            _ => 1,
        }
    }
}
