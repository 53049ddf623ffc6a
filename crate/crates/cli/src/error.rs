use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config{}: key `{key}`: {message}", line_suffix(*.line))]
    Config { line: usize, key: String, message: String },
    #[error(transparent)]
    Core(#[from] pint_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

fn line_suffix(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" line {line}")
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotConverged(_) => 2,
            Self::VerificationFailed(_) => 3,
            _ => 1,
        }
    }
}
