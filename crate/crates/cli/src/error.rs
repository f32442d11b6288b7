use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: String, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] rydgate::Error),
    #[error("did not converge: {0}")]
    NonConvergence(String),
}

impl CliError {
    /// 1 for configuration and I/O problems, 2 when the science did not converge.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NonConvergence(_) | CliError::Sim(rydgate::Error::FitFailure(_)) => 2,
            _ => 1,
        }
    }
}
