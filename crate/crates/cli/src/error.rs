use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] biphoton::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Output(_) | CliError::Io(_) => "io",
            CliError::Core(e) => e.category(),
        }
    }

    /// Process exit status for the error's category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "dispersion" => 3,
            "fields" => 4,
            "entanglement" => 5,
            "coincidence" => 6,
            _ => 7,
        }
    }
}
