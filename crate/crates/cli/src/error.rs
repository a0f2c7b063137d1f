use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read config: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] cusplab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for violated numerical invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigParse(_) => 2,
            CliError::Core(e) if e.is_invariant_violation() => 3,
            _ => 1,
        }
    }
}
