use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] oblique_stab::Error),

    #[error("cannot read {path}: {source}")]
    Input { path: String, source: io::Error },

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: io::Error },
}

impl CliError {
    /// 2 for anything wrong with the configuration or its inputs, 3 for
    /// numerical failures, 1 when results could not be written.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Output { .. } => 1,
        }
    }
}
