use mallows_core::{ErrorClass, MallowsError};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] MallowsError),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error("manifest {path}: {msg}")]
    Manifest { path: String, msg: String },

    #[error("re-run output {path} differs from the recorded digest")]
    NotReproduced { path: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::File { .. } | CliError::Manifest { .. } => 3,
            CliError::NotReproduced { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(MallowsError::EmptySample).exit_code(), 3);
        assert_eq!(CliError::Core(MallowsError::MissingTheta).exit_code(), 2);
        assert_eq!(CliError::Core(MallowsError::DivergentTheta).exit_code(), 4);
        assert_eq!(CliError::NotReproduced { path: "a".into() }.exit_code(), 4);
    }
}
