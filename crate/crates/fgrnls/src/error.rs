use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("singular resolvent at {0}")]
    Singular(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 2,
            Error::Numerical(_) | Error::Singular(_) => 3,
            Error::Config(_) | Error::Input(_) | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Hypothesis(String::new()).exit_code(), 2);
        assert_eq!(Error::Singular(String::new()).exit_code(), 3);
        assert_eq!(Error::Numerical(String::new()).exit_code(), 3);
        assert_eq!(Error::Config(String::new()).exit_code(), 4);
        assert_eq!(Error::from(std::io::Error::other("x")).exit_code(), 4);
    }
}
