//! Process exit codes: 0 success, 1 internal error, 2 bad input, 3 config error.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Internal = 1,
    BadInput = 2,
    Config = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(ExitKind::BadInput, anyhow::anyhow!("{msg}"))
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(ExitKind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::new(ExitKind::Internal, error)
    }
}

impl From<std::io::Error> for Failure {
    fn from(error: std::io::Error) -> Self {
        Self::new(ExitKind::Internal, error)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Tag an error with the exit code it should produce.
pub trait Classify<T> {
    fn bad_input(self) -> CliResult<T>;
    fn bad_config(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn bad_input(self) -> CliResult<T> {
        self.map_err(|e| Failure::new(ExitKind::BadInput, e))
    }

    fn bad_config(self) -> CliResult<T> {
        self.map_err(|e| Failure::new(ExitKind::Config, e))
    }
}
