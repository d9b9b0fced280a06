use std::fmt;

/// Bad input or configuration: exit code 1.
pub const EXIT_VALIDATION: i32 = 1;
/// Failure while doing the work: exit code 2.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn validation(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: Kind::Validation,
            source: e.into(),
        }
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: Kind::Runtime,
            source: e.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => EXIT_VALIDATION,
            Kind::Runtime => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Validation => "invalid input",
            Kind::Runtime => "runtime error",
        };
        write!(f, "{kind}: {:#}", self.source)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Shorthand for tagging foreign errors with an exit class.
pub trait Classify<T> {
    fn invalid(self, context: impl FnOnce() -> String) -> CliResult<T>;
    fn failed(self, context: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::validation(e.into().context(context())))
    }

    fn failed(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::runtime(e.into().context(context())))
    }
}
