use std::fmt;

/// Exit codes: 1 runtime failure, 2 bad input, 3 bad configuration,
/// 4 degenerate statistics.
pub const RUNTIME: u8 = 1;
pub const INPUT: u8 = 2;
pub const CONFIG: u8 = 3;
pub const STATS: u8 = 4;

pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(CONFIG, anyhow::anyhow!("{msg}"))
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(INPUT, anyhow::anyhow!("{msg}"))
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::new(RUNTIME, e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait WithCode<T> {
    /// Attaches an exit code and a context line.
    fn code(self, code: u8, context: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::new(code, e.into().context(context.to_string())))
    }
}
