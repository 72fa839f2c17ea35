use std::fmt;

/// A failure together with the process exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent inputs.
    Input(String),
    /// The sampler or a downstream computation failed.
    Sampler(String),
    /// Artifacts do not descend from the run they claim to.
    Lineage(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Sampler(_) => 3,
            Self::Lineage(_) => 4,
        }
    }

    pub fn input(e: impl fmt::Display) -> Self {
        Self::Input(e.to_string())
    }

    pub fn sampler(e: impl fmt::Display) -> Self {
        Self::Sampler(e.to_string())
    }

    pub fn lineage(e: impl fmt::Display) -> Self {
        Self::Lineage(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Sampler(m) => write!(f, "sampler error: {m}"),
            Self::Lineage(m) => write!(f, "lineage error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
