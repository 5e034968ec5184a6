use std::fmt;

/// Failure classes with stable exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit 1.
    Io(String),
    /// Exit 2.
    BadArgs(String),
    /// Exit 3.
    Parse(String),
    /// Exit 4.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::BadArgs(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::BadArgs(m) => write!(f, "bad arguments: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<finmix::Error> for CliError {
    fn from(e: finmix::Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            finmix::Error::Domain(_) | finmix::Error::FamilyMismatch { .. } => CliError::BadArgs(msg),
            finmix::Error::Parse(_) | finmix::Error::InvalidMeasure(_) => CliError::Parse(msg),
            finmix::Error::DegeneratePoint { .. }
            | finmix::Error::EmptyComponent { .. }
            | finmix::Error::IntervalTooSmall(_)
            | finmix::Error::AtIteration { .. } => CliError::Numerical(msg),
        }
    }
}

impl From<crate::document::DocumentError> for CliError {
    fn from(e: crate::document::DocumentError) -> Self {
        CliError::Parse(e.0)
    }
}
