use thiserror::Error;

use crate::model::Family;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or observation lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mixing measure: {0}")]
    InvalidMeasure(String),

    #[error("family mismatch: expected {expected:?}, found {found:?}")]
    FamilyMismatch { expected: Family, found: Family },

    /// Observation `index` has zero density under every component.
    #[error("observation {index} has zero density under every component")]
    DegeneratePoint { index: usize },

    #[error("component {component} received no responsibility")]
    EmptyComponent { component: usize },

    #[error("search interval does not cover the mixture mass: {0}")]
    IntervalTooSmall(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any iteration context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}
