use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("grid overflow: lcm({0}, {1}) does not fit a platform integer")]
    Overflow(u64, u64),
    #[error("sampling exhausted: {accepted} of {proposals} proposals accepted")]
    SamplingExhausted { accepted: usize, proposals: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Attach a replicate id to a numeric-domain error; other variants pass through.
    pub fn in_replicate(self, replicate: u64) -> Self {
        match self {
            Error::Numeric(mut e) => {
                e.replicate = Some(replicate);
                Error::Numeric(e)
            }
            other => other,
        }
    }
}

/// A NaN or infinity showed up in a drift evaluation or a state update.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericError {
    pub what: String,
    pub step: Option<usize>,
    pub replicate: Option<u64>,
    pub state: Vec<f64>,
    pub xi: Option<Vec<f64>>,
}

impl NumericError {
    pub fn new(what: impl Into<String>, state: &[f64]) -> Self {
        NumericError {
            what: what.into(),
            step: None,
            replicate: None,
            state: state.to_vec(),
            xi: None,
        }
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_xi(mut self, xi: &[f64]) -> Self {
        self.xi = Some(xi.to_vec());
        self
    }
}

impl fmt::Display for NumericError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite value in {}", self.what)?;
        if let Some(r) = self.replicate {
            write!(f, " (replicate {r}")?;
            match self.step {
                Some(s) => write!(f, ", step {s})")?,
                None => write!(f, ")")?,
            }
        } else if let Some(s) = self.step {
            write!(f, " (step {s})")?;
        }
        write!(f, " at x = {:?}", self.state)?;
        if let Some(xi) = &self.xi {
            write!(f, ", xi = {xi:?}")?;
        }
        Ok(())
    }
}

impl std::error::Error for NumericError {}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
