use thiserror::Error;

use crate::dynamics::TrajectoryRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An expression primitive was evaluated outside its validity interval.
    #[error("`{primitive}` evaluated outside its domain (argument {argument})")]
    ExprDomain { primitive: &'static str, argument: f64 },

    #[error("point {point:?} lies outside the open domain box")]
    OutsideDomain { point: Vec<f64> },

    #[error("non-finite value in {factor}")]
    NonFinite { factor: String },

    /// A nonvanishing hypothesis of the family failed at a concrete point.
    #[error("hypothesis violated: {what} vanishes at {point:?}")]
    Vanishing { what: String, point: Vec<f64> },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("singular chart: omega{i}{j} vanishes at {point:?}", i = .pair.0 + 1, j = .pair.1 + 1)]
    SingularChart { pair: (usize, usize), point: Vec<f64> },

    #[error("point is outside the chart image: {0}")]
    OutOfChart(String),

    #[error("no root of f(x) = {target} inside [{lo}, {hi}]")]
    NoRoot { target: f64, lo: f64, hi: f64 },

    #[error("function is not monotone on [{lo}, {hi}]")]
    NotMonotone { lo: f64, hi: f64 },

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("trajectory left the domain at t = {t}; last valid state {last_state:?}")]
    DomainExit {
        t: f64,
        last_state: Vec<f64>,
        partial: Box<TrajectoryRecord>,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow {
        t: f64,
        h: f64,
        partial: Box<TrajectoryRecord>,
    },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),
}

impl Error {
    /// Partial trajectory carried by integration failures.
    pub fn partial_trajectory(&self) -> Option<&TrajectoryRecord> {
        match self {
            Error::DomainExit { partial, .. } | Error::StepSizeUnderflow { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
