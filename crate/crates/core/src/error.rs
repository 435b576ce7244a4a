use alloc::string::String;
use core::fmt;

use crate::units::UnsupportedConversion;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A parameter violates its documented domain.
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    Units(UnsupportedConversion),
    /// Adaptive quadrature did not reach the requested accuracy.
    Quadrature {
        estimated_error: f64,
        tolerance: f64,
    },
    /// The adaptive step controller shrank the step below its floor.
    StepUnderflow {
        time: f64,
        step: f64,
    },
    /// The propagator exceeded its step budget before reaching the end time.
    StepBudget {
        time: f64,
        steps: usize,
    },
    /// The driving field is still on at the time an observable assumes free evolution.
    FieldNotNegligible {
        time: f64,
        relative_field: f64,
    },
    InvalidScan(String),
    /// The fitted locus formulas are undefined at this chirp rate.
    LocusDomain {
        beta_minus_ns2: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::Units(e) => e.fmt(f),
            Error::Quadrature { estimated_error, tolerance } => {
                write!(f, "quadrature did not converge: estimated error {estimated_error:e} exceeds {tolerance:e}")
            }
            Error::StepUnderflow { time, step } => {
                write!(f, "step size underflow (h = {step:e}) at t = {time:e} a.u.")
            }
            Error::StepBudget { time, steps } => {
                write!(f, "step budget of {steps} exhausted at t = {time:e} a.u.")
            }
            Error::FieldNotNegligible { time, relative_field } => write!(
                f,
                "field at t = {time:e} a.u. is {relative_field:e} of its peak; free evolution not yet reached"
            ),
            Error::InvalidScan(msg) => write!(f, "invalid scan: {msg}"),
            Error::LocusDomain { beta_minus_ns2 } => {
                write!(f, "beta_minus = {beta_minus_ns2} ns^2 lies outside every fitted branch")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl From<UnsupportedConversion> for Error {
    fn from(e: UnsupportedConversion) -> Self {
        Error::Units(e)
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
