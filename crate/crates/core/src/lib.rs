//! Chirped-pulse orientation control of a polar molecule in a single-mode
//! cavity.
//!
//! The crate is `no_std` (with `alloc`) so that the numerics can be embedded
//! anywhere; file formats, configuration and the command line live in the
//! `chirpcav` crate. All quantities are in atomic units unless a name says
//! otherwise.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod magnus;
pub mod model;
pub mod propagate;
pub mod pulse;
pub mod quad;
pub mod scan;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use magnus::{OptimalSolution, SuperpositionState, ThreeLevelParams};
pub use model::{CompositeBasis, ModelParams, OperatorMatrix};
pub use propagate::{PropagationConfig, StateVector, System, TrajectoryResult};
pub use pulse::{PulsePair, PulseSpec};
pub use scan::{ScanResult, ScanSpec};
pub use spectrum::{DressedFrame, DressedSpectrum, ExactDressed};
