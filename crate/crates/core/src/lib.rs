//! Near-field wideband beam focusing for hybrid time-delay / phase-shifter
//! (TD-PS) receive arrays.
//!
//! The crate is split along the signal chain:
//!
//! - [`geometry`]: element positions, UE distances and the distance
//!   difference function (DDF).
//! - [`channel`]: subcarrier grid and the spherical-wave LOS channel.
//! - [`combiner`]: quantized phase codebook, TD-PS combiner and phase
//!   recompensation after delays are introduced.
//! - [`sim`]: the measurement oracle. Nothing outside this module reads the
//!   true channel directly except the CSI baselines.
//! - [`critic`]: Gram-form power model `w^H Q Q^H w` and its regression.
//! - [`ps_learner`]: online phase learning from center-frequency powers.
//! - [`td_search`]: piecewise-linear DDF grid search for the delays.
//! - [`baselines`]: PS-only conjugate and phase-delay focusing oracles.
//! - [`pipeline`]: scenario construction and end-to-end runs shared by the
//!   CLI and the acceptance suite.

pub mod baselines;
pub mod channel;
pub mod combiner;
pub mod critic;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod ps_learner;
pub mod sim;
pub mod td_search;
mod textfmt;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
