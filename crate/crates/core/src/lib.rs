//! Fluid-antenna MISO SWIPT simulation and optimization.
//!
//! A base station with `N` movable (fluid) transmit antennas serves an energy
//! receiver (ER) with one movable antenna and an information receiver (IR)
//! with one fixed antenna. The crate jointly optimizes the transmit covariance
//! `Q` and the antenna positions to maximize the power harvested at the ER,
//! subject to an SINR floor at the IR, a transmit power budget, region
//! containment and a minimum spacing between transmit antennas.
//!
//! Module map:
//!
//! * [`channel`]: field-response channel model, harvested power and SINR.
//! * [`covariance`]: transmit covariance subproblem (closed form on a 2-D span).
//! * [`rx_position`]: SCA update of the ER antenna position.
//! * [`tx_position`]: SCA update of one transmit antenna position.
//! * [`qcqp`]: exact solver for the 2-D convex QCQP used by the transmit step.
//! * [`driver`]: the alternating optimization loop.
//! * [`experiment`]: random channels, baselines, sweeps and CSV output.
//! * [`config`]: JSON scenario files.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod covariance;
pub mod driver;
mod error;
pub mod experiment;
pub mod linalg;
pub mod qcqp;
pub mod rx_position;
pub mod surrogate;
pub mod tx_position;

pub use channel::{AntennaLayout, ChannelGeometry, PathAngles, Position, Region};
pub use covariance::{QSolution, QStatus, TransmitCovariance};
pub use driver::{RunOptions, RunTrace, ScenarioConfig, Solution};
pub use error::{Error, Result};

pub use num_complex::Complex64;

#[cfg(test)]
mod testutil;
