//! Active disturbance rejection control (ADRC) for second-order fully
//! actuated plants whose input passes through unmodeled first-order dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: plant family, reference trajectories, assumption bounds.
//! - [`control`]: feedback law with compensation and disturbance rejection.
//! - [`observer`]: extended state observer (ESO).
//! - [`scaling`]: bandwidth-scaling algebra for gains, errors and the
//!   closed-loop matrices.
//! - [`stability`]: Lyapunov certificate, feasible bandwidth sets and the
//!   ultimate error bound.
//! - [`sim`]: fixed-step closed-loop simulation, the bandwidth/time-constant
//!   grid and the two-axis telescope scenario with a PI current loop.
//! - [`config`]: JSON scenario files.

pub mod config;
pub mod control;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod scaling;
pub mod sim;
pub mod stability;

pub use error::{AdrcError, Result};

/// Dynamic column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dynamic dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
