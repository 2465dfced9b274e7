//! Phase-shift optimization for reconfigurable intelligent surfaces.
//!
//! A reflecting surface with `M` passive elements steers its scattered field
//! through a coefficient vector `e` whose entries are (near) unit modulus.
//! This crate provides the pieces needed to optimize `e` jointly with the
//! transmit-side variables of three resource-allocation problems:
//!
//! * [`numerics`]: dense complex eigendecomposition, Cholesky solves, PSD
//!   projection, and a generalized Rayleigh maximizer,
//! * [`channels`]: seeded random channel generation and a binary dataset
//!   format for replaying instances,
//! * [`phase`]: feasible phase-coefficient models and their projections,
//! * [`problems`]: secrecy-rate, uplink-power, and network-cost objectives
//!   with their transmit-side updates,
//! * [`solvers`]: six continuous phase solvers and two discrete procedures,
//! * [`bcd`]: the alternating driver that couples a transmit-side update with
//!   any of the phase solvers.

pub mod bcd;
pub mod channels;
pub mod numerics;
pub mod phase;
pub mod problems;
pub mod solvers;
