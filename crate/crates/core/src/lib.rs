//! Center-of-mass dynamics of trapped interacting quantum gases.
//!
//! In a harmonic trap the motion of the center of mass of any interacting
//! system decouples from the internal motion. This crate provides the pieces
//! needed to compute and verify the consequences of that decoupling:
//!
//! * [`trap`]: trap geometry, rigid rotation and the six rotational invariants.
//! * [`spectral`]: the characteristic cubic of the rotating anisotropic
//!   oscillator, its roots, stability classification and instability window.
//! * [`classical`]: RK4 center-of-mass trajectories in the lab and rotating
//!   frames, the classical action and the displacement phase.
//! * [`meanfield`]: split-step Fourier evolution of the nonlinear Schrödinger
//!   equation and the displacement solution-family check.
//! * [`fewbody`]: a two-particle grid Hamiltonian, its lowest eigenpairs and
//!   the ladder decomposition of the spectrum.
//!
//! Natural units (`m = ħ = 1`) are used throughout; trap strengths are
//! squared angular frequencies.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod config;
pub mod exec;
pub mod fewbody;
pub mod meanfield;
pub mod spectral;
pub mod trap;

pub use classical::{ClassicalState, Frame, Trajectory};
pub use exec::Execution;
pub use spectral::{CharPoly, Classification, FrequencySet, StabilityWindow};
pub use trap::{Invariants, RotationSpec, TrapSchedule, TrapSpec, UnitAxis};

/// Failure categories, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: rejected before any computation.
    Validation,
    /// The computation itself failed (non-convergence, runaway, leakage).
    Numerical,
}
