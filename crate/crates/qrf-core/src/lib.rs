//! Quantum reference frame transformations on discretized one-dimensional
//! Hilbert spaces.
//!
//! States live on periodic Fourier grids. Every frame change is realized as a
//! sequence of exact phase multiplications in mixed position/momentum
//! representations, so the grid operators are unitary to roundoff. Each
//! operator also has an affine symplectic shadow ([`phase_space::PhaseSpaceMap`])
//! and a dense-matrix realization ([`dense`]) used as an independent oracle.

pub mod dense;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod measurement;
pub mod operators;
pub mod phase_space;
pub mod sample;
pub mod state;

pub use error::{QrfError, Result};
pub use grid::Grid1D;
pub use num_complex::Complex64 as C64;
pub use state::{AxisKind, Frame, Level, MultiState, Subsystem, Wave};
