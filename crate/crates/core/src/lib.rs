//! Simulation and spectral analysis of three-layer piezoelectric sandwich
//! beams (elastic face, compliant core, piezoelectric face) clamped at x = 0
//! and controlled through boundary feedback at x = L.
//!
//! Five models are assembled on a common finite-element discretization:
//! the parent model with core inertia, the Rao-Nakra model with magnetic
//! (dynamic) or electrostatic charge, and the Mead-Marcus model in the same
//! two variants. Every model is written as `G x' = S x` with `G` the energy
//! Gram matrix, so conservation and dissipation can be checked exactly.

pub mod acceptance;
pub mod error;
pub mod linalg;
pub mod cli;
pub mod control;
pub mod materials;
pub mod models;
pub mod operators;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
