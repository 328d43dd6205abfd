//! Decoupled (semi-explicit) BDF-k time stepping for elliptic-parabolic
//! systems such as quasi-static Biot poroelasticity.
//!
//! The elliptic equation is evaluated with a δ-step extrapolation of the
//! pressure, which decouples the two equations so that every time step is two
//! sequential SPD solves. The [`gstability`] module builds and checks the
//! weighted-norm certificates (multipliers γ, weight matrices G, coupling
//! thresholds) under which these schemes are stable.
//!
//! Module map:
//!
//! * [`stencils`] exact BDF-k and delay extrapolation coefficients
//! * [`gstability`] γ systems, G matrices, summation identity, spectrum scans
//! * [`numerics`] sparse matrices, CG, Jacobi eigenvalues, power iteration
//! * [`problems`] spectral test problems, P1 Biot discretization, DDE demo
//! * [`integrators`] semi-explicit, monolithic and reduced schemes, error studies

pub mod csv;
pub mod error;
pub mod gstability;
pub mod integrators;
pub mod numerics;
pub mod problems;
pub mod stencils;

pub use error::{Error, Result};
