//! Numerical laboratory for a stochastic mean-field formulation of
//! incompressible flow on the flat torus `[0, 2π)^n`.
//!
//! The crate provides
//! * a pseudo-spectral toolbox (Fourier transforms, Leray projection,
//!   spectral differentiation) in [`spectral`],
//! * the truncated trigonometric noise basis and reproducible Brownian
//!   increments in [`basis`] and [`noise`],
//! * the right-hand sides of the deterministic and stochastic momentum
//!   equations in [`dynamics`],
//! * time integration (deterministic reference solver, interacting
//!   particle system, mean-field Monte Carlo, Picard iteration) in
//!   [`engine`],
//! * stochastic Lagrangian loops, back-to-labels maps and circulation
//!   audits in [`lagrangian`],
//! * energy identities and scalar diagnostics in [`diagnostics`],
//! * experiment configuration and deterministic file output in
//!   [`config`] and [`io`].

pub mod basis;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod io;
pub mod lagrangian;
pub mod noise;
pub mod spectral;

pub use error::{Error, Result};
