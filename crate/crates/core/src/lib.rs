//! A numerical laboratory for sharp fractional Sobolev trace inequalities,
//! Escobar bubbles on the half-space and the stability of their critical
//! points.
//!
//! The crate is organized bottom-up:
//!
//! - [`special`], [`quadrature`], [`fft`], [`optim`], [`par`], [`poly`]: numerical infrastructure.
//! - [`constants`]: closed-form sharp constants and spectral data.
//! - [`grid`]: periodic Fourier grids, fractional norms, traces and the reduction extension.
//! - [`bubbles`]: Escobar bubbles, their energies, interactions and localization cut-offs.
//! - [`steklov`]: the conformal map to the unit ball and the Steklov decomposition.
//! - [`neumann`]: the Neumann extension operator and dual residual norms.
//! - [`lab`]: end-to-end stability experiments.
//! - [`report`], [`config`], [`cli`]: experiment reports, configuration and the command line driver.

// Negated comparisons such as `!(x > 0.0)` reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbles;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod fft;
pub mod grid;
pub mod lab;
pub mod neumann;
pub mod optim;
pub mod par;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod steklov;

pub use error::{Result, TslError};
