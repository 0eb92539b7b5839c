//! Reconstruction of probability distributions from moment constraints via
//! the maximum entropy principle.
//!
//! Two routes are provided:
//!
//! * **Classical**: a damped-Newton solve of the convex dual determines the
//!   Lagrange multipliers of the exponential-family density matching the
//!   constraints ([`classical`]), verified against a catalog of closed-form
//!   maximum-entropy distributions ([`zoo`]).
//! * **Neural**: a small dense network trained with a moment-constraint loss
//!   plus a fixed-point relative-entropy loss ([`nn`], [`train`]), with
//!   variational-energy swap-ins for diffusion and phase-field problems.
//!
//! Reference generators for every bundled experiment (Gaussian mixtures,
//! Schlögl birth-death network, confined diffusion, Allen-Cahn) live in
//! [`reference`]; the experiment runner and persistence in [`experiment`]
//! and [`io`].
//!
//! ```
//! use mepnet::grid::Grid;
//! use mepnet::field::{normalize, ScalarField};
//! use mepnet::entropy::shannon_entropy;
//!
//! let bump = ScalarField::from_fn(Grid::line(-4.0, 4.0, 401).unwrap(),
//!                                 |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
//! let p = normalize(&bump).unwrap();
//! let s = shannon_entropy(&p).unwrap();
//! assert!((s - (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt().ln()).abs() < 1e-3);
//! ```

pub mod error;
pub mod grid;
pub mod field;
pub mod entropy;
pub mod features;
pub mod classical;
pub mod zoo;
pub mod nn;
pub mod numerics;
pub mod reference;
pub mod special;
pub mod train;

pub use error::{Error, Result};
