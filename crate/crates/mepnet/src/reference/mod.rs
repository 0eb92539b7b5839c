//! Ground-truth generators and independent oracles for the bundled
//! experiments: Gaussian mixtures, the Beta and time-dependent Gaussian
//! targets, the Schlögl birth-death network, confined diffusion and the
//! Allen-Cahn phase-field model.

pub mod allen_cahn;
pub mod diffusion;
pub mod mixture;
pub mod schlogl;

pub use allen_cahn::{allen_cahn_solve, AllenCahnSolution, AllenCahnSpec};
pub use diffusion::{crank_nicolson_oracle, diffusion_series, DiffusionSpec};
pub use mixture::{beta_pdf, time_gaussian, GaussianMixtureSpec, TimeGaussianSpec};
pub use schlogl::{
    cme_ode_oracle, distribution_mean, gillespie_simulate, rebin_histogram, SchloglSpec,
};
