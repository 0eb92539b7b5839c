//! Brownian particles confined between two no-flux walls: Fourier series
//! solution and a Crank-Nicolson finite-difference oracle.
//!
//! The density obeys `∂_t η = D ∂_xx η` on `[-a, a]` with Neumann walls
//! and the step initial condition `η₀ + η₁ sign(x)`. The cosine-free sine
//! series `η₀ + η₁ Σ c_p sin(λ_p x) e^{-μ_p t}` with
//! `λ_p = (2p+1)π/(2a)`, `μ_p = λ_p² D`, `c_p = 4/((2p+1)π)` satisfies the
//! walls because `cos(λ_p a) = 0` for every term.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::numerics::tridiagonal_solve;

/// Confined-diffusion problem parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub diffusion: f64,
    /// Wall half-distance `a`; the domain is `[-a, a]`.
    pub half_width: f64,
    pub eta0: f64,
    pub eta1: f64,
    /// Series cutoff used when a time is too small for the automatic
    /// tail bound (notably t = 0).
    pub max_terms: usize,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self {
            diffusion: 1.0,
            half_width: 1.0,
            eta0: 0.5,
            eta1: 0.45,
            max_terms: 2000,
        }
    }
}

impl DiffusionSpec {
    pub fn lambda(&self, p: usize) -> f64 {
        (2 * p + 1) as f64 * std::f64::consts::PI / (2.0 * self.half_width)
    }

    pub fn mu(&self, p: usize) -> f64 {
        let l = self.lambda(p);
        l * l * self.diffusion
    }

    pub fn coefficient(&self, p: usize) -> f64 {
        4.0 / ((2 * p + 1) as f64 * std::f64::consts::PI)
    }

    /// Number of terms needed so the next term is below 1e-12 at time `t`,
    /// capped at `max_terms`. Returns the cap for `t = 0`, where the Gibbs
    /// oscillation makes any finite cutoff inexact.
    pub fn cutoff_for(&self, t: f64) -> (usize, bool) {
        if t <= 0.0 {
            return (self.max_terms, true);
        }
        for p in 0..self.max_terms {
            if self.coefficient(p) * (-self.mu(p) * t).exp() < 1e-12 {
                return (p.max(1), false);
            }
        }
        (self.max_terms, true)
    }

    /// Series value at one point.
    pub fn series_value(&self, x: f64, t: f64) -> f64 {
        let (terms, _) = self.cutoff_for(t);
        let mut acc = self.eta0;
        for p in 0..terms {
            acc += self.eta1
                * self.coefficient(p)
                * (self.lambda(p) * x).sin()
                * (-self.mu(p) * t).exp();
        }
        acc
    }

    /// Series snapshot on a grid; the flag reports a truncated (Gibbs)
    /// evaluation at `t = 0`.
    pub fn series_snapshot(&self, grid: &Grid, t: f64) -> Result<(ScalarField, bool)> {
        let (_, truncated) = self.cutoff_for(t);
        let field = ScalarField::from_fn(grid.clone(), |x| self.series_value(x[0], t))?;
        Ok((field, truncated))
    }

    /// Step initial condition `η₀ + η₁ sign(x)` with sign(0) = 0 (not the
    /// IEEE signum, which maps 0 to 1).
    pub fn initial_condition(&self, x: f64) -> f64 {
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.eta0 + self.eta1 * sign
    }
}

/// Free-function form of [`DiffusionSpec::series_value`].
pub fn diffusion_series(spec: &DiffusionSpec, x: f64, t: f64) -> f64 {
    spec.series_value(x, t)
}

/// Crank-Nicolson finite-difference solution with mirrored Neumann walls,
/// reported at the requested output times.
pub fn crank_nicolson_oracle(
    spec: &DiffusionSpec,
    n_nodes: usize,
    dt: f64,
    times: &[f64],
) -> Result<Vec<ScalarField>> {
    let grid = Grid::line(-spec.half_width, spec.half_width, n_nodes)?;
    let h = grid.axes()[0].spacing();
    let r = spec.diffusion * dt / (h * h);
    let mut u: Vec<f64> = (0..n_nodes)
        .map(|i| {
            // Snap coordinate noise at the step so sign(0) stays 0 and the
            // sampled initial condition keeps its odd symmetry.
            let x = grid.axes()[0].coord(i);
            let x = if x.abs() < 0.5 * h { 0.0 } else { x };
            spec.initial_condition(x)
        })
        .collect();

    // (I − r/2 L) u⁺ = (I + r/2 L) u with L the mirrored Neumann Laplacian.
    let mut lower = vec![-0.5 * r; n_nodes];
    let mut upper = vec![-0.5 * r; n_nodes];
    let diag = vec![1.0 + r; n_nodes];
    upper[0] = -r; // mirror: u_{-1} = u_1
    lower[n_nodes - 1] = -r;

    let apply_rhs = |u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for i in 0..n_nodes {
            let left = if i == 0 { u[1] } else { u[i - 1] };
            let right = if i == n_nodes - 1 { u[n_nodes - 2] } else { u[i + 1] };
            out.push(u[i] + 0.5 * r * (left - 2.0 * u[i] + right));
        }
    };

    let mut outputs = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut rhs = Vec::with_capacity(n_nodes);
    for &t_target in times {
        while t + 0.5 * dt < t_target {
            apply_rhs(&u, &mut rhs);
            u = tridiagonal_solve(&lower, &diag, &upper, &rhs);
            t += dt;
        }
        let mut field = ScalarField::new(grid.clone(), u.clone())?;
        field.time_index = Some(outputs.len());
        outputs.push(field);
    }
    Ok(outputs)
}
