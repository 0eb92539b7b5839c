//! Semi-implicit reference solver for the Allen-Cahn phase-field model
//! `∂_t φ = ε²Δφ − φ³ + φ` on `[-1, 1]²` with no-flux walls.
//!
//! The diffusion term is treated implicitly (five-point Laplacian with
//! mirrored ghost nodes, solved by conjugate gradients in the
//! trapezoid-weighted inner product where the operator is self-adjoint);
//! the double-well force is explicit. The discrete free energy must never
//! increase between steps — the solver aborts if it does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Axis, Grid};
use crate::train::losses::allen_cahn_energy_of_values;

/// Allen-Cahn experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllenCahnSpec {
    pub epsilon: f64,
    /// Nodes per axis on `[-1, 1]²`.
    pub n_nodes: usize,
    pub dt: f64,
    /// Width parameter of the initial interface
    /// `φ₀ = tanh((0.35 − r)/w)`. The default of 50 reproduces the nearly
    /// flat field that the verbatim parameterization yields; use
    /// [`AllenCahnSpec::sharp_interface_width`] for a resolved circle.
    pub interface_width: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for AllenCahnSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.025,
            n_nodes: 161,
            dt: 0.02,
            interface_width: 50.0,
            snapshot_times: vec![0.0, 3.0, 5.0, 7.0],
        }
    }
}

impl AllenCahnSpec {
    /// Interface width `2√2·ε` matching the equilibrium kink profile at
    /// the model's `ε`.
    pub fn sharp_interface_width(epsilon: f64) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * epsilon
    }

    /// The spec with the resolved-interface override applied.
    pub fn with_sharp_interface(mut self) -> Self {
        self.interface_width = Self::sharp_interface_width(self.epsilon);
        self
    }

    pub fn grid(&self) -> Grid {
        Grid::new(vec![
            Axis::new("x", -1.0, 1.0, self.n_nodes).unwrap(),
            Axis::new("y", -1.0, 1.0, self.n_nodes).unwrap(),
        ])
        .unwrap()
    }

    pub fn initial_condition(&self, x: f64, y: f64) -> f64 {
        let r = (x * x + y * y).sqrt();
        ((0.35 - r) / self.interface_width).tanh()
    }
}

/// Five-point Laplacian with mirrored (no-flux) ghost nodes.
fn laplacian(shape: (usize, usize), spacing: (f64, f64), u: &[f64], out: &mut [f64]) {
    let (n0, n1) = shape;
    let (h0, h1) = spacing;
    let (ih0, ih1) = (1.0 / (h0 * h0), 1.0 / (h1 * h1));
    for i in 0..n0 {
        for j in 0..n1 {
            let at = i * n1 + j;
            let up = if i == 0 { u[n1 + j] } else { u[at - n1] };
            let down = if i == n0 - 1 { u[at - n1] } else { u[at + n1] };
            let left = if j == 0 { u[at + 1] } else { u[at - 1] };
            let right = if j == n1 - 1 { u[at - 1] } else { u[at + 1] };
            out[at] = (up + down - 2.0 * u[at]) * ih0 + (left + right - 2.0 * u[at]) * ih1;
        }
    }
}

/// Solve `(I − dt·ε²·Δ) x = b` by conjugate gradients in the
/// trapezoid-weighted inner product.
fn solve_implicit(
    shape: (usize, usize),
    spacing: (f64, f64),
    weights: &[f64],
    coeff: f64,
    b: &[f64],
    x: &mut Vec<f64>,
) {
    let n = b.len();
    let apply = |v: &[f64], out: &mut Vec<f64>, lap: &mut Vec<f64>| {
        laplacian(shape, spacing, v, lap);
        out.clear();
        out.extend(v.iter().zip(lap.iter()).map(|(&vi, &li)| vi - coeff * li));
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(weights)
            .map(|((&ai, &bi), &wi)| wi * ai * bi)
            .sum()
    };
    let mut lap = vec![0.0; n];
    let mut ax = Vec::with_capacity(n);
    apply(x, &mut ax, &mut lap);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let b_norm = dot(b, b).max(1e-300);
    for _ in 0..1000 {
        if rs / b_norm < 1e-26 {
            break;
        }
        apply(&p, &mut ax, &mut lap);
        let alpha = rs / dot(&p, &ax);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// Result of a reference solve: snapshots and the per-step energy trace.
#[derive(Debug, Clone)]
pub struct AllenCahnSolution {
    pub snapshots: Vec<ScalarField>,
    pub energies: Vec<f64>,
}

/// Run the semi-implicit scheme and return snapshots at the requested
/// times together with the discrete energy after every step.
pub fn allen_cahn_solve(spec: &AllenCahnSpec) -> Result<AllenCahnSolution> {
    let grid = spec.grid();
    let shape = (spec.n_nodes, spec.n_nodes);
    let spacing = (grid.axes()[0].spacing(), grid.axes()[1].spacing());
    let weights = grid.quad_weights();
    let coeff = spec.dt * spec.epsilon * spec.epsilon;

    let mut phi: Vec<f64> = (0..grid.node_count())
        .map(|flat| {
            let p = grid.node(flat);
            spec.initial_condition(p[0], p[1])
        })
        .collect();

    let energy_of = |phi: &[f64]| -> Result<f64> {
        let (e, _, _) = allen_cahn_energy_of_values(&grid, spec.epsilon, phi)?;
        Ok(e)
    };

    let mut energies = vec![energy_of(&phi)?];
    let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());
    let mut t = 0.0;
    let mut b = vec![0.0; phi.len()];
    for (k, &t_target) in spec.snapshot_times.iter().enumerate() {
        while t + 0.5 * spec.dt < t_target {
            for i in 0..phi.len() {
                let p = phi[i];
                b[i] = p + spec.dt * (p - p * p * p);
            }
            let mut next = phi.clone();
            solve_implicit(shape, spacing, &weights, coeff, &b, &mut next);
            phi = next;
            t += spec.dt;
            let e = energy_of(&phi)?;
            let last = *energies.last().unwrap();
            if e > last + 1e-8 {
                return Err(Error::EnergyIncrease {
                    step: energies.len(),
                    increase: e - last,
                });
            }
            energies.push(e);
        }
        let mut field = ScalarField::new(grid.clone(), phi.clone())?;
        field.time_index = Some(k);
        snapshots.push(field);
    }
    Ok(AllenCahnSolution {
        snapshots,
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> AllenCahnSpec {
        AllenCahnSpec {
            epsilon: 0.05,
            n_nodes: 65,
            dt: 0.05,
            interface_width: AllenCahnSpec::sharp_interface_width(0.05),
            snapshot_times: vec![0.0, 0.5, 1.0],
        }
    }

    #[test]
    fn constant_plus_one_is_stationary() {
        let mut spec = small_spec();
        spec.interface_width = f64::INFINITY; // tanh(0⁺) ≈ 0 — override below
        let grid = spec.grid();
        // Drive the solver directly from φ ≡ 1 by hijacking the IC width:
        // use a spec whose IC is exactly 1 everywhere.
        let shape = (spec.n_nodes, spec.n_nodes);
        let spacing = (grid.axes()[0].spacing(), grid.axes()[1].spacing());
        let weights = grid.quad_weights();
        let coeff = spec.dt * spec.epsilon * spec.epsilon;
        let mut phi = vec![1.0; grid.node_count()];
        for _ in 0..10 {
            let b: Vec<f64> = phi
                .iter()
                .map(|&p| p + spec.dt * (p - p * p * p))
                .collect();
            let mut next = phi.clone();
            solve_implicit(shape, spacing, &weights, coeff, &b, &mut next);
            phi = next;
        }
        assert!(phi.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_field_preserved_by_odd_symmetry() {
        let spec = small_spec();
        let grid = spec.grid();
        let shape = (spec.n_nodes, spec.n_nodes);
        let spacing = (grid.axes()[0].spacing(), grid.axes()[1].spacing());
        let weights = grid.quad_weights();
        let coeff = spec.dt * spec.epsilon * spec.epsilon;
        let mut phi = vec![0.0; grid.node_count()];
        let b: Vec<f64> = phi.iter().map(|&p| p + spec.dt * (p - p * p * p)).collect();
        let mut next = phi.clone();
        solve_implicit(shape, spacing, &weights, coeff, &b, &mut next);
        phi = next;
        assert!(phi.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn energy_never_increases() {
        let solution = allen_cahn_solve(&small_spec()).unwrap();
        for w in solution.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "energy rose from {} to {}", w[0], w[1]);
        }
        // The circular interface must actually shrink the energy.
        assert!(solution.energies.last().unwrap() < &solution.energies[0]);
    }

    #[test]
    fn interface_circle_shrinks() {
        let solution = allen_cahn_solve(&small_spec()).unwrap();
        // The positive-phase area (φ > 0) shrinks under curvature flow.
        let area = |f: &ScalarField| f.values().iter().filter(|&&v| v > 0.0).count();
        let a0 = area(&solution.snapshots[0]);
        let a_end = area(solution.snapshots.last().unwrap());
        assert!(a_end < a0, "area {a0} → {a_end}");
    }

    #[test]
    fn flat_default_width_gives_near_uniform_field() {
        // The verbatim width parameter (50) collapses tanh to ≈ 0.007
        // everywhere: the field is essentially flat.
        let spec = AllenCahnSpec::default();
        let grid = spec.grid();
        let values: Vec<f64> = (0..grid.node_count())
            .map(|flat| {
                let p = grid.node(flat);
                spec.initial_condition(p[0], p[1])
            })
            .collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.06, "spread {spread}");
    }
}
