//! Scalar and probability fields on grids, plus trapezoid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Real values attached to every node of a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    /// Index of the time snapshot this field belongs to, when part of a
    /// time-indexed family.
    pub time_index: Option<usize>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                expected: grid.node_count(),
            });
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { idx, value: v });
            }
        }
        Ok(Self {
            grid,
            values,
            time_index: None,
        })
    }

    /// Build a field by evaluating `f` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let mut values = Vec::with_capacity(grid.node_count());
        for flat in 0..grid.node_count() {
            grid.node_into(flat, &mut x);
            values.push(f(&x));
        }
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.node_count();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A nonnegative [`ScalarField`]; `normalized` records whether its trapezoid
/// integral was brought to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityField {
    field: ScalarField,
    normalized: bool,
}

impl ProbabilityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let field = ScalarField::new(grid, values)?;
        for (idx, &v) in field.values().iter().enumerate() {
            if v < 0.0 {
                return Err(Error::Negative { idx, value: v });
            }
        }
        Ok(Self {
            field,
            normalized: false,
        })
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let field = ScalarField::from_fn(grid, f)?;
        Self::new(field.grid.clone(), field.values)
    }

    pub fn grid(&self) -> &Grid {
        &self.field.grid
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn as_scalar(&self) -> &ScalarField {
        &self.field
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub(crate) fn mark_normalized(mut self) -> Self {
        debug_assert!(
            (trapezoid_integrate(&self.field).unwrap() - 1.0).abs() < 1e-8,
            "normalized flag requires unit mass"
        );
        self.normalized = true;
        self
    }
}

/// Tensor-product trapezoid-rule integral of a field over its grid box.
pub fn trapezoid_integrate(f: &ScalarField) -> Result<f64> {
    // Construction guarantees finite values; re-check to catch mutation
    // through `values_mut`.
    for (idx, &v) in f.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { idx, value: v });
        }
    }
    Ok(integrate_values(f.grid(), f.values()))
}

/// Trapezoid integral of raw node values on `grid`. No validity checks.
///
/// The per-axis spacings are factored out of the node weights and applied
/// once at the end, which keeps constant and linear integrands exact.
pub(crate) fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.node_count());
    let h_product: f64 = grid.axes().iter().map(|a| a.spacing()).product();
    if grid.dim() == 1 {
        let w = grid.axes()[0].unit_trapezoid_weights();
        let sum: f64 = values.iter().zip(&w).map(|(v, w)| v * w).sum();
        return sum * h_product;
    }
    let per_axis: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|a| a.unit_trapezoid_weights())
        .collect();
    let strides = grid.strides();
    let mut total = 0.0;
    for (flat, &v) in values.iter().enumerate() {
        let mut w = v;
        let mut rem = flat;
        for a in 0..grid.dim() {
            let i = rem / strides[a];
            rem %= strides[a];
            w *= per_axis[a][i];
        }
        total += w;
    }
    total * h_product
}

/// Scale a nonnegative field so its trapezoid integral is 1.
pub fn normalize(f: &ScalarField) -> Result<ProbabilityField> {
    for (idx, &v) in f.values().iter().enumerate() {
        if v < 0.0 {
            return Err(Error::Negative { idx, value: v });
        }
    }
    let mass = trapezoid_integrate(f)?;
    if mass <= 0.0 {
        return Err(Error::ZeroMass { mass });
    }
    let values = f.values().iter().map(|v| v / mass).collect();
    Ok(ProbabilityField::new(f.grid().clone(), values)?.mark_normalized())
}

/// Sample counts per state, recorded at one or more snapshot times.
///
/// States may be integer molecule counts or centers of real-valued bins;
/// `counts[k][s]` is the number of trajectories in state `s` at snapshot `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHistogram {
    pub states: Vec<f64>,
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub total_trajectories: u64,
}

impl SampleHistogram {
    pub fn new(
        states: Vec<f64>,
        times: Vec<f64>,
        counts: Vec<Vec<u64>>,
        total_trajectories: u64,
    ) -> Result<Self> {
        if counts.len() != times.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} snapshots of counts for {} times",
                counts.len(),
                times.len()
            )));
        }
        for (snapshot, row) in counts.iter().enumerate() {
            if row.len() != states.len() {
                return Err(Error::ShapeMismatch(format!(
                    "snapshot {snapshot} has {} states, expected {}",
                    row.len(),
                    states.len()
                )));
            }
            let sum: u64 = row.iter().sum();
            if sum != total_trajectories {
                return Err(Error::HistogramCount {
                    snapshot,
                    got: sum,
                    expected: total_trajectories,
                });
            }
        }
        Ok(Self {
            states,
            times,
            counts,
            total_trajectories,
        })
    }

    /// Empirical probability mass per state at snapshot `k`.
    pub fn masses(&self, k: usize) -> Vec<f64> {
        let n = self.total_trajectories as f64;
        self.counts[k].iter().map(|&c| c as f64 / n).collect()
    }

    /// Empirical mean state at snapshot `k`.
    pub fn mean(&self, k: usize) -> f64 {
        let n = self.total_trajectories as f64;
        self.counts[k]
            .iter()
            .zip(&self.states)
            .map(|(&c, &s)| c as f64 * s)
            .sum::<f64>()
            / n
    }

    /// Standard error of the mean state at snapshot `k`.
    pub fn mean_standard_error(&self, k: usize) -> f64 {
        let n = self.total_trajectories as f64;
        let mean = self.mean(k);
        let var = self.counts[k]
            .iter()
            .zip(&self.states)
            .map(|(&c, &s)| c as f64 * (s - mean).powi(2))
            .sum::<f64>()
            / n;
        (var / n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn constant_one_integrates_to_length() {
        let f = ScalarField::constant(Grid::unit_line(11), 1.0).unwrap();
        assert_eq!(trapezoid_integrate(&f).unwrap(), 1.0);
    }

    #[test]
    fn linear_integrand_is_exact() {
        let f = ScalarField::from_fn(Grid::unit_line(101), |x| x[0]).unwrap();
        assert!((trapezoid_integrate(&f).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exponential_matches_antiderivative() {
        // Oracle: ∫_0^10 e^{-x} dx = 1 - e^{-10}. Composite trapezoid
        // error is h²/12·(f'(10)-f'(0)) ≈ 2.1e-6 at h = 0.005.
        let grid = Grid::line(0.0, 10.0, 2001).unwrap();
        let f = ScalarField::from_fn(grid, |x| (-x[0]).exp()).unwrap();
        let exact = 1.0 - (-10.0f64).exp();
        assert!((trapezoid_integrate(&f).unwrap() - exact).abs() < 3e-6);
    }

    #[test]
    fn non_finite_values_rejected() {
        let mut f = ScalarField::constant(Grid::unit_line(3), 1.0).unwrap();
        f.values_mut()[1] = f64::NAN;
        assert!(matches!(
            trapezoid_integrate(&f),
            Err(Error::NonFinite { idx: 1, .. })
        ));
    }

    #[test]
    fn integration_is_linear() {
        let grid = Grid::line(0.0, 2.0, 57).unwrap();
        let f = ScalarField::from_fn(grid.clone(), |x| x[0].sin()).unwrap();
        let g = ScalarField::from_fn(grid.clone(), |x| x[0] * x[0]).unwrap();
        let (alpha, beta) = (1.7, -0.3);
        let combined = ScalarField::new(
            grid,
            f.values()
                .iter()
                .zip(g.values())
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
        .unwrap();
        let lhs = trapezoid_integrate(&combined).unwrap();
        let rhs = alpha * trapezoid_integrate(&f).unwrap() + beta * trapezoid_integrate(&g).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn normalize_constant_two() {
        let f = ScalarField::constant(Grid::unit_line(11), 2.0).unwrap();
        let p = normalize(&f).unwrap();
        assert!(p.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(p.is_normalized());
    }

    #[test]
    fn normalize_linear_gives_two_x() {
        let f = ScalarField::from_fn(Grid::unit_line(101), |x| x[0]).unwrap();
        let p = normalize(&f).unwrap();
        let grid = p.grid().clone();
        for (flat, &v) in p.values().iter().enumerate() {
            let x = grid.node(flat)[0];
            assert!((v - 2.0 * x).abs() < 1e-12, "at x={x}: {v}");
        }
    }

    #[test]
    fn normalize_gaussian_bump_unit_mass() {
        let grid = Grid::line(-3.0, 3.0, 301).unwrap();
        let f = ScalarField::from_fn(grid, |x| 0.7 * (-x[0] * x[0]).exp()).unwrap();
        let p = normalize(&f).unwrap();
        let mass = trapezoid_integrate(p.as_scalar()).unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normalize_rejects_zero_mass() {
        let f = ScalarField::constant(Grid::unit_line(5), 0.0).unwrap();
        assert!(matches!(normalize(&f), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn histogram_counts_must_sum_to_total() {
        let err = SampleHistogram::new(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![3, 4]],
            8,
        );
        assert!(matches!(err, Err(Error::HistogramCount { .. })));
        let ok = SampleHistogram::new(vec![0.0, 1.0], vec![0.0], vec![vec![3, 5]], 8);
        assert!(ok.is_ok());
    }

    #[test]
    fn two_dim_integral_separates() {
        let grid = Grid::new(vec![
            Axis::new("x", 0.0, 1.0, 41).unwrap(),
            Axis::new("y", 0.0, 2.0, 81).unwrap(),
        ])
        .unwrap();
        // ∫∫ x·y = (1/2)(4/2) = 1
        let f = ScalarField::from_fn(grid, |x| x[0] * x[1]).unwrap();
        assert!((trapezoid_integrate(&f).unwrap() - 1.0).abs() < 1e-12);
    }
}
