//! Gaussian mixtures (diagonal covariance), the Beta density and the
//! time-dependent Gaussian test function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::special::ln_beta;

/// A mixture of diagonal-covariance Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub weights: Vec<f64>,
    /// Component means, `components × dim`.
    pub means: Vec<Vec<f64>>,
    /// Diagonal covariance entries (variances), `components × dim`.
    pub variances: Vec<Vec<f64>>,
}

impl GaussianMixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            weights,
            means,
            variances,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 || self.means.len() != n || self.variances.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} weights, {} means, {} variances",
                n,
                self.means.len(),
                self.variances.len()
            )));
        }
        let d = self.means[0].len();
        for (m, v) in self.means.iter().zip(&self.variances) {
            if m.len() != d || v.len() != d {
                return Err(Error::ShapeMismatch("inconsistent component dimensions".into()));
            }
            if v.iter().any(|&s| s <= 0.0) {
                return Err(Error::InvalidConfig("variances must be positive".into()));
            }
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidConfig("mixture weights must be nonnegative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Mixture density at a point.
    pub fn density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut p = 0.0;
        for ((w, mu), var) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            let mut log_comp = 0.0;
            for a in 0..x.len() {
                let z = x[a] - mu[a];
                log_comp += -0.5 * z * z / var[a]
                    - 0.5 * (2.0 * std::f64::consts::PI * var[a]).ln();
            }
            p += w * log_comp.exp();
        }
        p
    }

    /// Density values at every node of `grid`.
    pub fn field_on(&self, grid: &Grid) -> Result<ScalarField> {
        self.validate()?;
        ScalarField::from_fn(grid.clone(), |x| self.density(x))
    }

    /// Exact marginal over a subset of axes: for diagonal covariances this
    /// is the mixture of the corresponding coordinate blocks.
    pub fn marginal(&self, axes: &[usize]) -> Result<Self> {
        let take = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| axes.iter().map(|&a| r[a]).collect())
                .collect()
        };
        Self::new(self.weights.clone(), take(&self.means), take(&self.variances))
    }

    /// Unimodal reference: mean 1, standard deviation 1/5.
    pub fn unimodal_1d() -> Self {
        Self::new(vec![1.0], vec![vec![1.0]], vec![vec![0.2 * 0.2]]).unwrap()
    }

    /// Bimodal reference: modes at 1/4 (σ = 1/14) and 1/2 (σ = 1/20).
    pub fn bimodal_1d() -> Self {
        Self::new(
            vec![0.5, 0.5],
            vec![vec![0.25], vec![0.5]],
            vec![vec![(1.0 / 14.0f64).powi(2)], vec![(1.0 / 20.0f64).powi(2)]],
        )
        .unwrap()
    }

    /// Trimodal reference: modes at 1/4, 1/2 and 3/4.
    pub fn trimodal_1d() -> Self {
        let third = 1.0 / 3.0;
        Self::new(
            vec![third, third, 1.0 - 2.0 * third],
            vec![vec![0.25], vec![0.5], vec![0.75]],
            vec![
                vec![(1.0 / 25.0f64).powi(2)],
                vec![(1.0 / 20.0f64).powi(2)],
                vec![(1.0 / 20.0f64).powi(2)],
            ],
        )
        .unwrap()
    }

    /// Quad-modal reference: means 1/5, 2/5, 3/5, 4/5.
    pub fn quadmodal_1d() -> Self {
        Self::new(
            vec![0.25, 0.25, 0.25, 0.25],
            vec![vec![0.2], vec![0.4], vec![0.6], vec![0.8]],
            vec![
                vec![(1.0 / 14.0f64).powi(2)],
                vec![(1.0 / 20.0f64).powi(2)],
                vec![(1.0 / 20.0f64).powi(2)],
                vec![(1.0 / 14.0f64).powi(2)],
            ],
        )
        .unwrap()
    }

    /// Three-component 5-dimensional reference mixture.
    pub fn mixture_5d() -> Self {
        Self::new(
            vec![0.4, 0.3, 0.3],
            vec![
                vec![0.05, 0.15, 0.05, 0.15, 0.05],
                vec![0.2, 0.4, 0.2, 0.8, 0.2],
                vec![0.8, 0.2, 0.4, 0.2, 0.4],
            ],
            vec![
                vec![0.1, 0.4, 0.2, 0.3, 0.15],
                vec![0.15, 0.05, 0.15, 0.05, 0.15],
                vec![0.05, 0.15, 0.1, 0.2, 0.25],
            ],
        )
        .unwrap()
    }
}

/// Normalized Beta density `x^{α−1}(1−x)^{β−1} / B(α, β)` on `0 < x < 1`.
pub fn beta_pdf(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "beta parameters must be positive, got α = {alpha}, β = {beta}"
        )));
    }
    if x <= 0.0 || x >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "beta density is defined on the open interval, got x = {x}"
        )));
    }
    Ok(((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)).exp())
}

/// Time-dependent (unnormalized) Gaussian:
/// `A(t) exp(−(x−μ(t))²/(2σ(t)²))` with oscillating amplitude, mean and
/// width on `t ∈ [0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGaussianSpec {
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for TimeGaussianSpec {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 2.0,
        }
    }
}

impl TimeGaussianSpec {
    pub fn amplitude(&self, t: f64) -> f64 {
        3.0 + 0.5 * (20.0 * t).sin()
    }

    pub fn mean(&self, t: f64) -> f64 {
        0.5 + 0.1 * (10.0 * t).cos()
    }

    pub fn sigma(&self, t: f64) -> f64 {
        0.05 + 0.01 * (10.0 * t).sin()
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        let mu = self.mean(t);
        let s = self.sigma(t);
        self.amplitude(t) * (-(x - mu) * (x - mu) / (2.0 * s * s)).exp()
    }
}

/// Free-function form of [`TimeGaussianSpec::value`].
pub fn time_gaussian(spec: &TimeGaussianSpec, x: f64, t: f64) -> f64 {
    spec.value(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::trapezoid_integrate;

    #[test]
    fn unimodal_peak_value() {
        // Single component N(1, (1/5)²) at its mode: 5/√(2π).
        let spec = GaussianMixtureSpec::unimodal_1d();
        let expected = 5.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((spec.density(&[1.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn mixture_integrates_to_one_on_wide_box() {
        let spec = GaussianMixtureSpec::bimodal_1d();
        let grid = Grid::line(-1.0, 2.0, 4001).unwrap();
        let f = spec.field_on(&grid).unwrap();
        assert!((trapezoid_integrate(&f).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_bimodal_reflects() {
        let spec = GaussianMixtureSpec::new(
            vec![0.5, 0.5],
            vec![vec![0.3], vec![0.7]],
            vec![vec![0.01], vec![0.01]],
        )
        .unwrap();
        let delta = 0.13;
        let a = spec.density(&[0.3 + delta]);
        let b = spec.density(&[0.7 - delta]);
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(GaussianMixtureSpec::new(
            vec![0.5, 0.4],
            vec![vec![0.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .is_err());
    }

    #[test]
    fn five_dim_marginal_matches_numeric_integration() {
        // Integrate the 5-d mixture over x₃, x₄, x₅ on a wide box and
        // compare against the analytic 2-d sub-block mixture.
        let spec = GaussianMixtureSpec::mixture_5d();
        let marginal = spec.marginal(&[0, 1]).unwrap();
        let inner = Grid::new(vec![
            crate::grid::Axis::new("x3", -4.0, 5.0, 81).unwrap(),
            crate::grid::Axis::new("x4", -4.0, 5.0, 81).unwrap(),
            crate::grid::Axis::new("x5", -4.0, 5.0, 81).unwrap(),
        ])
        .unwrap();
        for &(x1, x2) in &[(0.1, 0.2), (0.5, 0.5), (0.8, 0.3)] {
            let vals: Vec<f64> = (0..inner.node_count())
                .map(|flat| {
                    let inner_x = inner.node(flat);
                    spec.density(&[x1, x2, inner_x[0], inner_x[1], inner_x[2]])
                })
                .collect();
            let f = ScalarField::new(inner.clone(), vals).unwrap();
            let integrated = trapezoid_integrate(&f).unwrap();
            let analytic = marginal.density(&[x1, x2]);
            assert!(
                (integrated - analytic).abs() < 1e-4 * analytic.max(1e-3),
                "at ({x1}, {x2}): {integrated} vs {analytic}"
            );
        }
    }

    #[test]
    fn beta_half_half_is_arcsine_at_midpoint() {
        let v = beta_pdf(0.5, 0.5, 0.5).unwrap();
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn beta_uniform_case() {
        for &x in &[0.1, 0.42, 0.9] {
            assert!((beta_pdf(1.0, 1.0, x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_symmetric_when_parameters_equal() {
        for &x in &[0.05, 0.3, 0.49] {
            let a = beta_pdf(0.5, 0.5, x).unwrap();
            let b = beta_pdf(0.5, 0.5, 1.0 - x).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_rejects_bad_parameters_and_endpoints() {
        assert!(beta_pdf(0.0, 1.0, 0.5).is_err());
        assert!(beta_pdf(1.0, -1.0, 0.5).is_err());
        assert!(beta_pdf(0.5, 0.5, 0.0).is_err());
        assert!(beta_pdf(0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn time_gaussian_initial_peak() {
        let spec = TimeGaussianSpec::default();
        // At t = 0: μ = 0.6, A = 3.
        assert!((spec.mean(0.0) - 0.6).abs() < 1e-15);
        assert!((time_gaussian(&spec, 0.6, 0.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn time_gaussian_peak_is_amplitude() {
        let spec = TimeGaussianSpec::default();
        for &t in &[0.3, 0.9, 1.7] {
            let mu = spec.mean(t);
            assert!((spec.value(mu, t) - spec.amplitude(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn time_gaussian_sigma_at_special_time() {
        // t = π/10 zeroes sin(10t), so σ = 0.05 exactly.
        let spec = TimeGaussianSpec::default();
        let t = std::f64::consts::PI / 10.0;
        assert!((spec.sigma(t) - 0.05).abs() < 1e-15);
    }
}
