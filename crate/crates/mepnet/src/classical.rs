//! Classical maximum-entropy solves: exponential-family densities and the
//! convex dual problem for the Lagrange multipliers.
//!
//! Maximizing Shannon entropy subject to `∫ p f_i = f̃_i` yields
//! `p(x) = exp(Σ λ_i f_i(x)) / Z(λ)`. The multipliers minimize the smooth
//! convex dual `ln Z(λ) − Σ λ_i f̃_i`, which this module solves by damped
//! Newton iteration; the Hessian is the feature covariance under the
//! current density and comes out of the same quadrature pass as the
//! gradient. Minimum relative entropy against a prior `q` reuses the same
//! machinery with `ln q` as a base log-weight and the feature signs
//! flipped.

use crate::error::{Error, Result};
use crate::features::{eval_library, FeatureLibrary, FeatureMatrix, MomentVector};
use crate::field::{integrate_values, ProbabilityField};
use crate::grid::Grid;

/// An exponential-family density: multipliers paired with a feature
/// library on a support grid.
#[derive(Debug, Clone)]
pub struct ExponentialFamily {
    pub lib: FeatureLibrary,
    pub multipliers: Vec<f64>,
    pub support: Grid,
}

impl ExponentialFamily {
    pub fn new(lib: FeatureLibrary, multipliers: Vec<f64>, support: Grid) -> Result<Self> {
        if multipliers.len() != lib.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} multipliers for {} features",
                multipliers.len(),
                lib.len()
            )));
        }
        Ok(Self {
            lib,
            multipliers,
            support,
        })
    }

    /// Family with no features: the uniform density on the support.
    pub fn featureless(support: Grid) -> Self {
        Self {
            lib: FeatureLibrary::binomial(0, support.dim()),
            multipliers: vec![0.0],
            support,
        }
    }
}

/// Newton iterate of the dual solve: current multipliers, moment residual
/// and feature covariance.
#[derive(Debug, Clone)]
pub struct DualState {
    pub multipliers: Vec<f64>,
    /// `E_λ[f] − f̃` per feature.
    pub gradient: Vec<f64>,
    /// Feature covariance under the current density, row-major `M × M`.
    pub hessian: Vec<f64>,
    pub iterations: usize,
}

/// Options for [`solve_dual`] and [`min_relative_entropy`].
#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    /// Convergence threshold on `‖E_λ[f] − f̃‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Exponent sums, log-partition, moments and covariance in one quadrature
/// pass over the support grid.
struct DualQuadrature<'a> {
    features: &'a FeatureMatrix,
    weights: Vec<f64>,
    base_log_weight: Option<&'a [f64]>,
}

struct DualEvaluation {
    log_partition: f64,
    moments: Vec<f64>,
    covariance: Vec<f64>,
    /// Normalized density values on the grid.
    density: Vec<f64>,
    max_exponent: f64,
}

impl<'a> DualQuadrature<'a> {
    fn new(features: &'a FeatureMatrix, grid: &Grid, base_log_weight: Option<&'a [f64]>) -> Self {
        Self {
            features,
            weights: grid.quad_weights(),
            base_log_weight,
        }
    }

    fn exponents(&self, multipliers: &[f64]) -> Result<Vec<f64>> {
        let n = self.features.n_nodes;
        let mut s = match self.base_log_weight {
            Some(b) => b.to_vec(),
            None => vec![0.0; n],
        };
        for (i, &lambda) in multipliers.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            for (sn, &fin) in s.iter_mut().zip(self.features.row(i)) {
                *sn += lambda * fin;
            }
        }
        let max_exponent = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max_exponent.is_finite() {
            return Err(Error::ExponentOverflow { max_exponent });
        }
        Ok(s)
    }

    fn log_partition(&self, multipliers: &[f64]) -> Result<f64> {
        let s = self.exponents(multipliers)?;
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s
            .iter()
            .zip(&self.weights)
            .map(|(&sn, &wn)| wn * (sn - m).exp())
            .sum();
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::ExponentOverflow { max_exponent: m });
        }
        Ok(m + z.ln())
    }

    fn evaluate(&self, multipliers: &[f64]) -> Result<DualEvaluation> {
        let s = self.exponents(multipliers)?;
        let m_feat = self.features.n_features;
        let max_exponent = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = s.iter().map(|&sn| (sn - max_exponent).exp()).collect();
        let z: f64 = shifted
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| w * e)
            .sum();
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::ExponentOverflow { max_exponent });
        }
        let density: Vec<f64> = shifted.iter().map(|&e| e / z).collect();
        // First moments.
        let mut moments = vec![0.0; m_feat];
        for i in 0..m_feat {
            let row = self.features.row(i);
            moments[i] = row
                .iter()
                .zip(&density)
                .zip(&self.weights)
                .map(|((&f, &p), &w)| w * p * f)
                .sum();
        }
        // Covariance E[f fᵀ] − E[f]E[f]ᵀ.
        let mut covariance = vec![0.0; m_feat * m_feat];
        for i in 0..m_feat {
            let fi = self.features.row(i);
            for j in i..m_feat {
                let fj = self.features.row(j);
                let second: f64 = fi
                    .iter()
                    .zip(fj)
                    .zip(density.iter().zip(&self.weights))
                    .map(|((&a, &b), (&p, &w))| w * p * a * b)
                    .sum();
                let c = second - moments[i] * moments[j];
                covariance[i * m_feat + j] = c;
                covariance[j * m_feat + i] = c;
            }
        }
        Ok(DualEvaluation {
            log_partition: max_exponent + z.ln(),
            moments,
            covariance,
            density,
            max_exponent,
        })
    }
}

/// Density `exp(Σ λ_i f_i)/Z` of an exponential family, normalized on its
/// support grid by the trapezoid rule.
pub fn density_from_multipliers(fam: &ExponentialFamily) -> Result<ProbabilityField> {
    let features = eval_library(&fam.lib, &fam.support)?;
    let quad = DualQuadrature::new(&features, &fam.support, None);
    let eval = quad.evaluate(&fam.multipliers)?;
    let p = ProbabilityField::new(fam.support.clone(), eval.density)?;
    Ok(p.mark_normalized())
}

/// Result of a dual solve: the family plus the final Newton state.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub family: ExponentialFamily,
    pub state: DualState,
}

fn newton_minimize(
    quad: &DualQuadrature,
    targets: &[f64],
    opts: DualOptions,
) -> Result<DualState> {
    let m = targets.len();
    let mut lambda = vec![0.0; m];
    let dual_value = |lnz: f64, lambda: &[f64]| -> f64 {
        lnz - lambda.iter().zip(targets).map(|(&l, &t)| l * t).sum::<f64>()
    };
    let mut eval = quad.evaluate(&lambda)?;
    let mut dual = dual_value(eval.log_partition, &lambda);
    for iter in 0..opts.max_iter {
        let gradient: Vec<f64> = eval
            .moments
            .iter()
            .zip(targets)
            .map(|(&e, &t)| e - t)
            .collect();
        let residual = gradient.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if residual <= opts.tol {
            return Ok(DualState {
                multipliers: lambda,
                gradient,
                hessian: eval.covariance,
                iterations: iter,
            });
        }
        let neg_grad: Vec<f64> = gradient.iter().map(|g| -g).collect();
        let step = crate::numerics::cholesky_solve(&eval.covariance, &neg_grad)?;
        // Backtracking line search: halve until the dual stops increasing.
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..30 {
            let candidate: Vec<f64> = lambda
                .iter()
                .zip(&step)
                .map(|(&l, &d)| l + t * d)
                .collect();
            if let Ok(lnz) = quad.log_partition(&candidate) {
                let cand_dual = dual_value(lnz, &candidate);
                if cand_dual <= dual + 1e-12 * (1.0 + dual.abs()) {
                    lambda = candidate;
                    eval = quad.evaluate(&lambda)?;
                    dual = dual_value(eval.log_partition, &lambda);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::DualNoConvergence {
                tol: opts.tol,
                max_iter: opts.max_iter,
                residual,
            });
        }
    }
    let gradient: Vec<f64> = eval
        .moments
        .iter()
        .zip(targets)
        .map(|(&e, &t)| e - t)
        .collect();
    let residual = gradient.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    Err(Error::DualNoConvergence {
        tol: opts.tol,
        max_iter: opts.max_iter,
        residual,
    })
}

/// Solve for the multipliers matching `target` moments on `support`.
///
/// Minimizes the convex dual `ln Z(λ) − Σ λ_i f̃_i` by damped Newton from
/// `λ = 0`; on return `‖E_λ[f] − f̃‖_∞ ≤ opts.tol`.
pub fn solve_dual(
    lib: &FeatureLibrary,
    target: &MomentVector,
    support: &Grid,
    opts: DualOptions,
) -> Result<DualSolution> {
    let targets = &target.values[0];
    if targets.len() != lib.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} target moments for {} features",
            targets.len(),
            lib.len()
        )));
    }
    let features = eval_library(lib, support)?;
    let quad = DualQuadrature::new(&features, support, None);
    let state = newton_minimize(&quad, targets, opts)?;
    let family = ExponentialFamily::new(lib.clone(), state.multipliers.clone(), support.clone())?;
    Ok(DualSolution { family, state })
}

/// Minimum relative entropy against a positive prior `q`: returns
/// `q·exp(−Σ λ_i f_i)/Z_q` with moments matched to `opts.tol`.
///
/// With a uniform prior this degenerates to [`solve_dual`] with the signs
/// of the multipliers flipped.
pub fn min_relative_entropy(
    lib: &FeatureLibrary,
    target: &MomentVector,
    prior: &ProbabilityField,
    opts: DualOptions,
) -> Result<ProbabilityField> {
    let support = prior.grid();
    for (idx, &q) in prior.values().iter().enumerate() {
        if q <= 0.0 {
            return Err(Error::SupportViolation { idx, p: 1.0, q });
        }
    }
    let targets = &target.values[0];
    if targets.len() != lib.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} target moments for {} features",
            targets.len(),
            lib.len()
        )));
    }
    // p = q e^{−Σλf}/Z is the exponential family with features −f over the
    // base log-weight ln q; matching E_p[f] = f̃ means matching
    // E_p[−f] = −f̃ in that family.
    let features = eval_library(lib, support)?;
    let negated = FeatureMatrix::from_raw(
        features.n_features,
        features.n_nodes,
        features.values().iter().map(|v| -v).collect(),
    );
    let log_prior: Vec<f64> = prior.values().iter().map(|&q| q.ln()).collect();
    let quad = DualQuadrature::new(&negated, support, Some(&log_prior));
    let neg_targets: Vec<f64> = targets.iter().map(|&t| -t).collect();
    let state = newton_minimize(&quad, &neg_targets, opts)?;
    let eval = quad.evaluate(&state.multipliers)?;
    let p = ProbabilityField::new(support.clone(), eval.density)?;
    Ok(p.mark_normalized())
}

impl ExponentialFamily {
    /// Largest exponent `Σ λ_i f_i` over the support; useful when reporting
    /// overflow.
    pub fn max_exponent(&self) -> Result<f64> {
        let features = eval_library(&self.lib, &self.support)?;
        let quad = DualQuadrature::new(&features, &self.support, None);
        Ok(quad.evaluate(&self.multipliers)?.max_exponent)
    }
}

/// Trapezoid integral of `f · p` for a raw integrand on the same grid.
pub fn expectation(p: &ProbabilityField, f: impl FnMut(&[f64]) -> f64) -> f64 {
    let grid = p.grid();
    let mut f = f;
    let mut x = vec![0.0; grid.dim()];
    let integrand: Vec<f64> = p
        .values()
        .iter()
        .enumerate()
        .map(|(flat, &pv)| {
            grid.node_into(flat, &mut x);
            pv * f(&x)
        })
        .collect();
    integrate_values(grid, &integrand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpec;

    fn poly_lib(powers: &[u32]) -> FeatureLibrary {
        FeatureLibrary::new(
            powers
                .iter()
                .map(|&p| FeatureSpec::Polynomial { powers: vec![p] })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_multipliers_give_uniform() {
        let fam = ExponentialFamily::new(poly_lib(&[1]), vec![0.0], Grid::unit_line(41)).unwrap();
        let p = density_from_multipliers(&fam).unwrap();
        for &v in p.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_multipliers_reproduce_standard_normal() {
        let lib = poly_lib(&[1, 2]);
        let fam = ExponentialFamily::new(lib, vec![0.0, -0.5], Grid::line(-8.0, 8.0, 1601).unwrap())
            .unwrap();
        let p = density_from_multipliers(&fam).unwrap();
        let grid = p.grid().clone();
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut max_err = 0.0f64;
        for (flat, &v) in p.values().iter().enumerate() {
            let x = grid.node(flat)[0];
            max_err = max_err.max((v - norm * (-0.5 * x * x).exp()).abs());
        }
        assert!(max_err < 1e-6, "sup-norm error {max_err}");
    }

    #[test]
    fn exponential_multiplier_reproduces_rate_half() {
        let lib = poly_lib(&[1]);
        let fam =
            ExponentialFamily::new(lib, vec![-0.5], Grid::line(0.0, 40.0, 8001).unwrap()).unwrap();
        let p = density_from_multipliers(&fam).unwrap();
        let grid = p.grid().clone();
        let mut max_err = 0.0f64;
        for (flat, &v) in p.values().iter().enumerate() {
            let x = grid.node(flat)[0];
            max_err = max_err.max((v - 0.5 * (-0.5 * x).exp()).abs());
        }
        assert!(max_err < 1e-6, "sup-norm error {max_err}");
    }

    #[test]
    fn overflowing_exponent_reports_error() {
        let lib = poly_lib(&[1]);
        let fam = ExponentialFamily::new(
            lib,
            vec![f64::MAX],
            Grid::line(0.0, 2.0, 11).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            density_from_multipliers(&fam),
            Err(Error::ExponentOverflow { .. })
        ));
    }

    #[test]
    fn dual_solve_uniform_target_gives_zero_multiplier() {
        let lib = poly_lib(&[1]);
        let target = MomentVector::static_moments(vec![0.5]);
        let sol = solve_dual(&lib, &target, &Grid::unit_line(101), DualOptions::default()).unwrap();
        assert!(sol.family.multipliers[0].abs() < 1e-8);
    }

    #[test]
    fn dual_solve_recovers_standard_normal_multipliers() {
        let lib = poly_lib(&[1, 2]);
        let target = MomentVector::static_moments(vec![0.0, 1.0]);
        let grid = Grid::line(-8.0, 8.0, 1601).unwrap();
        let sol = solve_dual(&lib, &target, &grid, DualOptions::default()).unwrap();
        assert!(sol.family.multipliers[0].abs() < 1e-6);
        assert!((sol.family.multipliers[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn dual_solve_errors_on_redundant_features() {
        // x and 2x are linearly dependent: the covariance is singular.
        let lib = FeatureLibrary::new(vec![
            FeatureSpec::Polynomial { powers: vec![1] },
            FeatureSpec::Exponential { rates: vec![0.0] },
        ])
        .unwrap();
        // exp(-0·x) ≡ 1 is constant: covariance row is zero.
        let target = MomentVector::static_moments(vec![0.3, 1.0]);
        let err = solve_dual(&lib, &target, &Grid::unit_line(51), DualOptions::default());
        assert!(matches!(err, Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn min_relative_entropy_uniform_prior_matches_dual_solve() {
        let lib = poly_lib(&[1, 2]);
        let target = MomentVector::static_moments(vec![0.45, 0.28]);
        let grid = Grid::unit_line(201);
        let sol = solve_dual(&lib, &target, &grid, DualOptions::default()).unwrap();
        let direct = density_from_multipliers(&sol.family).unwrap();
        let uniform = crate::field::normalize(
            &crate::field::ScalarField::constant(grid, 1.0).unwrap(),
        )
        .unwrap();
        let tilted = min_relative_entropy(&lib, &target, &uniform, DualOptions::default()).unwrap();
        let max_err = direct
            .values()
            .iter()
            .zip(tilted.values())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        assert!(max_err < 1e-8, "densities differ by {max_err}");
    }

    #[test]
    fn min_relative_entropy_empty_library_returns_prior() {
        let grid = Grid::line(-4.0, 4.0, 401).unwrap();
        let prior = ProbabilityField::from_fn(grid.clone(), |x| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        // Zero-feature library is modeled by a single constant feature with
        // target equal to its prior expectation (multiplier stays 0).
        let lib = FeatureLibrary::new(vec![FeatureSpec::Polynomial { powers: vec![0] }]).unwrap();
        let target = MomentVector::static_moments(vec![1.0]);
        let p = min_relative_entropy(&lib, &target, &prior, DualOptions::default()).unwrap();
        let prior_mass = integrate_values(&grid, prior.values());
        let max_err = p
            .values()
            .iter()
            .zip(prior.values())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b / prior_mass).abs()));
        assert!(max_err < 1e-9);
    }

    #[test]
    fn min_relative_entropy_tilts_gaussian_to_target_mean() {
        // Oracle: tilting N(0, σ²) by e^{θx} gives N(θσ², σ²); matching a
        // mean of 1 with σ = 2 needs θ = 1/4, i.e. multiplier λ = −1/4.
        let grid = Grid::line(-16.0, 18.0, 3401).unwrap();
        let sigma2 = 4.0;
        let prior = ProbabilityField::from_fn(grid.clone(), |x| {
            (-(x[0] * x[0]) / (2.0 * sigma2)).exp()
                / (2.0 * std::f64::consts::PI * sigma2).sqrt()
        })
        .unwrap();
        let lib = poly_lib(&[1]);
        let target = MomentVector::static_moments(vec![1.0]);
        let p = min_relative_entropy(&lib, &target, &prior, DualOptions::default()).unwrap();
        let mean = expectation(&p, |x| x[0]);
        assert!((mean - 1.0).abs() < 1e-8);
        let mut max_err = 0.0f64;
        for (flat, &v) in p.values().iter().enumerate() {
            let x = grid.node(flat)[0];
            let exact = (-((x - 1.0) * (x - 1.0)) / (2.0 * sigma2)).exp()
                / (2.0 * std::f64::consts::PI * sigma2).sqrt();
            max_err = max_err.max((v - exact).abs());
        }
        assert!(max_err < 1e-8, "tilted density off by {max_err}");
    }
}
