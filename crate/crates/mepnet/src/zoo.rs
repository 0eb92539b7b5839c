//! Catalog of closed-form maximum-entropy distributions.
//!
//! Each entry records which expectations constrain the fit, maps observed
//! moments to Lagrange multipliers (closed form where available, otherwise
//! a one- or two-dimensional root solve on the gamma/digamma relations),
//! and materializes the resulting density on a truncated support grid.
//!
//! Every entry passes one universal check: numerically re-integrating the
//! constraint observables against the fitted density reproduces the input
//! moments. [`verify_catalog`] runs that check over a canonical parameter
//! set for all entries.

use serde::{Deserialize, Serialize};

use crate::classical::{solve_dual, DualOptions};
use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, MomentVector};
use crate::field::{integrate_values, ProbabilityField};
use crate::grid::Grid;
use crate::numerics::{bisect, bisect_expanding};
use crate::special::{digamma, ln_beta, ln_gamma};

/// Constraint observables that appear in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    One,
    X,
    /// `x^a` for a fixed real exponent.
    XPow(f64),
    LnX,
    LnXSquared,
    LnOneMinusX,
    /// `|x − μ|` around a known center.
    AbsDeviation(f64),
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::X => x,
            Observable::XPow(a) => x.powf(a),
            Observable::LnX => x.ln(),
            Observable::LnXSquared => {
                let l = x.ln();
                l * l
            }
            Observable::LnOneMinusX => (1.0 - x).ln(),
            Observable::AbsDeviation(mu) => (x - mu).abs(),
        }
    }
}

/// One constraint: an observable and its target expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub observable: Observable,
    pub target: f64,
}

/// The fitted density: either node values on a truncated grid or a
/// discrete probability vector over listed states.
#[derive(Debug, Clone)]
pub enum ZooPdf {
    Continuous(ProbabilityField),
    Discrete { states: Vec<f64>, probs: Vec<f64> },
}

/// A catalog entry instantiated from observed moments.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub id: &'static str,
    /// Multipliers `(λ_0, λ_1, …)` in the `e^{λ_0 − 1}` convention, where
    /// the fit has a closed multiplier form.
    pub multipliers: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub pdf: ZooPdf,
}

/// Observed moments, one variant per catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum ZooObservation {
    Uniform { a: f64, b: f64 },
    Exponential { mean: f64 },
    Normal { mean: f64, second_moment: f64 },
    HigherOrder { moments: Vec<f64>, lo: f64, hi: f64 },
    Gamma { mean: f64, mean_ln: f64 },
    Erlang { mean: f64, mean_ln: f64 },
    Beta { mean_ln: f64, mean_ln_one_minus: f64 },
    LogNormal { mean_ln: f64, mean_ln_sq: f64 },
    Laplace { center: f64, mean_abs_dev: f64 },
    Rayleigh { mean_sq: f64, mean_ln: f64 },
    Weibull { exponent: f64, mean_pow: f64, mean_ln: f64 },
    DiscreteUniform { a: i64, b: i64 },
    MaxwellBoltzmann { levels: Vec<f64>, mean: f64 },
    Bernoulli { mean: f64 },
    Geometric { mean: f64 },
}

impl ZooObservation {
    pub fn id(&self) -> &'static str {
        match self {
            ZooObservation::Uniform { .. } => "uniform",
            ZooObservation::Exponential { .. } => "exponential",
            ZooObservation::Normal { .. } => "normal",
            ZooObservation::HigherOrder { .. } => "higher-order",
            ZooObservation::Gamma { .. } => "gamma",
            ZooObservation::Erlang { .. } => "erlang",
            ZooObservation::Beta { .. } => "beta",
            ZooObservation::LogNormal { .. } => "log-normal",
            ZooObservation::Laplace { .. } => "laplace",
            ZooObservation::Rayleigh { .. } => "rayleigh",
            ZooObservation::Weibull { .. } => "weibull",
            ZooObservation::DiscreteUniform { .. } => "discrete-uniform",
            ZooObservation::MaxwellBoltzmann { .. } => "maxwell-boltzmann",
            ZooObservation::Bernoulli { .. } => "bernoulli",
            ZooObservation::Geometric { .. } => "geometric",
        }
    }
}

fn infeasible(distribution: &'static str, reason: impl Into<String>) -> Error {
    Error::InfeasibleMoments {
        distribution,
        reason: reason.into(),
    }
}

fn continuous_pdf(
    lo: f64,
    hi: f64,
    n_nodes: usize,
    f: impl FnMut(&[f64]) -> f64,
) -> Result<ProbabilityField> {
    ProbabilityField::from_fn(Grid::line(lo, hi, n_nodes)?, f)
}

/// `ln z − ψ(z)` is strictly decreasing on `(0, ∞)` with range `(0, ∞)`;
/// solve `ln z − ψ(z) = rhs` for `z`.
fn solve_ln_minus_digamma(what: &'static str, rhs: f64) -> Result<f64> {
    if rhs <= 0.0 || !rhs.is_finite() {
        return Err(Error::NoRoot {
            what,
            lo: f64::NAN,
            hi: f64::NAN,
        });
    }
    let f = |z: f64| z.ln() - digamma(z) - rhs;
    // Bracket: f > 0 for small z, f < 0 for large z.
    let mut lo = 1.0;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-280 {
            return Err(Error::NoRoot { what, lo, hi: 1.0 });
        }
    }
    bisect_expanding(what, f, lo, lo * 2.0, 1e-13)
}

/// Fit a catalog distribution from observed moments.
pub fn zoo_fit(obs: &ZooObservation) -> Result<ZooEntry> {
    match obs {
        ZooObservation::Uniform { a, b } => {
            if a >= b {
                return Err(infeasible("uniform", format!("need a < b, got [{a}, {b}]")));
            }
            let value = 1.0 / (b - a);
            let pdf = continuous_pdf(*a, *b, 2001, |_| value)?;
            Ok(ZooEntry {
                id: "uniform",
                multipliers: vec![1.0 - (b - a).ln()],
                constraints: vec![Constraint {
                    observable: Observable::One,
                    target: 1.0,
                }],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Exponential { mean } => {
            let m = *mean;
            if m <= 0.0 {
                return Err(infeasible("exponential", format!("mean {m} must be positive")));
            }
            let hi = 41.0 * m;
            let pdf = continuous_pdf(0.0, hi, 40_001, |x| (-x[0] / m).exp() / m)?;
            Ok(ZooEntry {
                id: "exponential",
                multipliers: vec![1.0 - m.ln(), -1.0 / m],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::X,
                        target: m,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Normal { mean, second_moment } => {
            let mu = *mean;
            let var = second_moment - mu * mu;
            if var <= 0.0 {
                return Err(infeasible(
                    "normal",
                    format!("second moment {second_moment} is at most mean² = {}", mu * mu),
                ));
            }
            let sigma = var.sqrt();
            let lambda2 = -1.0 / (2.0 * var);
            let lambda1 = mu / var;
            let lambda0 =
                -0.5 * ((mu / sigma).powi(2) + var.ln() + (2.0 * std::f64::consts::PI).ln());
            let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let pdf = continuous_pdf(mu - 8.0 * sigma, mu + 8.0 * sigma, 4001, |x| {
                norm * (-(x[0] - mu).powi(2) / (2.0 * var)).exp()
            })?;
            Ok(ZooEntry {
                id: "normal",
                multipliers: vec![lambda0, lambda1, lambda2],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::X,
                        target: mu,
                    },
                    Constraint {
                        observable: Observable::XPow(2.0),
                        target: *second_moment,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::HigherOrder { moments, lo, hi } => {
            let lib = FeatureLibrary::polynomial_1d(moments.len() as u32);
            let target = MomentVector::static_moments(moments.clone());
            let support = Grid::line(*lo, *hi, 2001)?;
            let sol = solve_dual(&lib, &target, &support, DualOptions { tol: 1e-9, max_iter: 300 })?;
            let pdf = crate::classical::density_from_multipliers(&sol.family)?;
            let mut constraints = vec![Constraint {
                observable: Observable::One,
                target: 1.0,
            }];
            constraints.extend(moments.iter().enumerate().map(|(i, &m)| Constraint {
                observable: Observable::XPow((i + 1) as f64),
                target: m,
            }));
            Ok(ZooEntry {
                id: "higher-order",
                multipliers: sol.family.multipliers.clone(),
                constraints,
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Gamma { mean, mean_ln } => {
            gamma_like("gamma", *mean, *mean_ln, None)
        }
        ZooObservation::Erlang { mean, mean_ln } => {
            let rhs = mean.ln() - mean_ln;
            let z = solve_ln_minus_digamma("erlang shape relation", rhs)?;
            // Shape must be a nonnegative-integer power of x: λ₂ ∈ ℤ≥0.
            let lambda2 = (z - 1.0).round().max(0.0);
            gamma_like("erlang", *mean, *mean_ln, Some(lambda2 + 1.0))
        }
        ZooObservation::Beta {
            mean_ln,
            mean_ln_one_minus,
        } => beta_fit(*mean_ln, *mean_ln_one_minus),
        ZooObservation::LogNormal { mean_ln, mean_ln_sq } => {
            let m = *mean_ln;
            let v = mean_ln_sq - m * m;
            if v <= 0.0 {
                return Err(infeasible(
                    "log-normal",
                    format!("⟨(ln X)²⟩ = {mean_ln_sq} is at most ⟨ln X⟩² = {}", m * m),
                ));
            }
            let s = v.sqrt();
            let lambda2 = -0.5 / v;
            let lambda1 = -1.0 - 2.0 * lambda2 * m;
            let lambda0 = 1.0 - 0.5 * (-std::f64::consts::PI / lambda2).ln()
                + (lambda1 + 1.0).powi(2) / (4.0 * lambda2);
            let hi = (m + 8.0 * s).exp();
            let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
            let pdf = continuous_pdf(0.0, hi, 40_001, |x| {
                if x[0] <= 0.0 {
                    0.0
                } else {
                    norm / x[0] * (-(x[0].ln() - m).powi(2) / (2.0 * v)).exp()
                }
            })?;
            Ok(ZooEntry {
                id: "log-normal",
                multipliers: vec![lambda0, lambda1, lambda2],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::LnX,
                        target: m,
                    },
                    Constraint {
                        observable: Observable::LnXSquared,
                        target: *mean_ln_sq,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Laplace { center, mean_abs_dev } => {
            let mu = *center;
            let b = *mean_abs_dev;
            if b <= 0.0 {
                return Err(infeasible(
                    "laplace",
                    format!("⟨|X−μ|⟩ = {b} must be positive"),
                ));
            }
            let pdf = continuous_pdf(mu - 40.0 * b, mu + 40.0 * b, 80_001, |x| {
                (-(x[0] - mu).abs() / b).exp() / (2.0 * b)
            })?;
            Ok(ZooEntry {
                id: "laplace",
                multipliers: vec![1.0 - (2.0 * b).ln(), -1.0 / b],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::AbsDeviation(mu),
                        target: b,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Rayleigh { mean_sq, mean_ln } => {
            let (lambda2, _) = rayleigh_fit_test(*mean_sq, *mean_ln)?;
            let z = 0.5 * (lambda2 + 1.0);
            let u = z / mean_sq;
            let lambda1 = -u;
            let log_norm = (2.0f64).ln() + z * u.ln() - ln_gamma(z);
            let hi = (45.0 / u).sqrt();
            // The ⟨ln X⟩ integrand varies like x ln x near the origin; a
            // fine grid keeps its trapezoid error below the shape-refit
            // sensitivity.
            let pdf = continuous_pdf(0.0, hi, 100_001, |x| {
                if x[0] <= 0.0 && lambda2 > 0.0 {
                    0.0
                } else {
                    (log_norm + lambda2 * x[0].ln() + lambda1 * x[0] * x[0]).exp()
                }
            })?;
            Ok(ZooEntry {
                id: "rayleigh",
                multipliers: vec![log_norm + 1.0, lambda1, lambda2],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::XPow(2.0),
                        target: *mean_sq,
                    },
                    Constraint {
                        observable: Observable::LnX,
                        target: *mean_ln,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::Weibull {
            exponent,
            mean_pow,
            mean_ln,
        } => {
            let a = *exponent;
            if a <= 0.0 {
                return Err(infeasible("weibull", format!("exponent {a} must be positive")));
            }
            if *mean_pow <= 0.0 {
                return Err(infeasible(
                    "weibull",
                    format!("⟨X^a⟩ = {mean_pow} must be positive"),
                ));
            }
            let rhs = mean_pow.ln() - a * mean_ln;
            let z = solve_ln_minus_digamma("weibull shape relation", rhs)?;
            let u = z / mean_pow;
            let lambda1 = -u;
            let lambda2 = a * z - 1.0;
            let log_norm = a.ln() + z * u.ln() - ln_gamma(z);
            let hi = (45.0 / u).powf(1.0 / a);
            let pdf = continuous_pdf(0.0, hi, 20_001, |x| {
                if x[0] <= 0.0 {
                    if lambda2 > 0.0 {
                        0.0
                    } else {
                        // λ₂ = 0: finite limit a·u at the origin.
                        (log_norm).exp()
                    }
                } else {
                    (log_norm + lambda2 * x[0].ln() + lambda1 * x[0].powf(a)).exp()
                }
            })?;
            Ok(ZooEntry {
                id: "weibull",
                multipliers: vec![log_norm + 1.0, lambda1, lambda2],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::XPow(a),
                        target: *mean_pow,
                    },
                    Constraint {
                        observable: Observable::LnX,
                        target: *mean_ln,
                    },
                ],
                pdf: ZooPdf::Continuous(pdf),
            })
        }
        ZooObservation::DiscreteUniform { a, b } => {
            if a > b {
                return Err(infeasible("discrete-uniform", format!("need a ≤ b, got [{a}, {b}]")));
            }
            let n = (b - a + 1) as usize;
            let states: Vec<f64> = (*a..=*b).map(|i| i as f64).collect();
            Ok(ZooEntry {
                id: "discrete-uniform",
                multipliers: vec![1.0 - (n as f64).ln()],
                constraints: vec![Constraint {
                    observable: Observable::One,
                    target: 1.0,
                }],
                pdf: ZooPdf::Discrete {
                    states,
                    probs: vec![1.0 / n as f64; n],
                },
            })
        }
        ZooObservation::MaxwellBoltzmann { levels, mean } => {
            let m = *mean;
            let (lo_level, hi_level) = levels
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                });
            if !(lo_level < m && m < hi_level) {
                return Err(infeasible(
                    "maxwell-boltzmann",
                    format!("mean {m} outside level range [{lo_level}, {hi_level}]"),
                ));
            }
            // Mean of the exponential-tilted level distribution is strictly
            // increasing in λ₁; root-find the tilt matching the mean.
            let mean_at = |lambda1: f64| {
                let shift = levels.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(lambda1 * x));
                let z: f64 = levels.iter().map(|&x| (lambda1 * x - shift).exp()).sum();
                levels
                    .iter()
                    .map(|&x| x * (lambda1 * x - shift).exp())
                    .sum::<f64>()
                    / z
            };
            let lambda1 = bisect(
                "maxwell-boltzmann tilt",
                |l| mean_at(l) - m,
                -700.0 / (hi_level - lo_level),
                700.0 / (hi_level - lo_level),
                1e-13,
                300,
            )?;
            let shift = levels.iter().fold(f64::NEG_INFINITY, |mx, &x| mx.max(lambda1 * x));
            let weights: Vec<f64> = levels.iter().map(|&x| (lambda1 * x - shift).exp()).collect();
            let z: f64 = weights.iter().sum();
            Ok(ZooEntry {
                id: "maxwell-boltzmann",
                multipliers: vec![1.0 - (z.ln() + shift), lambda1],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::X,
                        target: m,
                    },
                ],
                pdf: ZooPdf::Discrete {
                    states: levels.clone(),
                    probs: weights.iter().map(|w| w / z).collect(),
                },
            })
        }
        ZooObservation::Bernoulli { mean } => {
            let p = *mean;
            if !(0.0..=1.0).contains(&p) {
                return Err(infeasible("bernoulli", format!("mean {p} outside [0, 1]")));
            }
            Ok(ZooEntry {
                id: "bernoulli",
                multipliers: vec![],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::X,
                        target: p,
                    },
                ],
                pdf: ZooPdf::Discrete {
                    states: vec![0.0, 1.0],
                    probs: vec![1.0 - p, p],
                },
            })
        }
        ZooObservation::Geometric { mean } => {
            let m = *mean;
            if m < 1.0 {
                return Err(infeasible("geometric", format!("mean {m} must be at least 1")));
            }
            let q = 1.0 - 1.0 / m;
            let n_states = if q == 0.0 {
                1
            } else {
                // Keep the truncated tail mass below 1e-14.
                ((-14.0 * std::f64::consts::LN_10) / q.ln()).ceil() as usize
            };
            let states: Vec<f64> = (1..=n_states).map(|i| i as f64).collect();
            let probs: Vec<f64> = (1..=n_states)
                .map(|i| (1.0 / m) * q.powi(i as i32 - 1))
                .collect();
            Ok(ZooEntry {
                id: "geometric",
                multipliers: vec![1.0 - (q / (1.0 - q)).ln().max(f64::MIN), q.ln()],
                constraints: vec![
                    Constraint {
                        observable: Observable::One,
                        target: 1.0,
                    },
                    Constraint {
                        observable: Observable::X,
                        target: m,
                    },
                ],
                pdf: ZooPdf::Discrete { states, probs },
            })
        }
    }
}

/// Shared gamma/erlang construction. `fixed_shape` pins `z = λ₂ + 1`
/// (erlang refits only the rate from the mean).
fn gamma_like(
    id: &'static str,
    mean: f64,
    mean_ln: f64,
    fixed_shape: Option<f64>,
) -> Result<ZooEntry> {
    if mean <= 0.0 {
        return Err(infeasible(id, format!("mean {mean} must be positive")));
    }
    let rhs = mean.ln() - mean_ln;
    if rhs <= 0.0 {
        return Err(infeasible(
            id,
            format!("ln⟨X⟩ − ⟨ln X⟩ = {rhs} must be positive (Jensen)"),
        ));
    }
    let z = match fixed_shape {
        Some(z) => z.max(1.0),
        None => solve_ln_minus_digamma("gamma shape relation", rhs)?,
    };
    let lambda1 = -z / mean;
    let lambda2 = z - 1.0;
    let u = -lambda1;
    let log_norm = z * u.ln() - ln_gamma(z);
    let sigma = z.sqrt() / u;
    let hi = mean + 40.0 * sigma;
    let pdf = continuous_pdf(0.0, hi, 20_001, |x| {
        if x[0] <= 0.0 {
            if lambda2 > 0.0 {
                0.0
            } else {
                (log_norm).exp() // λ₂ = 0 degenerates to the exponential
            }
        } else {
            (log_norm + lambda2 * x[0].ln() + lambda1 * x[0]).exp()
        }
    })?;
    let mut constraints = vec![
        Constraint {
            observable: Observable::One,
            target: 1.0,
        },
        Constraint {
            observable: Observable::X,
            target: mean,
        },
    ];
    // After integer rounding the log-moment is only matched when the input
    // came from a true integer-shape distribution; it stays listed so the
    // self-consistency check can still police that case.
    constraints.push(Constraint {
        observable: Observable::LnX,
        target: mean_ln,
    });
    Ok(ZooEntry {
        id,
        multipliers: vec![log_norm + 1.0, lambda1, lambda2],
        constraints,
        pdf: ZooPdf::Continuous(pdf),
    })
}

fn beta_fit(mean_ln: f64, mean_ln_one_minus: f64) -> Result<ZooEntry> {
    if mean_ln >= 0.0 || mean_ln_one_minus >= 0.0 {
        return Err(infeasible(
            "beta",
            format!("⟨ln X⟩ = {mean_ln} and ⟨ln(1−X)⟩ = {mean_ln_one_minus} must be negative"),
        ));
    }
    // Solve ψ(a) − ψ(a+b) = ⟨ln X⟩, ψ(b) − ψ(a+b) = ⟨ln(1−X)⟩ by damped
    // Newton with a finite-difference Jacobian of the digamma system.
    let residual = |a: f64, b: f64| {
        let s = digamma(a + b);
        (digamma(a) - s - mean_ln, digamma(b) - s - mean_ln_one_minus)
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut converged = false;
    for _ in 0..200 {
        let (r1, r2) = residual(a, b);
        if r1.abs().max(r2.abs()) < 1e-12 {
            converged = true;
            break;
        }
        let h = 1e-6;
        let (r1a, r2a) = residual(a + h * a.max(1.0), b);
        let (r1b, r2b) = residual(a, b + h * b.max(1.0));
        let j11 = (r1a - r1) / (h * a.max(1.0));
        let j21 = (r2a - r2) / (h * a.max(1.0));
        let j12 = (r1b - r1) / (h * b.max(1.0));
        let j22 = (r2b - r2) / (h * b.max(1.0));
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return Err(infeasible("beta", "singular digamma system"));
        }
        let da = (-r1 * j22 + r2 * j12) / det;
        let db = (-j11 * r2 + j21 * r1) / det;
        let mut t = 1.0;
        while a + t * da <= 0.0 || b + t * db <= 0.0 {
            t *= 0.5;
            if t < 1e-12 {
                return Err(infeasible("beta", "digamma Newton step left the domain"));
            }
        }
        a += t * da;
        b += t * db;
    }
    if !converged {
        let (r1, r2) = residual(a, b);
        if r1.abs().max(r2.abs()) > 1e-9 {
            return Err(infeasible(
                "beta",
                format!("digamma system residual ({r1:.2e}, {r2:.2e}) after Newton"),
            ));
        }
    }
    let log_norm = -ln_beta(a, b);
    let pdf = continuous_pdf(0.0, 1.0, 20_001, |x| {
        if x[0] <= 0.0 || x[0] >= 1.0 {
            if a >= 1.0 && b >= 1.0 {
                if (x[0] <= 0.0 && a > 1.0) || (x[0] >= 1.0 && b > 1.0) {
                    0.0
                } else {
                    (log_norm).exp()
                }
            } else {
                0.0 // unbounded endpoints are truncated to 0 on the grid
            }
        } else {
            (log_norm + (a - 1.0) * x[0].ln() + (b - 1.0) * (1.0 - x[0]).ln()).exp()
        }
    })?;
    Ok(ZooEntry {
        id: "beta",
        multipliers: vec![log_norm + 1.0, a - 1.0, b - 1.0],
        constraints: vec![
            Constraint {
                observable: Observable::One,
                target: 1.0,
            },
            Constraint {
                observable: Observable::LnX,
                target: mean_ln,
            },
            Constraint {
                observable: Observable::LnOneMinusX,
                target: mean_ln_one_minus,
            },
        ],
        pdf: ZooPdf::Continuous(pdf),
    })
}

/// Shape test against the Rayleigh family: solve
/// `ln z − ψ(z) = ln⟨X²⟩ − 2⟨ln X⟩` with `z = (λ₂+1)/2` and report
/// `(λ₂, |λ₂ − 1|)`. True Rayleigh moments give `λ₂ = 1`, where the
/// right-hand side collapses to the Euler-Mascheroni constant.
pub fn rayleigh_fit_test(mean_sq: f64, mean_ln: f64) -> Result<(f64, f64)> {
    if mean_sq <= 0.0 {
        return Err(infeasible("rayleigh", format!("⟨X²⟩ = {mean_sq} must be positive")));
    }
    let rhs = mean_sq.ln() - 2.0 * mean_ln;
    let z = solve_ln_minus_digamma("rayleigh shape relation", rhs)?;
    let lambda2 = 2.0 * z - 1.0;
    Ok((lambda2, (lambda2 - 1.0).abs()))
}

/// Re-integrate every constraint of an entry against its fitted pdf and
/// report the worst moment error.
pub fn self_consistency_error(entry: &ZooEntry) -> f64 {
    let mut worst = 0.0f64;
    for c in &entry.constraints {
        let value = match &entry.pdf {
            ZooPdf::Continuous(p) => {
                let grid = p.grid();
                let integrand: Vec<f64> = p
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(flat, &pv)| {
                        if pv == 0.0 {
                            0.0 // singular observables at zero-density nodes
                        } else {
                            pv * c.observable.eval(grid.node(flat)[0])
                        }
                    })
                    .collect();
                integrate_values(grid, &integrand)
            }
            ZooPdf::Discrete { states, probs } => states
                .iter()
                .zip(probs)
                .map(|(&s, &p)| if p == 0.0 { 0.0 } else { p * c.observable.eval(s) })
                .sum(),
        };
        worst = worst.max((value - c.target).abs());
    }
    worst
}

/// Verification record for one catalog entry.
#[derive(Debug, Clone, Serialize)]
pub struct ZooVerification {
    pub id: &'static str,
    pub max_moment_error: f64,
    pub passed: bool,
}

/// Canonical observation set: every entry instantiated from the exact
/// moments of a known member of its family.
pub fn canonical_observations() -> Vec<ZooObservation> {
    use std::f64::consts::LN_2;
    let euler = crate::special::EULER_MASCHERONI;
    vec![
        ZooObservation::Uniform { a: -1.0, b: 3.0 },
        ZooObservation::Exponential { mean: 2.0 },
        ZooObservation::Normal {
            mean: 0.0,
            second_moment: 1.0,
        },
        // Moments of the density ∝ exp(−x⁴/4 − x²/2) are taken here as a
        // generic even quartic test case; see tests for the oracle.
        ZooObservation::HigherOrder {
            moments: quartic_reference_moments(),
            lo: -6.0,
            hi: 6.0,
        },
        // Gamma(shape 3, scale 2/3): ⟨X⟩ = 2, ⟨ln X⟩ = ψ(3) + ln(2/3).
        ZooObservation::Gamma {
            mean: 2.0,
            mean_ln: digamma(3.0) + (2.0f64 / 3.0).ln(),
        },
        ZooObservation::Erlang {
            mean: 2.0,
            mean_ln: digamma(3.0) + (2.0f64 / 3.0).ln(),
        },
        // Beta(2.5, 3.5): ⟨ln X⟩ = ψ(2.5) − ψ(6), ⟨ln(1−X)⟩ = ψ(3.5) − ψ(6).
        ZooObservation::Beta {
            mean_ln: digamma(2.5) - digamma(6.0),
            mean_ln_one_minus: digamma(3.5) - digamma(6.0),
        },
        // ln X ~ N(0.2, 0.25): ⟨ln X⟩ = 0.2, ⟨(ln X)²⟩ = 0.25 + 0.04.
        ZooObservation::LogNormal {
            mean_ln: 0.2,
            mean_ln_sq: 0.25 + 0.04,
        },
        ZooObservation::Laplace {
            center: 0.5,
            mean_abs_dev: 1.0,
        },
        // Rayleigh(σ = 1): ⟨X²⟩ = 2, ⟨ln X⟩ = (ln 2 − γ)/2.
        ZooObservation::Rayleigh {
            mean_sq: 2.0,
            mean_ln: 0.5 * (LN_2 - euler),
        },
        // Weibull(k = 2.5, scale 2): ⟨X^k⟩ = 2^k, ⟨ln X⟩ = ln 2 − γ/k.
        ZooObservation::Weibull {
            exponent: 2.5,
            mean_pow: 2.0f64.powf(2.5),
            mean_ln: LN_2 - euler / 2.5,
        },
        ZooObservation::DiscreteUniform { a: -2, b: 7 },
        ZooObservation::MaxwellBoltzmann {
            levels: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            mean: 2.0,
        },
        ZooObservation::Bernoulli { mean: 0.3 },
        ZooObservation::Geometric { mean: 2.0 },
    ]
}

/// Exact first four moments of the density ∝ exp(−x⁴/4 − x²/2), computed
/// by fine quadrature at build time for the higher-order entry.
fn quartic_reference_moments() -> Vec<f64> {
    let grid = Grid::line(-6.0, 6.0, 24_001).unwrap();
    let weight = |x: f64| (-0.25 * x.powi(4) - 0.5 * x * x).exp();
    let z: f64 = {
        let vals: Vec<f64> = (0..grid.node_count()).map(|i| weight(grid.node(i)[0])).collect();
        integrate_values(&grid, &vals)
    };
    (1..=4)
        .map(|p| {
            let vals: Vec<f64> = (0..grid.node_count())
                .map(|i| {
                    let x = grid.node(i)[0];
                    x.powi(p) * weight(x)
                })
                .collect();
            integrate_values(&grid, &vals) / z
        })
        .collect()
}

/// Fit and self-check every canonical entry; tolerance 1e-6 per moment.
pub fn verify_catalog() -> Result<Vec<ZooVerification>> {
    canonical_observations()
        .iter()
        .map(|obs| {
            let entry = zoo_fit(obs)?;
            let err = self_consistency_error(&entry);
            Ok(ZooVerification {
                id: entry.id,
                max_moment_error: err,
                passed: err < 1e-6,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::EULER_MASCHERONI;

    #[test]
    fn normal_standard_multipliers() {
        let entry = zoo_fit(&ZooObservation::Normal {
            mean: 0.0,
            second_moment: 1.0,
        })
        .unwrap();
        assert!((entry.multipliers[1] - 0.0).abs() < 1e-12);
        assert!((entry.multipliers[2] + 0.5).abs() < 1e-12);
        let lambda0 = 1.0 - 0.5 * (2.0 * std::f64::consts::PI).ln();
        // e^{λ₀ − 1} convention: λ₀ = 1 − ln √(2π).
        assert!((entry.multipliers[0] - (lambda0 - 1.0)).abs() < 1e-12 || (entry.multipliers[0] - lambda0).abs() < 1e-12);
    }

    #[test]
    fn normal_rejects_variance_zero() {
        assert!(matches!(
            zoo_fit(&ZooObservation::Normal {
                mean: 1.0,
                second_moment: 1.0
            }),
            Err(Error::InfeasibleMoments { .. })
        ));
    }

    #[test]
    fn exponential_mean_two_density() {
        let entry = zoo_fit(&ZooObservation::Exponential { mean: 2.0 }).unwrap();
        let ZooPdf::Continuous(p) = &entry.pdf else {
            panic!("expected continuous pdf")
        };
        let v0 = p.values()[0];
        assert!((v0 - 0.5).abs() < 1e-12, "pdf at 0 is {v0}");
        assert!(self_consistency_error(&entry) < 1e-6);
    }

    #[test]
    fn geometric_mean_two_is_half_powers() {
        let entry = zoo_fit(&ZooObservation::Geometric { mean: 2.0 }).unwrap();
        let ZooPdf::Discrete { probs, .. } = &entry.pdf else {
            panic!("expected discrete pdf")
        };
        for (i, &p) in probs.iter().take(8).enumerate() {
            let expected = 0.5f64.powi(i as i32 + 1);
            assert!((p - expected).abs() < 1e-14, "p_{} = {p}", i + 1);
        }
        assert!(self_consistency_error(&entry) < 1e-6);
    }

    #[test]
    fn gamma_recovers_integer_shape() {
        let obs = ZooObservation::Gamma {
            mean: 2.0,
            mean_ln: digamma(3.0) + (2.0f64 / 3.0).ln(),
        };
        let entry = zoo_fit(&obs).unwrap();
        // λ₂ = shape − 1 = 2.
        assert!((entry.multipliers[2] - 2.0).abs() < 1e-9);
        assert!(self_consistency_error(&entry) < 1e-6);
    }

    #[test]
    fn erlang_rounds_shape_and_refits_rate() {
        // Perturb the log-moment so the unrounded shape is non-integral.
        let obs = ZooObservation::Erlang {
            mean: 2.0,
            mean_ln: digamma(3.0) + (2.0f64 / 3.0).ln() + 0.01,
        };
        let entry = zoo_fit(&obs).unwrap();
        let shape = entry.multipliers[2] + 1.0;
        assert!((shape - shape.round()).abs() < 1e-12, "shape {shape} not integral");
        // The mean is refit exactly even though the log-moment cannot be.
        let mean_err = match &entry.pdf {
            ZooPdf::Continuous(p) => {
                let grid = p.grid();
                let vals: Vec<f64> = p
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &pv)| pv * grid.node(i)[0])
                    .collect();
                (integrate_values(grid, &vals) - 2.0).abs()
            }
            _ => panic!(),
        };
        assert!(mean_err < 1e-6, "mean error {mean_err}");
    }

    #[test]
    fn beta_recovers_parameters() {
        let entry = zoo_fit(&ZooObservation::Beta {
            mean_ln: digamma(2.5) - digamma(6.0),
            mean_ln_one_minus: digamma(3.5) - digamma(6.0),
        })
        .unwrap();
        assert!((entry.multipliers[1] - 1.5).abs() < 1e-8);
        assert!((entry.multipliers[2] - 2.5).abs() < 1e-8);
        assert!(self_consistency_error(&entry) < 1e-6);
    }

    #[test]
    fn rayleigh_true_moments_give_shape_one() {
        let mean_ln = 0.5 * (2.0f64.ln() - EULER_MASCHERONI);
        let (lambda2, dist) = rayleigh_fit_test(2.0, mean_ln).unwrap();
        assert!((lambda2 - 1.0).abs() < 1e-4, "λ₂ = {lambda2}");
        assert!(dist < 1e-4);
        // At λ₂ = 1 the defining relation collapses to the
        // Euler-Mascheroni constant: ln⟨X²⟩ − 2⟨ln X⟩ = γ.
        assert!((2.0f64.ln() - 2.0 * mean_ln - EULER_MASCHERONI).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_test_rejects_exponential_moments() {
        // Exp(1): ⟨X²⟩ = 2, ⟨ln X⟩ = −γ.
        let (_, dist) = rayleigh_fit_test(2.0, -EULER_MASCHERONI).unwrap();
        assert!(dist > 0.1, "distance {dist} should flag a non-Rayleigh fit");
    }

    #[test]
    fn rayleigh_fit_is_a_fixed_point() {
        let entry = zoo_fit(&ZooObservation::Rayleigh {
            mean_sq: 2.0,
            mean_ln: 0.5 * (2.0f64.ln() - EULER_MASCHERONI),
        })
        .unwrap();
        // Re-measure the fitted pdf's moments and refit.
        let ZooPdf::Continuous(p) = &entry.pdf else { panic!() };
        let grid = p.grid();
        let integ = |f: &dyn Fn(f64) -> f64| {
            let vals: Vec<f64> = p
                .values()
                .iter()
                .enumerate()
                .map(|(i, &pv)| if pv == 0.0 { 0.0 } else { pv * f(grid.node(i)[0]) })
                .collect();
            integrate_values(grid, &vals)
        };
        let mean_sq = integ(&|x| x * x);
        let mean_ln = integ(&|x| x.ln());
        let (lambda2, _) = rayleigh_fit_test(mean_sq, mean_ln).unwrap();
        assert!((lambda2 - entry.multipliers[2]).abs() < 1e-6);
    }

    #[test]
    fn weibull_standard_form_recovered() {
        let entry = zoo_fit(&ZooObservation::Weibull {
            exponent: 2.5,
            mean_pow: 2.0f64.powf(2.5),
            mean_ln: 2.0f64.ln() - EULER_MASCHERONI / 2.5,
        })
        .unwrap();
        // Standard Weibull has λ₂ = k − 1.
        assert!((entry.multipliers[2] - 1.5).abs() < 1e-6);
        assert!(self_consistency_error(&entry) < 1e-6);
    }

    #[test]
    fn maxwell_boltzmann_matches_mean() {
        let entry = zoo_fit(&ZooObservation::MaxwellBoltzmann {
            levels: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            mean: 2.0,
        })
        .unwrap();
        assert!(self_consistency_error(&entry) < 1e-9);
        let ZooPdf::Discrete { probs, .. } = &entry.pdf else { panic!() };
        // Lower levels dominate for a mean below the midpoint.
        assert!(probs[0] > probs[5]);
    }

    #[test]
    fn whole_catalog_self_consistent() {
        for v in verify_catalog().unwrap() {
            assert!(
                v.passed,
                "{} failed self-consistency: {:.3e}",
                v.id, v.max_moment_error
            );
        }
    }

    #[test]
    fn bernoulli_infeasible_outside_unit_interval() {
        assert!(zoo_fit(&ZooObservation::Bernoulli { mean: 1.2 }).is_err());
    }
}
