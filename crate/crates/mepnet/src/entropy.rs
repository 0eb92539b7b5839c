//! Entropy functionals: Shannon entropy, Kullback-Leibler divergence and
//! cross-entropy, over grid fields and over discrete weight vectors.
//!
//! The three satisfy `H(p, q) = S[p] + D(p ‖ q)`. All entropy-like
//! integrands use the continuity convention `0·ln 0 = 0`.
//!
//! The discrete variants double as the Sanov large-deviations rate function
//! for empirical frequencies: `I(l) = Σ l_j ln(l_j / q_j)` is exactly
//! [`discrete::kl_divergence`].

use crate::error::{Error, Result};
use crate::field::{integrate_values, ProbabilityField};

/// `x ln x` extended by continuity at 0.
#[inline]
pub(crate) fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `p ln(p/q)` extended by continuity at `p = 0`.
#[inline]
pub(crate) fn xlnx_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

fn check_pair(p: &ProbabilityField, q: &ProbabilityField) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    for (idx, (&pv, &qv)) in p.values().iter().zip(q.values()).enumerate() {
        if pv > 0.0 && qv <= 0.0 {
            return Err(Error::SupportViolation { idx, p: pv, q: qv });
        }
    }
    Ok(())
}

/// Shannon entropy `-∫ p ln p` by the trapezoid rule.
pub fn shannon_entropy(p: &ProbabilityField) -> Result<f64> {
    let integrand: Vec<f64> = p.values().iter().map(|&v| -xlnx(v)).collect();
    Ok(integrate_values(p.grid(), &integrand))
}

/// Relative entropy `∫ p ln(p/q)` by the trapezoid rule.
///
/// Requires `q > 0` wherever `p > 0`; the first offending node is named in
/// the error.
pub fn kl_divergence(p: &ProbabilityField, q: &ProbabilityField) -> Result<f64> {
    check_pair(p, q)?;
    let integrand: Vec<f64> = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&pv, &qv)| xlnx_ratio(pv, qv))
        .collect();
    Ok(integrate_values(p.grid(), &integrand))
}

/// Cross-entropy `-∫ p ln q` by the trapezoid rule.
pub fn cross_entropy(p: &ProbabilityField, q: &ProbabilityField) -> Result<f64> {
    check_pair(p, q)?;
    let integrand: Vec<f64> = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&pv, &qv)| if pv == 0.0 { 0.0 } else { -pv * qv.ln() })
        .collect();
    Ok(integrate_values(p.grid(), &integrand))
}

/// Entropies of discrete weight vectors (plain sums, no quadrature weights).
pub mod discrete {
    use super::{xlnx, xlnx_ratio};
    use crate::error::{Error, Result};

    fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
        if p.len() != q.len() {
            return Err(Error::LengthMismatch {
                got: q.len(),
                expected: p.len(),
            });
        }
        for (idx, (&pv, &qv)) in p.iter().zip(q).enumerate() {
            if pv < 0.0 {
                return Err(Error::Negative { idx, value: pv });
            }
            if pv > 0.0 && qv <= 0.0 {
                return Err(Error::SupportViolation { idx, p: pv, q: qv });
            }
        }
        Ok(())
    }

    /// `-Σ p ln p`.
    pub fn entropy(p: &[f64]) -> Result<f64> {
        for (idx, &v) in p.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::Negative { idx, value: v });
            }
        }
        Ok(-p.iter().map(|&v| xlnx(v)).sum::<f64>())
    }

    /// `Σ p ln(p/q)` — also the Sanov rate function of the empirical
    /// frequency vector `p` under sampling distribution `q`.
    pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
        check_pair(p, q)?;
        Ok(p.iter().zip(q).map(|(&pv, &qv)| xlnx_ratio(pv, qv)).sum())
    }

    /// `-Σ p ln q`.
    pub fn cross_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
        check_pair(p, q)?;
        Ok(p
            .iter()
            .zip(q)
            .map(|(&pv, &qv)| if pv == 0.0 { 0.0 } else { -pv * qv.ln() })
            .sum())
    }
}

/// Sanov rate function for an empirical frequency vector; alias for
/// [`discrete::kl_divergence`].
pub fn sanov_rate(frequencies: &[f64], sampling: &[f64]) -> Result<f64> {
    discrete::kl_divergence(frequencies, sampling)
}
