//! Gamma-family special functions used by the distribution catalog.
//!
//! Backed by `statrs` (Lanczos-type log-gamma, recurrence-based digamma),
//! re-exported under the names the solvers use.

/// Natural log of the Gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Digamma `ψ(x) = Γ'(x)/Γ(x)`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Log of the Beta function `B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Euler-Mascheroni constant `γ = -ψ(1)`.
pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Exact binomial coefficient as a float (valid well past n = 60).
pub fn binomial_coefficient(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-13);
    }

    #[test]
    fn digamma_at_one_is_minus_gamma() {
        assert!((digamma(1.0) + EULER_MASCHERONI).abs() < 1e-10);
    }

    #[test]
    fn digamma_recurrence_holds() {
        // ψ(x+1) = ψ(x) + 1/x
        for &x in &[0.3, 1.7, 4.2, 11.0] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-10);
        }
    }

    #[test]
    fn binomial_coefficients_exact() {
        assert_eq!(binomial_coefficient(5, 2), 10.0);
        assert_eq!(binomial_coefficient(20, 10), 184_756.0);
        assert_eq!(binomial_coefficient(30, 0), 1.0);
        assert_eq!(binomial_coefficient(30, 30), 1.0);
    }
}
