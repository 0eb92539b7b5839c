//! Small numerical kernels shared across solvers: root bracketing and
//! bisection, Cholesky solve, cumulative trapezoid sums, tridiagonal solve
//! and an adaptive Runge-Kutta integrator.

use crate::error::{Error, Result};

/// Bisection on a bracketing interval. `f(lo)` and `f(hi)` must differ in
/// sign.
pub fn bisect(
    what: &'static str,
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRoot { what, lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 || (hi - lo).abs() < tol {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expand `hi` geometrically until `f` changes sign, then bisect.
pub fn bisect_expanding(
    what: &'static str,
    f: impl Fn(f64) -> f64,
    lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let flo = f(lo);
    let mut tries = 0;
    while f(hi).signum() == flo.signum() {
        hi = lo + (hi - lo) * 2.0;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(Error::NoRoot { what, lo, hi });
        }
    }
    bisect(what, f, lo, hi, tol, 200)
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major `n × n`)
/// by Cholesky factorization. Fails on a non-positive pivot.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularHessian { pivot: sum });
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Cumulative trapezoid sum: `out[i] = ∫_{x_0}^{x_i} f`, with `out[0] = 0`,
/// for uniformly spaced samples with spacing `h`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Thomas algorithm for a tridiagonal system with constant-size bands.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn tridiagonal_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Dormand-Prince 5(4) adaptive integrator for `y' = f(t, y)`.
///
/// Integrates from `t0` to each requested output time, which must be
/// increasing. Calls `inspect` on each accepted state so callers can police
/// invariants (probability conservation, boundary leakage).
pub fn rk45_integrate(
    mut f: impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    output_times: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    mut inspect: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<Vec<Vec<f64>>> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // 5th-order weights equal A[5]; 4th-order embedded weights:
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(output_times.len());
    let mut k = vec![vec![0.0; n]; 7];
    let mut h = {
        let span = output_times.last().copied().unwrap_or(t0) - t0;
        (span / 100.0).max(1e-12)
    };

    for &t_target in output_times {
        if t_target < t {
            return Err(Error::Other(format!(
                "output times must be increasing, got {t_target} after {t}"
            )));
        }
        while t < t_target {
            let h_step = h.min(t_target - t);
            f(t, &y, &mut k[0]);
            let mut y_stage = vec![0.0; n];
            for s in 0..6 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s + 1) {
                        acc += h_step * A[s][j] * kj[i];
                    }
                    y_stage[i] = acc;
                }
                f(t + C[s] * h_step, &y_stage, &mut k[s + 1]);
            }
            // 5th-order solution is the last stage input (FSAL structure).
            let y5 = y_stage;
            let mut err_norm: f64 = 0.0;
            for i in 0..n {
                let mut y4 = y[i];
                for (j, kj) in k.iter().enumerate() {
                    y4 += h_step * B4[j] * kj[i];
                }
                let scale = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
                err_norm = err_norm.max(((y5[i] - y4) / scale).abs());
            }
            if err_norm <= 1.0 {
                t += h_step;
                y = y5;
                inspect(t, &y)?;
            }
            let factor = if err_norm > 0.0 {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = (h_step * factor).max(1e-14);
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect("sqrt2", |x| x * x - 2.0, 0.0, 2.0, 1e-12, 200).unwrap();
        assert!((r - 2.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn bisect_rejects_unbracketed_root() {
        assert!(bisect("none", |x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = [[4,2],[2,3]], b = [2, 5] → x = [-0.5, 2].
        let x = cholesky_solve(&[4.0, 2.0, 2.0, 3.0], &[2.0, 5.0]).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cumtrapz_of_linear() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let c = cumulative_trapezoid(&xs, 0.1);
        // ∫_0^x t dt = x²/2
        for (i, &v) in c.iter().enumerate() {
            let x = i as f64 * 0.1;
            assert!((v - 0.5 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let rhs = [1.0, 0.0, 0.0, 1.0];
        let x = tridiagonal_solve(&lower, &diag, &upper, &rhs);
        // Verify residual instead of hand-solving.
        for i in 0..4 {
            let mut r = diag[i] * x[i] - rhs[i];
            if i > 0 {
                r += lower[i] * x[i - 1];
            }
            if i < 3 {
                r += upper[i] * x[i + 1];
            }
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn rk45_integrates_exponential_decay() {
        let out = rk45_integrate(
            |_t, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &[1.0, 2.0],
            1e-10,
            1e-12,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((out[0][0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!((out[1][0] - (-2.0f64).exp()).abs() < 1e-8);
    }
}
