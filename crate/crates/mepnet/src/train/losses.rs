//! Loss functionals over snapshot fields, each returning its value together
//! with the exact derivative with respect to every field value.
//!
//! A "snapshot matrix" is a flat vector of `T` blocks of `N` node values:
//! the field at each snapshot time. The derivative vector has the same
//! layout, so it can be fed straight into the network's reverse pass as the
//! upstream gradient.

use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, FeatureMatrix, MomentVector};
use crate::grid::Grid;
use crate::numerics::cumulative_trapezoid;
use crate::special::binomial_coefficient;

/// Floor for logarithms of network outputs; softplus underflows to exact 0
/// only below z ≈ −745 and the entropy derivative must stay finite there.
const LOG_FLOOR: f64 = 1e-300;

/// Constraint-side feature evaluation strategy.
pub enum FeatureEvaluator {
    /// Dense `M × N` matrix of feature values at (scaled) grid nodes.
    Dense(FeatureMatrix),
    /// Complete tensor binomial library evaluated through per-axis
    /// Bernstein tables; moment sums and their adjoints become a sequence
    /// of small per-axis contractions instead of an `M × N` sweep.
    SeparableBinomial {
        /// `tables[a]` is `(order+1) × n_nodes(a)` row-major.
        tables: Vec<Vec<f64>>,
        node_dims: Vec<usize>,
        order: usize,
    },
}

/// Map a physical coordinate into the unit box using the grid's axis
/// bounds. Unit grids map to themselves.
#[inline]
fn scale_axis(grid: &Grid, axis: usize, x: f64) -> f64 {
    let a = &grid.axes()[axis];
    (x - a.min) / (a.max - a.min)
}

impl FeatureEvaluator {
    /// Build the evaluator for a library over (the scaled image of) `grid`.
    pub fn build(lib: &FeatureLibrary, grid: &Grid) -> Result<Self> {
        if lib.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                lib_dim: lib.dim(),
                grid_dim: grid.dim(),
            });
        }
        if let Some(order) = lib.is_complete_binomial() {
            if grid.dim() >= 2 {
                let mut tables = Vec::with_capacity(grid.dim());
                for (a, axis) in grid.axes().iter().enumerate() {
                    let mut table = vec![0.0; (order as usize + 1) * axis.n_nodes];
                    for i in 0..axis.n_nodes {
                        let u = scale_axis(grid, a, axis.coord(i)).clamp(0.0, 1.0);
                        for k in 0..=order {
                            table[k as usize * axis.n_nodes + i] = binomial_coefficient(order, k)
                                * u.powi(k as i32)
                                * (1.0 - u).powi((order - k) as i32);
                        }
                    }
                    tables.push(table);
                }
                return Ok(FeatureEvaluator::SeparableBinomial {
                    tables,
                    node_dims: grid.shape(),
                    order: order as usize,
                });
            }
        }
        // Dense path: evaluate each spec at the scaled node coordinates.
        let n_nodes = grid.node_count();
        let mut values = Vec::with_capacity(lib.len() * n_nodes);
        let mut x = vec![0.0; grid.dim()];
        let mut u = vec![0.0; grid.dim()];
        for spec in lib.specs() {
            for flat in 0..n_nodes {
                grid.node_into(flat, &mut x);
                for a in 0..grid.dim() {
                    u[a] = scale_axis(grid, a, x[a]);
                }
                values.push(spec.eval(&u, flat)?);
            }
        }
        Ok(FeatureEvaluator::Dense(FeatureMatrix::from_raw(
            lib.len(),
            n_nodes,
            values,
        )))
    }

    pub fn n_features(&self) -> usize {
        match self {
            FeatureEvaluator::Dense(m) => m.n_features,
            FeatureEvaluator::SeparableBinomial {
                order, node_dims, ..
            } => (order + 1).pow(node_dims.len() as u32),
        }
    }

    /// `m_i = Σ_n g_n f_i(x_n)` for a weighted field `g`.
    pub(crate) fn weighted_moments(&self, g: &[f64]) -> Vec<f64> {
        match self {
            FeatureEvaluator::Dense(mat) => (0..mat.n_features)
                .map(|i| mat.row(i).iter().zip(g).map(|(&f, &gn)| f * gn).sum())
                .collect(),
            FeatureEvaluator::SeparableBinomial {
                tables, node_dims, order,
            } => {
                let out_dims = vec![order + 1; node_dims.len()];
                contract_axes(g.to_vec(), tables, &out_dims, node_dims)
            }
        }
    }

    /// Adjoint of [`Self::weighted_moments`]: `G_n = Σ_i r_i f_i(x_n)`.
    fn spread_residual(&self, r: &[f64]) -> Vec<f64> {
        match self {
            FeatureEvaluator::Dense(mat) => {
                let mut out = vec![0.0; mat.n_nodes];
                for (i, &ri) in r.iter().enumerate() {
                    if ri == 0.0 {
                        continue;
                    }
                    for (o, &f) in out.iter_mut().zip(mat.row(i)) {
                        *o += ri * f;
                    }
                }
                out
            }
            FeatureEvaluator::SeparableBinomial {
                tables, node_dims, order,
            } => {
                let k_dims = vec![order + 1; node_dims.len()];
                // Transposed tables: n_nodes × (order+1).
                let transposed: Vec<Vec<f64>> = tables
                    .iter()
                    .zip(node_dims)
                    .map(|(t, &n)| {
                        let k = order + 1;
                        let mut tt = vec![0.0; n * k];
                        for ki in 0..k {
                            for ni in 0..n {
                                tt[ni * k + ki] = t[ki * n + ni];
                            }
                        }
                        tt
                    })
                    .collect();
                contract_axes(r.to_vec(), &transposed, node_dims, &k_dims)
            }
        }
    }
}

/// Contract every axis of a row-major tensor against a per-axis basis
/// (`bases[a]` is `out_dims[a] × in_dims[a]`), last axis first. Each
/// contraction moves the new index to the front, so after all axes the
/// result is row-major in the original axis order with the output sizes.
fn contract_axes(
    mut data: Vec<f64>,
    bases: &[Vec<f64>],
    out_dims: &[usize],
    in_dims: &[usize],
) -> Vec<f64> {
    for a in (0..bases.len()).rev() {
        let n_last = in_dims[a];
        let k = out_dims[a];
        let prefix = data.len() / n_last;
        let mut out = vec![0.0; k * prefix];
        for p in 0..prefix {
            let row = &data[p * n_last..(p + 1) * n_last];
            for ki in 0..k {
                let basis_row = &bases[a][ki * n_last..(ki + 1) * n_last];
                let mut acc = 0.0;
                for (x, b) in row.iter().zip(basis_row) {
                    acc += x * b;
                }
                out[ki * prefix + p] = acc;
            }
        }
        data = out;
    }
    data
}

/// Mean squared moment residual over snapshots:
/// `(1/T) Σ_k Σ_i (Σ_n w_n f_i(x_n) y_{kn} − f̃_i(t_k))²`.
pub fn constraint_loss_of_values(
    evaluator: &FeatureEvaluator,
    grid: &Grid,
    target: &MomentVector,
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = grid.node_count();
    let t = target.n_times();
    if y.len() != n * t {
        return Err(Error::ShapeMismatch(format!(
            "{} field values for {n} nodes × {t} snapshots",
            y.len()
        )));
    }
    if target.n_features() != evaluator.n_features() {
        return Err(Error::ShapeMismatch(format!(
            "{} target moments for {} features",
            target.n_features(),
            evaluator.n_features()
        )));
    }
    let w = grid.quad_weights();
    let mut loss = 0.0;
    let mut dl_dy = vec![0.0; y.len()];
    for k in 0..t {
        let yk = &y[k * n..(k + 1) * n];
        let g: Vec<f64> = yk.iter().zip(&w).map(|(&yv, &wv)| yv * wv).collect();
        let moments = evaluator.weighted_moments(&g);
        let residuals: Vec<f64> = moments
            .iter()
            .zip(&target.values[k])
            .map(|(&m, &f)| m - f)
            .collect();
        loss += residuals.iter().map(|r| r * r).sum::<f64>() / t as f64;
        let spread = evaluator.spread_residual(&residuals);
        let dk = &mut dl_dy[k * n..(k + 1) * n];
        for ((d, &s), &wv) in dk.iter_mut().zip(&spread).zip(&w) {
            *d = 2.0 / t as f64 * s * wv;
        }
    }
    Ok((loss, dl_dy))
}

/// Fixed-point relative-entropy loss:
/// `(1/T) Σ_k ∫ y ln(y / y_old) dx`, differentiating only through `y`.
pub fn fixed_point_kl_of_values(
    grid: &Grid,
    frozen: &[f64],
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if frozen.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "frozen field has {} values, current has {}",
            frozen.len(),
            y.len()
        )));
    }
    for (idx, &q) in frozen.iter().enumerate() {
        if q <= 0.0 {
            return Err(Error::NonPositiveFrozen { idx, value: q });
        }
    }
    let n = grid.node_count();
    let t = y.len() / n;
    let w = grid.quad_weights();
    let mut loss = 0.0;
    let mut dl_dy = vec![0.0; y.len()];
    for k in 0..t {
        for i in 0..n {
            let yv = y[k * n + i];
            let qv = frozen[k * n + i];
            let wv = w[i] / t as f64;
            if yv > 0.0 {
                loss += wv * yv * (yv / qv).ln();
            }
            dl_dy[k * n + i] = wv * ((yv.max(LOG_FLOOR) / qv).ln() + 1.0);
        }
    }
    Ok((loss, dl_dy))
}

/// Time-discrete Rayleighian of a density history on a 1-d grid:
/// dissipation plus free-energy rate, averaged over snapshot intervals.
///
/// The flux velocity is recovered from the continuity equation as
/// `v = −(∂_t ∫_{lo}^x η) / η`, with the cumulative mass pinned to zero at
/// the left wall by the no-flux condition and `∂_t` a forward difference
/// over each snapshot pair.
pub fn rayleighian_of_values(
    grid: &Grid,
    times: &[f64],
    zeta: f64,
    kbt: f64,
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if grid.dim() != 1 {
        return Err(Error::ShapeMismatch(
            "Rayleighian loss needs a 1-d grid".into(),
        ));
    }
    let t = times.len();
    if t < 2 {
        return Err(Error::NonUniformTimes {
            times: times.to_vec(),
        });
    }
    let dt = times[1] - times[0];
    for pair in times.windows(2) {
        if ((pair[1] - pair[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::NonUniformTimes {
                times: times.to_vec(),
            });
        }
    }
    let n = grid.node_count();
    if y.len() != n * t {
        return Err(Error::ShapeMismatch(format!(
            "{} field values for {n} nodes × {t} snapshots",
            y.len()
        )));
    }
    let h = grid.axes()[0].spacing();
    let w = grid.quad_weights();
    let intervals = (t - 1) as f64;

    // Free energies and their derivative contributions.
    let free_energy = |yk: &[f64]| -> f64 {
        yk.iter()
            .zip(&w)
            .map(|(&v, &wv)| if v <= 0.0 { 0.0 } else { kbt * wv * v * v.ln() })
            .sum()
    };

    let mut loss = 0.0;
    let mut dl_dy = vec![0.0; y.len()];
    let cums: Vec<Vec<f64>> = (0..t)
        .map(|k| cumulative_trapezoid(&y[k * n..(k + 1) * n], h))
        .collect();

    for k in 0..t - 1 {
        let eta = &y[k * n..(k + 1) * n];
        for (idx, &e) in eta.iter().enumerate() {
            if e <= 0.0 {
                return Err(Error::ZeroDensityInFlux { idx });
            }
        }
        let flux: Vec<f64> = cums[k]
            .iter()
            .zip(&cums[k + 1])
            .map(|(&c0, &c1)| -(c1 - c0) / dt)
            .collect();
        let dissipation: f64 = flux
            .iter()
            .zip(eta)
            .zip(&w)
            .map(|((&j, &e), &wv)| 0.5 * zeta * wv * j * j / e)
            .sum();
        let f_lo = free_energy(&y[k * n..(k + 1) * n]);
        let f_hi = free_energy(&y[(k + 1) * n..(k + 2) * n]);
        loss += (dissipation + (f_hi - f_lo) / dt) / intervals;

        // ∂D/∂η direct term and ∂D/∂J.
        let mut dl_dc_lo = vec![0.0; n]; // ∂L/∂C_k[m]
        for m in 0..n {
            let j = flux[m];
            let e = eta[m];
            dl_dy[k * n + m] += -0.5 * zeta * w[m] * j * j / (e * e) / intervals;
            let dd_dj = zeta * w[m] * j / e / intervals;
            // J = −(C₊ − C₋)/dt
            dl_dc_lo[m] += dd_dj / dt;
        }
        // Cumulative-trapezoid adjoint: suffix sums of the C-derivatives.
        let spread = |dl_dc: &[f64], out: &mut [f64], sign: f64| {
            let mut suffix = vec![0.0; n + 1];
            for m in (0..n).rev() {
                suffix[m] = suffix[m + 1] + dl_dc[m];
            }
            out[0] += sign * 0.5 * h * suffix[1];
            for node in 1..n {
                out[node] += sign * (0.5 * h * dl_dc[node] + h * suffix[node + 1]);
            }
        };
        spread(&dl_dc_lo, &mut dl_dy[k * n..(k + 1) * n], 1.0);
        // C₊ enters J with the opposite sign.
        spread(&dl_dc_lo, &mut dl_dy[(k + 1) * n..(k + 2) * n], -1.0);

        // Free-energy rate terms.
        for m in 0..n {
            let e_lo = y[k * n + m];
            let e_hi = y[(k + 1) * n + m];
            dl_dy[k * n + m] -=
                kbt * w[m] * (e_lo.max(LOG_FLOOR).ln() + 1.0) / dt / intervals;
            dl_dy[(k + 1) * n + m] +=
                kbt * w[m] * (e_hi.max(LOG_FLOOR).ln() + 1.0) / dt / intervals;
        }
    }
    Ok((loss, dl_dy))
}

/// Dissipation and free-energy-rate parts of the Rayleighian per interval,
/// for reporting and oracle comparisons.
pub fn rayleighian_parts(
    grid: &Grid,
    times: &[f64],
    zeta: f64,
    kbt: f64,
    y: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let n = grid.node_count();
    let t = times.len();
    let dt = times[1] - times[0];
    let h = grid.axes()[0].spacing();
    let w = grid.quad_weights();
    let free_energy = |yk: &[f64]| -> f64 {
        yk.iter()
            .zip(&w)
            .map(|(&v, &wv)| if v <= 0.0 { 0.0 } else { kbt * wv * v * v.ln() })
            .sum()
    };
    let mut parts = Vec::with_capacity(t - 1);
    for k in 0..t - 1 {
        let eta = &y[k * n..(k + 1) * n];
        let c0 = cumulative_trapezoid(eta, h);
        let c1 = cumulative_trapezoid(&y[(k + 1) * n..(k + 2) * n], h);
        let dissipation: f64 = c0
            .iter()
            .zip(&c1)
            .zip(eta.iter().zip(&w))
            .map(|((&a, &b), (&e, &wv))| {
                let j = -(b - a) / dt;
                0.5 * zeta * wv * j * j / e
            })
            .sum();
        let fdot = (free_energy(&y[(k + 1) * n..(k + 2) * n]) - free_energy(eta)) / dt;
        parts.push((dissipation, fdot));
    }
    Ok(parts)
}

/// Gradient of a 2-d field by central differences, one-sided at the walls.
fn gradient_2d(shape: (usize, usize), spacing: (f64, f64), y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n0, n1) = shape;
    let (h0, h1) = spacing;
    let mut gx = vec![0.0; n0 * n1];
    let mut gy = vec![0.0; n0 * n1];
    for i in 0..n0 {
        for j in 0..n1 {
            let at = i * n1 + j;
            gx[at] = if i == 0 {
                (y[n1 + j] - y[j]) / h0
            } else if i == n0 - 1 {
                (y[at] - y[at - n1]) / h0
            } else {
                (y[at + n1] - y[at - n1]) / (2.0 * h0)
            };
            gy[at] = if j == 0 {
                (y[at + 1] - y[at]) / h1
            } else if j == n1 - 1 {
                (y[at] - y[at - 1]) / h1
            } else {
                (y[at + 1] - y[at - 1]) / (2.0 * h1)
            };
        }
    }
    (gx, gy)
}

/// Adjoint of [`gradient_2d`]: accumulate `Dᵀ a` into `out`.
fn gradient_2d_adjoint(
    shape: (usize, usize),
    spacing: (f64, f64),
    ax: &[f64],
    ay: &[f64],
    out: &mut [f64],
) {
    let (n0, n1) = shape;
    let (h0, h1) = spacing;
    for i in 0..n0 {
        for j in 0..n1 {
            let at = i * n1 + j;
            let a = ax[at];
            if a != 0.0 {
                if i == 0 {
                    out[n1 + j] += a / h0;
                    out[j] -= a / h0;
                } else if i == n0 - 1 {
                    out[at] += a / h0;
                    out[at - n1] -= a / h0;
                } else {
                    out[at + n1] += a / (2.0 * h0);
                    out[at - n1] -= a / (2.0 * h0);
                }
            }
            let a = ay[at];
            if a != 0.0 {
                if j == 0 {
                    out[at + 1] += a / h1;
                    out[at] -= a / h1;
                } else if j == n1 - 1 {
                    out[at] += a / h1;
                    out[at - 1] -= a / h1;
                } else {
                    out[at + 1] += a / (2.0 * h1);
                    out[at - 1] -= a / (2.0 * h1);
                }
            }
        }
    }
}

/// Ginzburg-Landau free energy of a phase field on a 2-d grid, averaged
/// over snapshots: `(1/T) Σ_k ∫ ½ε²|∇φ|² + ¼(φ²−1)² dx`.
///
/// Returns a coarse-grid warning flag when fewer than 4 nodes span one
/// interface width `2ε`.
pub fn allen_cahn_energy_of_values(
    grid: &Grid,
    epsilon: f64,
    y: &[f64],
) -> Result<(f64, Vec<f64>, bool)> {
    if grid.dim() != 2 {
        return Err(Error::ShapeMismatch(
            "Allen-Cahn energy loss needs a 2-d grid".into(),
        ));
    }
    let n = grid.node_count();
    let t = y.len() / n;
    if y.len() != n * t || t == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} field values for {n} nodes",
            y.len()
        )));
    }
    let shape = (grid.axes()[0].n_nodes, grid.axes()[1].n_nodes);
    let spacing = (grid.axes()[0].spacing(), grid.axes()[1].spacing());
    let coarse = spacing.0.max(spacing.1) > 2.0 * epsilon / 4.0;
    let w = grid.quad_weights();
    let mut loss = 0.0;
    let mut dl_dy = vec![0.0; y.len()];
    for k in 0..t {
        let yk = &y[k * n..(k + 1) * n];
        let (gx, gy) = gradient_2d(shape, spacing, yk);
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        for i in 0..n {
            let phi = yk[i];
            let well = phi * phi - 1.0;
            loss += w[i] * (0.5 * epsilon * epsilon * (gx[i] * gx[i] + gy[i] * gy[i])
                + 0.25 * well * well)
                / t as f64;
            let dk = &mut dl_dy[k * n + i];
            *dk += w[i] * well * phi / t as f64;
            ax[i] = w[i] * epsilon * epsilon * gx[i] / t as f64;
            ay[i] = w[i] * epsilon * epsilon * gy[i] / t as f64;
        }
        gradient_2d_adjoint(shape, spacing, &ax, &ay, &mut dl_dy[k * n..(k + 1) * n]);
    }
    Ok((loss, dl_dy, coarse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn unit_grid(n: usize) -> Grid {
        Grid::unit_line(n)
    }

    #[test]
    fn constraint_loss_zero_when_moments_match() {
        let lib = FeatureLibrary::binomial(6, 1);
        let grid = unit_grid(201);
        let evaluator = FeatureEvaluator::build(&lib, &grid).unwrap();
        // Field: a fixed smooth density; target = its own moments.
        let y: Vec<f64> = (0..201)
            .map(|i| {
                let x = i as f64 / 200.0;
                1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos()
            })
            .collect();
        let w = grid.quad_weights();
        let g: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a * b).collect();
        let moments = evaluator.weighted_moments(&g);
        let target = MomentVector::static_moments(moments);
        let (loss, _) = constraint_loss_of_values(&evaluator, &grid, &target, &y).unwrap();
        assert!(loss < 1e-24, "loss {loss}");
    }

    #[test]
    fn constraint_loss_constant_field_one_feature() {
        // Constant ln 2 field, single constant feature, uniform target 1:
        // loss = (ln2·|domain| − 1)².
        let lib = FeatureLibrary::new(vec![crate::features::FeatureSpec::Polynomial {
            powers: vec![0],
        }])
        .unwrap();
        let grid = unit_grid(51);
        let evaluator = FeatureEvaluator::build(&lib, &grid).unwrap();
        let y = vec![2.0f64.ln(); 51];
        let target = MomentVector::static_moments(vec![1.0]);
        let (loss, _) = constraint_loss_of_values(&evaluator, &grid, &target, &y).unwrap();
        let expected = (2.0f64.ln() - 1.0).powi(2);
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn separable_matches_dense_in_two_dims() {
        let lib = FeatureLibrary::binomial(3, 2);
        let grid = Grid::new(vec![
            Axis::new("x", 0.0, 1.0, 7).unwrap(),
            Axis::new("y", 0.0, 1.0, 5).unwrap(),
        ])
        .unwrap();
        let separable = FeatureEvaluator::build(&lib, &grid).unwrap();
        assert!(matches!(separable, FeatureEvaluator::SeparableBinomial { .. }));
        let dense = FeatureEvaluator::Dense(crate::features::eval_library(&lib, &grid).unwrap());
        let g: Vec<f64> = (0..35).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let ms = separable.weighted_moments(&g);
        let md = dense.weighted_moments(&g);
        for (a, b) in ms.iter().zip(&md) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let r: Vec<f64> = (0..lib.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let ss = separable.spread_residual(&r);
        let sd = dense.spread_residual(&r);
        for (a, b) in ss.iter().zip(&sd) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn kl_loss_zero_at_fixed_point() {
        let grid = unit_grid(21);
        let y = vec![0.8; 21];
        let (loss, grad) = fixed_point_kl_of_values(&grid, &y, &y).unwrap();
        assert_eq!(loss, 0.0);
        // Gradient is w/T (ln 1 + 1) = w, not zero: the unnormalized KL has
        // slope 1 in the mass direction at the fixed point.
        assert!(grad.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn kl_loss_positive_away_from_frozen_for_normalized_pair() {
        let grid = unit_grid(101);
        let y: Vec<f64> = (0..101)
            .map(|i| {
                let x = i as f64 / 100.0;
                1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin()
            })
            .collect();
        let q = vec![1.0; 101];
        let (loss, _) = fixed_point_kl_of_values(&grid, &q, &y).unwrap();
        assert!(loss > 0.0);
    }

    #[test]
    fn kl_loss_two_node_hand_value() {
        // p̂ = (2, 1), p̂_old = (1, 1) on [0,1] with 2 nodes:
        // trapezoid of p ln(p/q) = ½·(2 ln 2 + 0) = ln 2.
        let grid = unit_grid(2);
        let (loss, _) = fixed_point_kl_of_values(&grid, &[1.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_loss_rejects_nonpositive_frozen() {
        let grid = unit_grid(3);
        assert!(matches!(
            fixed_point_kl_of_values(&grid, &[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0]),
            Err(Error::NonPositiveFrozen { idx: 1, .. })
        ));
    }

    #[test]
    fn rayleighian_zero_for_stationary_uniform() {
        let grid = Grid::line(-1.0, 1.0, 41).unwrap();
        let times = [0.0, 0.1, 0.2];
        let y = vec![0.5; 41 * 3];
        let (loss, _) = rayleighian_of_values(&grid, &times, 1.0, 1.0, &y).unwrap();
        assert!(loss.abs() < 1e-14);
        for (d, fdot) in rayleighian_parts(&grid, &times, 1.0, 1.0, &y).unwrap() {
            assert_eq!(d, 0.0);
            assert!(fdot.abs() < 1e-14);
        }
    }

    #[test]
    fn rayleighian_rejects_nonuniform_times() {
        let grid = Grid::line(-1.0, 1.0, 11).unwrap();
        let y = vec![0.5; 33];
        assert!(matches!(
            rayleighian_of_values(&grid, &[0.0, 0.1, 0.3], 1.0, 1.0, &y),
            Err(Error::NonUniformTimes { .. })
        ));
    }

    #[test]
    fn rayleighian_dissipation_nonnegative() {
        let grid = Grid::line(-1.0, 1.0, 101).unwrap();
        let times: Vec<f64> = (0..4).map(|k| 0.05 + 0.1 * k as f64).collect();
        let mut y = Vec::new();
        for &t in &times {
            for i in 0..101 {
                let x = -1.0 + 2.0 * i as f64 / 100.0;
                y.push(0.5 + 0.45 * (std::f64::consts::FRAC_PI_2 * x).sin()
                    * (-std::f64::consts::PI.powi(2) / 4.0 * t).exp());
            }
        }
        for (d, _) in rayleighian_parts(&grid, &times, 1.0, 1.0, &y).unwrap() {
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn rayleighian_single_mode_matches_analytic_rate() {
        // η = η₀ + c sin(λ₀ x) e^{−μ₀ t} on [−1, 1] with λ₀ = π/2 solves
        // the diffusion equation with D = μ₀/λ₀² = 1. For that history:
        //   flux J = −∂_t ∫_{-1}^x η = μ₀ c e^{−μ₀ t} cos(λ₀ x)/λ₀,
        //   D_diss = ½ ∫ J²/η, Ḟ = ∫ (ln η + 1) ∂_t η.
        // The discrete Rayleighian over one short interval converges to the
        // analytic D_diss + Ḟ evaluated at the left endpoint, to O(Δt).
        let lam0 = std::f64::consts::FRAC_PI_2;
        let mu0 = lam0 * lam0;
        let (eta0, c) = (0.5, 0.2);
        let nx = 4001;
        let grid = Grid::line(-1.0, 1.0, nx).unwrap();
        let t0 = 0.3;
        let dt = 1e-4;
        let times = [t0, t0 + dt];
        let mut y = Vec::new();
        for &t in &times {
            for i in 0..nx {
                let x = -1.0 + 2.0 * i as f64 / (nx - 1) as f64;
                y.push(eta0 + c * (lam0 * x).sin() * (-mu0 * t).exp());
            }
        }
        let (loss, _) = rayleighian_of_values(&grid, &times, 1.0, 1.0, &y).unwrap();
        // Analytic oracle at t = t0 by fine quadrature.
        let amp = c * (-mu0 * t0).exp();
        let quad = |f: &dyn Fn(f64) -> f64| {
            let m = 20_001;
            let h = 2.0 / (m - 1) as f64;
            let mut acc = 0.0;
            for i in 0..m {
                let x = -1.0 + h * i as f64;
                let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                acc += w * f(x);
            }
            acc * h
        };
        let eta = |x: f64| eta0 + amp * (lam0 * x).sin();
        let diss = quad(&|x| {
            let j = mu0 * amp * (lam0 * x).cos() / lam0;
            0.5 * j * j / eta(x)
        });
        let fdot = quad(&|x| {
            let detadt = -mu0 * amp * (lam0 * x).sin();
            (eta(x).ln() + 1.0) * detadt
        });
        let analytic = diss + fdot;
        assert!(
            (loss - analytic).abs() < 50.0 * dt.max(1e-6),
            "discrete {loss} vs analytic {analytic}"
        );
    }

    fn small_phase_grid() -> Grid {
        Grid::new(vec![
            Axis::new("x", -1.0, 1.0, 41).unwrap(),
            Axis::new("y", -1.0, 1.0, 41).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn allen_cahn_energy_zero_at_well_minimum() {
        let grid = small_phase_grid();
        let y = vec![1.0; grid.node_count()];
        let (loss, grad, _) = allen_cahn_energy_of_values(&grid, 0.1, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g.abs() < 1e-14));
    }

    #[test]
    fn allen_cahn_energy_quarter_volume_at_zero_field() {
        let grid = small_phase_grid();
        let y = vec![0.0; grid.node_count()];
        let (loss, _, _) = allen_cahn_energy_of_values(&grid, 0.1, &y).unwrap();
        assert!((loss - 0.25 * 4.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn allen_cahn_kink_energy_matches_analytic() {
        // 1-d kink profile tanh(x/(√2 ε)) extended uniformly in y over a
        // unit cross-section has energy (2√2/3)·ε.
        let eps = 0.025f64;
        let grid = Grid::new(vec![
            Axis::new("x", -0.3, 0.3, 1201).unwrap(),
            Axis::new("y", 0.0, 1.0, 3).unwrap(),
        ])
        .unwrap();
        let mut y = vec![0.0; grid.node_count()];
        for flat in 0..grid.node_count() {
            let p = grid.node(flat);
            y[flat] = (p[0] / (2.0f64.sqrt() * eps)).tanh();
        }
        let (loss, _, _) = allen_cahn_energy_of_values(&grid, eps, &y).unwrap();
        let expected = 2.0 * 2.0f64.sqrt() / 3.0 * eps;
        assert!(
            (loss - expected).abs() / expected < 0.05,
            "energy {loss} vs kink value {expected}"
        );
    }

    #[test]
    fn allen_cahn_flags_coarse_grid() {
        let grid = Grid::new(vec![
            Axis::new("x", -1.0, 1.0, 11).unwrap(),
            Axis::new("y", -1.0, 1.0, 11).unwrap(),
        ])
        .unwrap();
        let y = vec![0.5; grid.node_count()];
        let (_, _, coarse) = allen_cahn_energy_of_values(&grid, 0.025, &y).unwrap();
        assert!(coarse);
    }
}
