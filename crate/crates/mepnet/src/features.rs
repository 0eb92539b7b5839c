//! Observable libraries and moment evaluation.
//!
//! A [`FeatureLibrary`] is an ordered list of observables `f_i`; a
//! [`MomentVector`] holds their target expectations per snapshot time. The
//! workhorse family is the binomial (Bernstein) basis
//! `φ_k(x) = Π_j C(n,k_j) x_j^{k_j} (1-x_j)^{n-k_j}`, which forms a
//! partition of unity on the unit box, so the full library implies the
//! normalization constraint. The other families (polynomial, exponential,
//! logarithmic, trigonometric, square-root, reciprocal) exist for
//! reconstruction-quality comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ProbabilityField, SampleHistogram};
use crate::grid::Grid;
use crate::special::binomial_coefficient;

/// Sine or cosine factor of a trigonometric feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrigWave {
    Sin,
    Cos,
}

/// One observable, defined as a product of per-axis factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureSpec {
    /// `Π_j C(n,k_j) x_j^{k_j} (1-x_j)^{n-k_j}` on the unit box.
    Binomial { order: u32, indices: Vec<u32> },
    /// `Π_j x_j^{p_j}`.
    Polynomial { powers: Vec<u32> },
    /// `Π_j exp(-r_j x_j)`.
    Exponential { rates: Vec<f64> },
    /// `Π_j ln(1 + s_j x_j)`, singular where `1 + s_j x_j = 0`.
    Logarithmic { scales: Vec<f64> },
    /// `Π_j w_j(f_j π x_j)` with `w` sine or cosine.
    Trigonometric { waves: Vec<(TrigWave, f64)> },
    /// `Π_j x_j^{h_j / 2}`.
    SquareRoot { half_powers: Vec<u32> },
    /// `Π_j 1 / (1 + s_j x_j)`, singular where `1 + s_j x_j = 0`.
    Reciprocal { scales: Vec<f64> },
}

impl std::fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureSpec::Binomial { order, indices } => {
                write!(f, "binomial(n={order}, k={indices:?})")
            }
            FeatureSpec::Polynomial { powers } => write!(f, "polynomial({powers:?})"),
            FeatureSpec::Exponential { rates } => write!(f, "exponential({rates:?})"),
            FeatureSpec::Logarithmic { scales } => write!(f, "logarithmic({scales:?})"),
            FeatureSpec::Trigonometric { waves } => write!(f, "trigonometric({waves:?})"),
            FeatureSpec::SquareRoot { half_powers } => write!(f, "square-root({half_powers:?})"),
            FeatureSpec::Reciprocal { scales } => write!(f, "reciprocal({scales:?})"),
        }
    }
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSpec::Binomial { indices, .. } => indices.len(),
            FeatureSpec::Polynomial { powers } => powers.len(),
            FeatureSpec::Exponential { rates } => rates.len(),
            FeatureSpec::Logarithmic { scales } => scales.len(),
            FeatureSpec::Trigonometric { waves } => waves.len(),
            FeatureSpec::SquareRoot { half_powers } => half_powers.len(),
            FeatureSpec::Reciprocal { scales } => scales.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidFeature(format!("{self} has no axes")));
        }
        if let FeatureSpec::Binomial { order, indices } = self {
            for &k in indices {
                if k > *order {
                    return Err(Error::InvalidFeature(format!(
                        "{self}: index {k} exceeds order {order}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Evaluate at a point. `idx` is the flat node index used in error
    /// reports; pass 0 for free-standing points.
    pub fn eval(&self, x: &[f64], idx: usize) -> Result<f64> {
        debug_assert_eq!(x.len(), self.dim());
        let mut v = 1.0;
        match self {
            FeatureSpec::Binomial { order, indices } => {
                for (&k, &xj) in indices.iter().zip(x) {
                    if !(-1e-12..=1.0 + 1e-12).contains(&xj) {
                        return Err(Error::OutsideUnitBox { x: x.to_vec() });
                    }
                    let xj = xj.clamp(0.0, 1.0);
                    v *= binomial_coefficient(*order, k)
                        * xj.powi(k as i32)
                        * (1.0 - xj).powi((*order - k) as i32);
                }
            }
            FeatureSpec::Polynomial { powers } => {
                for (&p, &xj) in powers.iter().zip(x) {
                    v *= xj.powi(p as i32);
                }
            }
            FeatureSpec::Exponential { rates } => {
                for (&r, &xj) in rates.iter().zip(x) {
                    v *= (-r * xj).exp();
                }
            }
            FeatureSpec::Logarithmic { scales } => {
                for (&s, &xj) in scales.iter().zip(x) {
                    let arg = 1.0 + s * xj;
                    if arg <= 0.0 {
                        return Err(Error::SingularFeature {
                            spec: self.to_string(),
                            idx,
                            x: x.to_vec(),
                        });
                    }
                    v *= arg.ln();
                }
            }
            FeatureSpec::Trigonometric { waves } => {
                for (&(wave, freq), &xj) in waves.iter().zip(x) {
                    let arg = freq * std::f64::consts::PI * xj;
                    v *= match wave {
                        TrigWave::Sin => arg.sin(),
                        TrigWave::Cos => arg.cos(),
                    };
                }
            }
            FeatureSpec::SquareRoot { half_powers } => {
                for (&h, &xj) in half_powers.iter().zip(x) {
                    if xj < 0.0 {
                        return Err(Error::SingularFeature {
                            spec: self.to_string(),
                            idx,
                            x: x.to_vec(),
                        });
                    }
                    v *= xj.powf(h as f64 / 2.0);
                }
            }
            FeatureSpec::Reciprocal { scales } => {
                for (&s, &xj) in scales.iter().zip(x) {
                    let arg = 1.0 + s * xj;
                    if arg == 0.0 {
                        return Err(Error::SingularFeature {
                            spec: self.to_string(),
                            idx,
                            x: x.to_vec(),
                        });
                    }
                    v *= 1.0 / arg;
                }
            }
        }
        Ok(v)
    }
}

/// Evaluate one binomial feature `Π_j C(n,k_j) x_j^{k_j} (1-x_j)^{n-k_j}`
/// at a point of the unit box.
pub fn binomial_feature(indices: &[u32], order: u32, x: &[f64]) -> Result<f64> {
    let spec = FeatureSpec::Binomial {
        order,
        indices: indices.to_vec(),
    };
    spec.validate()?;
    spec.eval(x, 0)
}

/// An ordered list of features sharing one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLibrary {
    specs: Vec<FeatureSpec>,
    dim: usize,
}

impl FeatureLibrary {
    pub fn new(specs: Vec<FeatureSpec>) -> Result<Self> {
        let Some(first) = specs.first() else {
            return Err(Error::InvalidFeature("library is empty".into()));
        };
        let dim = first.dim();
        for s in &specs {
            s.validate()?;
            if s.dim() != dim {
                return Err(Error::InvalidFeature(format!(
                    "{s} has dimension {} but the library has {dim}",
                    s.dim()
                )));
            }
        }
        for (i, a) in specs.iter().enumerate() {
            for b in specs.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidFeature(format!("duplicate spec {a}")));
                }
            }
        }
        Ok(Self { specs, dim })
    }

    /// The complete tensor binomial library of order `n` in `dim`
    /// dimensions: all `(n+1)^dim` index vectors in lexicographic order
    /// (first axis slowest).
    pub fn binomial(order: u32, dim: usize) -> Self {
        let per_axis = order as usize + 1;
        let count = per_axis.pow(dim as u32);
        let mut specs = Vec::with_capacity(count);
        for flat in 0..count {
            let mut idx = vec![0u32; dim];
            let mut rem = flat;
            for a in (0..dim).rev() {
                idx[a] = (rem % per_axis) as u32;
                rem /= per_axis;
            }
            specs.push(FeatureSpec::Binomial {
                order,
                indices: idx,
            });
        }
        Self {
            specs,
            dim,
        }
    }

    /// One-dimensional binomial library with the last index dropped.
    ///
    /// The full basis sums to 1, which makes the feature covariance exactly
    /// singular in dual solves; dropping one member removes the redundancy
    /// while the normalization stays encoded in the partition function.
    pub fn binomial_reduced(order: u32) -> Self {
        let mut lib = Self::binomial(order, 1);
        lib.specs.pop();
        lib
    }

    /// Polynomial moments `x, x², …, x^m` on one axis.
    pub fn polynomial_1d(max_power: u32) -> Self {
        let specs = (1..=max_power)
            .map(|p| FeatureSpec::Polynomial { powers: vec![p] })
            .collect();
        Self { specs, dim: 1 }
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when every member is binomial with the same order and the
    /// library is the full tensor index set in lexicographic order.
    pub fn is_complete_binomial(&self) -> Option<u32> {
        let FeatureSpec::Binomial { order, .. } = &self.specs[0] else {
            return None;
        };
        let expected = Self::binomial(*order, self.dim);
        (expected.specs == self.specs).then_some(*order)
    }
}

/// Dense feature matrix: row `i` holds feature `i` at every grid node.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub n_features: usize,
    pub n_nodes: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub(crate) fn from_raw(n_features: usize, n_nodes: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_features * n_nodes);
        Self {
            n_features,
            n_nodes,
            values,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluate every library member at every node of `grid`.
pub fn eval_library(lib: &FeatureLibrary, grid: &Grid) -> Result<FeatureMatrix> {
    if lib.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            lib_dim: lib.dim(),
            grid_dim: grid.dim(),
        });
    }
    let n_nodes = grid.node_count();
    let mut values = Vec::with_capacity(lib.len() * n_nodes);
    let mut x = vec![0.0; grid.dim()];
    for spec in lib.specs() {
        for flat in 0..n_nodes {
            grid.node_into(flat, &mut x);
            values.push(spec.eval(&x, flat)?);
        }
    }
    Ok(FeatureMatrix {
        n_features: lib.len(),
        n_nodes,
        values,
    })
}

/// Target expectations `f̃_i(t_k)`: one value per feature per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub times: Vec<f64>,
    /// `values[k][i]` is feature `i` at snapshot `k`.
    pub values: Vec<Vec<f64>>,
}

impl MomentVector {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || values.len() != times.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} snapshots of moments for {} times",
                values.len(),
                times.len()
            )));
        }
        let m = values[0].len();
        for (k, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::ShapeMismatch(format!(
                    "snapshot {k} has {} moments, expected {m}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { idx: k * m + i, value: v });
                }
            }
        }
        Ok(Self { times, values })
    }

    /// Single-snapshot moments at time 0.
    pub fn static_moments(values: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![values],
        }
    }

    pub fn n_features(&self) -> usize {
        self.values[0].len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }
}

/// Moments of a field: `f̃_i = ∫ f_i p dx` by the trapezoid rule.
///
/// Streams over nodes, so it stays cheap in high dimension where the dense
/// feature matrix would not fit.
pub fn moments_from_field(lib: &FeatureLibrary, p: &ProbabilityField) -> Result<MomentVector> {
    let values = moments_of_values(lib, p.grid(), p.values())?;
    Ok(MomentVector::static_moments(values))
}

/// Moments of raw node values against a library (shared by field moments and
/// the constraint loss).
pub(crate) fn moments_of_values(
    lib: &FeatureLibrary,
    grid: &Grid,
    values: &[f64],
) -> Result<Vec<f64>> {
    if lib.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            lib_dim: lib.dim(),
            grid_dim: grid.dim(),
        });
    }
    let per_axis = grid.axis_weights();
    let strides = grid.strides();
    let mut x = vec![0.0; grid.dim()];
    let mut out = vec![0.0; lib.len()];
    for (flat, &v) in values.iter().enumerate() {
        let mut w = v;
        let mut rem = flat;
        for a in 0..grid.dim() {
            let i = rem / strides[a];
            rem %= strides[a];
            w *= per_axis[a][i];
            x[a] = grid.axes()[a].coord(i);
        }
        if w == 0.0 {
            continue;
        }
        for (spec, acc) in lib.specs().iter().zip(out.iter_mut()) {
            *acc += w * spec.eval(&x, flat)?;
        }
    }
    Ok(out)
}

/// Moments of sampled states mapped into the unit interval by
/// `state / state_scale`, per snapshot.
pub fn moments_from_samples(
    lib: &FeatureLibrary,
    hist: &SampleHistogram,
    state_scale: f64,
) -> Result<MomentVector> {
    let mut values = Vec::with_capacity(hist.times.len());
    let total = hist.total_trajectories as f64;
    for counts in &hist.counts {
        let mut row = vec![0.0; lib.len()];
        for (&state, &count) in hist.states.iter().zip(counts) {
            if count == 0 {
                continue; // unobserved states don't constrain the scale
            }
            if state >= state_scale {
                return Err(Error::StateScale {
                    state,
                    scale: state_scale,
                });
            }
            let x = [state / state_scale];
            let weight = count as f64 / total;
            for (spec, acc) in lib.specs().iter().zip(row.iter_mut()) {
                *acc += weight * spec.eval(&x, 0)?;
            }
        }
        values.push(row);
    }
    MomentVector::new(hist.times.clone(), values)
}

/// Smallest power of ten strictly above `max_state`; the default mapping of
/// discrete states into the unit interval.
pub fn default_state_scale(max_state: f64) -> f64 {
    let mut scale = 1.0;
    while scale <= max_state {
        scale *= 10.0;
    }
    scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::normalize;
    use crate::field::ScalarField;

    #[test]
    fn binomial_midpoint_symmetric() {
        // n=2, k=1 at 0.5: 2 · 0.5 · 0.5
        let v = binomial_feature(&[1], 2, &[0.5]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn binomial_zero_index_at_origin_is_one() {
        for n in [1, 5, 20] {
            assert_eq!(binomial_feature(&[0], n, &[0.0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn binomial_multi_axis_is_product_of_axes() {
        let v2 = binomial_feature(&[1, 2], 3, &[0.3, 0.6]).unwrap();
        let a = binomial_feature(&[1], 3, &[0.3]).unwrap();
        let b = binomial_feature(&[2], 3, &[0.6]).unwrap();
        assert!((v2 - a * b).abs() < 1e-15);
    }

    #[test]
    fn binomial_rejects_points_outside_unit_box() {
        assert!(matches!(
            binomial_feature(&[0], 2, &[1.5]),
            Err(Error::OutsideUnitBox { .. })
        ));
    }

    #[test]
    fn binomial_requires_index_at_most_order() {
        assert!(binomial_feature(&[3], 2, &[0.5]).is_err());
    }

    #[test]
    fn eval_library_order_one_is_bernstein_pair() {
        let lib = FeatureLibrary::binomial(1, 1);
        let grid = Grid::unit_line(3);
        let m = eval_library(&lib, &grid).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.5, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn eval_library_polynomial_square() {
        let lib = FeatureLibrary::new(vec![FeatureSpec::Polynomial { powers: vec![2] }]).unwrap();
        let m = eval_library(&lib, &Grid::unit_line(3)).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn complete_binomial_columns_sum_to_one() {
        let lib = FeatureLibrary::binomial(10, 1);
        let grid = Grid::unit_line(53);
        let m = eval_library(&lib, &grid).unwrap();
        for node in 0..grid.node_count() {
            let sum: f64 = (0..lib.len()).map(|i| m.row(i)[node]).sum();
            assert!((sum - 1.0).abs() < 1e-12, "node {node}: {sum}");
        }
    }

    #[test]
    fn binomial_symmetry_under_reflection() {
        let n = 13;
        for k in 0..=n {
            for &x in &[0.0, 0.1, 0.37, 0.5, 0.92, 1.0] {
                let a = binomial_feature(&[k], n, &[x]).unwrap();
                let b = binomial_feature(&[n - k], n, &[1.0 - x]).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_feature_singularity_names_spec() {
        let lib =
            FeatureLibrary::new(vec![FeatureSpec::Logarithmic { scales: vec![1.0] }]).unwrap();
        let grid = Grid::line(-1.0, 0.0, 3).unwrap();
        match eval_library(&lib, &grid) {
            Err(Error::SingularFeature { spec, .. }) => {
                assert!(spec.contains("logarithmic"), "{spec}")
            }
            other => panic!("expected singular feature, got {other:?}"),
        }
    }

    #[test]
    fn normalization_moment_is_one() {
        let lib = FeatureLibrary::new(vec![FeatureSpec::Polynomial { powers: vec![0] }]).unwrap();
        let p = normalize(&ScalarField::constant(Grid::unit_line(41), 3.0).unwrap()).unwrap();
        let m = moments_from_field(&lib, &p).unwrap();
        assert!((m.values[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_moment_of_uniform_is_half() {
        let lib = FeatureLibrary::polynomial_1d(1);
        let p = normalize(&ScalarField::constant(Grid::unit_line(101), 1.0).unwrap()).unwrap();
        let m = moments_from_field(&lib, &p).unwrap();
        assert!((m.values[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn complete_binomial_moments_sum_to_one_for_normalized_field() {
        let lib = FeatureLibrary::binomial(10, 1);
        let p = normalize(
            &ScalarField::from_fn(Grid::unit_line(201), |x| 0.3 + (3.0 * x[0]).cos().powi(2))
                .unwrap(),
        )
        .unwrap();
        let m = moments_from_field(&lib, &p).unwrap();
        let total: f64 = m.values[0].iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moments_of_zero_field_vanish() {
        let lib = FeatureLibrary::binomial(4, 1);
        let zero = ProbabilityField::new(Grid::unit_line(11), vec![0.0; 11]).unwrap();
        let m = moments_from_field(&lib, &zero).unwrap();
        assert!(m.values[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_moments_normalization_and_single_state() {
        let hist = SampleHistogram::new(vec![250.0], vec![0.0], vec![vec![7]], 7).unwrap();
        let const_lib =
            FeatureLibrary::new(vec![FeatureSpec::Polynomial { powers: vec![0] }]).unwrap();
        let m = moments_from_samples(&const_lib, &hist, 800.0).unwrap();
        assert_eq!(m.values[0][0], 1.0);

        let x_lib = FeatureLibrary::polynomial_1d(1);
        let m = moments_from_samples(&x_lib, &hist, 800.0).unwrap();
        assert_eq!(m.values[0][0], 0.3125);
    }

    #[test]
    fn sample_moments_reject_state_beyond_scale() {
        let hist = SampleHistogram::new(vec![900.0], vec![0.0], vec![vec![1]], 1).unwrap();
        let lib = FeatureLibrary::polynomial_1d(1);
        assert!(matches!(
            moments_from_samples(&lib, &hist, 800.0),
            Err(Error::StateScale { .. })
        ));
    }

    #[test]
    fn default_state_scale_is_power_of_ten() {
        assert_eq!(default_state_scale(7.0), 10.0);
        assert_eq!(default_state_scale(799.0), 1000.0);
        assert_eq!(default_state_scale(1000.0), 10000.0);
    }

    #[test]
    fn duplicate_specs_rejected() {
        let spec = FeatureSpec::Polynomial { powers: vec![1] };
        assert!(FeatureLibrary::new(vec![spec.clone(), spec]).is_err());
    }

    #[test]
    fn tensor_binomial_count_and_order() {
        let lib = FeatureLibrary::binomial(2, 2);
        assert_eq!(lib.len(), 9);
        // Lexicographic with first axis slowest.
        assert_eq!(
            lib.specs()[1],
            FeatureSpec::Binomial {
                order: 2,
                indices: vec![0, 1]
            }
        );
        assert_eq!(
            lib.specs()[3],
            FeatureSpec::Binomial {
                order: 2,
                indices: vec![1, 0]
            }
        );
        assert_eq!(lib.is_complete_binomial(), Some(2));
        assert_eq!(FeatureLibrary::binomial_reduced(5).is_complete_binomial(), None);
    }
}
