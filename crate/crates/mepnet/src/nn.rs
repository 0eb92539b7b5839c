//! A minimal dense neural field with reverse-mode differentiation.
//!
//! The default configuration is two hidden layers of 50 nodes where only
//! the first carries a tanh nonlinearity, and a softplus output that keeps
//! the field strictly positive. Phase-field problems swap the output for a
//! scaled tanh so the network can represent values in `[-1, 1]`.
//!
//! Parameters live in one flat vector in layer order (weights row-major,
//! then biases), which keeps Adam, checkpoints and finite-difference
//! checks straightforward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Output-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    /// `ln(1 + e^z)`, computed in the overflow-safe form
    /// `max(z, 0) + ln(1 + e^{-|z|})`. Strictly positive.
    Softplus,
    /// `s · tanh(z)`; used where the field is a phase variable rather than
    /// a density.
    ScaledTanh { scale: f64 },
}

impl OutputActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            OutputActivation::ScaledTanh { scale } => scale * z.tanh(),
        }
    }

    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            // σ(z) = 1 − e^{−softplus(z)}
            OutputActivation::Softplus => 1.0 - (-y).exp(),
            OutputActivation::ScaledTanh { scale } => {
                let t = y / scale;
                scale * (1.0 - t * t)
            }
        }
    }
}

/// Network architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
    pub output: OutputActivation,
}

impl MlpConfig {
    /// Two hidden layers of 50 nodes, tanh on the first only, softplus out.
    pub fn density_default(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![50, 50],
            hidden_activations: vec![Activation::Tanh, Activation::Identity],
            output: OutputActivation::Softplus,
        }
    }

    /// Same trunk with a scaled-tanh output spanning `(-1.2, 1.2)`.
    pub fn phase_field_default(input_dim: usize) -> Self {
        Self {
            output: OutputActivation::ScaledTanh { scale: 1.2 },
            ..Self::density_default(input_dim)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::ShapeMismatch("layer widths must be positive".into()));
        }
        if self.hidden_activations.len() != self.hidden.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} hidden activations for {} hidden layers",
                self.hidden_activations.len(),
                self.hidden.len()
            )));
        }
        Ok(())
    }

    /// Layer widths including input and the single output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths()
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// The neural field: a configuration plus one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub params: Vec<f64>,
}

impl MlpModel {
    /// Seeded init: weights uniform in `±√(6/(fan_in + fan_out))`, biases 0.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(config.param_count());
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self { config, params })
    }

    pub fn zeroed(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let n = config.param_count();
        Ok(Self {
            config,
            params: vec![0.0; n],
        })
    }

    /// Offset of layer `l`'s weight block in the flat parameter vector.
    fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        // (weight offset, bias offset, next offset)
        let widths = self.config.widths();
        let mut offsets = Vec::with_capacity(widths.len() - 1);
        let mut at = 0;
        for w in widths.windows(2) {
            let weight = at;
            let bias = at + w[1] * w[0];
            at = bias + w[1];
            offsets.push((weight, bias, at));
        }
        offsets
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Cached activations from one batched forward pass.
///
/// Stored point-major: for each point, the post-activation values of every
/// layer (hidden layers then output) packed contiguously, so the batch can
/// be processed in parallel chunks with disjoint writes.
#[derive(Debug, Clone)]
pub struct Tape {
    n_points: usize,
    input_dim: usize,
    /// Sum of all layer widths after the input.
    stride: usize,
    /// Start of each layer inside one point record.
    layer_starts: Vec<usize>,
    points: Vec<f64>,
    acts: Vec<f64>,
}

impl Tape {
    /// Network outputs per point (last slot of each record).
    pub fn outputs(&self) -> Vec<f64> {
        let last = self.stride - 1;
        (0..self.n_points)
            .map(|p| self.acts[p * self.stride + last])
            .collect()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }
}

const CHUNK: usize = 4096;

fn forward_point(
    model: &MlpModel,
    offsets: &[(usize, usize, usize)],
    widths: &[usize],
    x: &[f64],
    record: &mut [f64],
    layer_starts: &[usize],
) -> Result<f64> {
    let n_layers = offsets.len();
    let mut input_buf: &[f64] = x;
    for l in 0..n_layers {
        let (w_off, b_off, _) = offsets[l];
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let is_output = l == n_layers - 1;
        let start = layer_starts[l];
        for j in 0..n_out {
            let row = &model.params[w_off + j * n_in..w_off + (j + 1) * n_in];
            let mut z = model.params[b_off + j];
            for (wi, xi) in row.iter().zip(input_buf) {
                z += wi * xi;
            }
            let a = if is_output {
                model.config.output.apply(z)
            } else {
                model.config.hidden_activations[l].apply(z)
            };
            if !a.is_finite() {
                return Err(Error::NonFiniteActivation { layer: l });
            }
            record[start + j] = a;
        }
        input_buf = unsafe {
            // The record slice outlives this loop iteration and the write
            // region [start, start+n_out) is never touched again.
            std::slice::from_raw_parts(record.as_ptr().add(start), n_out)
        };
    }
    Ok(record[layer_starts[n_layers - 1]])
}

/// Run the network over a flattened batch of points (`points.len()` must be
/// a multiple of the input dimension). Outputs are deterministic for fixed
/// parameters and independent of how the batch is partitioned.
pub fn forward(model: &MlpModel, points: &[f64]) -> Result<(Vec<f64>, Tape)> {
    let d = model.config.input_dim;
    if points.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates for input dimension {d}",
            points.len()
        )));
    }
    let n_points = points.len() / d;
    let widths = model.config.widths();
    let offsets = model.layer_offsets();
    let mut layer_starts = Vec::with_capacity(widths.len() - 1);
    let mut at = 0;
    for &w in widths.iter().skip(1) {
        layer_starts.push(at);
        at += w;
    }
    let stride = at;
    let mut acts = vec![0.0; n_points * stride];

    let results: Vec<Result<()>> = acts
        .par_chunks_mut(CHUNK * stride)
        .zip(points.par_chunks(CHUNK * d))
        .map(|(act_chunk, point_chunk)| {
            let n = point_chunk.len() / d;
            for p in 0..n {
                forward_point(
                    model,
                    &offsets,
                    &widths,
                    &point_chunk[p * d..(p + 1) * d],
                    &mut act_chunk[p * stride..(p + 1) * stride],
                    &layer_starts,
                )?;
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    let tape = Tape {
        n_points,
        input_dim: d,
        stride,
        layer_starts,
        points: points.to_vec(),
        acts,
    };
    let outputs = tape.outputs();
    Ok((outputs, tape))
}

/// Reverse-mode gradient of `Σ_p upstream[p] · y_p` with respect to the
/// parameters, replaying the tape.
pub fn backward(model: &MlpModel, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
    if upstream.len() != tape.n_points {
        return Err(Error::ShapeMismatch(format!(
            "{} upstream values for {} points",
            upstream.len(),
            tape.n_points
        )));
    }
    let d = tape.input_dim;
    let widths = model.config.widths();
    let offsets = model.layer_offsets();
    let n_layers = offsets.len();
    let n_params = model.params.len();
    let stride = tape.stride;

    // Per-chunk partial gradients, summed in chunk order so the result is
    // independent of thread scheduling.
    let partials: Vec<Vec<f64>> = tape
        .acts
        .par_chunks(CHUNK * stride)
        .zip(tape.points.par_chunks(CHUNK * d))
        .zip(upstream.par_chunks(CHUNK))
        .map(|((act_chunk, point_chunk), up_chunk)| {
            let mut grad = vec![0.0; n_params];
            let max_width = *widths.iter().max().unwrap();
            let mut delta = vec![0.0; max_width];
            let mut delta_next = vec![0.0; max_width];
            for (p, &up) in up_chunk.iter().enumerate() {
                if up == 0.0 {
                    continue;
                }
                let record = &act_chunk[p * stride..(p + 1) * stride];
                let x = &point_chunk[p * d..(p + 1) * d];
                // Seed at the output.
                let y = record[tape.layer_starts[n_layers - 1]];
                delta[0] = up * model.config.output.derivative_from_output(y);
                for l in (0..n_layers).rev() {
                    let (w_off, b_off, _) = offsets[l];
                    let (n_in, n_out) = (widths[l], widths[l + 1]);
                    let prev: &[f64] = if l == 0 {
                        x
                    } else {
                        let s = tape.layer_starts[l - 1];
                        &record[s..s + n_in]
                    };
                    for j in 0..n_out {
                        let dj = delta[j];
                        if dj != 0.0 {
                            let row = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                            for (g, &a) in row.iter_mut().zip(prev) {
                                *g += dj * a;
                            }
                            grad[b_off + j] += dj;
                        }
                    }
                    if l > 0 {
                        // δ_{l-1} = Wᵀ δ ∘ act'(a_{l-1})
                        let act = model.config.hidden_activations[l - 1];
                        for (i, dn) in delta_next.iter_mut().enumerate().take(n_in) {
                            let mut acc = 0.0;
                            for j in 0..n_out {
                                acc += model.params[w_off + j * n_in + i] * delta[j];
                            }
                            *dn = acc * act.derivative_from_output(prev[i]);
                        }
                        std::mem::swap(&mut delta, &mut delta_next);
                    }
                }
            }
            grad
        })
        .collect();

    let mut grad = vec![0.0; n_params];
    for partial in partials {
        for (g, p) in grad.iter_mut().zip(partial) {
            *g += p;
        }
    }
    Ok(grad)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam accumulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub params: AdamParams,
}

impl AdamState {
    pub fn new(n_params: usize, params: AdamParams) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            params,
        }
    }
}

/// One Adam update with bias correction, in place.
pub fn adam_step(model: &mut MlpModel, grad: &[f64], state: &mut AdamState) -> Result<()> {
    if grad.len() != model.params.len() || state.first_moment.len() != grad.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient of length {} for {} parameters",
            grad.len(),
            model.params.len()
        )));
    }
    for (idx, &g) in grad.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { idx });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let AdamParams {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.params;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);
    for i in 0..grad.len() {
        let m = beta1 * state.first_moment[i] + (1.0 - beta1) * grad[i];
        let v = beta2 * state.second_moment[i] + (1.0 - beta2) * grad[i] * grad[i];
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        model.params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Report from [`grad_check`].
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }
}

/// Compare a loss's reverse-mode gradient against central finite
/// differences with step `h`, parameter by parameter.
pub fn grad_check(
    model: &MlpModel,
    loss: impl Fn(&MlpModel) -> Result<(f64, Vec<f64>)>,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = loss(model)?;
    // Components far below the dominant gradient are held to an absolute
    // standard: finite-difference roundoff (~ε·|loss|/h) would otherwise
    // swamp the relative comparison on numerically negligible directions.
    let gmax = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (1e-4 * gmax).max(1e-12);
    let mut probe = model.clone();
    let mut max_rel = 0.0f64;
    let mut worst = 0;
    for i in 0..model.params.len() {
        let step = h * model.params[i].abs().max(1.0);
        let original = model.params[i];
        probe.params[i] = original + step;
        let (f_plus, _) = loss(&probe)?;
        probe.params[i] = original - step;
        let (f_minus, _) = loss(&probe)?;
        probe.params[i] = original;
        let numeric = (f_plus - f_minus) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        worst_parameter: worst,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> MlpConfig {
        MlpConfig {
            input_dim: 1,
            hidden: vec![1, 1],
            hidden_activations: vec![Activation::Tanh, Activation::Identity],
            output: OutputActivation::Softplus,
        }
    }

    #[test]
    fn zero_network_outputs_ln_two() {
        let model = MlpModel::zeroed(MlpConfig::density_default(2)).unwrap();
        let (y, _) = forward(&model, &[0.3, 0.7, 0.1, 0.9]).unwrap();
        for v in y {
            assert!((v - 2.0f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_set_unit_weights_compose() {
        // 1×1 layers, w = 1, b = 0 everywhere: y = softplus(tanh(x)).
        let mut model = MlpModel::zeroed(tiny_config()).unwrap();
        // layout: W1(1), b1(1), W2(1), b2(1), W3(1), b3(1)
        model.params = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let x = 0.42;
        let (y, _) = forward(&model, &[x]).unwrap();
        let expected = (1.0 + x.tanh().exp()).ln();
        assert!((y[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn batch_equals_pointwise_calls() {
        let model = MlpModel::init(MlpConfig::density_default(2), 7).unwrap();
        let points: Vec<f64> = (0..40).map(|i| (i as f64) / 40.0).collect();
        let (batch, _) = forward(&model, &points).unwrap();
        for p in 0..20 {
            let (single, _) = forward(&model, &points[p * 2..p * 2 + 2]).unwrap();
            assert_eq!(single[0], batch[p], "point {p} differs");
        }
    }

    #[test]
    fn forward_outputs_strictly_positive() {
        let model = MlpModel::init(MlpConfig::density_default(1), 3).unwrap();
        let points: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let (y, _) = forward(&model, &points).unwrap();
        assert!(y.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = MlpModel::init(MlpConfig::density_default(3), 11).unwrap();
        let b = MlpModel::init(MlpConfig::density_default(3), 11).unwrap();
        let c = MlpModel::init(MlpConfig::density_default(3), 12).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let model = MlpModel::init(MlpConfig::density_default(2), 5).unwrap();
        let points = vec![0.25, 0.5];
        // Loss: network output at one point.
        let loss = |m: &MlpModel| -> Result<(f64, Vec<f64>)> {
            let (y, tape) = forward(m, &points)?;
            let grad = backward(m, &tape, &[1.0])?;
            Ok((y[0], grad))
        };
        let report = grad_check(&model, loss, 1e-5, 1e-5).unwrap();
        assert!(
            report.passed(),
            "max relative error {} at parameter {}",
            report.max_relative_error,
            report.worst_parameter
        );
    }

    #[test]
    fn scaled_tanh_backward_matches_finite_differences() {
        let model = MlpModel::init(MlpConfig::phase_field_default(2), 9).unwrap();
        let points = vec![0.8, 0.1, 0.4, 0.6];
        let loss = |m: &MlpModel| -> Result<(f64, Vec<f64>)> {
            let (y, tape) = forward(m, &points)?;
            let value = y.iter().sum::<f64>();
            let grad = backward(m, &tape, &vec![1.0; y.len()])?;
            Ok((value, grad))
        };
        let report = grad_check(&model, loss, 1e-5, 1e-5).unwrap();
        assert!(report.passed(), "error {}", report.max_relative_error);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let model = MlpModel::init(MlpConfig::density_default(1), 2).unwrap();
        let (_, tape) = forward(&model, &[0.5, 0.25]).unwrap();
        let grad = backward(&model, &tape, &[0.0, 0.0]).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let model = MlpModel::init(MlpConfig::density_default(1), 4).unwrap();
        let points = vec![0.1, 0.6, 0.9];
        let (_, tape) = forward(&model, &points).unwrap();
        let total = backward(&model, &tape, &[1.0, 1.0, 1.0]).unwrap();
        let mut acc = vec![0.0; model.params.len()];
        for p in 0..3 {
            let mut up = vec![0.0; 3];
            up[p] = 1.0;
            let g = backward(&model, &tape, &up).unwrap();
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += gi;
            }
        }
        for (t, a) in total.iter().zip(&acc) {
            assert!((t - a).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut model = MlpModel::init(MlpConfig::density_default(1), 1).unwrap();
        let before = model.params.clone();
        let mut state = AdamState::new(before.len(), AdamParams::default());
        adam_step(&mut model, &vec![0.0; before.len()], &mut state).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn adam_moves_against_constant_gradient() {
        let mut model = MlpModel::zeroed(tiny_config()).unwrap();
        let mut state = AdamState::new(model.params.len(), AdamParams::default());
        let grad = vec![1.0; model.params.len()];
        for _ in 0..100 {
            adam_step(&mut model, &grad, &mut state).unwrap();
        }
        assert!(model.params.iter().all(|&p| p < 0.0));
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        // ½‖θ‖² has gradient θ; 5000 steps at lr 0.01 from a random start.
        // Constant-rate Adam settles into a limit cycle of amplitude on the
        // order of the learning rate, so the bound is a small multiple of it.
        let mut model = MlpModel::init(MlpConfig::density_default(2), 8).unwrap();
        let start_norm = model.params.iter().map(|p| p * p).sum::<f64>().sqrt();
        let mut state = AdamState::new(
            model.params.len(),
            AdamParams {
                learning_rate: 0.01,
                ..AdamParams::default()
            },
        );
        for _ in 0..5000 {
            let grad = model.params.clone();
            adam_step(&mut model, &grad, &mut state).unwrap();
        }
        let norm = model.params.iter().map(|p| p * p).sum::<f64>().sqrt();
        assert!(norm < 2e-2, "‖θ‖ = {norm} after 5000 steps");
        assert!(norm < start_norm / 50.0, "barely moved: {start_norm} → {norm}");
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut model = MlpModel::zeroed(tiny_config()).unwrap();
        let mut state = AdamState::new(model.params.len(), AdamParams::default());
        let mut grad = vec![0.0; model.params.len()];
        grad[2] = f64::NAN;
        assert!(matches!(
            adam_step(&mut model, &grad, &mut state),
            Err(Error::NonFiniteGradient { idx: 2 })
        ));
    }

    #[test]
    fn non_finite_activation_reports_layer() {
        let mut model = MlpModel::zeroed(tiny_config()).unwrap();
        model.params[0] = 1.0; // W1: tanh saturates to 1
        model.params[2] = f64::MAX; // W2
        model.params[3] = f64::MAX; // b2: MAX + MAX overflows in layer 1
        match forward(&model, &[1.0]) {
            Err(Error::NonFiniteActivation { layer }) => assert_eq!(layer, 1),
            other => panic!("expected activation overflow, got {other:?}"),
        }
    }
}
