//! Training loop for the neural field: a moment-constraint loss plus a
//! selectable entropy/energy term.
//!
//! The total objective is `constraint + λ · entropy`. The entropy slot is
//! either the fixed-point relative entropy (KL divergence of the current
//! output against a frozen snapshot of itself, refreshed periodically), a
//! time-discrete Rayleighian for diffusive dynamics, the Ginzburg-Landau
//! free energy for phase fields, or nothing. The constraint term pulls the
//! field onto the moment data; the entropy term keeps the iteration slow
//! and smooth and selects the flattest field among moment matchers.

pub mod losses;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, MomentVector};
use crate::grid::Grid;
use crate::nn::{adam_step, backward, forward, AdamParams, AdamState, MlpModel, Tape};
use losses::{
    allen_cahn_energy_of_values, constraint_loss_of_values, fixed_point_kl_of_values,
    rayleighian_of_values, FeatureEvaluator,
};

/// Which functional fills the entropy slot of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntropyKind {
    FixedPointKl,
    Rayleighian { zeta: f64, kbt: f64 },
    AllenCahnEnergy { epsilon: f64 },
    None,
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub entropy: EntropyKind,
    /// Weight λ of the entropy term.
    pub entropy_weight: f64,
    pub epochs: usize,
    /// Refresh the frozen field every this many epochs (fixed-point KL).
    pub refresh_period: usize,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            entropy: EntropyKind::FixedPointKl,
            entropy_weight: 0.1,
            epochs: 10_000,
            refresh_period: 1,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.entropy_weight < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "entropy weight {} must be nonnegative",
                self.entropy_weight
            )));
        }
        if self.refresh_period == 0 {
            return Err(Error::InvalidConfig("refresh period must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// The data side of a training run: quadrature grid, snapshot times,
/// feature library (evaluated on the scaled coordinates) and targets.
#[derive(Debug, Clone)]
pub struct TrainProblem {
    pub grid: Grid,
    /// Physical snapshot times; empty for a static (time-free) problem.
    pub times: Vec<f64>,
    pub lib: FeatureLibrary,
    pub target: MomentVector,
}

impl TrainProblem {
    /// Number of snapshots (1 for static problems).
    pub fn n_snapshots(&self) -> usize {
        self.times.len().max(1)
    }

    /// Whether the network receives a scaled time input.
    pub fn has_time_input(&self) -> bool {
        self.times.len() >= 2
    }

    /// Network input dimension implied by the problem.
    pub fn input_dim(&self) -> usize {
        self.grid.dim() + usize::from(self.has_time_input())
    }

    /// Flattened network inputs, snapshot-major: every grid node scaled to
    /// the unit box, with the scaled snapshot time appended when present.
    pub fn input_points(&self) -> Vec<f64> {
        if self.has_time_input() {
            let times = self.times.clone();
            self.input_points_for(&self.grid, &times)
        } else {
            self.input_points_for(&self.grid, &[])
        }
    }

    /// Inputs for arbitrary evaluation nodes and times, scaled exactly as
    /// the training inputs were (by the training grid's axis bounds and the
    /// training time range).
    pub fn input_points_for(&self, eval_grid: &Grid, eval_times: &[f64]) -> Vec<f64> {
        let d = self.grid.dim();
        debug_assert_eq!(eval_grid.dim(), d);
        let n = eval_grid.node_count();
        let with_time = self.has_time_input();
        let times: &[f64] = if with_time { eval_times } else { &[] };
        let t = times.len().max(1);
        let dim = self.input_dim();
        let (t_lo, t_span) = if with_time {
            let lo = self.times[0];
            let hi = *self.times.last().unwrap();
            (lo, hi - lo)
        } else {
            (0.0, 1.0)
        };
        let mut points = Vec::with_capacity(n * t * dim);
        let mut x = vec![0.0; d];
        for k in 0..t {
            for flat in 0..n {
                eval_grid.node_into(flat, &mut x);
                for (a, &xv) in x.iter().enumerate() {
                    let axis = &self.grid.axes()[a];
                    points.push((xv - axis.min) / (axis.max - axis.min));
                }
                if with_time {
                    points.push((times[k] - t_lo) / t_span);
                }
            }
        }
        points
    }
}

/// Snapshot of the field values used as `p_old` by the fixed-point KL
/// loss; detached from differentiation and strictly positive.
#[derive(Debug, Clone)]
pub struct FrozenField {
    values: Vec<f64>,
}

impl FrozenField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (idx, &v) in values.iter().enumerate() {
            if v <= 0.0 {
                return Err(Error::NonPositiveFrozen { idx, value: v });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Loss values for one epoch; `total = constraint + λ·entropy` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub constraint: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Per-epoch loss history plus an optional final error against a known
/// reference.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub epochs: Vec<EpochLoss>,
    pub final_mse: Option<f64>,
    pub coarse_grid_warning: bool,
}

/// A trained model and its loss history.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub report: LossReport,
}

/// Evaluate one loss pass for `model`: returns (constraint, entropy,
/// total, upstream gradient dL/dy, tape).
fn loss_pass(
    model: &MlpModel,
    problem: &TrainProblem,
    config: &TrainConfig,
    evaluator: &FeatureEvaluator,
    points: &[f64],
    frozen: Option<&FrozenField>,
    coarse_flag: &mut bool,
) -> Result<(f64, f64, f64, Vec<f64>, Tape)> {
    let (y, tape) = forward(model, points)?;
    let (constraint, mut upstream) =
        constraint_loss_of_values(evaluator, &problem.grid, &problem.target, &y)?;
    let entropy = match config.entropy {
        EntropyKind::None => 0.0,
        EntropyKind::FixedPointKl => {
            let frozen = frozen.expect("frozen field initialized before training");
            let (e, de) = fixed_point_kl_of_values(&problem.grid, frozen.values(), &y)?;
            for (u, d) in upstream.iter_mut().zip(de) {
                *u += config.entropy_weight * d;
            }
            e
        }
        EntropyKind::Rayleighian { zeta, kbt } => {
            let (e, de) = rayleighian_of_values(&problem.grid, &problem.times, zeta, kbt, &y)?;
            for (u, d) in upstream.iter_mut().zip(de) {
                *u += config.entropy_weight * d;
            }
            e
        }
        EntropyKind::AllenCahnEnergy { epsilon } => {
            let (e, de, coarse) = allen_cahn_energy_of_values(&problem.grid, epsilon, &y)?;
            *coarse_flag |= coarse;
            for (u, d) in upstream.iter_mut().zip(de) {
                *u += config.entropy_weight * d;
            }
            e
        }
    };
    let total = constraint + config.entropy_weight * entropy;
    Ok((constraint, entropy, total, upstream, tape))
}

/// Run full-grid gradient descent on `constraint + λ·entropy`.
pub fn train(
    mut model: MlpModel,
    problem: &TrainProblem,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.config.input_dim != problem.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} inputs, problem provides {}",
            model.config.input_dim,
            problem.input_dim()
        )));
    }
    if problem.target.n_times() != problem.n_snapshots() {
        return Err(Error::ShapeMismatch(format!(
            "{} moment snapshots for {} times",
            problem.target.n_times(),
            problem.n_snapshots()
        )));
    }
    let evaluator = FeatureEvaluator::build(&problem.lib, &problem.grid)?;
    let points = problem.input_points();
    let mut adam = AdamState::new(model.params.len(), config.adam);
    let mut frozen: Option<FrozenField> = None;
    let mut report = LossReport::default();
    let mut coarse_flag = false;

    for epoch in 0..config.epochs {
        if config.entropy == EntropyKind::FixedPointKl
            && (epoch % config.refresh_period == 0 || frozen.is_none())
        {
            let (y, _) = forward(&model, &points)?;
            frozen = Some(FrozenField::new(y)?);
        }
        let (constraint, entropy, total, upstream, tape) = loss_pass(
            &model,
            problem,
            config,
            &evaluator,
            &points,
            frozen.as_ref(),
            &mut coarse_flag,
        )?;
        if !total.is_finite() || total > 1e6 {
            return Err(Error::Diverged { epoch, loss: total });
        }
        report.epochs.push(EpochLoss {
            epoch,
            constraint,
            entropy,
            total,
        });
        let grad = backward(&model, &tape, &upstream)?;
        adam_step(&mut model, &grad, &mut adam)?;
    }
    report.coarse_grid_warning = coarse_flag;
    Ok(TrainOutcome { model, report })
}

/// Evaluate the trained model over the problem's grid and snapshots.
pub fn evaluate_on_grid(model: &MlpModel, problem: &TrainProblem) -> Result<Vec<f64>> {
    let (y, _) = forward(model, &problem.input_points())?;
    Ok(y)
}

/// Model-level constraint loss: value and parameter gradient.
pub fn constraint_loss(
    model: &MlpModel,
    problem: &TrainProblem,
) -> Result<(f64, Vec<f64>)> {
    let evaluator = FeatureEvaluator::build(&problem.lib, &problem.grid)?;
    let points = problem.input_points();
    let (y, tape) = forward(model, &points)?;
    let (value, upstream) =
        constraint_loss_of_values(&evaluator, &problem.grid, &problem.target, &y)?;
    let grad = backward(model, &tape, &upstream)?;
    Ok((value, grad))
}

/// Model-level fixed-point entropy loss against a frozen snapshot.
pub fn fixed_point_entropy_loss(
    model: &MlpModel,
    problem: &TrainProblem,
    frozen: &FrozenField,
) -> Result<(f64, Vec<f64>)> {
    let points = problem.input_points();
    let (y, tape) = forward(model, &points)?;
    let (value, upstream) = fixed_point_kl_of_values(&problem.grid, frozen.values(), &y)?;
    let grad = backward(model, &tape, &upstream)?;
    Ok((value, grad))
}

/// Model-level Rayleighian loss over the problem's snapshot times.
pub fn rayleighian_loss(
    model: &MlpModel,
    problem: &TrainProblem,
    zeta: f64,
    kbt: f64,
) -> Result<(f64, Vec<f64>)> {
    let points = problem.input_points();
    let (y, tape) = forward(model, &points)?;
    let (value, upstream) =
        rayleighian_of_values(&problem.grid, &problem.times, zeta, kbt, &y)?;
    let grad = backward(model, &tape, &upstream)?;
    Ok((value, grad))
}

/// Model-level Allen-Cahn free-energy loss.
pub fn allen_cahn_energy_loss(
    model: &MlpModel,
    problem: &TrainProblem,
    epsilon: f64,
) -> Result<(f64, Vec<f64>)> {
    let points = problem.input_points();
    let (y, tape) = forward(model, &points)?;
    let (value, upstream, _) = allen_cahn_energy_of_values(&problem.grid, epsilon, &y)?;
    let grad = backward(model, &tape, &upstream)?;
    Ok((value, grad))
}
