//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by grids, fields, solvers and experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid axis `{name}`: {reason}")]
    InvalidAxis { name: String, reason: String },

    #[error("field has {got} values but grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },

    #[error("non-finite value at node {idx}: {value}")]
    NonFinite { idx: usize, value: f64 },

    #[error("negative value at node {idx}: {value}")]
    Negative { idx: usize, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("support violation at node {idx}: p={p} but q={q}")]
    SupportViolation { idx: usize, p: f64, q: f64 },

    #[error("cannot normalize: total mass {mass}")]
    ZeroMass { mass: f64 },

    #[error("histogram counts sum to {got} at snapshot {snapshot}, expected {expected}")]
    HistogramCount {
        snapshot: usize,
        got: u64,
        expected: u64,
    },

    #[error("invalid feature spec: {0}")]
    InvalidFeature(String),

    #[error("singular evaluation of {spec} at node {idx} (x = {x:?})")]
    SingularFeature { spec: String, idx: usize, x: Vec<f64> },

    #[error("point {x:?} outside the unit box")]
    OutsideUnitBox { x: Vec<f64> },

    #[error("feature library dimension {lib_dim} does not match grid dimension {grid_dim}")]
    DimensionMismatch { lib_dim: usize, grid_dim: usize },

    #[error("state {state} exceeds state scale {scale}")]
    StateScale { state: f64, scale: f64 },

    #[error("exponent overflow in density: max exponent {max_exponent}")]
    ExponentOverflow { max_exponent: f64 },

    #[error("singular Hessian in dual solve (pivot {pivot:.3e}); consider removing a redundant feature")]
    SingularHessian { pivot: f64 },

    #[error("dual solve did not reach tolerance {tol:.3e} in {max_iter} iterations (residual {residual:.3e})")]
    DualNoConvergence {
        tol: f64,
        max_iter: usize,
        residual: f64,
    },

    #[error("moments are infeasible for {distribution}: {reason}")]
    InfeasibleMoments {
        distribution: &'static str,
        reason: String,
    },

    #[error("no root in bracket [{lo}, {hi}] for {what}")]
    NoRoot { what: &'static str, lo: f64, hi: f64 },

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient at parameter {idx}")]
    NonFiniteGradient { idx: usize },

    #[error("training diverged at epoch {epoch}: total loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("nonpositive frozen density {value} at node {idx}")]
    NonPositiveFrozen { idx: usize, value: f64 },

    #[error("snapshot times must be uniformly spaced, got {times:?}")]
    NonUniformTimes { times: Vec<f64> },

    #[error("zero density at node {idx} while recovering flux velocity")]
    ZeroDensityInFlux { idx: usize },

    #[error("state {state} reached truncation bound {n_max}; increase the truncation")]
    TruncationReached { state: u64, n_max: u64 },

    #[error("probability leaked to the truncation boundary: {leak:.3e}")]
    BoundaryLeak { leak: f64 },

    #[error("discrete energy increased by {increase:.3e} at step {step}")]
    EnergyIncrease { step: usize, increase: f64 },

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
