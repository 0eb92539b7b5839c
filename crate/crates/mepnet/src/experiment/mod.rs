//! Experiment runner: configuration, reference-data caching, training,
//! evaluation and artifact emission for every bundled experiment.

pub mod families;
pub mod plots;
mod runs;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;
use crate::train::LossReport;

pub use plots::emit_plot_data;

/// Known experiment identifiers.
pub const EXPERIMENT_IDS: &[&str] = &[
    "mixture-1d",
    "beta",
    "mixture-5d",
    "time-gaussian",
    "schlogl",
    "diffusion",
    "allen-cahn",
    "feature-comparison",
    "ablation",
];

/// One experiment configuration, loadable from a TOML file. Unset knobs
/// fall back to per-experiment defaults; `derive-from` pulls in another
/// file's keys first (the deriving file wins).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive_from: Option<String>,
    /// Sub-case selector (the 1-d mixture variants).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binomial_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<Vec<usize>>,
    /// Snapshot times where the experiment is time-dependent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn by_id(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENT_IDS.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        Ok(())
    }
}

/// Load a config file, following `derive-from` includes (deepest first).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let value = load_merged_toml(path, 0)?;
    let config: ExperimentConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn load_merged_toml(path: &Path, depth: usize) -> Result<toml::Value> {
    if depth > 8 {
        return Err(Error::InvalidConfig(format!(
            "derive-from chain deeper than 8 at {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let mut value: toml::Value = toml::from_str(&text)?;
    let parent = value
        .get("derive-from")
        .and_then(|v| v.as_str())
        .map(str::to_string);
    if let Some(parent) = parent {
        let base_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&parent);
        let base = load_merged_toml(&base_path, depth + 1)?;
        value = merge_toml(base, value);
    }
    Ok(value)
}

/// Recursive merge; keys of `over` win over `base`.
fn merge_toml(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(existing) => merge_toml(existing, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, over) => over,
    }
}

/// Root directory for experiment outputs: `MEPNET_OUT_ROOT` or `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os("MEPNET_OUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Evaluation metrics for one run. Everything except the wall clock is
/// reproducible bitwise for a fixed config and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub variant: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    /// Whether the experiment's own accuracy threshold was met.
    pub passed: bool,
    /// Human-readable statement of the threshold applied.
    pub threshold: String,
    pub mse: f64,
    pub max_abs_error: f64,
    pub reference_peak: f64,
    /// `max_abs_error / reference_peak`.
    pub relative_max_error: f64,
    pub per_snapshot_max_abs: Vec<f64>,
    #[serde(default)]
    pub extra: serde_json::Value,
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    /// Canonical JSON with the wall clock zeroed, for bitwise
    /// reproducibility comparisons.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.wall_clock_seconds = 0.0;
        Ok(serde_json::to_string(&clone)?)
    }
}

/// Hash of the resolved settings that determine a run's outputs.
pub(crate) fn settings_hash<T: Serialize>(settings: &T) -> Result<String> {
    // serde_json maps are sorted, so this serialization is canonical.
    let canonical = serde_json::to_string(settings)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

/// Everything a finished run leaves behind.
pub struct RunArtifacts {
    pub metrics: MetricsReport,
    pub predicted: Vec<crate::field::ScalarField>,
    pub reference: Vec<crate::field::ScalarField>,
    pub losses: Option<LossReport>,
    pub checkpoint: Option<io::Checkpoint>,
    pub histogram: Option<crate::field::SampleHistogram>,
    /// Extra named CSV tables (marginal panels, comparison tables).
    pub tables: Vec<(String, Vec<crate::field::ScalarField>)>,
}

/// Run one experiment end to end: generate or load cached reference data,
/// build moments, train, evaluate and write all artifacts under the
/// output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let started = Instant::now();
    let out_dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| output_root().join(&config.experiment));
    std::fs::create_dir_all(&out_dir)?;
    let cache_dir = output_root().join("cache");
    std::fs::create_dir_all(&cache_dir)?;

    let mut artifacts = runs::dispatch(config, &cache_dir)?;
    artifacts.metrics.wall_clock_seconds = started.elapsed().as_secs_f64();

    io::save_json(&out_dir.join("metrics.json"), &artifacts.metrics)?;
    if let Some(losses) = &artifacts.losses {
        io::save_losses_csv(&out_dir.join("losses.csv"), losses)?;
    }
    if let Some(ckpt) = &artifacts.checkpoint {
        io::save_checkpoint(&out_dir.join("checkpoint.json"), ckpt)?;
    }
    if let Some(hist) = &artifacts.histogram {
        io::save_histogram_csv(&out_dir.join("histogram.csv"), hist)?;
    }
    for (k, field) in artifacts.predicted.iter().enumerate() {
        io::save_field_csv(&out_dir.join(format!("predicted_{k}.csv")), field)?;
    }
    for (k, field) in artifacts.reference.iter().enumerate() {
        io::save_field_csv(&out_dir.join(format!("reference_{k}.csv")), field)?;
    }
    if !artifacts.predicted.is_empty() && artifacts.predicted.len() == artifacts.reference.len() {
        plots::emit_plot_data(
            &out_dir.join("plot_data.csv"),
            &artifacts.predicted,
            &artifacts.reference,
        )?;
    }
    for (name, fields) in &artifacts.tables {
        for (k, field) in fields.iter().enumerate() {
            io::save_field_csv(&out_dir.join(format!("{name}_{k}.csv")), field)?;
        }
    }
    Ok(artifacts.metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_rejected() {
        let config = ExperimentConfig::by_id("nonexistent");
        assert!(matches!(
            config.validate(),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn derive_from_merges_with_child_priority() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("base.toml");
        std::fs::write(
            &base,
            "experiment = \"schlogl\"\nseed = 1\nepochs = 100\n",
        )
        .unwrap();
        let child = dir.path().join("child.toml");
        std::fs::write(
            &child,
            "derive-from = \"base.toml\"\nexperiment = \"ablation\"\nentropy-weight = 0.0\n",
        )
        .unwrap();
        let config = load_config(&child).unwrap();
        assert_eq!(config.experiment, "ablation");
        assert_eq!(config.seed, Some(1));
        assert_eq!(config.epochs, Some(100));
        assert_eq!(config.entropy_weight, Some(0.0));
    }

    #[test]
    fn settings_hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::by_id("beta");
        let mut b = a.clone();
        assert_eq!(settings_hash(&a).unwrap(), settings_hash(&b).unwrap());
        b.seed = Some(7);
        assert_ne!(settings_hash(&a).unwrap(), settings_hash(&b).unwrap());
    }
}
