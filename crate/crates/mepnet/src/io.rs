//! Persistence: CSV fields and histograms, JSON moment vectors, feature
//! libraries and model checkpoints.
//!
//! Field CSVs carry one header row of axis names plus `value` and one row
//! per node in row-major order. Floats are written in Rust's shortest
//! round-trip form, so a load reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SampleHistogram, ScalarField};
use crate::grid::{Axis, Grid};
use crate::nn::{MlpConfig, MlpModel};
use crate::train::LossReport;

/// Write a field as CSV: axis names + `value` header, nodes in row-major
/// order.
pub fn save_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let grid = field.grid();
    let mut header: Vec<String> = grid.axes().iter().map(|a| a.name.clone()).collect();
    header.push("value".into());
    w.write_record(&header)?;
    let mut x = vec![0.0; grid.dim()];
    for (flat, &v) in field.values().iter().enumerate() {
        grid.node_into(flat, &mut x);
        let mut record: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
        record.push(format!("{v}"));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Load a field CSV written by [`save_field_csv`], reconstructing the grid
/// from the coordinate columns.
pub fn load_field_csv(path: &Path) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[header.len() - 1] != "value" {
        return Err(Error::Other(format!(
            "field csv {} must end with a `value` column",
            path.display()
        )));
    }
    let dim = header.len() - 1;
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        for a in 0..dim {
            coords[a].push(parse_f64(&record[a])?);
        }
        values.push(parse_f64(&record[dim])?);
    }
    let mut axes = Vec::with_capacity(dim);
    for (a, column) in coords.iter().enumerate() {
        let mut distinct: Vec<u64> = column.iter().map(|c| c.to_bits()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let n_nodes = distinct.len();
        let min = f64::from_bits(distinct[0]);
        let max = f64::from_bits(*distinct.last().unwrap());
        axes.push(Axis::new(header[a].to_string(), min, max, n_nodes)?);
    }
    ScalarField::new(Grid::new(axes)?, values)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Other(format!("bad float {s:?}: {e}")))
}

/// Write a histogram as `state,time,count` rows.
pub fn save_histogram_csv(path: &Path, hist: &SampleHistogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["state", "time", "count"])?;
    for (k, t) in hist.times.iter().enumerate() {
        for (s, &c) in hist.states.iter().zip(&hist.counts[k]) {
            w.write_record(&[format!("{s}"), format!("{t}"), format!("{c}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a histogram written by [`save_histogram_csv`]. The trajectory
/// total is recovered from the count sum of the first snapshot.
pub fn load_histogram_csv(path: &Path) -> Result<SampleHistogram> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut times: Vec<f64> = Vec::new();
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for record in r.records() {
        let record = record?;
        let s = parse_f64(&record[0])?;
        let t = parse_f64(&record[1])?;
        let c: u64 = record[2]
            .parse()
            .map_err(|e| Error::Other(format!("bad count {:?}: {e}", &record[2])))?;
        if !times.iter().any(|&x| x.to_bits() == t.to_bits()) {
            times.push(t);
        }
        rows.push((s, t, c));
    }
    if times.is_empty() || rows.len() % times.len() != 0 {
        return Err(Error::Other(format!(
            "histogram csv {} is not a complete state × time table",
            path.display()
        )));
    }
    // The first snapshot block defines the state axis; later blocks must
    // repeat it in the same row-major order.
    let n_states = rows.len() / times.len();
    let states: Vec<f64> = rows[..n_states].iter().map(|&(s, _, _)| s).collect();
    let mut counts = vec![vec![0u64; n_states]; times.len()];
    for (i, &(s, _, c)) in rows.iter().enumerate() {
        let k = i / n_states;
        let j = i % n_states;
        if states[j].to_bits() != s.to_bits() {
            return Err(Error::Other("histogram rows out of row-major order".into()));
        }
        counts[k][j] = c;
    }
    let total: u64 = counts[0].iter().sum();
    SampleHistogram::new(states, times, counts, total)
}

/// Per-epoch loss curves as CSV.
pub fn save_losses_csv(path: &Path, report: &LossReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["epoch", "constraint", "entropy", "total"])?;
    for row in &report.epochs {
        w.write_record(&[
            row.epoch.to_string(),
            format!("{}", row.constraint),
            format!("{}", row.entropy),
            format!("{}", row.total),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize any value as pretty JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Load a JSON value saved by [`save_json`].
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Model checkpoint: a JSON header plus the flat parameter vector in layer
/// order. Round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: MlpConfig,
    pub seed: u64,
    pub step: u64,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of(model: &MlpModel, seed: u64, step: u64) -> Self {
        Self {
            config: model.config.clone(),
            seed,
            step,
            params: model.params.clone(),
        }
    }

    pub fn into_model(self) -> Result<MlpModel> {
        if self.params.len() != self.config.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint holds {} parameters, config expects {}",
                self.params.len(),
                self.config.param_count()
            )));
        }
        Ok(MlpModel {
            config: self.config,
            params: self.params,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    save_json(path, ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_json(path)
}
