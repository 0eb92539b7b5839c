//! Plot-ready data emission: long-format CSV of predicted versus reference
//! values with absolute errors.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Write a long-format CSV: snapshot index, node coordinates, predicted,
/// reference and absolute error. Grids of every pair must match.
pub fn emit_plot_data(
    path: &Path,
    predicted: &[ScalarField],
    reference: &[ScalarField],
) -> Result<()> {
    if predicted.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted snapshots vs {} reference",
            predicted.len(),
            reference.len()
        )));
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let Some(first) = predicted.first() else {
        w.flush()?;
        return Ok(());
    };
    let grid = first.grid();
    let mut header: Vec<String> = vec!["snapshot".into()];
    header.extend(grid.axes().iter().map(|a| a.name.clone()));
    header.extend(["predicted".into(), "reference".into(), "abs_error".into()]);
    w.write_record(&header)?;

    let mut x = vec![0.0; grid.dim()];
    for (k, (p, r)) in predicted.iter().zip(reference).enumerate() {
        if p.grid() != r.grid() {
            return Err(Error::GridMismatch);
        }
        let g = p.grid();
        for (flat, (&pv, &rv)) in p.values().iter().zip(r.values()).enumerate() {
            g.node_into(flat, &mut x);
            let mut record: Vec<String> = vec![k.to_string()];
            record.extend(x.iter().map(|c| format!("{c}")));
            record.push(format!("{pv}"));
            record.push(format!("{rv}"));
            record.push(format!("{}", (pv - rv).abs()));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn identical_fields_emit_zero_error_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        let f = ScalarField::from_fn(Grid::unit_line(5), |x| x[0] * 2.0).unwrap();
        emit_plot_data(&path, &[f.clone()], &[f]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(1) {
            assert!(line.ends_with(",0"), "error column not zero: {line}");
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        let a = ScalarField::constant(Grid::unit_line(5), 1.0).unwrap();
        let b = ScalarField::constant(Grid::unit_line(7), 1.0).unwrap();
        assert!(emit_plot_data(&path, &[a], &[b]).is_err());
    }
}
