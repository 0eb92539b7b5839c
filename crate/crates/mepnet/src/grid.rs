//! Uniform rectangular grids.
//!
//! Every field in this crate lives on a tensor-product grid of uniformly
//! spaced nodes. Node ordering is row-major in axis order: the last axis
//! varies fastest. That ordering is fixed once here so field serialization
//! and flat indexing are unambiguous everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis: `n_nodes` uniformly spaced nodes spanning `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub n_nodes: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, n_nodes: usize) -> Result<Self> {
        let name = name.into();
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidAxis {
                name,
                reason: "bounds must be finite".into(),
            });
        }
        if min >= max {
            return Err(Error::InvalidAxis {
                name,
                reason: format!("min {min} must be below max {max}"),
            });
        }
        if n_nodes < 2 {
            return Err(Error::InvalidAxis {
                name,
                reason: format!("need at least 2 nodes, got {n_nodes}"),
            });
        }
        Ok(Self {
            name,
            min,
            max,
            n_nodes,
        })
    }

    /// Uniform node spacing.
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n_nodes - 1) as f64
    }

    /// Coordinate of node `i`, reproducible exactly from `(min, h, i)`.
    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes);
        self.min + self.spacing() * i as f64
    }

    /// Trapezoid-rule weights along this axis.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_nodes)
            .map(|i| {
                if i == 0 || i == self.n_nodes - 1 {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect()
    }

    /// Trapezoid weights with the spacing factored out: `0.5, 1, …, 1, 0.5`.
    pub fn unit_trapezoid_weights(&self) -> Vec<f64> {
        (0..self.n_nodes)
            .map(|i| {
                if i == 0 || i == self.n_nodes - 1 {
                    0.5
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// A tensor-product grid over one or more axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidAxis {
                name: "<none>".into(),
                reason: "grid needs at least one axis".into(),
            });
        }
        Ok(Self { axes })
    }

    /// Convenience constructor for a one-dimensional grid named `x`.
    pub fn line(min: f64, max: f64, n_nodes: usize) -> Result<Self> {
        Self::new(vec![Axis::new("x", min, max, n_nodes)?])
    }

    /// The unit interval `[0, 1]` with `n_nodes` nodes.
    pub fn unit_line(n_nodes: usize) -> Self {
        Self::line(0.0, 1.0, n_nodes).expect("unit line is valid")
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of nodes (product over axes).
    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.n_nodes).product()
    }

    /// Node counts per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n_nodes).collect()
    }

    /// Row-major strides (last axis has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.axes[a + 1].n_nodes;
        }
        strides
    }

    /// Decompose a flat index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut idx = vec![0usize; self.dim()];
        for a in 0..self.dim() {
            idx[a] = flat / strides[a];
            flat %= strides[a];
        }
        idx
    }

    /// Flatten per-axis indices into a flat node index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        self.strides()
            .iter()
            .zip(idx)
            .map(|(s, i)| s * i)
            .sum()
    }

    /// Coordinates of the node at flat index `flat`, written into `out`.
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut rem = flat;
        let strides = self.strides();
        for a in 0..self.dim() {
            let i = rem / strides[a];
            rem %= strides[a];
            out[a] = self.axes[a].coord(i);
        }
    }

    /// Coordinates of the node at flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(flat, &mut out);
        out
    }

    /// Tensor-product trapezoid weight of each node, as per-axis factors.
    pub fn axis_weights(&self) -> Vec<Vec<f64>> {
        self.axes.iter().map(Axis::trapezoid_weights).collect()
    }

    /// Materialized trapezoid weight per node.
    ///
    /// Fine for 1-d and 2-d grids; for large high-dimensional grids prefer
    /// [`Grid::axis_weights`] and combine factors on the fly.
    pub fn quad_weights(&self) -> Vec<f64> {
        let per_axis = self.axis_weights();
        let n = self.node_count();
        let strides = self.strides();
        let mut w = vec![1.0; n];
        for (flat, wn) in w.iter_mut().enumerate() {
            let mut rem = flat;
            for a in 0..self.dim() {
                let i = rem / strides[a];
                rem %= strides[a];
                *wn *= per_axis[a][i];
            }
        }
        w
    }

    /// Volume of the grid box.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.max - a.min).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_rejects_degenerate_bounds() {
        assert!(Axis::new("x", 1.0, 1.0, 5).is_err());
        assert!(Axis::new("x", 2.0, 1.0, 5).is_err());
        assert!(Axis::new("x", 0.0, 1.0, 1).is_err());
        assert!(Axis::new("x", f64::NAN, 1.0, 5).is_err());
    }

    #[test]
    fn coords_reproducible_from_spacing() {
        let ax = Axis::new("x", -1.0, 2.0, 7).unwrap();
        let h = ax.spacing();
        for i in 0..7 {
            assert_eq!(ax.coord(i), -1.0 + h * i as f64);
        }
        assert_eq!(ax.coord(6), 2.0 - 0.0); // exact up to fp of min + 6h
    }

    #[test]
    fn row_major_ordering_last_axis_fastest() {
        let g = Grid::new(vec![
            Axis::new("x", 0.0, 1.0, 2).unwrap(),
            Axis::new("y", 0.0, 1.0, 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(g.strides(), vec![3, 1]);
        assert_eq!(g.node(0), vec![0.0, 0.0]);
        assert_eq!(g.node(1), vec![0.0, 0.5]);
        assert_eq!(g.node(3), vec![1.0, 0.0]);
        assert_eq!(g.unflatten(4), vec![1, 1]);
        assert_eq!(g.flatten(&[1, 1]), 4);
    }

    #[test]
    fn quad_weights_sum_to_volume() {
        let g = Grid::new(vec![
            Axis::new("x", 0.0, 2.0, 5).unwrap(),
            Axis::new("y", -1.0, 1.0, 4).unwrap(),
        ])
        .unwrap();
        let total: f64 = g.quad_weights().iter().sum();
        assert!((total - g.volume()).abs() < 1e-12);
    }
}
