use alloc::vec;
use alloc::vec::Vec;

use super::Grid;
use crate::{Error, Result};

/// Scalar nodal function on a [`Grid`], boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch { expected: grid.node_count(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "field" });
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.node_count()] }
    }

    /// Samples `f` at every node coordinate.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|k| f(grid.coords(k))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Boundary values in [`Grid::boundary_nodes`] order.
    pub fn trace(&self) -> Vec<f64> {
        self.grid.boundary_nodes().into_iter().map(|k| self.values[k]).collect()
    }

    pub fn set_trace(&mut self, trace: &[f64]) -> Result<()> {
        let nodes = self.grid.boundary_nodes();
        if nodes.len() != trace.len() {
            return Err(Error::ShapeMismatch { expected: nodes.len(), found: trace.len() });
        }
        for (k, &t) in nodes.into_iter().zip(trace) {
            self.values[k] = t;
        }
        Ok(())
    }

    /// Largest boundary gap `|self − trace|`.
    pub fn trace_gap(&self, trace: &[f64]) -> Result<f64> {
        let nodes = self.grid.boundary_nodes();
        if nodes.len() != trace.len() {
            return Err(Error::ShapeMismatch { expected: nodes.len(), found: trace.len() });
        }
        Ok(nodes.into_iter().zip(trace).map(|(k, t)| (self.values[k] - t).abs()).fold(0.0, f64::max))
    }

    /// Interior values in packed row-major order.
    pub fn interior(&self) -> Vec<f64> {
        self.grid.interior_nodes().into_iter().map(|k| self.values[k]).collect()
    }

    pub fn set_interior(&mut self, packed: &[f64]) -> Result<()> {
        let nodes = self.grid.interior_nodes();
        if nodes.len() != packed.len() {
            return Err(Error::ShapeMismatch { expected: nodes.len(), found: packed.len() });
        }
        for (k, &v) in nodes.into_iter().zip(packed) {
            self.values[k] = v;
        }
        Ok(())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch { expected: self.grid.node_count(), found: other.grid.node_count() });
        }
        Ok(())
    }

    /// Nodewise `self − other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// Nodewise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Minimum and maximum over all nodes.
    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
