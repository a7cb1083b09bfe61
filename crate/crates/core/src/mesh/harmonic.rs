use alloc::vec;

use super::{Field, Grid};
use crate::linalg::ShiftedLaplacian;
use crate::{Error, Result};

/// Relative residual required of harmonic-extension solves.
pub const HARMONIC_TOLERANCE: f64 = 1e-12;

/// Discrete harmonic field with Dirichlet trace `boundary_values`
/// (given in [`Grid::boundary_nodes`] order): `−Δ_h Ψ = 0` at interior nodes.
pub fn harmonic_extension(boundary_values: &[f64], grid: &Grid) -> Result<Field> {
    if boundary_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "boundary values" });
    }
    let mut psi = Field::zeros(*grid);
    psi.set_trace(boundary_values)?;
    // start from the mean trace: exact for constant data
    let mean = boundary_values.iter().sum::<f64>() / boundary_values.len() as f64;
    let mut x = psi.values().to_vec();
    for k in grid.interior_nodes() {
        x[k] = mean;
    }
    let shift = vec![0.0; grid.node_count()];
    let rhs = vec![0.0; grid.node_count()];
    ShiftedLaplacian::new(grid, &shift)?.solve(&rhs, &mut x, HARMONIC_TOLERANCE)?;
    Field::new(*grid, x)
}
