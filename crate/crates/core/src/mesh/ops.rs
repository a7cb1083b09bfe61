use alloc::vec;
use alloc::vec::Vec;

use super::{Field, Grid};
use crate::{Error, Result};

/// `−Δ_h f` at interior nodes (3-point / 5-point stencil), reading Dirichlet
/// values from the boundary nodes of `f`. Boundary entries of the output are 0.
pub fn laplacian_apply(f: &Field) -> Result<Field> {
    if !f.is_finite() {
        return Err(Error::NonFinite { what: "laplacian input" });
    }
    let grid = *f.grid();
    let mut out = vec![0.0; grid.node_count()];
    neg_laplacian(&grid, f.values(), &mut out);
    Field::new(grid, out)
}

/// Raw-slice version of [`laplacian_apply`]; `out` boundary entries are zeroed.
pub fn neg_laplacian(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let n0 = grid.count(0);
    let c0 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    if grid.dim() == 1 {
        out[0] = 0.0;
        out[n0 + 1] = 0.0;
        for i in 1..=n0 {
            out[i] = c0 * (2.0 * x[i] - x[i - 1] - x[i + 1]);
        }
        return;
    }
    let n1 = grid.count(1);
    let s = grid.stride();
    let c1 = 1.0 / (grid.spacing(1) * grid.spacing(1));
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 1..=n0 {
        let row = i * s;
        for j in 1..=n1 {
            let k = row + j;
            out[k] = c0 * (2.0 * x[k] - x[k - s] - x[k + s]) + c1 * (2.0 * x[k] - x[k - 1] - x[k + 1]);
        }
    }
}

/// Discrete Dirichlet form `Σ w·∇_h a·∇_h b` over forward-difference gaps,
/// including the gaps that touch the boundary.
///
/// For fields vanishing on the boundary this equals `Σ_interior w·(−Δ_h a)·b`.
pub fn dirichlet_form(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    let grid = a.grid();
    Ok(dirichlet_form_raw(grid, a.values(), b.values()))
}

pub(crate) fn dirichlet_form_raw(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let n0 = grid.count(0);
    let h0 = grid.spacing(0);
    if grid.dim() == 1 {
        let mut acc = 0.0;
        for i in 0..=n0 {
            acc += (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
        }
        return acc / h0;
    }
    let n1 = grid.count(1);
    let h1 = grid.spacing(1);
    let s = grid.stride();
    let w = h0 * h1;
    let mut ax = 0.0;
    for i in 0..=n0 {
        for j in 1..=n1 {
            let k = i * s + j;
            ax += (a[k + s] - a[k]) * (b[k + s] - b[k]);
        }
    }
    let mut ay = 0.0;
    for i in 1..=n0 {
        for j in 0..=n1 {
            let k = i * s + j;
            ay += (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
        }
    }
    w * (ax / (h0 * h0) + ay / (h1 * h1))
}

/// Outward normal derivative at each boundary face by the second-order
/// one-sided difference `(3f₀ − 4f₁ + f₂)/(2h)`. Returns `(weight, ∂f/∂ν)`
/// pairs in [`Grid::boundary_faces`] order.
pub fn normal_derivative(f: &Field) -> Vec<(f64, f64)> {
    let x = f.values();
    f.grid()
        .boundary_faces()
        .into_iter()
        .map(|face| {
            let d = (3.0 * x[face.node] - 4.0 * x[face.first] + x[face.second]) / (2.0 * face.spacing);
            (face.weight, d)
        })
        .collect()
}

/// Lumped inner product `Σ_interior w·a·b`.
pub fn inner(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    let grid = a.grid();
    let w = grid.weight();
    Ok(interior_sum(grid, |k| a.values()[k] * b.values()[k]) * w)
}

/// Sum of `term(k)` over interior node indices `k`.
pub(crate) fn interior_sum(grid: &Grid, mut term: impl FnMut(usize) -> f64) -> f64 {
    let n0 = grid.count(0);
    if grid.dim() == 1 {
        return (1..=n0).map(term).sum();
    }
    let n1 = grid.count(1);
    let s = grid.stride();
    let mut acc = 0.0;
    for i in 1..=n0 {
        for j in 1..=n1 {
            acc += term(i * s + j);
        }
    }
    acc
}
