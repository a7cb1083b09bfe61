use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{Field, Grid};
use crate::{Error, Result};

/// Exact spectrum of the negative Dirichlet Laplacian `A_h` on a box grid.
///
/// Modes are tensor products of discrete sines,
/// `φ_k(x) = Π_a √(2/L_a)·sin(k_a π x_a / L_a)`, orthonormal in the lumped
/// inner product. Coefficient vectors use the packed interior layout with the
/// mode index `(k₁, k₂)` in place of the node index `(i, j)`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    grid: Grid,
    axis_values: [Vec<f64>; 2],
    sines: [Vec<f64>; 2],
    sorted: Vec<(f64, usize)>,
}

/// Builds the analytic eigensystem of `grid`.
pub fn eigensystem(grid: &Grid) -> EigenSystem {
    EigenSystem::new(*grid)
}

/// Smallest eigenvalue `α₁ = λ₁`, the sharp constant in
/// `‖∇_h W‖₂ ≤ α₁^{−1/2}‖Δ_h W‖₂` for boundary-vanishing `W`.
pub fn poincare_constant(grid: &Grid) -> f64 {
    (0..grid.dim()).map(|a| axis_eigenvalue(grid, a, 1)).sum()
}

fn axis_eigenvalue(grid: &Grid, axis: usize, k: usize) -> f64 {
    let h = grid.spacing(axis);
    let s = libm::sin(k as f64 * PI * h / (2.0 * grid.length(axis)));
    4.0 / (h * h) * s * s
}

/// Orthogonal symmetric DST-I matrix `√(2/(n+1))·sin(π k j/(n+1))`, row-major.
fn sine_matrix(n: usize) -> Vec<f64> {
    let scale = libm::sqrt(2.0 / (n + 1) as f64);
    let mut m = vec![0.0; n * n];
    for k in 1..=n {
        for j in 1..=n {
            m[(k - 1) * n + (j - 1)] = scale * libm::sin(PI * (k * j) as f64 / (n + 1) as f64);
        }
    }
    m
}

impl EigenSystem {
    pub fn new(grid: Grid) -> Self {
        let mut axis_values = [Vec::new(), Vec::new()];
        let mut sines = [Vec::new(), Vec::new()];
        for axis in 0..grid.dim() {
            axis_values[axis] = (1..=grid.count(axis)).map(|k| axis_eigenvalue(&grid, axis, k)).collect();
            sines[axis] = sine_matrix(grid.count(axis));
        }
        if grid.dim() == 1 {
            axis_values[1] = vec![0.0];
        }
        let n1 = axis_values[1].len();
        let mut sorted: Vec<(f64, usize)> = (0..grid.interior_count())
            .map(|slot| (axis_values[0][slot / n1] + axis_values[1][slot % n1], slot))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        EigenSystem { grid, axis_values, sines, sorted }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.sorted.iter().map(|&(l, _)| l).collect()
    }

    pub fn smallest(&self) -> f64 {
        self.sorted[0].0
    }

    pub fn largest(&self) -> f64 {
        self.sorted[self.sorted.len() - 1].0
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Eigenvalue attached to coefficient slot `slot` (packed layout).
    pub fn eigenvalue_at(&self, slot: usize) -> f64 {
        let n1 = self.axis_values[1].len();
        self.axis_values[0][slot / n1] + self.axis_values[1][slot % n1]
    }

    /// Coefficient slot of the `rank`-th smallest eigenvalue (0-based).
    pub fn slot_of_rank(&self, rank: usize) -> usize {
        self.sorted[rank].1
    }

    /// The normalized eigenmode at coefficient slot `slot`, zero on the boundary.
    pub fn mode(&self, slot: usize) -> Field {
        let mut coeffs = vec![0.0; self.len()];
        coeffs[slot] = 1.0;
        self.synthesize(&coeffs).expect("coefficient length matches grid")
    }

    /// Lumped-L² coefficients `c_k = Σ w·f·φ_k` of the interior values of `f`.
    pub fn analyze(&self, f: &Field) -> Result<Vec<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch { expected: self.grid.node_count(), found: f.grid().node_count() });
        }
        let mut c = self.transform(&f.interior());
        let scale = libm::sqrt(self.grid.weight());
        c.iter_mut().for_each(|x| *x *= scale);
        Ok(c)
    }

    /// Field `Σ c_k φ_k` with zero boundary values.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: coeffs.len() });
        }
        let mut packed = self.transform(coeffs);
        let scale = 1.0 / libm::sqrt(self.grid.weight());
        packed.iter_mut().for_each(|x| *x *= scale);
        let mut f = Field::zeros(self.grid);
        f.set_interior(&packed)?;
        Ok(f)
    }

    /// Applies `S₁ ⊗ S₂` (its own inverse) to a packed interior vector.
    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let n0 = self.grid.count(0);
        let s0 = &self.sines[0];
        if self.grid.dim() == 1 {
            return (0..n0).map(|k| (0..n0).map(|j| s0[k * n0 + j] * x[j]).sum()).collect();
        }
        let n1 = self.grid.count(1);
        let s1 = &self.sines[1];
        // along axis 1 within each row
        let mut tmp = vec![0.0; n0 * n1];
        for i in 0..n0 {
            let row = &x[i * n1..(i + 1) * n1];
            for k in 0..n1 {
                let srow = &s1[k * n1..(k + 1) * n1];
                tmp[i * n1 + k] = srow.iter().zip(row).map(|(a, b)| a * b).sum();
            }
        }
        // along axis 0
        let mut out = vec![0.0; n0 * n1];
        for k in 0..n0 {
            let srow = &s0[k * n0..(k + 1) * n0];
            let dst = &mut out[k * n1..(k + 1) * n1];
            for (i, &s) in srow.iter().enumerate() {
                let src = &tmp[i * n1..(i + 1) * n1];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += s * v;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{h1_seminorm, l2_norm, laplacian_apply, linf_norm};

    #[test]
    fn three_node_spectrum() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        let ev = eigensystem(&g).eigenvalues();
        let expected = [9.372583002030478, 32.0, 54.62741699796952];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((poincare_constant(&g) - 64.0 * libm::pow(libm::sin(PI / 8.0), 2.0)).abs() < 1e-12);
    }

    #[test]
    fn square_spectrum_is_a_tensor_sum() {
        let g = Grid::new_2d([1.0, 1.0], [3, 3]).unwrap();
        let e = eigensystem(&g);
        assert!((e.smallest() - 2.0 * 64.0 * libm::pow(libm::sin(PI / 8.0), 2.0)).abs() < 1e-12);
        assert_eq!(e.len(), 9);
        assert!(e.eigenvalues().iter().all(|&l| l > 0.0));
    }

    #[test]
    fn modes_are_eigenvectors_and_normalized() {
        for g in [Grid::new_1d(2.0, 17).unwrap(), Grid::new_2d([1.0, 0.5], [9, 6]).unwrap()] {
            let e = eigensystem(&g);
            for rank in 0..3 {
                let slot = e.slot_of_rank(rank);
                let phi = e.mode(slot);
                let lam = e.eigenvalue_at(slot);
                let lap = laplacian_apply(&phi).unwrap();
                let resid = lap.combine(1.0, &phi, -lam).unwrap();
                assert!(linf_norm(&resid) <= 1e-10 * lam);
                assert!((l2_norm(&phi) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let g = Grid::new_2d([1.0, 2.0], [5, 4]).unwrap();
        let e = eigensystem(&g);
        let coeffs: Vec<f64> = (0..e.len()).map(|k| libm::sin(k as f64 + 0.3)).collect();
        let back = e.analyze(&e.synthesize(&coeffs).unwrap()).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_mode_saturates_poincare() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        let e = eigensystem(&g);
        let phi = e.mode(e.slot_of_rank(0));
        let grad = h1_seminorm(&phi);
        let lap = l2_norm(&laplacian_apply(&phi).unwrap());
        let alpha = poincare_constant(&g);
        assert!((grad - lap / libm::sqrt(alpha)).abs() < 1e-12);
    }
}
