//! Linear solvers behind the implicit stepper, harmonic extensions and Newton.
//!
//! Interior systems of the form `(diag(shift) + A_h) x = rhs` with Dirichlet
//! data are solved directly (Thomas) in 1D and by Jacobi-preconditioned
//! conjugate gradients in 2D; both report the achieved relative residual.
//! Newton's coupled Jacobian uses a banded LU with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::{neg_laplacian, Grid};
use crate::{Error, Result};

/// Relative residual required of every shifted-Laplacian solve.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// `diag(shift) + A_h` on interior nodes. `shift` has one entry per node;
/// boundary entries are ignored.
pub struct ShiftedLaplacian<'a> {
    grid: &'a Grid,
    shift: &'a [f64],
}

impl<'a> ShiftedLaplacian<'a> {
    pub fn new(grid: &'a Grid, shift: &'a [f64]) -> Result<Self> {
        if shift.len() != grid.node_count() {
            return Err(Error::ShapeMismatch { expected: grid.node_count(), found: shift.len() });
        }
        Ok(ShiftedLaplacian { grid, shift })
    }

    /// `out = (shift + A_h) x` at interior nodes, Dirichlet values read from `x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        neg_laplacian(self.grid, x, out);
        for k in interior(self.grid) {
            out[k] += self.shift[k] * x[k];
        }
    }

    /// Solves for `x` in place: boundary entries of `x` hold the Dirichlet
    /// data on entry and are left untouched; interior entries are the
    /// initial guess on entry and the solution on exit.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64], tol: f64) -> Result<SolveStats> {
        let n = self.grid.node_count();
        if rhs.len() != n || x.len() != n {
            return Err(Error::ShapeMismatch { expected: n, found: rhs.len().min(x.len()) });
        }
        if self.grid.dim() == 1 {
            self.solve_tridiagonal(rhs, x);
            let stats = self.check_residual(rhs, x, 1);
            if !(stats.relative_residual <= tol) {
                return Err(Error::SolveFailed { iterations: 1, residual: stats.relative_residual });
            }
            Ok(stats)
        } else {
            self.solve_pcg(rhs, x, tol)
        }
    }

    /// Effective right-hand side norm: `‖rhs − A_h(boundary part)‖` over interior nodes.
    fn effective_rhs_norm(&self, rhs: &[f64], x: &[f64]) -> f64 {
        let mut lift = vec![0.0; x.len()];
        for k in self.grid.boundary_nodes() {
            lift[k] = x[k];
        }
        let mut lifted = vec![0.0; x.len()];
        neg_laplacian(self.grid, &lift, &mut lifted);
        libm::sqrt(interior(self.grid).map(|k| libm::pow(rhs[k] - lifted[k], 2.0)).sum())
    }

    fn check_residual(&self, rhs: &[f64], x: &[f64], iterations: usize) -> SolveStats {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        let r = libm::sqrt(interior(self.grid).map(|k| libm::pow(rhs[k] - ax[k], 2.0)).sum());
        let b = self.effective_rhs_norm(rhs, x);
        let relative_residual = if b > 0.0 { r / b } else { r };
        SolveStats { iterations, relative_residual }
    }

    fn solve_tridiagonal(&self, rhs: &[f64], x: &mut [f64]) {
        let n = self.grid.count(0);
        let h = self.grid.spacing(0);
        let off = -1.0 / (h * h);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for m in 0..n {
            let k = m + 1;
            let diag = self.shift[k] + 2.0 / (h * h);
            let mut r = rhs[k];
            if m == 0 {
                r -= off * x[0];
            }
            if m == n - 1 {
                r -= off * x[n + 1];
            }
            if m == 0 {
                c[0] = off / diag;
                d[0] = r / diag;
            } else {
                let denom = diag - off * c[m - 1];
                c[m] = off / denom;
                d[m] = (r - off * d[m - 1]) / denom;
            }
        }
        x[n] = d[n - 1];
        for m in (0..n - 1).rev() {
            x[m + 1] = d[m] - c[m] * x[m + 2];
        }
    }

    fn solve_pcg(&self, rhs: &[f64], x: &mut [f64], tol: f64) -> Result<SolveStats> {
        let grid = self.grid;
        let n = grid.node_count();
        let b_norm = self.effective_rhs_norm(rhs, x);
        let diag_lap = 2.0 / libm::pow(grid.spacing(0), 2.0) + 2.0 / libm::pow(grid.spacing(1), 2.0);

        let mut r = vec![0.0; n];
        self.apply(x, &mut r);
        let interior_idx: Vec<usize> = interior(grid).collect();
        for &k in &interior_idx {
            r[k] = rhs[k] - r[k];
        }
        let threshold = tol * if b_norm > 0.0 { b_norm } else { 1.0 };
        let mut r_norm = libm::sqrt(interior_idx.iter().map(|&k| r[k] * r[k]).sum());
        if r_norm <= threshold {
            return Ok(SolveStats { iterations: 0, relative_residual: r_norm / b_norm.max(f64::MIN_POSITIVE) });
        }

        let inv_diag: Vec<f64> = (0..n).map(|k| 1.0 / (self.shift[k] + diag_lap)).collect();
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for &k in &interior_idx {
            z[k] = inv_diag[k] * r[k];
            p[k] = z[k];
        }
        let mut rz: f64 = interior_idx.iter().map(|&k| r[k] * z[k]).sum();
        let max_iter = 20 * interior_idx.len() + 100;
        for it in 1..=max_iter {
            // p vanishes on the boundary, so this is the homogeneous operator
            self.apply(&p, &mut q);
            let pq: f64 = interior_idx.iter().map(|&k| p[k] * q[k]).sum();
            if !(pq > 0.0) {
                return Err(Error::SolveFailed { iterations: it, residual: r_norm / b_norm.max(f64::MIN_POSITIVE) });
            }
            let alpha = rz / pq;
            let mut rr = 0.0;
            for &k in &interior_idx {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
                rr += r[k] * r[k];
            }
            r_norm = libm::sqrt(rr);
            if r_norm <= threshold {
                // confirm against the true residual to guard against drift
                let stats = self.check_residual(rhs, x, it);
                if stats.relative_residual <= tol {
                    return Ok(stats);
                }
                for &k in &interior_idx {
                    r[k] = 0.0;
                }
                self.apply(x, &mut r);
                for &k in &interior_idx {
                    r[k] = rhs[k] - r[k];
                }
            }
            let mut rz_new = 0.0;
            for &k in &interior_idx {
                z[k] = inv_diag[k] * r[k];
                rz_new += r[k] * z[k];
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for &k in &interior_idx {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::SolveFailed { iterations: max_iter, residual: r_norm / b_norm.max(f64::MIN_POSITIVE) })
    }
}

fn interior(grid: &Grid) -> impl Iterator<Item = usize> + '_ {
    let s = grid.stride();
    let (n0, n1) = (grid.count(0), if grid.dim() == 2 { grid.count(1) } else { 1 });
    let j0 = if grid.dim() == 2 { 1 } else { 0 };
    (1..=n0).flat_map(move |i| (j0..j0 + n1).map(move |j| i * s + j))
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, factored in
/// place by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

/// LU factors of a [`BandMatrix`] with the row pivots applied.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // extra kl columns absorb fill-in from row interchanges
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn pos(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pos(i, j).map_or(0.0, |p| self.data[p])
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let in_band = j + self.kl >= i && j <= i + self.ku;
        assert!(in_band, "entry ({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let p = self.pos(i, j).expect("in band");
        self.data[p] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) {
                return Err(Error::SolveFailed { iterations: k, residual: f64::INFINITY });
            }
            pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let l = self.get(r, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                self.set(r, k, l);
                for j in k + 1..=last_col {
                    let v = self.get(r, j) - l * self.get(k, j);
                    self.set(r, j, v);
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        if let Some(p) = self.pos(i, j) {
            self.data[p] = v;
        } else {
            debug_assert!(v == 0.0, "dropping nonzero fill at ({i}, {j})");
        }
    }
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last_row = (k + m.kl).min(n - 1);
            for r in k + 1..=last_row {
                x[r] -= m.get(r, k) * x[k];
            }
        }
        let reach = m.ku + m.kl;
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= m.get(k, j) * x[j];
            }
            x[k] = s / m.get(k, k);
        }
        x
    }
}
