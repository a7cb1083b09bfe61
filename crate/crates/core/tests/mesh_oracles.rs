use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use segrelab_core::mesh::{
    eigensystem, h1_seminorm, harmonic_extension, l2_norm, laplacian_apply, poincare_constant, Field, Grid,
};

/// Dense `−Δ_h` acting on all nodes: identity rows are dropped, boundary
/// columns keep their stencil weight.
fn dense_laplacian(grid: &Grid) -> DMatrix<f64> {
    let n = grid.node_count();
    let mut m = DMatrix::zeros(n, n);
    for k in grid.interior_nodes() {
        let (i, j) = grid.position(k);
        let h0 = grid.spacing(0);
        m[(k, k)] += 2.0 / (h0 * h0);
        m[(k, grid.index(i - 1, j))] -= 1.0 / (h0 * h0);
        m[(k, grid.index(i + 1, j))] -= 1.0 / (h0 * h0);
        if grid.dim() == 2 {
            let h1 = grid.spacing(1);
            m[(k, k)] += 2.0 / (h1 * h1);
            m[(k, grid.index(i, j - 1))] -= 1.0 / (h1 * h1);
            m[(k, grid.index(i, j + 1))] -= 1.0 / (h1 * h1);
        }
    }
    m
}

fn interior_block(grid: &Grid) -> DMatrix<f64> {
    let full = dense_laplacian(grid);
    let idx = grid.interior_nodes();
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])])
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (0.5..4.0f64, 3usize..40).prop_map(|(l, n)| Grid::new_1d(l, n).unwrap()),
        (0.5..3.0f64, 0.5..3.0f64, 3usize..12, 3usize..12)
            .prop_map(|(a, b, n, m)| Grid::new_2d([a, b], [n, m]).unwrap()),
    ]
}

fn field_on(grid: Grid, seed: Vec<f64>) -> Field {
    let vals: Vec<f64> = (0..grid.node_count()).map(|k| seed[k % seed.len()] * (1.0 + (k % 7) as f64 * 0.1)).collect();
    Field::new(grid, vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stencil_matches_sparse_matrix(grid in grid_strategy(), seed in prop::collection::vec(-1.0..1.0f64, 1..64)) {
        let f = field_on(grid, seed);
        let got = laplacian_apply(&f).unwrap();
        let m = dense_laplacian(&grid);
        let expect = &m * DVector::from_column_slice(f.values());
        let scale = m.abs().max() * f.values().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
        for k in 0..grid.node_count() {
            prop_assert!((got.values()[k] - expect[k]).abs() <= 1e-13 * scale.max(1.0),
                "node {k}: {} vs {}", got.values()[k], expect[k]);
        }
    }

    #[test]
    fn poincare_on_boundary_vanishing_fields(grid in grid_strategy(), seed in prop::collection::vec(-1.0..1.0f64, 1..64)) {
        let mut w = field_on(grid, seed);
        w.set_trace(&vec![0.0; grid.boundary_nodes().len()]).unwrap();
        let lap = laplacian_apply(&w).unwrap();
        let lhs = h1_seminorm(&w);
        let rhs = l2_norm(&lap) / poincare_constant(&grid).sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300, "{lhs} > {rhs}");
    }

    #[test]
    fn harmonic_extension_obeys_maximum_principle(grid in grid_strategy(), seed in prop::collection::vec(-2.0..2.0f64, 1..64)) {
        let nb = grid.boundary_nodes().len();
        let trace: Vec<f64> = (0..nb).map(|k| seed[k % seed.len()] + 0.01 * k as f64).collect();
        let psi = harmonic_extension(&trace, &grid).unwrap();
        let lo = trace.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-10 * (hi - lo).abs().max(1.0);
        for k in grid.interior_nodes() {
            let x = psi.values()[k];
            prop_assert!(x >= lo - tol && x <= hi + tol, "{x} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn analytic_spectrum_matches_dense_eigensolve() {
    for grid in [
        Grid::new_1d(1.0, 3).unwrap(),
        Grid::new_1d(2.5, 17).unwrap(),
        Grid::new_2d([1.0, 1.0], [3, 3]).unwrap(),
        Grid::new_2d([1.0, 2.0], [5, 4]).unwrap(),
    ] {
        let mut dense: Vec<f64> = SymmetricEigen::new(interior_block(&grid)).eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let analytic = eigensystem(&grid).eigenvalues();
        assert_eq!(dense.len(), analytic.len());
        for (a, d) in analytic.iter().zip(&dense) {
            assert!((a - d).abs() < 1e-10 * d.abs().max(1.0), "{a} vs {d}");
        }
    }
}

#[test]
fn three_point_spectrum_values() {
    let e = eigensystem(&Grid::new_1d(1.0, 3).unwrap()).eigenvalues();
    let s = |k: f64| 64.0 * (k * std::f64::consts::PI / 8.0).sin().powi(2);
    for (k, v) in e.iter().enumerate() {
        assert!((v - s(k as f64 + 1.0)).abs() < 1e-12);
    }
    assert!((e[0] - 9.3726).abs() < 1e-4 && (e[1] - 32.0).abs() < 1e-12 && (e[2] - 54.6274).abs() < 1e-4);
    let sq = eigensystem(&Grid::new_2d([1.0, 1.0], [3, 3]).unwrap());
    assert!((sq.smallest() - 2.0 * s(1.0)).abs() < 1e-12);
}

#[test]
fn first_modes_satisfy_eigen_identity() {
    for grid in [Grid::new_1d(1.7, 50).unwrap(), Grid::new_2d([1.0, 1.5], [20, 13]).unwrap()] {
        let e = eigensystem(&grid);
        for rank in 0..3 {
            let slot = e.slot_of_rank(rank);
            let phi = e.mode(slot);
            let lam = e.eigenvalue_at(slot);
            let lap = laplacian_apply(&phi).unwrap();
            let err = lap.values().iter().zip(phi.values()).map(|(a, b)| (a - lam * b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * lam, "rank {rank}: {err}");
        }
    }
}

#[test]
fn first_mode_saturates_poincare() {
    let grid = Grid::new_2d([2.0, 1.0], [14, 9]).unwrap();
    let e = eigensystem(&grid);
    let phi = e.mode(e.slot_of_rank(0));
    let lhs = h1_seminorm(&phi);
    let rhs = l2_norm(&laplacian_apply(&phi).unwrap()) / poincare_constant(&grid).sqrt();
    assert!((lhs - rhs).abs() < 1e-12 * rhs);
}

#[test]
fn sine_l2_norm_is_exact_under_lumping() {
    let errs: Vec<f64> = [31usize, 63, 127]
        .iter()
        .map(|&n| {
            let g = Grid::new_1d(1.0, n).unwrap();
            let f = Field::from_fn(g, |x| (std::f64::consts::PI * x[0]).sin());
            (l2_norm(&f) - 0.5f64.sqrt()).abs()
        })
        .collect();
    // lumped trapezoid on sin² is exact up to roundoff
    assert!(errs.iter().all(|e| *e < 1e-12));
    let g = Grid::new_1d(1.0, 99).unwrap();
    let one = Field::constant(g, 1.0);
    assert!((l2_norm(&one) - (99.0f64 / 100.0).sqrt()).abs() < 1e-14);
}
