use super::ops::{dirichlet_form_raw, interior_sum};
use super::Field;
use crate::error::invalid;
use crate::{Error, Result};

/// Discrete norms of a field. Integrals use lumped weights over interior nodes;
/// the gradient uses forward differences including the boundary gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
    pub lp: f64,
    pub p: f64,
    pub linf: f64,
}

/// All norms of `f`, with the `Lᵖ` entry evaluated at `p ∈ [2, ∞)`.
pub fn norms(f: &Field, p: f64) -> Result<Norms> {
    let lp = lp_norm(f, p)?;
    let l2 = l2_norm(f);
    let h1_semi = h1_seminorm(f);
    Ok(Norms { l2, h1_semi, h1: libm::sqrt(l2 * l2 + h1_semi * h1_semi), lp, p, linf: linf_norm(f) })
}

pub fn l2_norm(f: &Field) -> f64 {
    let x = f.values();
    libm::sqrt(f.grid().weight() * interior_sum(f.grid(), |k| x[k] * x[k]))
}

pub fn h1_seminorm(f: &Field) -> f64 {
    let x = f.values();
    libm::sqrt(dirichlet_form_raw(f.grid(), x, x).max(0.0))
}

pub fn h1_norm(f: &Field) -> f64 {
    let l2 = l2_norm(f);
    let s = h1_seminorm(f);
    libm::sqrt(l2 * l2 + s * s)
}

pub fn linf_norm(f: &Field) -> f64 {
    let x = f.values();
    let mut m = 0.0_f64;
    interior_sum(f.grid(), |k| {
        m = m.max(x[k].abs());
        0.0
    });
    m
}

pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 2.0 {
        return Err(invalid("Lp norms are defined here for p in [2, inf)"));
    }
    if p.is_infinite() {
        return Ok(linf_norm(f));
    }
    if !f.is_finite() {
        return Err(Error::NonFinite { what: "norm input" });
    }
    let x = f.values();
    let s = interior_sum(f.grid(), |k| libm::pow(x[k].abs(), p));
    Ok(libm::pow(f.grid().weight() * s, 1.0 / p))
}

/// `ℍ` norm of a pair: `(‖u‖²_{H¹} + ‖v‖²_{H¹})^{1/2}`.
pub fn pair_h1_norm(u: &Field, v: &Field) -> f64 {
    let a = h1_norm(u);
    let b = h1_norm(v);
    libm::sqrt(a * a + b * b)
}

/// `L² × L²` distance `(‖u₁−u₂‖² + ‖v₁−v₂‖²)^{1/2}`.
pub fn pair_l2_distance(u1: &Field, v1: &Field, u2: &Field, v2: &Field) -> Result<f64> {
    let a = l2_norm(&u1.sub(u2)?);
    let b = l2_norm(&v1.sub(v2)?);
    Ok(libm::sqrt(a * a + b * b))
}

/// `ℍ` distance between two pairs.
pub fn pair_h1_distance(u1: &Field, v1: &Field, u2: &Field, v2: &Field) -> Result<f64> {
    Ok(pair_h1_norm(&u1.sub(u2)?, &v1.sub(v2)?))
}

/// `L∞ × L∞` distance, taken as the larger of the two component distances.
pub fn pair_linf_distance(u1: &Field, v1: &Field, u2: &Field, v2: &Field) -> Result<f64> {
    Ok(linf_norm(&u1.sub(u2)?).max(linf_norm(&v1.sub(v2)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid;
    use core::f64::consts::PI;

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::new_2d([1.0, 1.0], [4, 4]).unwrap();
        let n = norms(&Field::zeros(g), 3.0).unwrap();
        assert_eq!((n.l2, n.h1_semi, n.h1, n.lp, n.linf), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn l2_of_sine_converges_at_second_order() {
        let exact = libm::sqrt(0.5);
        let mut errs = alloc::vec::Vec::new();
        for n in [31, 63, 127] {
            let g = Grid::new_1d(1.0, n).unwrap();
            let f = Field::from_fn(g, |x| libm::sin(PI * x[0]));
            errs.push((l2_norm(&f) - exact).abs());
        }
        // lumped quadrature of sin² is exact up to roundoff on uniform grids
        assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
    }

    #[test]
    fn unit_constant_measures_the_interval() {
        let g = Grid::new_1d(1.0, 999).unwrap();
        let f = Field::constant(g, 1.0);
        assert!((l2_norm(&f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn p_below_two_rejected() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        assert!(lp_norm(&Field::zeros(g), 1.5).is_err());
        assert!(norms(&Field::zeros(g), f64::NAN).is_err());
    }

    #[test]
    fn lp_matches_power_mean() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        let f = Field::new(g, alloc::vec![0.0, 1.0, -2.0, 0.5, 0.0]).unwrap();
        let expected = libm::pow(0.25 * (1.0 + 16.0 + 0.0625), 0.25);
        assert!((lp_norm(&f, 4.0).unwrap() - expected).abs() < 1e-14);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 2.0);
    }
}
