//! Decay certificates `‖A^α e^{−tA}‖ ≤ C_α e^{−ωt} t^{−α}` on the discrete spectrum.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::mesh::EigenSystem;
use crate::Result;

/// Refinement factor of the verification grid.
pub const REFINEMENT: usize = 10;

/// `max_λ λ^α e^{−λt}`, the `L² → H^{2α}` norm of the discrete semigroup.
pub fn semigroup_norm(eig: &EigenSystem, alpha: f64, t: f64) -> Result<f64> {
    spectrum_semigroup_norm(&eig.eigenvalues(), alpha, t)
}

/// [`semigroup_norm`] for an explicit list of positive eigenvalues.
pub fn spectrum_semigroup_norm(lambdas: &[f64], alpha: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("semigroup time must be positive, got {t}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("fractional power must be positive, got {alpha}")));
    }
    Ok(lambdas.iter().map(|&l| libm::pow(l, alpha) * libm::exp(-l * t)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub alpha: f64,
    pub omega: f64,
    pub c_alpha: f64,
    /// Largest `‖A^α e^{−tA}‖ e^{ωt} t^α` seen on the input grid.
    pub scanned_sup: f64,
    /// The refined verification grid.
    pub t_samples: Vec<f64>,
    /// Worst signed excess `‖A^α e^{−tA}‖ − C_α e^{−ωt} t^{−α}` on `t_samples`.
    pub max_violation: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_id: String,
}

impl DecayCertificate {
    pub const HEADER: &'static str = "alpha,omega,C_alpha,max_violation,lambda_min,lambda_max,grid_id";
}

/// `n` log-spaced points on `[t0, t1]`.
pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![t0];
    }
    let (a, b) = (libm::log(t0), libm::log(t1));
    (0..n).map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Certificate for `eig` with `ω ∈ (0, λ₁)`.
pub fn certify_decay(eig: &EigenSystem, alpha: f64, omega: f64, t_grid: &[f64]) -> Result<DecayCertificate> {
    let mut cert = certify_spectrum(&eig.eigenvalues(), alpha, omega, t_grid)?;
    cert.grid_id = eig.grid().id();
    Ok(cert)
}

/// Certificate for an explicit ascending spectrum.
///
/// `C_α` is the larger of the scanned supremum and, for each eigenvalue, the
/// exact maximum of `λ^α e^{−(λ−ω)t} t^α` over `[t_min, t_max]`, so the
/// refined check cannot miss a peak between grid points.
pub fn certify_spectrum(lambdas: &[f64], alpha: f64, omega: f64, t_grid: &[f64]) -> Result<DecayCertificate> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid("spectrum must be nonempty and positive"));
    }
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
    if !(omega > 0.0 && omega < lambda_min) {
        return Err(invalid(format!("decay rate must lie in (0, λ₁ = {lambda_min}), got {omega}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("fractional power must be positive, got {alpha}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(invalid("time grid must be nonempty and positive"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    let weighted = |t: f64| -> Result<f64> {
        Ok(spectrum_semigroup_norm(lambdas, alpha, t)? * libm::exp(omega * t) * libm::pow(t, alpha))
    };
    let mut scanned_sup = 0.0_f64;
    for &t in t_grid {
        scanned_sup = scanned_sup.max(weighted(t)?);
    }
    let (t_lo, t_hi) = (t_grid[0], t_grid[t_grid.len() - 1]);
    let analytic = lambdas
        .iter()
        .map(|&l| {
            let t_star = (alpha / (l - omega)).clamp(t_lo, t_hi);
            libm::pow(l * t_star, alpha) * libm::exp(-(l - omega) * t_star)
        })
        .fold(0.0, f64::max);
    let c_alpha = scanned_sup.max(analytic);

    let mut t_samples = Vec::with_capacity(REFINEMENT * t_grid.len());
    for w in t_grid.windows(2) {
        let ratio = w[1] / w[0];
        for i in 0..REFINEMENT {
            t_samples.push(w[0] * libm::pow(ratio, i as f64 / REFINEMENT as f64));
        }
    }
    t_samples.push(t_hi);
    let mut max_violation = f64::NEG_INFINITY;
    for &t in &t_samples {
        let norm = spectrum_semigroup_norm(lambdas, alpha, t)?;
        let bound = c_alpha * libm::exp(-omega * t) * libm::pow(t, -alpha);
        max_violation = max_violation.max(norm - bound);
    }
    Ok(DecayCertificate {
        alpha,
        omega,
        c_alpha,
        scanned_sup,
        t_samples,
        max_violation,
        lambda_min,
        lambda_max,
        grid_id: String::new(),
    })
}

/// `∫₀^∞ C_α e^{−ωσ} σ^{−α} dσ = C_α Γ(1−α)/ω^{1−α}`, finite for `α ∈ (0,1)`.
pub fn integrability(cert: &DecayCertificate) -> Result<f64> {
    let a = cert.alpha;
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("the time integral diverges for alpha = {a}")));
    }
    Ok(cert.c_alpha * libm::tgamma(1.0 - a) / libm::pow(cert.omega, 1.0 - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{eigensystem, Grid};

    #[test]
    fn large_time_norm_sits_on_the_first_eigenvalue() {
        let e = eigensystem(&Grid::new_1d(1.0, 31).unwrap());
        let l1 = e.smallest();
        let t = 2.0 / l1;
        let v = semigroup_norm(&e, 1.0, t).unwrap();
        assert!((v - l1 * libm::exp(-l1 * t)).abs() < 1e-15 * v.max(1.0));
    }

    #[test]
    fn small_time_norm_peaks_near_one_over_t() {
        let e = eigensystem(&Grid::new_1d(1.0, 63).unwrap());
        let t = 1e-3;
        let brute = e.eigenvalues().iter().map(|&l| l * libm::exp(-l * t)).fold(0.0, f64::max);
        assert_eq!(semigroup_norm(&e, 1.0, t).unwrap(), brute);
        assert!((brute - 1.0 / (core::f64::consts::E * t)).abs() < 0.01 * brute);
    }

    #[test]
    fn tiny_time_norm_is_the_top_of_the_spectrum() {
        let e = eigensystem(&Grid::new_1d(1.0, 15).unwrap());
        let v = semigroup_norm(&e, 0.5, 1e-12).unwrap();
        assert!((v - libm::sqrt(e.largest())).abs() < 1e-6);
        assert!(semigroup_norm(&e, 0.5, 0.0).is_err());
    }

    #[test]
    fn single_eigenvalue_constant_is_two_over_e() {
        let lam = 3.0;
        let grid = log_spaced(1e-3, 1e2, 400);
        let c = certify_spectrum(&[lam], 1.0, lam / 2.0, &grid).unwrap();
        assert!((c.c_alpha - 2.0 / core::f64::consts::E).abs() < 1e-12);
        assert!(c.max_violation <= 0.0);
    }

    #[test]
    fn omega_at_the_spectral_gap_is_rejected() {
        let e = eigensystem(&Grid::new_1d(1.0, 7).unwrap());
        let grid = log_spaced(1e-3, 1.0, 10);
        assert!(certify_decay(&e, 0.5, e.smallest(), &grid).is_err());
        assert!(certify_decay(&e, 0.5, 0.0, &grid).is_err());
    }

    #[test]
    fn gamma_integral_is_finite() {
        let e = eigensystem(&Grid::new_1d(1.0, 31).unwrap());
        let grid = log_spaced(1e-5, 10.0, 60);
        let c = certify_decay(&e, 0.5, e.smallest() / 2.0, &grid).unwrap();
        let i = integrability(&c).unwrap();
        let expected = c.c_alpha * libm::sqrt(core::f64::consts::PI) / libm::sqrt(c.omega);
        assert!((i - expected).abs() < 1e-12 * expected);
        let one = DecayCertificate { alpha: 1.0, ..c };
        assert!(integrability(&one).is_err());
    }
}
