use alloc::vec::Vec;

use crate::mesh::{eigensystem, h1_norm, harmonic_extension, EigenSystem, Field};
use crate::model::BoundarySchedule;
use crate::{Error, Result};

/// Exact-in-time solution of the semi-discrete heat flow `U_t + A_h U = 0`
/// with Dirichlet data `ψ(t) = ψ∞ + ρ·s(t)`, `s(t) = t²e^{−γt}`.
///
/// Writing `U = Ū + Ψ(t)` with `Ψ(t) = Ψ∞ + s(t)P` (harmonic extensions of
/// `ψ∞` and `ρ`), each eigencoefficient of `Ū` obeys
/// `c′ = −λc − p·s′(t)`, whose Duhamel integral is evaluated in closed form.
#[derive(Debug, Clone)]
pub struct LinearHeatReference {
    eig: EigenSystem,
    schedule: BoundarySchedule,
    limit: Field,
    transient: Field,
    initial: Vec<f64>,
    forcing: Vec<f64>,
    lambdas: Vec<f64>,
}

impl LinearHeatReference {
    /// `u0` must carry the trace `ψ(·, 0)`.
    pub fn new(u0: &Field, schedule: &BoundarySchedule) -> Result<Self> {
        let grid = *u0.grid();
        let gap = u0.trace_gap(&schedule.at(0.0))?;
        if gap > super::TRACE_TOLERANCE {
            return Err(Error::TraceMismatch { max_gap: gap });
        }
        let eig = eigensystem(&grid);
        let limit = harmonic_extension(schedule.terminal(), &grid)?;
        let transient = if schedule.shape().iter().all(|&r| r == 0.0) {
            Field::zeros(grid)
        } else {
            harmonic_extension(schedule.shape(), &grid)?
        };
        // Ψ(0) = Ψ∞ since s(0) = 0
        let initial = eig.analyze(&u0.sub(&limit)?)?;
        let forcing = eig.analyze(&transient)?;
        let lambdas = (0..eig.len()).map(|k| eig.eigenvalue_at(k)).collect();
        Ok(LinearHeatReference { eig, schedule: schedule.clone(), limit, transient, initial, forcing, lambdas })
    }

    /// Reference started from the harmonic extension of `ψ(·, 0)`.
    pub fn harmonic_start(grid: &crate::mesh::Grid, schedule: &BoundarySchedule) -> Result<Self> {
        let u0 = harmonic_extension(&schedule.at(0.0), grid)?;
        Self::new(&u0, schedule)
    }

    /// `U∞ = harmonic_extension(ψ∞)`.
    pub fn limit(&self) -> &Field {
        &self.limit
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    fn coefficients(&self, t: f64) -> Vec<f64> {
        let gamma = self.schedule.gamma();
        let driven = self.schedule.profile_max() > 0.0;
        self.lambdas
            .iter()
            .zip(&self.initial)
            .zip(&self.forcing)
            .map(|((&lam, &c0), &p)| {
                let mut c = libm::exp(-lam * t) * c0;
                if driven && p != 0.0 {
                    let (k1, k2) = duhamel_moments(lam, gamma, t);
                    c -= p * (2.0 * k1 - gamma * k2);
                }
                c
            })
            .collect()
    }

    /// `U(t)`.
    pub fn value(&self, t: f64) -> Result<Field> {
        let bar = self.eig.synthesize(&self.coefficients(t))?;
        let s = self.schedule.profile(t);
        let mut out = bar.combine(1.0, &self.limit, 1.0)?;
        if s != 0.0 {
            out = out.combine(1.0, &self.transient, s)?;
        }
        // boundary values are ψ(t) exactly
        out.set_trace(&self.schedule.at(t))?;
        Ok(out)
    }

    /// `U_t(t)`.
    pub fn time_derivative(&self, t: f64) -> Result<Field> {
        let c = self.coefficients(t);
        let ds = self.schedule.profile_rate(t);
        let rate: Vec<f64> =
            c.iter().zip(&self.lambdas).zip(&self.forcing).map(|((&ck, &lam), &p)| -lam * ck - p * ds).collect();
        let bar = self.eig.synthesize(&rate)?;
        let mut out = bar.combine(1.0, &self.transient, ds)?;
        out.set_trace(&self.schedule.rate(t))?;
        Ok(out)
    }

    /// Trapezoidal running integral of `‖U_t‖_{H¹}` on `[0, t_end]` with step `dt`.
    pub fn rate_integral(&self, t_end: f64, dt: f64) -> Result<RateIntegral> {
        if !(dt > 0.0 && t_end > 0.0) {
            return Err(crate::error::invalid("rate integral needs positive dt and end time"));
        }
        let n = libm::ceil(t_end / dt) as usize;
        let h = t_end / n as f64;
        let mut times = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        let mut prev = h1_norm(&self.time_derivative(0.0)?);
        let mut acc = 0.0;
        times.push(0.0);
        values.push(0.0);
        for i in 1..=n {
            let t = i as f64 * h;
            let cur = h1_norm(&self.time_derivative(t)?);
            acc += 0.5 * h * (prev + cur);
            prev = cur;
            times.push(t);
            values.push(acc);
        }
        Ok(RateIntegral { times, values })
    }
}

/// Running integral samples `(tᵢ, ∫₀^{tᵢ} ‖U_t‖_{H¹})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateIntegral {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RateIntegral {
    /// Largest increment of the integral over consecutive samples with `t ≥ t0`.
    pub fn tail_increment(&self, t0: f64) -> f64 {
        let start = self.times.iter().position(|&t| t >= t0).unwrap_or(self.times.len());
        self.values[start.saturating_sub(1)..].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Total increase of the integral beyond `t0`.
    pub fn tail_total(&self, t0: f64) -> f64 {
        let start = self.times.iter().position(|&t| t >= t0).unwrap_or(self.times.len() - 1);
        self.values[self.values.len() - 1] - self.values[start]
    }
}

/// `K_j = ∫₀ᵗ e^{−λ(t−σ)} σʲ e^{−γσ} dσ` for `j = 1, 2`.
fn duhamel_moments(lam: f64, gamma: f64, t: f64) -> (f64, f64) {
    if t == 0.0 {
        return (0.0, 0.0);
    }
    if lam >= gamma {
        let x = (lam - gamma) * t;
        let e = libm::exp(-gamma * t);
        let (e1, e2) = weighted_exp_integrals(x, true);
        (e * t * t * e1, e * t * t * t * e2)
    } else {
        let x = (gamma - lam) * t;
        let e = libm::exp(-lam * t);
        let (d1, d2) = weighted_exp_integrals(x, false);
        (e * t * t * d1, e * t * t * t * d2)
    }
}

/// For `reversed`: `E_j(x) = ∫₀¹ (1−s)ʲ e^{−xs} ds`; otherwise
/// `D_j(x) = ∫₀¹ sʲ e^{−xs} ds`. Returns the `j = 1, 2` values, `x ≥ 0`.
fn weighted_exp_integrals(x: f64, reversed: bool) -> (f64, f64) {
    if x < 2.0 {
        let mut out = [0.0; 2];
        for (slot, j) in [1usize, 2].into_iter().enumerate() {
            // term m: (−x)^m / m! · weight(j, m)
            let mut pow = 1.0;
            let mut sum = 0.0;
            for m in 0..60 {
                let w = if reversed {
                    // j!·m!/(j+m+1)!
                    let mut r = 1.0;
                    for q in 1..=j {
                        r *= q as f64 / (m + q + 1) as f64;
                    }
                    r / (m + 1) as f64
                } else {
                    1.0 / (j + m + 1) as f64
                };
                let term = pow * w;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
                pow *= -x / (m + 1) as f64;
            }
            out[slot] = sum;
        }
        return (out[0], out[1]);
    }
    let ex = libm::exp(-x);
    let base = -libm::expm1(-x) / x;
    if reversed {
        let e1 = (1.0 - base) / x;
        let e2 = (1.0 - 2.0 * e1) / x;
        (e1, e2)
    } else {
        let d1 = (base - ex) / x;
        let d2 = (2.0 * d1 - ex) / x;
        (d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{l2_norm, pair_h1_distance, Grid};
    use alloc::vec;

    fn quad(f: impl Fn(f64) -> f64) -> f64 {
        // composite Simpson on [0,1]
        let n = 20000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn special_integrals_match_quadrature() {
        for x in [0.0, 0.3, 1.9, 2.0, 2.1, 7.5, 80.0] {
            let (e1, e2) = weighted_exp_integrals(x, true);
            let (d1, d2) = weighted_exp_integrals(x, false);
            let q = |j: i32, rev: bool| {
                quad(|s| {
                    let b = if rev { 1.0 - s } else { s };
                    libm::pow(b, j as f64) * libm::exp(-x * s)
                })
            };
            for (a, b) in [(e1, q(1, true)), (e2, q(2, true)), (d1, q(1, false)), (d2, q(2, false))] {
                assert!((a - b).abs() < 1e-11 * b.abs().max(1e-3), "x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn frozen_harmonic_data_is_stationary() {
        let g = Grid::new_1d(2.0, 15).unwrap();
        let sched = BoundarySchedule::stationary(vec![0.2, 0.9]).unwrap();
        let r = LinearHeatReference::harmonic_start(&g, &sched).unwrap();
        for t in [0.0, 0.5, 10.0] {
            let u = r.value(t).unwrap();
            let d = u.sub(r.limit()).unwrap();
            assert!(d.values().iter().all(|x| x.abs() < 1e-13));
        }
    }

    #[test]
    fn stationary_schedule_decays_spectrally() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let sched = BoundarySchedule::stationary(vec![0.0, 0.5]).unwrap();
        let u0 = Field::from_fn(g, |x| 0.5 * x[0] + 0.3 * libm::sin(3.0 * core::f64::consts::PI * x[0]) * x[0]);
        let r = LinearHeatReference::new(&u0, &sched).unwrap();
        let lam1 = r.eigensystem().smallest();
        let d0 = l2_norm(&u0.sub(r.limit()).unwrap());
        for t in [0.01, 0.1, 0.5] {
            let d = l2_norm(&r.value(t).unwrap().sub(r.limit()).unwrap());
            assert!(d <= libm::exp(-lam1 * t) * d0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn decaying_schedule_reaches_the_harmonic_limit() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let gamma = 1.0;
        let sched = BoundarySchedule::decaying(vec![0.3, 0.6], vec![0.2, -0.3], gamma).unwrap();
        let r = LinearHeatReference::harmonic_start(&g, &sched).unwrap();
        let zero = Field::zeros(g);
        let u = r.value(40.0 / gamma).unwrap();
        let d = pair_h1_distance(&u, &zero, r.limit(), &zero).unwrap();
        assert!(d < 1e-6, "{d}");
        let integral = r.rate_integral(60.0, 0.05).unwrap();
        assert!(integral.tail_increment(40.0) < 1e-8);
    }

    #[test]
    fn time_derivative_matches_central_differences() {
        let g = Grid::new_2d([1.0, 1.0], [7, 5]).unwrap();
        let nb = g.boundary_nodes().len();
        let shape: Vec<f64> = (0..nb).map(|i| 0.1 * libm::sin(i as f64)).collect();
        let sched = BoundarySchedule::decaying(vec![0.5; nb], shape, 2.0).unwrap();
        let r = LinearHeatReference::harmonic_start(&g, &sched).unwrap();
        let h = 1e-5;
        for t in [0.05, 0.7, 3.0] {
            let fd = r.value(t + h).unwrap().combine(0.5 / h, &r.value(t - h).unwrap(), -0.5 / h).unwrap();
            let exact = r.time_derivative(t).unwrap();
            let err = fd.sub(&exact).unwrap();
            assert!(err.values().iter().all(|x| x.abs() < 1e-6), "t={t}");
        }
    }
}
