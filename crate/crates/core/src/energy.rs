//! Lyapunov bookkeeping: the natural energy, the auxiliary functional with
//! boundary-work accumulators, the dissipation residual, the Gronwall bound,
//! the quantity `μ`, and the uniform-in-κ audit.

use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::evolve::{homogenize, LinearHeatReference, Problem, SimState, Trajectory};
use crate::mesh::{dirichlet_form, harmonic_extension, interior_sum, l2_norm, normal_derivative, Field};
use crate::model::{BoundaryMode, BoundarySchedule, InitialData, ReactionModel};
use crate::stats::relative_slope;
use crate::{Error, Result};

/// Weight `ε` of the dissipation accumulators.
pub const EPSILON: f64 = 0.5;
/// Largest admissible neglected tail of the `μ` time integrals.
pub const MU_TAIL_TOLERANCE: f64 = 1e-10;
/// Bound on the relative κ-slope accepted as "no trend".
pub const TREND_TOLERANCE: f64 = 1e-3;

/// The terms of the auxiliary functional at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub grad_u: f64,
    pub grad_v: f64,
    pub pot_u: f64,
    pub pot_v: f64,
    pub coupling: f64,
    pub cross_u: f64,
    pub cross_v: f64,
    pub acc_work_u: f64,
    pub acc_work_v: f64,
    pub acc_flux_u: f64,
    pub acc_flux_v: f64,
    pub acc_diss_u: f64,
    pub acc_diss_v: f64,
    pub epsilon: f64,
    pub step_index: usize,
}

impl EnergyBreakdown {
    /// `½‖∇ũ‖² + ½‖∇ṽ‖² − ∫F − ∫G + (κ/2)∫u²v²`.
    pub fn natural(&self) -> f64 {
        self.grad_u + self.grad_v + self.pot_u + self.pot_v + self.coupling
    }

    pub fn accumulators(&self) -> f64 {
        self.acc_work_u + self.acc_work_v + self.acc_flux_u + self.acc_flux_v + self.acc_diss_u + self.acc_diss_v
    }

    pub fn total(&self) -> f64 {
        self.natural() + self.cross_u + self.cross_v + self.accumulators()
    }
}

/// Total of the auxiliary functional, refusing a breakdown whose
/// accumulators belong to another step.
pub fn energy_auxiliary(b: &EnergyBreakdown, step_index: usize) -> Result<f64> {
    if b.step_index != step_index {
        return Err(Error::StaleAccumulators { expected: step_index, found: b.step_index });
    }
    Ok(b.total())
}

/// Natural energy with respect to the harmonic extensions `U∞`, `V∞`.
pub fn energy_stationary(s: &SimState, problem: &Problem, u_inf: &Field, v_inf: &Field) -> Result<f64> {
    if !problem.is_stationary() {
        return Err(invalid("the natural energy needs stationary boundary data"));
    }
    let (tu, tv) = homogenize(s, u_inf, v_inf)?;
    Ok(static_terms(s, &problem.f, &problem.g, problem.kappa, &tu, &tv)?.natural())
}

fn static_terms(
    s: &SimState,
    f: &ReactionModel,
    g: &ReactionModel,
    kappa: f64,
    tu: &Field,
    tv: &Field,
) -> Result<EnergyBreakdown> {
    let grid = s.grid();
    let w = grid.weight();
    let (u, v) = (s.u.values(), s.v.values());
    Ok(EnergyBreakdown {
        grad_u: 0.5 * dirichlet_form(tu, tu)?,
        grad_v: 0.5 * dirichlet_form(tv, tv)?,
        pot_u: -w * interior_sum(grid, |k| f.antiderivative(u[k])),
        pot_v: -w * interior_sum(grid, |k| g.antiderivative(v[k])),
        coupling: 0.5 * kappa * w * interior_sum(grid, |k| u[k] * u[k] * v[k] * v[k]),
        epsilon: EPSILON,
        step_index: s.step_index,
        ..Default::default()
    })
}

/// `r = (Λₙ₊₁ − Λₙ)/dt + (1−ε)(‖∂_tũ‖² + ‖∂_tṽ‖²)`.
pub fn dissipation_residual(
    lambda_n: f64,
    lambda_next: f64,
    dt: f64,
    du_t_norm: f64,
    dv_t_norm: f64,
    epsilon: f64,
) -> f64 {
    (lambda_next - lambda_n) / dt + (1.0 - epsilon) * (du_t_norm * du_t_norm + dv_t_norm * dv_t_norm)
}

/// Advances the accumulators of the auxiliary functional along a trajectory.
///
/// `U`, `V` are the exact semi-discrete heat flows driven by `ψ`, `ζ` from
/// their harmonic initial data. Work and flux integrands are accumulated by
/// the trapezoidal rule; the dissipation accumulator adds `ε·dt·q²` for the
/// step's difference quotient `q = ‖ũⁿ⁺¹ − ũⁿ‖/dt`.
#[derive(Debug, Clone)]
pub struct EnergyTracker {
    f: ReactionModel,
    g: ReactionModel,
    kappa: f64,
    stationary: bool,
    ref_u: LinearHeatReference,
    ref_v: LinearHeatReference,
    acc: [f64; 6],
    step_index: usize,
    last_total: Option<f64>,
}

struct Frame {
    big_u: Field,
    big_v: Field,
    tu: Field,
    tv: Field,
    rate_u: Option<Field>,
    rate_v: Option<Field>,
}

impl EnergyTracker {
    pub fn new(problem: &Problem, s0: &SimState) -> Result<Self> {
        let grid = s0.grid();
        Ok(EnergyTracker {
            f: problem.f,
            g: problem.g,
            kappa: problem.kappa,
            stationary: problem.is_stationary(),
            ref_u: LinearHeatReference::harmonic_start(grid, &problem.psi)?,
            ref_v: LinearHeatReference::harmonic_start(grid, &problem.zeta)?,
            acc: [0.0; 6],
            step_index: s0.step_index,
            last_total: None,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    fn frame(&self, s: &SimState, with_rates: bool) -> Result<Frame> {
        let (big_u, big_v) = if self.stationary {
            (self.ref_u.limit().clone(), self.ref_v.limit().clone())
        } else {
            (self.ref_u.value(s.t)?, self.ref_v.value(s.t)?)
        };
        let (tu, tv) = homogenize(s, &big_u, &big_v)?;
        let (rate_u, rate_v) = if with_rates && !self.stationary {
            (Some(self.ref_u.time_derivative(s.t)?), Some(self.ref_v.time_derivative(s.t)?))
        } else {
            (None, None)
        };
        Ok(Frame { big_u, big_v, tu, tv, rate_u, rate_v })
    }

    /// Breakdown at `s`, which must be the state the accumulators were last
    /// advanced to.
    pub fn breakdown(&self, s: &SimState) -> Result<EnergyBreakdown> {
        if s.step_index != self.step_index {
            return Err(Error::StaleAccumulators { expected: s.step_index, found: self.step_index });
        }
        let fr = self.frame(s, false)?;
        self.assemble(s, &fr)
    }

    fn assemble(&self, s: &SimState, fr: &Frame) -> Result<EnergyBreakdown> {
        let mut b = static_terms(s, &self.f, &self.g, self.kappa, &fr.tu, &fr.tv)?;
        b.cross_u = -dirichlet_form(&fr.big_u, &fr.tu)?;
        b.cross_v = -dirichlet_form(&fr.big_v, &fr.tv)?;
        [b.acc_work_u, b.acc_work_v, b.acc_flux_u, b.acc_flux_v, b.acc_diss_u, b.acc_diss_v] = self.acc;
        Ok(b)
    }

    /// Moves the accumulators from `prev` to `next` and returns the step's
    /// dissipation residual.
    pub fn advance(&mut self, prev: &SimState, next: &SimState) -> Result<f64> {
        if prev.step_index != self.step_index {
            return Err(Error::StaleAccumulators { expected: prev.step_index, found: self.step_index });
        }
        let dt = next.t - prev.t;
        if !(dt > 0.0) {
            return Err(invalid(format!("energy step needs increasing times, got dt = {dt}")));
        }
        let a = self.frame(prev, true)?;
        let lambda_prev = match self.last_total {
            Some(v) => v,
            None => self.assemble(prev, &a)?.total(),
        };
        let b = self.frame(next, true)?;
        if !self.stationary {
            let (wa, fa) = boundary_work(&a)?;
            let (wb, fb) = boundary_work(&b)?;
            self.acc[0] += 0.5 * dt * (wa[0] + wb[0]);
            self.acc[1] += 0.5 * dt * (wa[1] + wb[1]);
            self.acc[2] += 0.5 * dt * (fa[0] + fb[0]);
            self.acc[3] += 0.5 * dt * (fa[1] + fb[1]);
        }
        let qu = l2_norm(&b.tu.sub(&a.tu)?) / dt;
        let qv = l2_norm(&b.tv.sub(&a.tv)?) / dt;
        self.acc[4] += EPSILON * dt * qu * qu;
        self.acc[5] += EPSILON * dt * qv * qv;
        self.step_index = next.step_index;
        let lambda_next = self.assemble(next, &b)?.total();
        self.last_total = Some(lambda_next);
        Ok(dissipation_residual(lambda_prev, lambda_next, dt, qu, qv, EPSILON))
    }
}

/// Work integrands `2∫∇ũ·∇U_t` and flux integrands `−⟨∂ũ/∂ν, ψ_t⟩` for both species.
fn boundary_work(fr: &Frame) -> Result<([f64; 2], [f64; 2])> {
    let (ru, rv) = match (&fr.rate_u, &fr.rate_v) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(([0.0; 2], [0.0; 2])),
    };
    let faces = fr.tu.grid().boundary_faces();
    let flux = |tilde: &Field, rate: &Field| -> f64 {
        normal_derivative(tilde)
            .iter()
            .zip(&faces)
            .map(|(&(w, dn), face)| w * dn * rate.values()[face.node])
            .sum::<f64>()
    };
    Ok(([2.0 * dirichlet_form(&fr.tu, ru)?, 2.0 * dirichlet_form(&fr.tv, rv)?], [-flux(&fr.tu, ru), -flux(&fr.tv, rv)]))
}

/// `2c₁ + c₂²(Σ g·dt)²`, the conclusion of the Gronwall-type estimate
/// for `Υ ≤ c₁ + c₂∫g√Υ`.
pub fn gronwall_bound(c1: f64, c2: f64, g_samples: &[f64], dt: f64) -> Result<f64> {
    if !(c1 >= 0.0 && c2 >= 0.0 && dt > 0.0) || g_samples.iter().any(|&g| !(g >= 0.0)) {
        return Err(invalid("Gronwall bound needs nonnegative c1, c2, g and positive dt"));
    }
    let mass: f64 = g_samples.iter().sum::<f64>() * dt;
    Ok(2.0 * c1 + c2 * c2 * mass * mass)
}

/// `μ = ‖u₀v₀‖₂² + ∫₀^∞‖Ψ_t‖₂ + ∫₀^∞‖Z_t‖₂`.
///
/// `Ψ_t = s′(t)·P` with `P` the harmonic extension of the transient shape,
/// so each time integral is `‖P‖₂·∫|s′|`, computed by Simpson quadrature on
/// `[0, horizon]` split at the sign change `t = 2/γ`. The neglected tail is
/// `‖P‖₂·s(horizon)` and must stay below [`MU_TAIL_TOLERANCE`].
pub fn mu_quantity(
    init: &InitialData,
    sched_u: &BoundarySchedule,
    sched_v: &BoundarySchedule,
    horizon: f64,
) -> Result<f64> {
    let grid = init.grid();
    let (u, v) = (init.u0.values(), init.v0.values());
    let mut mu = grid.weight() * interior_sum(grid, |k| u[k] * u[k] * v[k] * v[k]);
    for sched in [sched_u, sched_v] {
        if sched.mode() == BoundaryMode::Stationary || sched.shape().iter().all(|&r| r == 0.0) {
            continue;
        }
        let p = l2_norm(&harmonic_extension(sched.shape(), grid)?);
        let peak = 2.0 / sched.gamma();
        if !(horizon >= peak) || p * sched.profile(horizon) > MU_TAIL_TOLERANCE {
            return Err(invalid(format!(
                "horizon {horizon} leaves a boundary-velocity tail above {MU_TAIL_TOLERANCE:e}"
            )));
        }
        let rate = |t: f64| sched.profile_rate(t).abs();
        mu += p * (simpson(rate, 0.0, peak, 4000) + simpson(rate, peak, horizon, 20000));
    }
    Ok(mu)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Per-κ summary entering [`h_bound_audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditInput {
    pub kappa: f64,
    /// `sup_t ‖(u, v)‖_ℍ` over the samples.
    pub max_h1: f64,
    pub min_energy: f64,
    pub max_energy: f64,
}

impl AuditInput {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let (min_energy, max_energy) = traj.energy_range();
        AuditInput { kappa: traj.kappa, max_h1: traj.max_h1(), min_energy, max_energy }
    }
}

/// Bound quantities shared by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuantities {
    pub mu: f64,
    /// `‖u₀v₀‖₂²`, the κ-weighted part of the initial energy.
    pub product_l2sq: f64,
}

impl BoundQuantities {
    /// `β_κ = P + κ‖u₀v₀‖₂²` for a given κ-independent part `P`.
    pub fn beta_kappa(&self, base: f64, kappa: f64) -> f64 {
        base + kappa * self.product_l2sq
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub kappa: f64,
    pub max_h1: f64,
    pub min_energy: f64,
    pub max_energy: f64,
    pub mu: f64,
    pub fitted_r: f64,
    pub slope: f64,
    pub slope_ci: f64,
}

impl AuditRow {
    pub const HEADER: &'static str = "kappa,max_h1,min_energy,max_energy,mu,fitted_R,slope,slope_ci";
}

#[derive(Debug, Clone, PartialEq)]
pub struct HBoundAudit {
    pub rows: Vec<AuditRow>,
    /// Relative least-squares slope of `sup_t ‖(u,v)‖_ℍ` against κ.
    pub slope: f64,
    pub slope_ci: f64,
    /// Relative slope of the sampled energy minimum against κ.
    pub energy_slope: f64,
    /// `R` in `‖(u,v)‖_ℍ ≤ R + κμ`, calibrated on the smallest κ.
    pub fitted_r: f64,
    /// κ values whose norm exceeds `R + κμ`.
    pub violations: Vec<f64>,
    pub mu: f64,
}

impl HBoundAudit {
    /// With `μ = 0`: no trend in either the norm or the energy minimum.
    pub fn uniform(&self) -> bool {
        self.slope.abs() <= TREND_TOLERANCE && self.energy_slope >= -TREND_TOLERANCE
    }
}

/// Fits the κ-trend of the ℍ-norm bound across a sweep.
pub fn h_bound_audit(runs: &[AuditInput], bounds: &BoundQuantities) -> Result<HBoundAudit> {
    if runs.len() < 3 {
        return Err(invalid(format!("the bound audit needs at least 3 kappa values, got {}", runs.len())));
    }
    if runs.windows(2).any(|w| !(w[1].kappa > w[0].kappa)) {
        return Err(invalid("audit runs must have strictly ascending kappa"));
    }
    if runs.iter().any(|r| !(r.max_h1.is_finite() && r.min_energy.is_finite())) {
        return Err(invalid("audit runs carry non-finite norms or energies"));
    }
    let kappas: Vec<f64> = runs.iter().map(|r| r.kappa).collect();
    let norms: Vec<f64> = runs.iter().map(|r| r.max_h1).collect();
    let mins: Vec<f64> = runs.iter().map(|r| r.min_energy).collect();
    let fit = relative_slope(&kappas, &norms)?;
    let energy_slope = relative_slope(&kappas, &mins)?.slope;
    let mu = bounds.mu;
    let fitted_r = runs[0].max_h1 - runs[0].kappa * mu;
    let violations =
        runs.iter().filter(|r| r.max_h1 > (fitted_r + r.kappa * mu) * (1.0 + 1e-9)).map(|r| r.kappa).collect();
    let rows = runs
        .iter()
        .map(|r| AuditRow {
            kappa: r.kappa,
            max_h1: r.max_h1,
            min_energy: r.min_energy,
            max_energy: r.max_energy,
            mu,
            fitted_r,
            slope: fit.slope,
            slope_ci: fit.slope_ci(),
        })
        .collect();
    Ok(HBoundAudit { rows, slope: fit.slope, slope_ci: fit.slope_ci(), energy_slope, fitted_r, violations, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{step, zero_problem_state, StepperConfig};
    use crate::mesh::{eigensystem, Grid};
    use crate::model::{make_segregated_bumps, Bump};
    use alloc::vec;

    #[test]
    fn zero_state_has_zero_energy() {
        let g = Grid::new_1d(1.0, 7).unwrap();
        let (s, p) = zero_problem_state(&g, ReactionModel::logistic(), 1e3).unwrap();
        let z = Field::zeros(g);
        assert_eq!(energy_stationary(&s, &p, &z, &z).unwrap(), 0.0);
        let tr = EnergyTracker::new(&p, &s).unwrap();
        assert_eq!(energy_auxiliary(&tr.breakdown(&s).unwrap(), 0).unwrap(), 0.0);
    }

    #[test]
    fn plateau_energy_on_three_nodes() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        let (_, p) = zero_problem_state(&g, ReactionModel::logistic(), 7.0).unwrap();
        let u = Field::new(g, vec![0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let s = SimState::from_fields(u, Field::zeros(g), 0.0).unwrap();
        let z = Field::zeros(g);
        // two boundary gaps of height 1 over h = 1/4: ½·2·(1/h) = 4
        let expected = 4.0 - (1.0 / 6.0) * 0.75;
        assert!((energy_stationary(&s, &p, &z, &z).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn segregated_states_have_no_coupling() {
        let g = Grid::new_1d(1.0, 40).unwrap();
        let init = make_segregated_bumps(
            &g,
            &[Bump { center: [0.25, 0.0], radius: 0.2, amplitude: 1.0 }],
            &[Bump { center: [0.75, 0.0], radius: 0.2, amplitude: 1.0 }],
        )
        .unwrap();
        let s = SimState::new(&init);
        let (_, p) = zero_problem_state(&g, ReactionModel::logistic(), 1e6).unwrap();
        let tr = EnergyTracker::new(&p, &s).unwrap();
        assert_eq!(tr.breakdown(&s).unwrap().coupling, 0.0);
    }

    #[test]
    fn stationary_mode_has_only_dissipation_accumulators() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let psi = BoundarySchedule::stationary(vec![0.4, 0.0]).unwrap();
        let zeta = BoundarySchedule::stationary(vec![0.0, 0.6]).unwrap();
        let p = Problem::symmetric(ReactionModel::logistic(), 10.0, psi, zeta).unwrap();
        let u0 = Field::from_fn(g, |x| 0.4 * (1.0 - x[0]));
        let v0 = Field::from_fn(g, |x| 0.6 * x[0]);
        let mut s = SimState::from_fields(u0, v0, 0.0).unwrap();
        let mut tr = EnergyTracker::new(&p, &s).unwrap();
        let b0 = tr.breakdown(&s).unwrap();
        let u_inf = harmonic_extension(&[0.4, 0.0], &g).unwrap();
        let v_inf = harmonic_extension(&[0.0, 0.6], &g).unwrap();
        let nat = energy_stationary(&s, &p, &u_inf, &v_inf).unwrap();
        assert!((b0.total() - (nat + b0.cross_u + b0.cross_v)).abs() < 1e-14);
        let cfg = StepperConfig::new(0.01);
        for _ in 0..5 {
            let next = step(&s, &p, &cfg).unwrap();
            tr.advance(&s, &next).unwrap();
            s = next;
        }
        let b = tr.breakdown(&s).unwrap();
        assert_eq!([b.acc_work_u, b.acc_work_v, b.acc_flux_u, b.acc_flux_v], [0.0; 4]);
        assert!(b.acc_diss_u > 0.0);
        assert!(matches!(energy_auxiliary(&b, 4), Err(Error::StaleAccumulators { .. })));
        let stale = SimState { step_index: 3, ..s.clone() };
        assert!(tr.breakdown(&stale).is_err());
    }

    #[test]
    fn first_decaying_step_uses_one_trapezoid() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let psi = BoundarySchedule::decaying(vec![0.3, 0.3], vec![0.2, 0.1], 1.0).unwrap();
        let zeta = BoundarySchedule::stationary(vec![0.0, 0.0]).unwrap();
        let p = Problem::symmetric(ReactionModel::zero(), 0.0, psi, zeta).unwrap();
        let u0 = Field::constant(g, 0.3);
        let s0 = SimState::from_fields(u0, Field::zeros(g), 0.0).unwrap();
        let mut tr = EnergyTracker::new(&p, &s0).unwrap();
        let cfg = StepperConfig::new(0.05);
        let s1 = step(&s0, &p, &cfg).unwrap();
        tr.advance(&s0, &s1).unwrap();
        let b = tr.breakdown(&s1).unwrap();
        // ψ_t(·,0) = 0 and U_t(0) = 0: only the t₁ endpoint contributes
        let f0 = tr.frame(&s0, true).unwrap();
        let f1 = tr.frame(&s1, true).unwrap();
        let (w0, fl0) = boundary_work(&f0).unwrap();
        let (w1, fl1) = boundary_work(&f1).unwrap();
        assert_eq!(fl0, [0.0, 0.0]);
        assert_eq!(w0, [0.0, 0.0]);
        assert!((b.acc_work_u - 0.025 * (w0[0] + w1[0])).abs() < 1e-16);
        assert!((b.acc_flux_u - 0.025 * (fl0[0] + fl1[0])).abs() < 1e-16);
        assert_eq!(b.acc_work_v, 0.0);
    }

    #[test]
    fn fixed_point_residual_is_zero() {
        assert_eq!(dissipation_residual(2.5, 2.5, 0.1, 0.0, 0.0, EPSILON), 0.0);
        let g = Grid::new_1d(1.0, 7).unwrap();
        let (s, p) = zero_problem_state(&g, ReactionModel::logistic(), 1.0).unwrap();
        let mut tr = EnergyTracker::new(&p, &s).unwrap();
        let next = step(&s, &p, &StepperConfig::new(0.1)).unwrap();
        assert_eq!(tr.advance(&s, &next).unwrap(), 0.0);
    }

    #[test]
    fn eigenmode_residual_is_first_order() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let e = eigensystem(&g);
        let phi = e.mode(e.slot_of_rank(0)).scaled(0.1);
        let (_, p) = zero_problem_state(&g, ReactionModel::zero(), 0.0).unwrap();
        let mut res = Vec::new();
        for dt in [4e-4, 2e-4, 1e-4] {
            let mut s = SimState::from_fields(phi.clone(), Field::zeros(g), 0.0).unwrap();
            let mut tr = EnergyTracker::new(&p, &s).unwrap();
            let cfg = StepperConfig::new(dt);
            let mut worst = 0.0_f64;
            while s.t < 0.02 - 1e-12 {
                let next = step(&s, &p, &cfg).unwrap();
                worst = worst.max(tr.advance(&s, &next).unwrap().abs());
                s = next;
            }
            res.push(worst);
        }
        let slope = crate::stats::loglog_slope(&[4e-4, 2e-4, 1e-4], &res).unwrap().slope;
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn gronwall_examples() {
        assert_eq!(gronwall_bound(1.5, 3.0, &[0.0; 10], 0.1).unwrap(), 3.0);
        let dt = 1e-3;
        let g: Vec<f64> = (0..40_000).map(|i| libm::exp(-(i as f64 + 0.5) * dt)).collect();
        assert!((gronwall_bound(1.0, 1.0, &g, dt).unwrap() - 3.0).abs() < 1e-6);
        assert!(gronwall_bound(-1.0, 1.0, &g, dt).is_err());
        assert!(gronwall_bound(1.0, 1.0, &[-0.1], dt).is_err());
    }

    #[test]
    fn mu_examples() {
        let g = Grid::new_1d(1.0, 19).unwrap();
        let st = BoundarySchedule::stationary(vec![0.0, 0.0]).unwrap();
        let seg = make_segregated_bumps(
            &g,
            &[Bump { center: [0.3, 0.0], radius: 0.15, amplitude: 1.0 }],
            &[Bump { center: [0.7, 0.0], radius: 0.15, amplitude: 1.0 }],
        )
        .unwrap();
        assert_eq!(mu_quantity(&seg, &st, &st, 10.0).unwrap(), 0.0);

        let mut half = Field::constant(g, 0.5);
        half.set_trace(&[0.0, 0.0]).unwrap();
        let over = InitialData::new(half.clone(), half).unwrap();
        let mu = mu_quantity(&over, &st, &st, 10.0).unwrap();
        assert!((mu - 19.0 * g.weight() / 16.0).abs() < 1e-15);

        let flat = InitialData::new(Field::constant(g, 0.5), Field::zeros(g)).unwrap();
        let dec = BoundarySchedule::decaying(vec![0.5, 0.5], vec![0.2, 0.4], 1.0).unwrap();
        let e = core::f64::consts::E;
        // P(x) = 0.2 + 0.2x, ‖P‖₂ from lumped sums; ∫|s′| = 8/e²
        let p = l2_norm(&Field::from_fn(g, |x| 0.2 + 0.2 * x[0]));
        let mu = mu_quantity(&flat, &dec, &st, 40.0).unwrap();
        assert!((mu - 8.0 / (e * e) * p).abs() < 1e-9, "{mu}");
        assert!(mu_quantity(&flat, &dec, &st, 5.0).is_err());
    }

    #[test]
    fn audit_needs_three_kappas() {
        let r = AuditInput { kappa: 1.0, max_h1: 1.0, min_energy: 0.0, max_energy: 1.0 };
        let b = BoundQuantities { mu: 0.0, product_l2sq: 0.0 };
        assert!(h_bound_audit(&[r], &b).is_err());
        let runs: Vec<AuditInput> = [1.0, 1e2, 1e4].iter().map(|&k| AuditInput { kappa: k, ..r }).collect();
        let a = h_bound_audit(&runs, &b).unwrap();
        assert_eq!(a.slope, 0.0);
        assert!(a.uniform());
        assert!(a.violations.is_empty());
    }

    #[test]
    fn audit_flags_growth_beyond_r_plus_kappa_mu() {
        let runs: Vec<AuditInput> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&k| AuditInput { kappa: k, max_h1: 1.0 + 0.1 * k, min_energy: 0.0, max_energy: 1.0 })
            .collect();
        let a = h_bound_audit(&runs, &BoundQuantities { mu: 0.01, product_l2sq: 0.01 }).unwrap();
        assert!(a.slope > 0.0);
        assert_eq!(a.violations, vec![10.0, 100.0]);
    }
}
