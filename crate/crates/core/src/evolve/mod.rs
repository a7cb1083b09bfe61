//! Invariant-region preserving time stepping of the coupled system and the
//! spectral Duhamel reference for the boundary-driven heat flows.

mod reference;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use reference::{LinearHeatReference, RateIntegral};

use crate::energy::{EnergyBreakdown, EnergyTracker};
use crate::error::invalid;
use crate::linalg::{ShiftedLaplacian, SOLVE_TOLERANCE};
use crate::mesh::{h1_norm, l2_norm, pair_h1_distance, Field, Grid};
use crate::model::{BoundaryMode, BoundarySchedule, InitialData, ReactionModel};
use crate::{Error, Result};

/// Nodal values may leave `[0, 1]` by at most this much.
pub const INVARIANT_TOLERANCE: f64 = 1e-9;
/// Largest boundary residue tolerated after homogenization.
pub const TRACE_TOLERANCE: f64 = 1e-12;
/// Consecutive below-threshold samples required to declare stabilization.
pub const STABILIZATION_WINDOW: usize = 10;

/// One point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub step_index: usize,
    pub dt_last: f64,
}

impl SimState {
    pub fn new(init: &InitialData) -> Self {
        SimState { t: 0.0, u: init.u0.clone(), v: init.v0.clone(), step_index: 0, dt_last: 0.0 }
    }

    pub fn from_fields(u: Field, v: Field, t: f64) -> Result<Self> {
        u.check_same_grid(&v)?;
        Ok(SimState { t, u, v, step_index: 0, dt_last: 0.0 })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// Lumped `∫u²v²` over interior nodes.
    pub fn overlap(&self) -> f64 {
        let (u, v) = (self.u.values(), self.v.values());
        self.grid().weight() * crate::mesh::interior_sum(self.grid(), |k| u[k] * u[k] * v[k] * v[k])
    }

    /// Largest nodal product `u·v`.
    pub fn max_product(&self) -> f64 {
        self.u.values().iter().zip(self.v.values()).map(|(a, b)| a * b).fold(0.0, f64::max)
    }

    fn check_invariant(&self, tol: f64) -> Result<()> {
        for &x in self.u.values().iter().chain(self.v.values()) {
            if !x.is_finite() {
                return Err(Error::Diverged { step: self.step_index });
            }
            if x < -tol || x > 1.0 + tol {
                return Err(Error::InvariantViolation { step: self.step_index, value: x, tolerance: tol });
            }
        }
        Ok(())
    }
}

/// Kinetics, coupling strength and Dirichlet schedules of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub f: ReactionModel,
    pub g: ReactionModel,
    pub kappa: f64,
    pub psi: BoundarySchedule,
    pub zeta: BoundarySchedule,
}

impl Problem {
    pub fn new(
        f: ReactionModel,
        g: ReactionModel,
        kappa: f64,
        psi: BoundarySchedule,
        zeta: BoundarySchedule,
    ) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(invalid(format!("kappa must be a finite nonnegative number, got {kappa}")));
        }
        if psi.len() != zeta.len() {
            return Err(Error::ShapeMismatch { expected: psi.len(), found: zeta.len() });
        }
        Ok(Problem { f, g, kappa, psi, zeta })
    }

    /// Same kinetics for both species.
    pub fn symmetric(model: ReactionModel, kappa: f64, psi: BoundarySchedule, zeta: BoundarySchedule) -> Result<Self> {
        Self::new(model, model, kappa, psi, zeta)
    }

    /// The problem with the roles of the two species exchanged.
    pub fn swapped(&self) -> Problem {
        Problem { f: self.g, g: self.f, kappa: self.kappa, psi: self.zeta.clone(), zeta: self.psi.clone() }
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Problem> {
        Self::new(self.f, self.g, kappa, self.psi.clone(), self.zeta.clone())
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.f.lipschitz_bound().max(self.g.lipschitz_bound())
    }

    pub fn is_stationary(&self) -> bool {
        self.psi.mode() == BoundaryMode::Stationary && self.zeta.mode() == BoundaryMode::Stationary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Stabilized,
    HorizonReached,
    BudgetExhausted,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Stabilized => "stabilized",
            RunStatus::HorizonReached => "horizon_reached",
            RunStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub invariant_tolerance: f64,
    pub horizon: Option<f64>,
    /// Stabilization threshold on both difference-quotient norms.
    pub threshold: Option<f64>,
    pub window: usize,
    pub sample_stride: usize,
    pub track_energy: bool,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        StepperConfig {
            dt,
            max_steps: 1_000_000,
            invariant_tolerance: INVARIANT_TOLERANCE,
            horizon: None,
            threshold: None,
            window: STABILIZATION_WINDOW,
            sample_stride: 1,
            track_energy: true,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_sample_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    /// Checks `dt > 0` and `dt·L ≤ 1` for the reaction Lipschitz bound `L`.
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        let lip = problem.lipschitz_bound();
        if self.dt * lip > 1.0 {
            return Err(invalid(format!("dt·L = {} exceeds 1; the update would not preserve [0,1]", self.dt * lip)));
        }
        if !(self.invariant_tolerance >= 0.0) {
            return Err(invalid("invariant tolerance must be nonnegative"));
        }
        if self.window == 0 || self.sample_stride == 0 {
            return Err(invalid("window and sample stride must be positive"));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(invalid(format!("horizon must be positive, got {h}")));
            }
        }
        if let Some(th) = self.threshold {
            if !(th > 0.0) {
                return Err(invalid(format!("stabilization threshold must be positive, got {th}")));
            }
        }
        Ok(())
    }
}

/// One linearly implicit step
///
/// ```text
/// (I/dt + A_h + κ diag((vⁿ)²)) uⁿ⁺¹ = uⁿ/dt + f(uⁿ)
/// (I/dt + A_h + κ diag((uⁿ)²)) vⁿ⁺¹ = vⁿ/dt + g(vⁿ)
/// ```
///
/// with boundary values taken from the schedules at `tⁿ⁺¹`.
pub fn step(s: &SimState, problem: &Problem, cfg: &StepperConfig) -> Result<SimState> {
    let dt = cfg.dt;
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let t1 = s.t + dt;
    let u = half_step(s.u.values(), s.v.values(), &problem.f, problem.kappa, &problem.psi.at(t1), s.grid(), dt)?;
    let v = half_step(s.v.values(), s.u.values(), &problem.g, problem.kappa, &problem.zeta.at(t1), s.grid(), dt)?;
    let next = SimState {
        t: t1,
        u: Field::new(*s.grid(), u).map_err(|_| Error::Diverged { step: s.step_index + 1 })?,
        v: Field::new(*s.grid(), v).map_err(|_| Error::Diverged { step: s.step_index + 1 })?,
        step_index: s.step_index + 1,
        dt_last: dt,
    };
    next.check_invariant(cfg.invariant_tolerance)?;
    Ok(next)
}

fn half_step(
    own: &[f64],
    other: &[f64],
    reaction: &ReactionModel,
    kappa: f64,
    trace: &[f64],
    grid: &Grid,
    dt: f64,
) -> Result<Vec<f64>> {
    let inv = 1.0 / dt;
    let shift: Vec<f64> = other.iter().map(|w| inv + kappa * w * w).collect();
    let rhs: Vec<f64> = own.iter().map(|&x| x * inv + reaction.f(x)).collect();
    let mut x = own.to_vec();
    for (k, &b) in grid.boundary_nodes().into_iter().zip(trace) {
        x[k] = b;
    }
    ShiftedLaplacian::new(grid, &shift)?.solve(&rhs, &mut x, SOLVE_TOLERANCE)?;
    Ok(x)
}

/// `(ũ, ṽ) = (u − U, v − V)`; the traces must cancel to [`TRACE_TOLERANCE`].
pub fn homogenize(s: &SimState, big_u: &Field, big_v: &Field) -> Result<(Field, Field)> {
    let tu = s.u.sub(big_u)?;
    let tv = s.v.sub(big_v)?;
    let gap = tu.trace().iter().chain(&tv.trace()).fold(0.0_f64, |m, x| m.max(x.abs()));
    if gap > TRACE_TOLERANCE {
        return Err(Error::TraceMismatch { max_gap: gap });
    }
    Ok((tu, tv))
}

/// Difference quotients `‖uⁿ⁺¹ − uⁿ‖₂/dt` and `‖vⁿ⁺¹ − vⁿ‖₂/dt`.
pub fn time_derivative_estimate(prev: &SimState, next: &SimState) -> Result<(f64, f64)> {
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(invalid(format!("difference quotient needs increasing times, got dt = {dt}")));
    }
    Ok((l2_norm(&next.u.sub(&prev.u)?) / dt, l2_norm(&next.v.sub(&prev.v)?) / dt))
}

/// Running `∫‖∂_t u‖² + ‖∂_t v‖²` built from successive difference quotients.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerivativeMonitor {
    pub integral: f64,
    pub last: (f64, f64),
}

impl DerivativeMonitor {
    pub fn update(&mut self, prev: &SimState, next: &SimState) -> Result<(f64, f64)> {
        let (du, dv) = time_derivative_estimate(prev, next)?;
        self.integral += (next.t - prev.t) * (du * du + dv * dv);
        self.last = (du, dv);
        Ok((du, dv))
    }
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub overlap_l2sq: f64,
    pub ku2v2: f64,
    pub du_norm: f64,
    pub dv_norm: f64,
    pub u_h1: f64,
    pub v_h1: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl SeriesRow {
    pub const HEADER: &'static str =
        "step,t,energy,overlap_l2sq,ku2v2,du_norm,dv_norm,u_h1,v_h1,u_min,u_max,v_min,v_max";

    fn sample(s: &SimState, kappa: f64, energy: f64, dq: (f64, f64)) -> Self {
        let overlap = s.overlap();
        let (u_min, u_max) = s.u.min_max();
        let (v_min, v_max) = s.v.min_max();
        SeriesRow {
            step: s.step_index,
            t: s.t,
            energy,
            overlap_l2sq: overlap,
            ku2v2: kappa * overlap,
            du_norm: dq.0,
            dv_norm: dq.1,
            u_h1: h1_norm(&s.u),
            v_h1: h1_norm(&s.v),
            u_min,
            u_max,
            v_min,
            v_max,
        }
    }
}

/// Sampled states and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<SimState>,
    pub series: Vec<SeriesRow>,
    /// Energy breakdown at each sample (empty when energy tracking is off).
    pub energies: Vec<EnergyBreakdown>,
    pub status: RunStatus,
    pub final_state: SimState,
    pub derivative_integral: f64,
    /// Largest `|r|` of the per-step dissipation residual.
    pub max_dissipation_residual: f64,
    pub kappa: f64,
}

impl Trajectory {
    pub fn is_stabilized(&self) -> bool {
        self.status == RunStatus::Stabilized
    }

    /// Largest `‖(u, v)‖_ℍ` over the samples.
    pub fn max_h1(&self) -> f64 {
        self.series.iter().map(|r| libm::sqrt(r.u_h1 * r.u_h1 + r.v_h1 * r.v_h1)).fold(0.0, f64::max)
    }

    /// Extreme sampled values of the energy.
    pub fn energy_range(&self) -> (f64, f64) {
        self.series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.energy), hi.max(r.energy)))
    }
}

/// Steps until the horizon, stabilization, or the step budget, whichever
/// comes first. States and diagnostics are recorded every
/// `cfg.sample_stride` steps and at the end.
pub fn run_until(s0: &SimState, problem: &Problem, cfg: &StepperConfig) -> Result<Trajectory> {
    cfg.validate(problem)?;
    s0.check_invariant(cfg.invariant_tolerance)?;
    let gap = s0.u.trace_gap(&problem.psi.at(s0.t))?.max(s0.v.trace_gap(&problem.zeta.at(s0.t))?);
    if gap > TRACE_TOLERANCE {
        return Err(Error::TraceMismatch { max_gap: gap });
    }
    let mut tracker = if cfg.track_energy { Some(EnergyTracker::new(problem, s0)?) } else { None };
    let mut traj = Trajectory {
        samples: Vec::new(),
        series: Vec::new(),
        energies: Vec::new(),
        status: RunStatus::BudgetExhausted,
        final_state: s0.clone(),
        derivative_integral: 0.0,
        max_dissipation_residual: 0.0,
        kappa: problem.kappa,
    };
    let mut monitor = DerivativeMonitor::default();
    record(&mut traj, s0, problem.kappa, tracker.as_ref(), (0.0, 0.0))?;
    let mut state = s0.clone();
    let mut quiet = 0usize;
    let mut taken = 0usize;
    let status = loop {
        if let Some(h) = cfg.horizon {
            if state.t >= h - 1e-12 * h.max(1.0) {
                break RunStatus::HorizonReached;
            }
        }
        if taken >= cfg.max_steps {
            break RunStatus::BudgetExhausted;
        }
        let next = step(&state, problem, cfg)?;
        let dq = monitor.update(&state, &next)?;
        if let Some(tr) = tracker.as_mut() {
            let r = tr.advance(&state, &next)?;
            traj.max_dissipation_residual = traj.max_dissipation_residual.max(r.abs());
        }
        state = next;
        taken += 1;
        if taken.is_multiple_of(cfg.sample_stride) {
            record(&mut traj, &state, problem.kappa, tracker.as_ref(), dq)?;
            if let Some(th) = cfg.threshold {
                quiet = if dq.0 < th && dq.1 < th { quiet + 1 } else { 0 };
                if quiet >= cfg.window {
                    break RunStatus::Stabilized;
                }
            }
        }
    };
    if traj.samples.last().map(|s| s.step_index) != Some(state.step_index) {
        record(&mut traj, &state, problem.kappa, tracker.as_ref(), monitor.last)?;
    }
    traj.status = status;
    traj.derivative_integral = monitor.integral;
    traj.final_state = state;
    Ok(traj)
}

fn record(
    traj: &mut Trajectory,
    s: &SimState,
    kappa: f64,
    tracker: Option<&EnergyTracker>,
    dq: (f64, f64),
) -> Result<()> {
    let energy = match tracker {
        Some(tr) => {
            let b = tr.breakdown(s)?;
            let total = b.total();
            traj.energies.push(b);
            total
        }
        None => f64::NAN,
    };
    traj.series.push(SeriesRow::sample(s, kappa, energy, dq));
    traj.samples.push(s.clone());
    Ok(())
}

/// Sampled face of `sup_{τ∈[0,τ₀]} ‖(u,v)(t+τ) − (u,v)(t)‖_ℍ`: for each sample,
/// the largest distance to the following samples within `tau0`, looking at no
/// more than 10 of them. Returns `(t, sup)` pairs.
pub fn h1_oscillation(samples: &[SimState], tau0: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(samples.len());
    for (i, a) in samples.iter().enumerate() {
        let mut sup = 0.0_f64;
        for b in samples[i + 1..].iter().take(10) {
            if b.t - a.t > tau0 {
                break;
            }
            sup = sup.max(pair_h1_distance(&b.u, &b.v, &a.u, &a.v)?);
        }
        out.push((a.t, sup));
    }
    Ok(out)
}

/// Zero pair on `grid` with homogeneous stationary boundary data.
pub fn zero_problem_state(grid: &Grid, model: ReactionModel, kappa: f64) -> Result<(SimState, Problem)> {
    let nb = grid.boundary_nodes().len();
    let sched = BoundarySchedule::stationary(vec![0.0; nb])?;
    let problem = Problem::symmetric(model, kappa, sched.clone(), sched)?;
    let state = SimState::from_fields(Field::zeros(*grid), Field::zeros(*grid), 0.0)?;
    Ok((state, problem))
}
