//! Stationary solves of the coupled elliptic system, stabilization checks,
//! and certificates for the segregated limit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::evolve::{step, Problem, SimState, StepperConfig, Trajectory};
use crate::linalg::BandMatrix;
use crate::mesh::{h1_seminorm, lp_norm, neg_laplacian, pair_h1_distance, pair_l2_distance, Field, Grid};
use crate::model::ReactionModel;
use crate::{Error, Result};

/// Default l∞ tolerance on the discrete stationary residual.
pub const STEADY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Newton,
    PseudoTime,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Newton => "newton",
            SolveMethod::PseudoTime => "pseudo_time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Step of the pseudo-time fallback (clipped to the `dt·L ≤ 1` bound).
    pub pseudo_dt: f64,
    pub pseudo_max_steps: usize,
    /// Pseudo-time residual below which a Newton polish is attempted.
    pub polish_threshold: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: STEADY_TOLERANCE,
            max_iterations: 50,
            max_halvings: 20,
            pseudo_dt: 0.05,
            pseudo_max_steps: 400_000,
            polish_threshold: 1e-4,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        NewtonOptions { tol, ..Default::default() }
    }
}

/// A discrete stationary pair with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPair {
    pub u_hat: Field,
    pub v_hat: Field,
    pub residual_u: f64,
    pub residual_v: f64,
    pub method: SolveMethod,
    /// Newton iterations, plus pseudo-time steps when the fallback ran.
    pub iterations: usize,
    /// l∞ residual before each Newton update and at return.
    pub residual_history: Vec<f64>,
}

impl StationaryPair {
    pub fn residual(&self) -> f64 {
        self.residual_u.max(self.residual_v)
    }
}

/// `A_h u − f(u) + κuv²` and `A_h v − g(v) + κvu²` at interior nodes (zero on
/// the boundary).
pub fn stationary_residual(problem: &Problem, u: &Field, v: &Field) -> Result<(Field, Field)> {
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let ru = species_residual(&grid, u.values(), v.values(), &problem.f, problem.kappa);
    let rv = species_residual(&grid, v.values(), u.values(), &problem.g, problem.kappa);
    Ok((Field::new(grid, ru)?, Field::new(grid, rv)?))
}

fn species_residual(grid: &Grid, own: &[f64], other: &[f64], f: &ReactionModel, kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; own.len()];
    neg_laplacian(grid, own, &mut out);
    for k in grid.interior_nodes() {
        out[k] += -f.f(own[k]) + kappa * own[k] * other[k] * other[k];
    }
    out
}

/// Analytic Jacobian of the interleaved residual `(R_u, R_v)` over interior
/// unknowns `(u₀, v₀, u₁, v₁, …)` in packed order.
pub fn stationary_jacobian(problem: &Problem, u: &Field, v: &Field) -> Result<BandMatrix> {
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let n = grid.interior_count();
    let stride = if grid.dim() == 1 { 1 } else { grid.count(1) };
    let band = 2 * stride;
    let mut jac = BandMatrix::zeros(2 * n, band, band);
    let (uv, vv) = (u.values(), v.values());
    let k = problem.kappa;
    let nodes = grid.interior_nodes();
    let mut inv_h2 = [0.0; 2];
    for (a, slot) in inv_h2.iter_mut().enumerate().take(grid.dim()) {
        *slot = 1.0 / (grid.spacing(a) * grid.spacing(a));
    }
    for (p, &node) in nodes.iter().enumerate() {
        let (i, j) = grid.position(node);
        let (x, y) = (uv[node], vv[node]);
        let diag_lap = 2.0 * (inv_h2[0] + inv_h2[1]);
        jac.add(2 * p, 2 * p, diag_lap + k * y * y - problem.f.derivative(x));
        jac.add(2 * p, 2 * p + 1, 2.0 * k * x * y);
        jac.add(2 * p + 1, 2 * p + 1, diag_lap + k * x * x - problem.g.derivative(y));
        jac.add(2 * p + 1, 2 * p, 2.0 * k * x * y);
        let mut couple = |q: usize, c: f64| {
            jac.add(2 * p, 2 * q, -c);
            jac.add(2 * p + 1, 2 * q + 1, -c);
        };
        if i > 1 {
            couple(p - stride, inv_h2[0]);
        }
        if i < grid.count(0) {
            couple(p + stride, inv_h2[0]);
        }
        if grid.dim() == 2 {
            if j > 1 {
                couple(p - 1, inv_h2[1]);
            }
            if j < grid.count(1) {
                couple(p + 1, inv_h2[1]);
            }
        }
    }
    Ok(jac)
}

fn residual_norms(problem: &Problem, u: &Field, v: &Field) -> Result<(f64, f64, f64)> {
    let (ru, rv) = stationary_residual(problem, u, v)?;
    let inf = |f: &Field| f.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let l2 = libm::sqrt(ru.values().iter().chain(rv.values()).map(|x| x * x).sum());
    Ok((inf(&ru), inf(&rv), l2))
}

enum NewtonOutcome {
    Converged(Field, Field, usize),
    Stalled(usize),
}

fn newton(
    problem: &Problem,
    mut u: Field,
    mut v: Field,
    opts: &NewtonOptions,
    history: &mut Vec<f64>,
) -> Result<NewtonOutcome> {
    let grid = *u.grid();
    let nodes = grid.interior_nodes();
    for it in 0..=opts.max_iterations {
        let (ru_inf, rv_inf, l2) = residual_norms(problem, &u, &v)?;
        history.push(ru_inf.max(rv_inf));
        if ru_inf.max(rv_inf) <= opts.tol {
            return Ok(NewtonOutcome::Converged(u, v, it));
        }
        if it == opts.max_iterations {
            break;
        }
        let (ru, rv) = stationary_residual(problem, &u, &v)?;
        let mut rhs = vec![0.0; 2 * nodes.len()];
        for (p, &k) in nodes.iter().enumerate() {
            rhs[2 * p] = ru.values()[k];
            rhs[2 * p + 1] = rv.values()[k];
        }
        let lu = match stationary_jacobian(problem, &u, &v)?.factor() {
            Ok(lu) => lu,
            Err(_) => return Ok(NewtonOutcome::Stalled(it)),
        };
        let delta = lu.solve(&rhs);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut cu = u.clone();
            let mut cv = v.clone();
            for (p, &k) in nodes.iter().enumerate() {
                cu.values_mut()[k] -= alpha * delta[2 * p];
                cv.values_mut()[k] -= alpha * delta[2 * p + 1];
            }
            if cu.is_finite() && cv.is_finite() {
                let (_, _, trial) = residual_norms(problem, &cu, &cv)?;
                if trial < l2 {
                    accepted = Some((cu, cv));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cu, cv)) => {
                u = cu;
                v = cv;
            }
            None => return Ok(NewtonOutcome::Stalled(it)),
        }
    }
    Ok(NewtonOutcome::Stalled(opts.max_iterations))
}

/// Damped Newton for the stationary system with traces `ψ∞`, `ζ∞` from the
/// problem's schedules. On stagnation the parabolic flow is integrated from
/// the guess until the residual is small, then Newton polishes the result.
pub fn solve_stationary(
    problem: &Problem,
    guess_u: &Field,
    guess_v: &Field,
    opts: &NewtonOptions,
) -> Result<StationaryPair> {
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("stationary tolerance must be positive, got {}", opts.tol)));
    }
    guess_u.check_same_grid(guess_v)?;
    let mut u = guess_u.clone();
    let mut v = guess_v.clone();
    u.set_trace(problem.psi.terminal())?;
    v.set_trace(problem.zeta.terminal())?;
    let mut history = Vec::new();
    let newton_iters = match newton(problem, u.clone(), v.clone(), opts, &mut history)? {
        NewtonOutcome::Converged(u, v, it) => return finish(problem, u, v, SolveMethod::Newton, it, history),
        NewtonOutcome::Stalled(it) => it,
    };

    // pseudo-time from the guess, clipped into [0,1]
    let frozen = Problem::new(
        problem.f,
        problem.g,
        problem.kappa,
        crate::model::BoundarySchedule::stationary(problem.psi.terminal().to_vec())?,
        crate::model::BoundarySchedule::stationary(problem.zeta.terminal().to_vec())?,
    )?;
    let lip = frozen.lipschitz_bound();
    let dt = if lip > 0.0 { opts.pseudo_dt.min(1.0 / lip) } else { opts.pseudo_dt };
    let cfg = StepperConfig::new(dt);
    let clip = |f: &Field| f.map(|x| x.clamp(0.0, 1.0));
    let mut s = SimState::from_fields(clip(&u), clip(&v), 0.0)?;
    let mut steps = 0usize;
    let mut best = f64::INFINITY;
    while steps < opts.pseudo_max_steps {
        for _ in 0..100 {
            s = step(&s, &frozen, &cfg)?;
        }
        steps += 100;
        let (a, b, _) = residual_norms(problem, &s.u, &s.v)?;
        let r = a.max(b);
        if r <= opts.tol {
            return finish(problem, s.u, s.v, SolveMethod::PseudoTime, newton_iters + steps, history);
        }
        if r <= opts.polish_threshold && r < 0.5 * best {
            best = r;
            let mut polish_history = Vec::new();
            if let NewtonOutcome::Converged(pu, pv, it) =
                newton(problem, s.u.clone(), s.v.clone(), opts, &mut polish_history)?
            {
                history.extend(polish_history);
                return finish(problem, pu, pv, SolveMethod::PseudoTime, newton_iters + steps + it, history);
            }
        }
    }
    let (a, b, _) = residual_norms(problem, &s.u, &s.v)?;
    Err(Error::NotConverged { residual: a.max(b), iterations: newton_iters + steps })
}

fn finish(
    problem: &Problem,
    u: Field,
    v: Field,
    method: SolveMethod,
    iterations: usize,
    mut history: Vec<f64>,
) -> Result<StationaryPair> {
    let (residual_u, residual_v, _) = residual_norms(problem, &u, &v)?;
    if history.last() != Some(&residual_u.max(residual_v)) {
        history.push(residual_u.max(residual_v));
    }
    Ok(StationaryPair { u_hat: u, v_hat: v, residual_u, residual_v, method, iterations, residual_history: history })
}

/// Distances between a stabilized trajectory's final state and a stationary pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationReport {
    pub h1_distance: f64,
    pub l2_distance: f64,
    pub l4_distance: f64,
    pub linf_distance: f64,
    pub success: bool,
}

pub fn stabilization_detect(traj: &Trajectory, pair: &StationaryPair, tol: f64) -> Result<StabilizationReport> {
    if !traj.is_stabilized() {
        return Err(Error::NotStabilized);
    }
    let s = &traj.final_state;
    let du = s.u.sub(&pair.u_hat)?;
    let dv = s.v.sub(&pair.v_hat)?;
    let l4 = {
        let a = lp_norm(&du, 4.0)?;
        let b = lp_norm(&dv, 4.0)?;
        libm::pow(libm::pow(a, 4.0) + libm::pow(b, 4.0), 0.25)
    };
    let h1_distance = pair_h1_distance(&s.u, &s.v, &pair.u_hat, &pair.v_hat)?;
    Ok(StabilizationReport {
        h1_distance,
        l2_distance: pair_l2_distance(&s.u, &s.v, &pair.u_hat, &pair.v_hat)?,
        l4_distance: l4,
        linf_distance: lp_norm(&du, f64::INFINITY)?.max(lp_norm(&dv, f64::INFINITY)?),
        success: h1_distance <= tol,
    })
}

/// `max (−Δ_h u − f(u))₊` over interior nodes.
pub fn variational_inequality_residual(u: &Field, model: &ReactionModel) -> f64 {
    let grid = u.grid();
    let mut lap = vec![0.0; grid.node_count()];
    neg_laplacian(grid, u.values(), &mut lap);
    grid.interior_nodes().into_iter().map(|k| (lap[k] - model.f(u.values()[k])).max(0.0)).fold(0.0, f64::max)
}

/// `max_{x≠y} |u(x) − u(y)| / (4‖∇_h u‖₂ √|x−y|)` over all node pairs of a 1D field.
pub fn morrey_check(u: &Field) -> Result<f64> {
    let grid = u.grid();
    if grid.dim() != 1 {
        return Err(invalid("the Morrey check applies to 1D fields only"));
    }
    let grad = h1_seminorm(u);
    if grad == 0.0 {
        return Ok(0.0);
    }
    let x = u.values();
    let h = grid.spacing(0);
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let r = (x[i] - x[j]).abs() / libm::sqrt((j - i) as f64 * h);
            worst = worst.max(r);
        }
    }
    Ok(worst / (4.0 * grad))
}

/// Limit-object diagnostics of one stationary pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCertificate {
    pub vi_violation_u: f64,
    pub vi_violation_v: f64,
    pub overlap: f64,
    pub kappa_overlap: f64,
    /// Largest Morrey ratio of the two components (1D only).
    pub holder_ratio: Option<f64>,
}

pub fn certify_limit(problem: &Problem, pair: &StationaryPair) -> Result<LimitCertificate> {
    let s = SimState::from_fields(pair.u_hat.clone(), pair.v_hat.clone(), 0.0)?;
    let overlap = s.overlap();
    let holder_ratio = if pair.u_hat.grid().dim() == 1 {
        Some(morrey_check(&pair.u_hat)?.max(morrey_check(&pair.v_hat)?))
    } else {
        None
    };
    Ok(LimitCertificate {
        vi_violation_u: variational_inequality_residual(&pair.u_hat, &problem.f),
        vi_violation_v: variational_inequality_residual(&pair.v_hat, &problem.g),
        overlap,
        kappa_overlap: problem.kappa * overlap,
        holder_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{run_until, zero_problem_state};
    use crate::mesh::{eigensystem, harmonic_extension, l2_norm};
    use crate::model::BoundarySchedule;

    #[test]
    fn linear_problem_is_one_newton_step() {
        let g = Grid::new_1d(2.0, 17).unwrap();
        let psi = BoundarySchedule::stationary(vec![0.1, 0.8]).unwrap();
        let zeta = BoundarySchedule::stationary(vec![0.5, 0.5]).unwrap();
        let p = Problem::symmetric(ReactionModel::zero(), 0.0, psi, zeta).unwrap();
        let z = Field::constant(g, 0.3);
        let pair = solve_stationary(&p, &z, &z, &NewtonOptions::default()).unwrap();
        assert_eq!(pair.method, SolveMethod::Newton);
        assert_eq!(pair.iterations, 1);
        let exact = harmonic_extension(&[0.1, 0.8], &g).unwrap();
        assert!(pair.u_hat.sub(&exact).unwrap().values().iter().all(|x| x.abs() < 1e-12));
        assert_eq!(pair.u_hat.trace(), vec![0.1, 0.8]);
    }

    #[test]
    fn logistic_extinction_on_the_unit_interval() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let (_, p) = zero_problem_state(&g, ReactionModel::logistic(), 0.0).unwrap();
        let e = eigensystem(&g);
        let guess = e.mode(e.slot_of_rank(0)).scaled(0.05);
        let pair = solve_stationary(&p, &guess, &guess, &NewtonOptions::default()).unwrap();
        assert!(l2_norm(&pair.u_hat) < 1e-9);
        assert!(pair.residual() <= STEADY_TOLERANCE);
    }

    #[test]
    fn detector_requires_stabilization() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let (s, p) = zero_problem_state(&g, ReactionModel::logistic(), 1.0).unwrap();
        let pair = solve_stationary(&p, &s.u, &s.v, &NewtonOptions::default()).unwrap();
        let short = run_until(&s, &p, &StepperConfig::new(0.01).with_max_steps(3)).unwrap();
        assert_eq!(stabilization_detect(&short, &pair, 1e-6), Err(Error::NotStabilized));
        let full = run_until(&s, &p, &StepperConfig::new(0.01).with_threshold(1e-8)).unwrap();
        let rep = stabilization_detect(&full, &pair, 1e-6).unwrap();
        assert!(rep.success);
        assert_eq!(rep.h1_distance, 0.0);
    }

    #[test]
    fn vi_detector_examples() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let m = ReactionModel::logistic();
        assert_eq!(variational_inequality_residual(&Field::zeros(g), &m), 0.0);
        let e = eigensystem(&g);
        let phi = e.mode(e.slot_of_rank(0));
        let scale = 0.5 / phi.min_max().1;
        // λ₁·u ≈ 9.87u exceeds u(1−u) wherever u > 0
        assert!(variational_inequality_residual(&phi.scaled(scale), &m) > 1.0);
    }

    #[test]
    fn morrey_examples() {
        let g = Grid::new_1d(1.0, 63).unwrap();
        assert_eq!(morrey_check(&Field::constant(g, 0.4)).unwrap(), 0.0);
        let lin = Field::from_fn(g, |x| x[0]);
        assert!((morrey_check(&lin).unwrap() - 0.25).abs() < 1e-12);
        let g2 = Grid::new_2d([1.0, 1.0], [3, 3]).unwrap();
        assert!(morrey_check(&Field::zeros(g2)).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid::new_2d([1.0, 1.5], [4, 3]).unwrap();
        let nb = g.boundary_nodes().len();
        let psi = BoundarySchedule::stationary(vec![0.2; nb]).unwrap();
        let zeta = BoundarySchedule::stationary(vec![0.6; nb]).unwrap();
        let p = Problem::new(ReactionModel::logistic(), ReactionModel::smooth_logistic(), 30.0, psi, zeta).unwrap();
        let mut u = Field::from_fn(g, |x| 0.3 + 0.2 * libm::sin(3.0 * x[0] + x[1]));
        let mut v = Field::from_fn(g, |x| 0.5 + 0.3 * libm::cos(2.0 * x[0] - x[1]));
        u.set_trace(&vec![0.2; nb]).unwrap();
        v.set_trace(&vec![0.6; nb]).unwrap();
        let jac = stationary_jacobian(&p, &u, &v).unwrap();
        let nodes = g.interior_nodes();
        let eps = 1e-6;
        for (q, &k) in nodes.iter().enumerate() {
            for comp in 0..2 {
                let (mut up, mut vp, mut um, mut vm) = (u.clone(), v.clone(), u.clone(), v.clone());
                if comp == 0 {
                    up.values_mut()[k] += eps;
                    um.values_mut()[k] -= eps;
                } else {
                    vp.values_mut()[k] += eps;
                    vm.values_mut()[k] -= eps;
                }
                let (rup, rvp) = stationary_residual(&p, &up, &vp).unwrap();
                let (rum, rvm) = stationary_residual(&p, &um, &vm).unwrap();
                for (r, &kk) in nodes.iter().enumerate() {
                    let fd_u = (rup.values()[kk] - rum.values()[kk]) / (2.0 * eps);
                    let fd_v = (rvp.values()[kk] - rvm.values()[kk]) / (2.0 * eps);
                    let col = 2 * q + comp;
                    for (row, fd) in [(2 * r, fd_u), (2 * r + 1, fd_v)] {
                        let an = jac.get(row, col);
                        assert!((an - fd).abs() <= 1e-6 * an.abs().max(1.0), "({row},{col}): {an} vs {fd}");
                    }
                }
            }
        }
    }
}
