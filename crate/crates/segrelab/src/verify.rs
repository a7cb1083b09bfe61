//! Small-scale self-checks of the discrete invariants, one suite per property.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrelab_core::energy::gronwall_bound;
use segrelab_core::evolve::{run_until, step, Problem, SimState, StepperConfig};
use segrelab_core::heatkernel::{certify_decay, log_spaced};
use segrelab_core::mesh::{eigensystem, inner, laplacian_apply, linf_norm, Field, Grid};
use segrelab_core::model::{make_segregated_bumps, BoundarySchedule, Bump, InitialData, ReactionModel};
use segrelab_core::steady::{morrey_check, solve_stationary, variational_inequality_residual, NewtonOptions};
use serde::Serialize;

use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Mesh,
    Invariant,
    Dissipation,
    Gronwall,
    Heatkernel,
    Vi,
    Morrey,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Mesh,
        Suite::Invariant,
        Suite::Dissipation,
        Suite::Gronwall,
        Suite::Heatkernel,
        Suite::Vi,
        Suite::Morrey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Mesh => "mesh",
            Suite::Invariant => "invariant",
            Suite::Dissipation => "dissipation",
            Suite::Gronwall => "gronwall",
            Suite::Heatkernel => "heatkernel",
            Suite::Vi => "vi",
            Suite::Morrey => "morrey",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| LabError::Precondition(format!("unknown suite `{s}`")))
    }
}

/// Deliberate defects for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the discrete Laplacian inside the mesh suite.
    StencilSign,
}

impl FromStr for Fault {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stencil-sign" => Ok(Fault::StencilSign),
            _ => Err(LabError::Precondition(format!("unknown fault `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub invariant: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn at_most(invariant: &str, value: f64, limit: f64) -> Self {
        Check { invariant: invariant.into(), passed: value <= limit, value, limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn run_suite(suite: Suite, fault: Option<Fault>) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Mesh => mesh(fault)?,
        Suite::Invariant => invariant()?,
        Suite::Dissipation => dissipation()?,
        Suite::Gronwall => gronwall()?,
        Suite::Heatkernel => heatkernel()?,
        Suite::Vi => vi()?,
        Suite::Morrey => morrey()?,
    };
    Ok(SuiteReport { suite: suite.name().into(), passed: checks.iter().all(|c| c.passed), checks })
}

pub fn run_suites(suites: &[Suite], fault: Option<Fault>) -> Result<Vec<SuiteReport>> {
    suites.iter().map(|&s| run_suite(s, fault)).collect()
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, zero_trace: bool) -> Field {
    let values = (0..grid.node_count()).map(|_| rng.random::<f64>()).collect();
    let mut f = Field::new(grid, values).expect("node count");
    if zero_trace {
        f.set_trace(&vec![0.0; grid.boundary_nodes().len()]).expect("trace length");
    }
    f
}

fn mesh(fault: Option<Fault>) -> Result<Vec<Check>> {
    let lap = |f: &Field| -> Result<Field> {
        let l = laplacian_apply(f)?;
        Ok(if fault == Some(Fault::StencilSign) { l.scaled(-1.0) } else { l })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut eigen_err = 0.0_f64;
    let mut definite = f64::NEG_INFINITY;
    let mut symmetry = 0.0_f64;
    for grid in [Grid::new_1d(1.0, 31)?, Grid::new_2d([1.0, 2.0], [15, 23])?] {
        let e = eigensystem(&grid);
        for rank in 0..3 {
            let slot = e.slot_of_rank(rank);
            let phi = e.mode(slot);
            let r = lap(&phi)?.combine(1.0, &phi, -e.eigenvalue_at(slot))?;
            eigen_err = eigen_err.max(linf_norm(&r) / e.eigenvalue_at(slot));
        }
        for _ in 0..20 {
            let a = random_field(grid, &mut rng, true);
            let b = random_field(grid, &mut rng, true);
            // ⟨−Δa, a⟩ / ‖a‖² must be ≥ λ₁.
            let q = e.smallest() - inner(&lap(&a)?, &a)? / inner(&a, &a)?;
            definite = definite.max(q / e.smallest());
            let s = inner(&lap(&a)?, &b)? - inner(&a, &lap(&b)?)?;
            symmetry = symmetry.max(s.abs());
        }
    }
    Ok(vec![
        Check::at_most("laplacian_eigen_identity", eigen_err, 1e-10),
        Check::at_most("laplacian_positive_definite", definite, 1e-10),
        Check::at_most("laplacian_symmetric", symmetry, 1e-9),
    ])
}

fn end_bumps(n: usize) -> Result<InitialData> {
    let grid = Grid::new_1d(6.0, n)?;
    Ok(make_segregated_bumps(
        &grid,
        &[Bump { center: [0.0, 0.0], radius: 2.4, amplitude: 0.2 }],
        &[Bump { center: [6.0, 0.0], radius: 2.4, amplitude: 0.2 }],
    )?)
}

fn stationary_problem(init: &InitialData, model: ReactionModel, kappa: f64) -> Result<Problem> {
    Ok(Problem::symmetric(
        model,
        kappa,
        BoundarySchedule::stationary(init.u0.trace())?,
        BoundarySchedule::stationary(init.v0.trace())?,
    )?)
}

fn invariant() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut excess = 0.0_f64;
    for grid in [Grid::new_1d(1.0, 63)?, Grid::new_2d([1.0, 1.0], [15, 15])?] {
        let init = InitialData::new(random_field(grid, &mut rng, false), random_field(grid, &mut rng, false))?;
        for kappa in [0.0, 1.0, 1e2, 1e4] {
            let problem = stationary_problem(&init, ReactionModel::logistic(), kappa)?;
            let cfg = StepperConfig::new(0.01);
            let mut s = SimState::new(&init);
            for _ in 0..100 {
                s = step(&s, &problem, &cfg)?;
                for f in [&s.u, &s.v] {
                    let (lo, hi) = f.min_max();
                    excess = excess.max(-lo).max(hi - 1.0);
                }
            }
        }
    }
    Ok(vec![Check::at_most("invariant_box", excess, 1e-9)])
}

fn dissipation() -> Result<Vec<Check>> {
    let init = end_bumps(63)?;
    let problem = stationary_problem(&init, ReactionModel::logistic(), 100.0)?;
    let dt = 0.01;
    let traj = run_until(&SimState::new(&init), &problem, &StepperConfig::new(dt).with_horizon(5.0))?;
    let e: Vec<f64> = traj.energies.iter().map(|b| b.total()).collect();
    let tol = 10.0 * dt * dt * e[0].abs().max(1.0);
    let rise = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![Check::at_most("energy_nonincreasing", rise, tol)])
}

fn gronwall() -> Result<Vec<Check>> {
    // Υ = (√c₁ + c₂G/2)² solves the equality case; the bound must dominate it.
    let mut worst = f64::NEG_INFINITY;
    let dt = 1e-3;
    for (c1, c2, a) in [(0.1, 0.5, 1.0), (1.0, 1.0, 0.3), (4.0, 2.5, 2.0), (0.01, 3.0, 0.1)] {
        let g: Vec<f64> = (0..20_000).map(|i| a * (-(i as f64) * dt).exp()).collect();
        let mass: f64 = g.iter().sum::<f64>() * dt;
        let exact = (f64::sqrt(c1) + 0.5 * c2 * mass).powi(2);
        worst = worst.max(exact - gronwall_bound(c1, c2, &g, dt)?);
    }
    Ok(vec![Check::at_most("gronwall_dominates_equality_case", worst, 0.0)])
}

fn heatkernel() -> Result<Vec<Check>> {
    let e = eigensystem(&Grid::new_1d(1.0, 255)?);
    let omega = 0.5 * e.smallest();
    let ts = log_spaced(1e-6, 50.0 / e.smallest(), 200);
    let mut worst = f64::NEG_INFINITY;
    for alpha in [0.3, 0.5, 0.9] {
        worst = worst.max(certify_decay(&e, alpha, omega, &ts)?.max_violation);
    }
    Ok(vec![Check::at_most("decay_certificate", worst, 0.0)])
}

fn vi() -> Result<Vec<Check>> {
    let init = end_bumps(63)?;
    let model = ReactionModel::smooth_logistic();
    let problem = stationary_problem(&init, model, 1e4)?;
    let pair = solve_stationary(&problem, &init.u0, &init.v0, &NewtonOptions::default())?;
    let vi =
        variational_inequality_residual(&pair.u_hat, &model).max(variational_inequality_residual(&pair.v_hat, &model));
    Ok(vec![
        Check::at_most("stationary_residual", pair.residual(), 1e-8),
        Check::at_most("variational_inequality", vi, 1e-6),
    ])
}

fn morrey() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::new_1d(2.0, 127)?;
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        worst = worst.max(morrey_check(&random_field(grid, &mut rng, false))?);
    }
    let init = end_bumps(63)?;
    worst = worst.max(morrey_check(&init.u0)?).max(morrey_check(&init.v0)?);
    Ok(vec![Check::at_most("morrey_ratio", worst, 1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_suite_passes_and_catches_the_flipped_stencil() {
        let good = run_suite(Suite::Mesh, None).unwrap();
        assert!(good.passed, "{good:?}");
        let bad = run_suite(Suite::Mesh, Some(Fault::StencilSign)).unwrap();
        assert!(!bad.passed);
        assert!(bad.failures().any(|c| c.invariant == "laplacian_positive_definite"));
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
        assert_eq!("stencil-sign".parse::<Fault>().unwrap(), Fault::StencilSign);
    }
}
