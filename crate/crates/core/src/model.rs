//! Kinetics `f`, `g`, time-dependent Dirichlet schedules, and initial data.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::invalid;
use crate::mesh::{Field, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionKind {
    /// `s(1−s)` for `s ≥ 0`.
    Logistic,
    /// `s²(1−s)` for `s ≥ 0`, C¹ at the origin.
    SmoothLogistic,
    Zero,
}

impl FromStr for ReactionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ReactionKind::Logistic),
            "smooth_logistic" => Ok(ReactionKind::SmoothLogistic),
            "zero" => Ok(ReactionKind::Zero),
            other => Err(invalid(format!("unknown reaction kind `{other}`"))),
        }
    }
}

impl fmt::Display for ReactionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReactionKind::Logistic => "logistic",
            ReactionKind::SmoothLogistic => "smooth_logistic",
            ReactionKind::Zero => "zero",
        })
    }
}

/// A growth law vanishing on `s ≤ 0` and negative above 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReactionModel {
    pub kind: ReactionKind,
}

impl ReactionModel {
    pub fn new(kind: ReactionKind) -> Self {
        ReactionModel { kind }
    }

    pub fn logistic() -> Self {
        Self::new(ReactionKind::Logistic)
    }

    pub fn smooth_logistic() -> Self {
        Self::new(ReactionKind::SmoothLogistic)
    }

    pub fn zero() -> Self {
        Self::new(ReactionKind::Zero)
    }

    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ReactionKind::Logistic => s * (1.0 - s),
            ReactionKind::SmoothLogistic => s * s * (1.0 - s),
            ReactionKind::Zero => 0.0,
        }
    }

    /// `f′(s)`; the right derivative at 0.
    pub fn derivative(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self.kind {
            ReactionKind::Logistic => 1.0 - 2.0 * s,
            ReactionKind::SmoothLogistic => s * (2.0 - 3.0 * s),
            ReactionKind::Zero => 0.0,
        }
    }

    /// `F(s) = ∫₀ˢ f`, zero for `s < 0`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ReactionKind::Logistic => s * s * (0.5 - s / 3.0),
            ReactionKind::SmoothLogistic => s * s * s * (1.0 / 3.0 - 0.25 * s),
            ReactionKind::Zero => 0.0,
        }
    }

    /// `sup_{[0,1]} |f′|`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.kind {
            ReactionKind::Logistic | ReactionKind::SmoothLogistic => 1.0,
            ReactionKind::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Stationary,
    Decaying,
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(BoundaryMode::Stationary),
            "decaying" => Ok(BoundaryMode::Decaying),
            other => Err(invalid(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// Dirichlet data `ψ(x,t) = ψ∞(x) + ρ(x)·t²e^{−γt}` on the boundary nodes.
///
/// The transient profile vanishes to second order at `t = 0`, so `ψ_t(·,0) = 0`,
/// and `ψ_t`, `ψ_tt` are integrable on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySchedule {
    terminal: Vec<f64>,
    shape: Vec<f64>,
    gamma: f64,
    mode: BoundaryMode,
}

impl BoundarySchedule {
    pub fn stationary(terminal: Vec<f64>) -> Result<Self> {
        let n = terminal.len();
        Self::build(terminal, alloc::vec![0.0; n], 1.0, BoundaryMode::Stationary)
    }

    pub fn decaying(terminal: Vec<f64>, shape: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::build(terminal, shape, gamma, BoundaryMode::Decaying)
    }

    fn build(terminal: Vec<f64>, shape: Vec<f64>, gamma: f64, mode: BoundaryMode) -> Result<Self> {
        if terminal.len() != shape.len() {
            return Err(Error::ShapeMismatch { expected: terminal.len(), found: shape.len() });
        }
        if terminal.iter().chain(&shape).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "boundary schedule" });
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!("boundary decay rate must be positive, got {gamma}")));
        }
        let sched = BoundarySchedule { terminal, shape, gamma, mode };
        // ψ is affine in the profile value s ∈ [0, s_max]; checking both ends is exact.
        let s_max = sched.profile_max();
        for (&p, &r) in sched.terminal.iter().zip(&sched.shape) {
            for s in [0.0, s_max] {
                let v = p + r * s;
                if !(-0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("boundary values must stay in [0,1]; reaches {v}")));
                }
            }
        }
        Ok(sched)
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    /// `t²e^{−γt}` (0 in stationary mode).
    pub fn profile(&self, t: f64) -> f64 {
        match self.mode {
            BoundaryMode::Stationary => 0.0,
            BoundaryMode::Decaying => t * t * libm::exp(-self.gamma * t),
        }
    }

    pub fn profile_rate(&self, t: f64) -> f64 {
        match self.mode {
            BoundaryMode::Stationary => 0.0,
            BoundaryMode::Decaying => (2.0 * t - self.gamma * t * t) * libm::exp(-self.gamma * t),
        }
    }

    pub fn profile_accel(&self, t: f64) -> f64 {
        let g = self.gamma;
        match self.mode {
            BoundaryMode::Stationary => 0.0,
            BoundaryMode::Decaying => (2.0 - 4.0 * g * t + g * g * t * t) * libm::exp(-g * t),
        }
    }

    /// Peak of the transient profile, `4/(γe)²`, attained at `t = 2/γ`.
    pub fn profile_max(&self) -> f64 {
        match self.mode {
            BoundaryMode::Stationary => 0.0,
            BoundaryMode::Decaying => {
                let ge = self.gamma * core::f64::consts::E;
                4.0 / (ge * ge)
            }
        }
    }

    /// `ψ(·, t)`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let s = self.profile(t);
        self.terminal.iter().zip(&self.shape).map(|(p, r)| p + r * s).collect()
    }

    /// `∂_t ψ(·, t)`.
    pub fn rate(&self, t: f64) -> Vec<f64> {
        let s = self.profile_rate(t);
        self.shape.iter().map(|r| r * s).collect()
    }

    /// `∂_tt ψ(·, t)`.
    pub fn accel(&self, t: f64) -> Vec<f64> {
        let s = self.profile_accel(t);
        self.shape.iter().map(|r| r * s).collect()
    }
}

/// Evaluates [`BoundarySchedule::at`] (free-function form).
pub fn boundary_at(sched: &BoundarySchedule, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(invalid(format!("boundary time must be nonnegative, got {t}")));
    }
    Ok(sched.at(t))
}

/// Initial pair with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Field,
    pub v0: Field,
    /// `u0·v0 = 0` at every node.
    pub segregated: bool,
}

impl InitialData {
    pub fn new(u0: Field, v0: Field) -> Result<Self> {
        u0.check_same_grid(&v0)?;
        for (name, f) in [("u0", &u0), ("v0", &v0)] {
            let (lo, hi) = f.min_max();
            if lo < 0.0 || hi > 1.0 {
                return Err(invalid(format!("{name} must lie in [0,1]; range is [{lo}, {hi}]")));
            }
        }
        let segregated = u0.values().iter().zip(v0.values()).all(|(a, b)| a * b == 0.0);
        Ok(InitialData { u0, v0, segregated })
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    /// Checks `u0|∂Ω = ψ(·,0)` and `v0|∂Ω = ζ(·,0)`.
    pub fn check_traces(&self, psi: &BoundarySchedule, zeta: &BoundarySchedule) -> Result<()> {
        let gap = self.u0.trace_gap(&psi.at(0.0))?.max(self.v0.trace_gap(&zeta.at(0.0))?);
        if gap > 1e-12 {
            return Err(Error::TraceMismatch { max_gap: gap });
        }
        Ok(())
    }
}

/// Smooth bump `amplitude·exp(1 − 1/(1−r²))`, `r = |x−center|/radius`,
/// supported in the open ball of the given radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, x: [f64; 2], dim: usize) -> f64 {
        let mut r2 = 0.0;
        for a in 0..dim {
            let d = (x[a] - self.center[a]) / self.radius;
            r2 += d * d;
        }
        if r2 >= 1.0 {
            0.0
        } else {
            self.amplitude * libm::exp(1.0 - 1.0 / (1.0 - r2))
        }
    }

    fn distance(&self, other: &Bump, dim: usize) -> f64 {
        let mut d2 = 0.0;
        for a in 0..dim {
            let d = self.center[a] - other.center[a];
            d2 += d * d;
        }
        libm::sqrt(d2)
    }
}

/// Segregated pair built from disjoint bumps, one list per species.
///
/// Bumps of one species combine by pointwise maximum. A bump whose support
/// reaches ∂Ω leaves a nonzero trace, which then becomes that species'
/// boundary data; [`InitialData::check_traces`] rejects schedules that
/// disagree with it.
pub fn make_segregated_bumps(grid: &Grid, u_bumps: &[Bump], v_bumps: &[Bump]) -> Result<InitialData> {
    let dim = grid.dim();
    for b in u_bumps.iter().chain(v_bumps) {
        if !(b.radius.is_finite() && b.radius > 0.0) {
            return Err(invalid(format!("bump radius must be positive, got {}", b.radius)));
        }
        if !(b.amplitude > 0.0 && b.amplitude <= 1.0) {
            return Err(invalid(format!("bump amplitude must lie in (0,1], got {}", b.amplitude)));
        }
        for a in 0..dim {
            if !(0.0..=grid.length(a)).contains(&b.center[a]) {
                return Err(invalid(format!("bump center {:?} lies outside the domain", b.center)));
            }
        }
    }
    for bu in u_bumps {
        for bv in v_bumps {
            if bu.distance(bv, dim) < bu.radius + bv.radius {
                return Err(invalid(format!(
                    "u-bump at {:?} overlaps v-bump at {:?}",
                    &bu.center[..dim],
                    &bv.center[..dim]
                )));
            }
        }
    }
    let build = |bumps: &[Bump]| Field::from_fn(*grid, |x| bumps.iter().map(|b| b.value(x, dim)).fold(0.0, f64::max));
    InitialData::new(build(u_bumps), build(v_bumps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reaction_values() {
        let l = ReactionModel::logistic();
        assert_eq!(l.f(0.0), 0.0);
        assert_eq!(l.f(2.0), -2.0);
        assert_eq!(l.f(-3.0), 0.0);
        let s = ReactionModel::smooth_logistic();
        assert_eq!(s.f(-1.0), 0.0);
        assert_eq!(s.derivative(0.0), 0.0);
        assert!((s.f(1e-8) / 1e-8).abs() < 1e-7);
        assert_eq!(ReactionModel::zero().f(0.7), 0.0);
    }

    #[test]
    fn antiderivative_values() {
        let l = ReactionModel::logistic();
        assert!((l.antiderivative(1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((l.antiderivative(0.5) - 1.0 / 12.0).abs() < 1e-15);
        for m in [l, ReactionModel::smooth_logistic(), ReactionModel::zero()] {
            assert_eq!(m.antiderivative(0.0), 0.0);
            assert_eq!(m.antiderivative(-2.0), 0.0);
        }
    }

    #[test]
    fn schedule_values_and_compatibility() {
        let st = BoundarySchedule::stationary(alloc::vec![0.3, 0.8]).unwrap();
        assert_eq!(st.at(17.0), alloc::vec![0.3, 0.8]);
        assert_eq!(st.rate(3.0), alloc::vec![0.0, 0.0]);

        let d = BoundarySchedule::decaying(alloc::vec![0.5], alloc::vec![0.1], 1.0).unwrap();
        assert_eq!(d.at(0.0), alloc::vec![0.5]);
        assert_eq!(d.rate(0.0), alloc::vec![0.0]);
        let v = d.at(2.0)[0];
        assert!((v - (0.5 + 0.4 * libm::exp(-2.0))).abs() < 1e-15);
        assert!((v - 0.55413).abs() < 1e-5);
        assert!(boundary_at(&d, -1.0).is_err());
    }

    #[test]
    fn schedule_leaving_unit_interval_rejected() {
        // peak profile 4/e² ≈ 0.541 for γ = 1
        assert!(BoundarySchedule::decaying(alloc::vec![0.9], alloc::vec![0.5], 1.0).is_err());
        assert!(BoundarySchedule::decaying(alloc::vec![0.9], alloc::vec![0.18], 1.0).is_ok());
        assert!(BoundarySchedule::decaying(alloc::vec![0.5], alloc::vec![0.1], 0.0).is_err());
        assert!(BoundarySchedule::stationary(alloc::vec![1.2]).is_err());
    }

    #[test]
    fn disjoint_bumps_are_segregated() {
        let g = Grid::new_1d(1.0, 99).unwrap();
        let u = Bump { center: [0.25, 0.0], radius: 0.15, amplitude: 1.0 };
        let v = Bump { center: [0.75, 0.0], radius: 0.15, amplitude: 0.5 };
        let init = make_segregated_bumps(&g, &[u], &[v]).unwrap();
        assert!(init.segregated);
        let (lo, hi) = init.u0.min_max();
        assert_eq!((lo, hi), (0.0, 1.0)); // node 25 sits on the center
        assert!(init.u0.trace().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn overlapping_bumps_rejected() {
        let g = Grid::new_1d(1.0, 20).unwrap();
        let u = Bump { center: [0.4, 0.0], radius: 0.2, amplitude: 1.0 };
        let v = Bump { center: [0.6, 0.0], radius: 0.2, amplitude: 1.0 };
        assert!(make_segregated_bumps(&g, &[u], &[v]).is_err());
        let bad = Bump { amplitude: 1.5, ..u };
        assert!(make_segregated_bumps(&g, &[bad], &[]).is_err());
    }

    #[test]
    fn boundary_contact_must_match_the_schedule() {
        let g = Grid::new_1d(2.0, 15).unwrap();
        let u = Bump { center: [0.0, 0.0], radius: 0.8, amplitude: 0.4 };
        let v = Bump { center: [2.0, 0.0], radius: 0.8, amplitude: 0.4 };
        let init = make_segregated_bumps(&g, &[u], &[v]).unwrap();
        assert_eq!(init.u0.trace(), alloc::vec![0.4, 0.0]);
        let zero = BoundarySchedule::stationary(alloc::vec![0.0, 0.0]).unwrap();
        assert!(matches!(init.check_traces(&zero, &zero), Err(Error::TraceMismatch { .. })));
        let psi = BoundarySchedule::stationary(init.u0.trace()).unwrap();
        let zeta = BoundarySchedule::stationary(init.v0.trace()).unwrap();
        init.check_traces(&psi, &zeta).unwrap();
    }
}
