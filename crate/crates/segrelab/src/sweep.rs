//! Single runs, κ sweeps, the segregation report and diagonal extraction.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use segrelab_core::energy::{
    h_bound_audit, mu_quantity, AuditInput, BoundQuantities, HBoundAudit, MU_TAIL_TOLERANCE, TREND_TOLERANCE,
};
use segrelab_core::evolve::{run_until, Problem, SimState, Trajectory};
use segrelab_core::mesh::{l2_norm, linf_norm, pair_h1_norm, pair_l2_distance, Field};
use segrelab_core::model::{BoundaryMode, BoundarySchedule, InitialData};
use segrelab_core::stats::{fit_line, loglog_slope};
use segrelab_core::steady::{certify_limit, solve_stationary, LimitCertificate, NewtonOptions, StationaryPair};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::io::{
    audit_csv, jsonl, num, read_snapshot, read_snapshot_series, series_csv, write_snapshot_series, write_text,
    CertificateRecord,
};
use crate::{LabError, Result};

/// Limit on the candidate's inequality residuals.
pub const VI_TOLERANCE: f64 = 1e-6;
/// Largest admissible log-log slope of `κ·overlap` against κ.
pub const KAPPA_OVERLAP_SLOPE_MAX: f64 = 0.1;
/// Relative slack of the overlap monotonicity monitor.
pub const OVERLAP_MONITOR_SLACK: f64 = 0.05;
/// Exponent of the decreasing product threshold `P₀(κ₀/κ)^{1/4}`.
pub const PRODUCT_THRESHOLD_EXPONENT: f64 = 0.25;

/// Outcome of one κ member, kept in memory.
#[derive(Debug, Clone)]
pub struct MemberRun {
    pub kappa: f64,
    pub trajectory: Trajectory,
    pub pair: StationaryPair,
    pub certificate: LimitCertificate,
    pub record: CertificateRecord,
    pub problem: Problem,
}

pub fn run_dir(out: &Path, kappa: f64) -> PathBuf {
    out.join(format!("kappa_{}", num(kappa)))
}

/// Evolves one member to stabilization and solves the stationary system from
/// its final state.
pub fn simulate(cfg: &Config, init: &InitialData, kappa: f64) -> Result<MemberRun> {
    let problem = cfg.problem(init, kappa)?;
    let trajectory = run_until(&SimState::new(init), &problem, &cfg.stepper())?;
    let s = &trajectory.final_state;
    let pair = solve_stationary(&problem, &s.u, &s.v, &NewtonOptions::with_tol(cfg.steady_tol))?;
    let certificate = certify_limit(&problem, &pair)?;
    let record = CertificateRecord {
        kappa,
        residual_u: pair.residual_u,
        residual_v: pair.residual_v,
        overlap: certificate.overlap,
        kappa_overlap: certificate.kappa_overlap,
        vi_u: certificate.vi_violation_u,
        vi_v: certificate.vi_violation_v,
        holder_ratio: certificate.holder_ratio,
        method: pair.method.as_str().to_string(),
        iterations: pair.iterations,
        guess: format!("final_state:{}", trajectory.status.as_str()),
    };
    Ok(MemberRun { kappa, trajectory, pair, certificate, record, problem })
}

/// Writes a member's time series, snapshots and certificate line under `dir`.
pub fn write_member(dir: &Path, run: &MemberRun) -> Result<()> {
    write_text(&dir.join("series.csv"), &series_csv(&run.trajectory.series))?;
    let fin = &run.trajectory.final_state;
    write_snapshot_series(&dir.join("u_final.snap"), &[(&fin.u, fin.t)])?;
    write_snapshot_series(&dir.join("v_final.snap"), &[(&fin.v, fin.t)])?;
    write_snapshot_series(&dir.join("u_hat.snap"), &[(&run.pair.u_hat, fin.t)])?;
    write_snapshot_series(&dir.join("v_hat.snap"), &[(&run.pair.v_hat, fin.t)])?;
    let samples = &run.trajectory.samples;
    let us: Vec<(&Field, f64)> = samples.iter().map(|s| (&s.u, s.t)).collect();
    let vs: Vec<(&Field, f64)> = samples.iter().map(|s| (&s.v, s.t)).collect();
    write_snapshot_series(&dir.join("u_samples.snap"), &us)?;
    write_snapshot_series(&dir.join("v_samples.snap"), &vs)?;
    write_text(&dir.join("certificate.jsonl"), &jsonl(std::slice::from_ref(&run.record))?)
}

/// Runs `cfg` at `model.kappa` and writes its artifacts to
/// `output.dir/kappa_<κ>/`.
pub fn run_single(cfg: &Config) -> Result<(MemberRun, PathBuf)> {
    let init = cfg.initial_data()?;
    let run = simulate(cfg, &init, cfg.kappa)?;
    let dir = run_dir(&cfg.output_dir, cfg.kappa);
    write_member(&dir, &run)?;
    Ok((run, dir))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub kappa: f64,
    pub dir: String,
    pub status: String,
    pub t_final: f64,
    pub steps: usize,
    pub overlap: f64,
    pub kappa_overlap: f64,
    pub h_norm: f64,
    pub l2_norm: f64,
    pub max_product: f64,
    pub max_h_norm_over_time: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub derivative_integral: f64,
    pub max_dissipation_residual: f64,
    pub certificate: CertificateRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub mu: f64,
    pub slope: f64,
    pub slope_ci: f64,
    pub energy_slope: f64,
    pub fitted_r: f64,
    pub violations: Vec<f64>,
    pub uniform: bool,
}

impl From<&HBoundAudit> for AuditSummary {
    fn from(a: &HBoundAudit) -> Self {
        AuditSummary {
            mu: a.mu,
            slope: a.slope,
            slope_ci: a.slope_ci,
            energy_slope: a.energy_slope,
            fitted_r: a.fitted_r,
            violations: a.violations.clone(),
            uniform: a.uniform(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegregationReport {
    pub members: Vec<KappaRecord>,
    /// `‖(û, v̂)_{κ_{i+1}} − (û, v̂)_{κ_i}‖_{L²×L²}`.
    pub successive_l2: Vec<f64>,
    pub candidate_kappa: f64,
    pub candidate_max_product: f64,
    pub candidate_vi: (f64, f64),
    pub candidate_traces_match: bool,
    /// Log-log slope of the overlap against κ (None when an overlap vanishes).
    pub overlap_slope: Option<f64>,
    pub kappa_overlap_slope: Option<f64>,
    pub product_thresholds: Vec<f64>,
    pub audit: AuditSummary,
    pub checks: Vec<CheckOutcome>,
    /// Overlap monitor messages; logged, never fatal.
    pub warnings: Vec<String>,
}

impl SegregationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sweep result: the report plus the in-memory runs it was built from.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub report: SegregationReport,
    pub runs: Vec<MemberRun>,
    pub audit: HBoundAudit,
}

/// Horizon at which the transient tail `‖P‖·s(H)` is negligible.
fn mu_horizon(scheds: [&BoundarySchedule; 2]) -> f64 {
    let mut h: f64 = 1.0;
    for s in scheds {
        if s.mode() == BoundaryMode::Decaying {
            let peak = s.shape().iter().fold(0.0_f64, |m, r| m.max(r.abs())).max(1.0);
            let mut t = 40.0 / s.gamma();
            while peak * s.profile(t) > 1e-3 * MU_TAIL_TOLERANCE {
                t *= 1.5;
            }
            h = h.max(t);
        }
    }
    h
}

fn nodal_max_product(u: &Field, v: &Field) -> f64 {
    u.values().iter().zip(v.values()).map(|(a, b)| a * b).fold(0.0, f64::max)
}

/// Runs every κ of `cfg.kappas` (concurrently up to the worker count),
/// writes per-member artifacts and the sweep files, and evaluates the checks.
pub fn run_sweep(cfg: &Config) -> Result<Sweep> {
    let kappas = &cfg.kappas;
    if kappas.len() < 3 || kappas[kappas.len() - 1] < 100.0 * kappas[0] {
        return Err(LabError::Precondition(format!(
            "a sweep needs at least 3 kappa values spanning 2 decades, got {kappas:?}"
        )));
    }
    let init = cfg.initial_data()?;
    let workers = cfg.effective_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Precondition(e.to_string()))?;
    let runs: Vec<MemberRun> = pool.install(|| {
        kappas
            .par_iter()
            .map(|&k| {
                let run = simulate(cfg, &init, k)?;
                write_member(&run_dir(&cfg.output_dir, k), &run)?;
                Ok(run)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let sweep = assemble(cfg, &init, runs)?;
    write_sweep_files(&cfg.output_dir, &sweep)?;
    Ok(sweep)
}

/// Builds the report from runs ordered by ascending κ.
pub fn assemble(cfg: &Config, init: &InitialData, runs: Vec<MemberRun>) -> Result<Sweep> {
    let (psi, zeta) = cfg.schedules(init)?;
    let mut members = Vec::with_capacity(runs.len());
    for r in &runs {
        let (u, v) = (&r.pair.u_hat, &r.pair.v_hat);
        let (energy_min, energy_max) = r.trajectory.energy_range();
        let (lu, lv) = (l2_norm(u), l2_norm(v));
        members.push(KappaRecord {
            kappa: r.kappa,
            dir: format!("kappa_{}", num(r.kappa)),
            status: r.trajectory.status.as_str().to_string(),
            t_final: r.trajectory.final_state.t,
            steps: r.trajectory.final_state.step_index,
            overlap: r.certificate.overlap,
            kappa_overlap: r.certificate.kappa_overlap,
            h_norm: pair_h1_norm(u, v),
            l2_norm: (lu * lu + lv * lv).sqrt(),
            max_product: nodal_max_product(u, v),
            max_h_norm_over_time: r.trajectory.max_h1(),
            energy_min,
            energy_max,
            derivative_integral: r.trajectory.derivative_integral,
            max_dissipation_residual: r.trajectory.max_dissipation_residual,
            certificate: r.record.clone(),
        });
    }
    let successive_l2 = runs
        .windows(2)
        .map(|w| pair_l2_distance(&w[1].pair.u_hat, &w[1].pair.v_hat, &w[0].pair.u_hat, &w[0].pair.v_hat))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let last = runs.last().expect("at least three members");
    let candidate_traces_match =
        last.pair.u_hat.trace() == psi.terminal() && last.pair.v_hat.trace() == zeta.terminal();

    let mu = mu_quantity(init, &psi, &zeta, mu_horizon([&psi, &zeta]))?;
    let (u0, v0) = (init.u0.values(), init.v0.values());
    let product_l2sq =
        init.grid().weight() * init.grid().interior_nodes().iter().map(|&k| (u0[k] * v0[k]).powi(2)).sum::<f64>();
    let audit = h_bound_audit(
        &runs.iter().map(|r| AuditInput::from_trajectory(&r.trajectory)).collect::<Vec<_>>(),
        &BoundQuantities { mu, product_l2sq },
    )?;

    let ks: Vec<f64> = members.iter().map(|m| m.kappa).collect();
    let overlaps: Vec<f64> = members.iter().map(|m| m.overlap).collect();
    let kos: Vec<f64> = members.iter().map(|m| m.kappa_overlap).collect();
    let all_positive = overlaps.iter().all(|&o| o > 0.0);
    let overlap_slope = if all_positive { Some(loglog_slope(&ks, &overlaps)?.slope) } else { None };
    let kappa_overlap_slope = if all_positive {
        let lk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let lo: Vec<f64> = kos.iter().map(|k| k.ln()).collect();
        Some(fit_line(&lk, &lo)?.slope)
    } else {
        None
    };

    let mut checks = Vec::new();
    checks.push(match kappa_overlap_slope {
        Some(s) => CheckOutcome {
            name: "kappa_overlap_trend".into(),
            passed: s <= KAPPA_OVERLAP_SLOPE_MAX,
            detail: format!("log-log slope of kappa*overlap = {s:.4} (limit {KAPPA_OVERLAP_SLOPE_MAX})"),
        },
        None => CheckOutcome {
            name: "kappa_overlap_trend".into(),
            passed: overlaps.iter().all(|&o| o == 0.0) || overlaps.windows(2).all(|w| w[1] <= w[0]),
            detail: "some overlaps vanish; slope not defined".into(),
        },
    });
    let p0 = members[0].max_product;
    let product_thresholds: Vec<f64> = ks.iter().map(|k| p0 * (ks[0] / k).powf(PRODUCT_THRESHOLD_EXPONENT)).collect();
    let over: Vec<String> = members
        .iter()
        .zip(&product_thresholds)
        .filter(|(m, t)| m.max_product > **t * (1.0 + 1e-12))
        .map(|(m, t)| format!("kappa={} max u*v={:e} > {:e}", m.kappa, m.max_product, t))
        .collect();
    checks.push(CheckOutcome {
        name: "max_product_threshold".into(),
        passed: over.is_empty(),
        detail: if over.is_empty() {
            format!("finest max u*v = {:e}", last_product(&members))
        } else {
            over.join("; ")
        },
    });
    let (vi_u, vi_v) = (last.certificate.vi_violation_u, last.certificate.vi_violation_v);
    checks.push(CheckOutcome {
        name: "candidate_variational_inequalities".into(),
        passed: vi_u <= VI_TOLERANCE && vi_v <= VI_TOLERANCE,
        detail: format!("vi_u = {vi_u:e}, vi_v = {vi_v:e} (limit {VI_TOLERANCE:e})"),
    });
    checks.push(CheckOutcome {
        name: "candidate_traces".into(),
        passed: candidate_traces_match,
        detail: "finest-kappa traces against the terminal boundary data".into(),
    });
    // One-sided: a norm falling with κ is still uniformly bounded.
    let h_ok = if mu == 0.0 {
        audit.slope <= TREND_TOLERANCE && audit.energy_slope >= -TREND_TOLERANCE
    } else {
        audit.violations.is_empty()
    };
    checks.push(CheckOutcome {
        name: "h_bound".into(),
        passed: h_ok,
        detail: format!(
            "mu = {mu:e}, relative slope = {:e} ± {:e}, energy slope = {:e}, violations = {:?}",
            audit.slope, audit.slope_ci, audit.energy_slope, audit.violations
        ),
    });

    let mut warnings = Vec::new();
    for w in members.windows(2) {
        if w[1].overlap > w[0].overlap * (1.0 + OVERLAP_MONITOR_SLACK) {
            warnings.push(format!(
                "overlap rises from {:e} at kappa={} to {:e} at kappa={}",
                w[0].overlap, w[0].kappa, w[1].overlap, w[1].kappa
            ));
        }
    }
    for m in &members {
        if m.status != "stabilized" {
            warnings.push(format!("kappa={} ended with status {}", m.kappa, m.status));
        }
    }

    let report = SegregationReport {
        successive_l2,
        candidate_kappa: last.kappa,
        candidate_max_product: last_product(&members),
        candidate_vi: (vi_u, vi_v),
        candidate_traces_match,
        overlap_slope,
        kappa_overlap_slope,
        product_thresholds,
        audit: AuditSummary::from(&audit),
        checks,
        warnings,
        members,
    };
    Ok(Sweep { report, runs, audit })
}

fn last_product(members: &[KappaRecord]) -> f64 {
    members.last().map_or(0.0, |m| m.max_product)
}

pub fn write_sweep_files(out: &Path, sweep: &Sweep) -> Result<()> {
    write_text(&out.join("report.json"), &serde_json::to_string_pretty(&sweep.report)?)?;
    let records: Vec<&CertificateRecord> = sweep.report.members.iter().map(|m| &m.certificate).collect();
    write_text(&out.join("certificates.jsonl"), &jsonl(&records)?)?;
    write_text(&out.join("energy_audit.csv"), &audit_csv(&sweep.audit.rows))
}

/// Stationary pair and stored samples of one κ, as needed by the extraction.
#[derive(Debug, Clone)]
pub struct ExtractionMember {
    pub kappa: f64,
    pub u_hat: Field,
    pub v_hat: Field,
    /// `(t, u, v)` in time order.
    pub samples: Vec<(f64, Field, Field)>,
}

impl From<&MemberRun> for ExtractionMember {
    fn from(r: &MemberRun) -> Self {
        ExtractionMember {
            kappa: r.kappa,
            u_hat: r.pair.u_hat.clone(),
            v_hat: r.pair.v_hat.clone(),
            samples: r.trajectory.samples.iter().map(|s| (s.t, s.u.clone(), s.v.clone())).collect(),
        }
    }
}

/// Reloads the members of a sweep directory written by [`run_sweep`].
pub fn load_members(dir: &Path) -> Result<Vec<ExtractionMember>> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    let report: SegregationReport = serde_json::from_str(&text)?;
    report
        .members
        .iter()
        .map(|m| {
            let d = dir.join(&m.dir);
            let us = read_snapshot_series(&d.join("u_samples.snap"))?;
            let vs = read_snapshot_series(&d.join("v_samples.snap"))?;
            if us.len() != vs.len() {
                return Err(LabError::Format { path: d, msg: "u and v sample counts differ".into() });
            }
            Ok(ExtractionMember {
                kappa: m.kappa,
                u_hat: read_snapshot(&d.join("u_hat.snap"))?.0,
                v_hat: read_snapshot(&d.join("v_hat.snap"))?.0,
                samples: us.into_iter().zip(vs).map(|((u, t), (v, _))| (t, u, v)).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionTerm {
    pub m: usize,
    pub kappa: f64,
    pub t: f64,
    /// `‖(û, v̂)_{κ_m} − (u∞, v∞)‖_{L²×L²}`.
    pub pair_to_limit_l2: f64,
    /// `‖state_m − (û, v̂)_{κ_m}‖_{L²×L²}`.
    pub state_to_pair_l2: f64,
    /// `‖state_m − (u∞, v∞)‖_{L²×L²}`.
    pub combined_l2: f64,
    /// `(‖u_m − u∞‖_∞, ‖v_m − v∞‖_∞)`, 1D only.
    pub linf: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub requested: usize,
    pub terms: Vec<ExtractionTerm>,
    /// Why the sequence stopped short of the requested depth.
    pub shortfall: Option<String>,
}

impl Extraction {
    pub fn depth(&self) -> usize {
        self.terms.len()
    }
}

/// Diagonal sequence `(κ_m, t_m)` for `m = 1..=depth`.
///
/// The limit candidate is the finest-κ pair. `κ_m` is the smallest κ, not
/// below `κ_{m−1}`, whose pair lies within `1/(2m)` of it in `L²×L²`; `t_m` is
/// the earliest stored sample at or after `t_{m−1}` from which the trajectory
/// stays within `1/(2m)` of that pair.
pub fn diagonal_extraction(members: &[ExtractionMember], depth: usize) -> Result<Extraction> {
    let Some(limit) = members.last() else {
        return Err(LabError::Precondition("extraction needs at least one member".into()));
    };
    if members.windows(2).any(|w| !(w[1].kappa > w[0].kappa)) {
        return Err(LabError::Precondition("extraction members must have ascending kappa".into()));
    }
    let one_d = limit.u_hat.grid().dim() == 1;
    let to_limit: Vec<f64> = members
        .iter()
        .map(|m| pair_l2_distance(&m.u_hat, &m.v_hat, &limit.u_hat, &limit.v_hat))
        .collect::<std::result::Result<_, _>>()?;
    let mut terms = Vec::new();
    let mut start = 0usize;
    let mut t_prev = f64::NEG_INFINITY;
    let mut shortfall = None;
    for m in 1..=depth {
        let tol = 0.5 / m as f64;
        let Some(i) = (start..members.len()).find(|&i| to_limit[i] < tol) else {
            shortfall = Some(format!("no pair within {tol:e} of the candidate limit for m = {m}"));
            break;
        };
        let mem = &members[i];
        let dists = mem
            .samples
            .iter()
            .map(|(_, u, v)| pair_l2_distance(u, v, &mem.u_hat, &mem.v_hat))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut tail = vec![0.0_f64; dists.len() + 1];
        for j in (0..dists.len()).rev() {
            tail[j] = tail[j + 1].max(dists[j]);
        }
        let hit = (0..dists.len())
            .find(|&j| mem.samples[j].0 >= t_prev && tail[j] < tol)
            .map(|j| (mem.samples[j].0, &mem.samples[j].1, &mem.samples[j].2, dists[j]));
        let Some((t, u, v, d)) = hit else {
            shortfall = Some(format!("kappa={} has no sample within {tol:e} of its pair for m = {m}", mem.kappa));
            break;
        };
        let combined = pair_l2_distance(u, v, &limit.u_hat, &limit.v_hat)?;
        let linf =
            if one_d { Some((linf_norm(&u.sub(&limit.u_hat)?), linf_norm(&v.sub(&limit.v_hat)?))) } else { None };
        terms.push(ExtractionTerm {
            m,
            kappa: mem.kappa,
            t,
            pair_to_limit_l2: to_limit[i],
            state_to_pair_l2: d,
            combined_l2: combined,
            linf,
        });
        start = i;
        t_prev = t;
    }
    Ok(Extraction { requested: depth, terms, shortfall })
}

pub fn extraction_csv(x: &Extraction) -> String {
    let mut out = String::from("m,kappa,t,pair_to_limit_l2,state_to_pair_l2,combined_l2,linf_u,linf_v\n");
    for t in &x.terms {
        let (a, b) = t.linf.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
        out.push_str(&format!(
            "{},{},{},{},{},{},{a},{b}\n",
            t.m,
            num(t.kappa),
            num(t.t),
            num(t.pair_to_limit_l2),
            num(t.state_to_pair_l2),
            num(t.combined_l2)
        ));
    }
    out
}
