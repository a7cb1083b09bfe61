use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use segrelab::io::{jsonl, write_snapshot_series, write_text};
use segrelab::sweep::{diagonal_extraction, extraction_csv, load_members, run_dir, run_single, run_sweep};
use segrelab::verify::{run_suites, Fault, Suite};
use segrelab::Config;
use segrelab_core::steady::{certify_limit, solve_stationary, NewtonOptions};

#[derive(Parser)]
#[command(name = "segrelab", version, about = "Competition-diffusion runs, kappa sweeps and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration to stabilization at `model.kappa`.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every `sweep.kappas` member and write the segregation report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the stationary system directly from the initial data.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Run the invariant self-checks.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        inject_fault: Option<String>,
    },
    /// Build the diagonal sequence from a sweep output directory.
    Extract {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 5)]
        depth: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run { config } => {
            let cfg = Config::load(&config)?;
            let (run, dir) = run_single(&cfg)?;
            println!("{}", serde_json::to_string(&run.record)?);
            eprintln!(
                "{} after t = {} -> {}",
                run.trajectory.status.as_str(),
                run.trajectory.final_state.t,
                dir.display()
            );
            Ok(true)
        }
        Command::Sweep { config } => {
            let cfg = Config::load(&config)?;
            let sweep = run_sweep(&cfg)?;
            for c in &sweep.report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for w in &sweep.report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(sweep.report.passed())
        }
        Command::Steady { config, kappa } => {
            let cfg = Config::load(&config)?;
            let kappa = kappa.unwrap_or(cfg.kappa);
            let init = cfg.initial_data()?;
            let problem = cfg.problem(&init, kappa)?;
            let pair = solve_stationary(&problem, &init.u0, &init.v0, &NewtonOptions::with_tol(cfg.steady_tol))?;
            let cert = certify_limit(&problem, &pair)?;
            let dir = run_dir(&cfg.output_dir, kappa).join("steady");
            write_snapshot_series(&dir.join("u_hat.snap"), &[(&pair.u_hat, 0.0)])?;
            write_snapshot_series(&dir.join("v_hat.snap"), &[(&pair.v_hat, 0.0)])?;
            let record = segrelab::io::CertificateRecord {
                kappa,
                residual_u: pair.residual_u,
                residual_v: pair.residual_v,
                overlap: cert.overlap,
                kappa_overlap: cert.kappa_overlap,
                vi_u: cert.vi_violation_u,
                vi_v: cert.vi_violation_v,
                holder_ratio: cert.holder_ratio,
                method: pair.method.as_str().into(),
                iterations: pair.iterations,
                guess: "initial_data".into(),
            };
            write_text(&dir.join("certificate.jsonl"), &jsonl(std::slice::from_ref(&record))?)?;
            println!("{}", serde_json::to_string(&record)?);
            Ok(pair.residual() <= cfg.steady_tol)
        }
        Command::Verify { suite, inject_fault } => {
            let suites = match suite {
                Some(s) => vec![s.parse::<Suite>()?],
                None => Suite::ALL.to_vec(),
            };
            let fault = inject_fault.map(|f| f.parse::<Fault>()).transpose()?;
            let reports = run_suites(&suites, fault)?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            let mut ok = true;
            for r in &reports {
                for c in r.failures() {
                    eprintln!("FAILED {}: {} = {:e} exceeds {:e}", r.suite, c.invariant, c.value, c.limit);
                    ok = false;
                }
            }
            Ok(ok)
        }
        Command::Extract { report, depth } => {
            if depth == 0 {
                bail!("--depth must be at least 1");
            }
            let members = load_members(&report).with_context(|| format!("loading {}", report.display()))?;
            let x = diagonal_extraction(&members, depth)?;
            write_text(&report.join("extraction.csv"), &extraction_csv(&x))?;
            print!("{}", extraction_csv(&x));
            if let Some(why) = &x.shortfall {
                eprintln!("reached depth {} of {}: {why}", x.depth(), depth);
            }
            Ok(x.depth() == depth)
        }
    }
}
