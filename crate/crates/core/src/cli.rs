//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{self, SolverConfig};
use crate::demos;
use crate::derivatives;
use crate::history;
use crate::homotopy::{PredictorOrder, TraceError};
use crate::solver::{self, SolveOutcome, SolverError};
use crate::vtk;

#[derive(Debug, Parser)]
#[command(name = "bhtopo", about = "Barrier-homotopy density topology optimization")]
struct Cli {
    /// Log progress of every continuation step.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the optimization problem from t = 0 to t = 1.
    Solve {
        /// Configuration file; reference values are used when omitted.
        config: Option<PathBuf>,
        #[arg(long = "config", conflicts_with = "config")]
        config_flag: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Comma-separated parameter values at which to write density files.
        #[arg(long)]
        snapshots: Option<String>,
        #[arg(long, value_parser = ["0", "1"])]
        predictor: Option<String>,
    },
    /// Run the one-dimensional cubic and quartic reference problems.
    ScalarDemos,
    /// Compare analytic derivatives with finite differences.
    CheckDerivatives {
        config: Option<PathBuf>,
        #[arg(long = "config", conflicts_with = "config")]
        config_flag: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(path: Option<PathBuf>) -> Result<SolverConfig, String> {
    match path {
        Some(p) => config::parse_config(&p).map_err(|e| e.to_string()),
        None => Ok(SolverConfig::default()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();

    let result = match cli.command {
        Command::Solve {
            config,
            config_flag,
            out_dir,
            snapshots,
            predictor,
        } => run_solve(config.or(config_flag), out_dir, snapshots, predictor),
        Command::ScalarDemos => run_demos(),
        Command::CheckDerivatives {
            config,
            config_flag,
            points,
            seed,
        } => run_check(config.or(config_flag), points, seed),
    };
    match result {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn run_solve(
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    snapshots: Option<String>,
    predictor: Option<String>,
) -> Result<(), String> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    if let Some(list) = snapshots {
        cfg.snapshots = config::parse_list(0, "--snapshots", &list).map_err(|e| e.to_string())?;
    }
    if let Some(p) = predictor {
        cfg.predictor = if p == "1" {
            PredictorOrder::First
        } else {
            PredictorOrder::Zero
        };
    }
    cfg.validate().map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out_dir.display()))?;

    match solver::solve(&cfg) {
        Ok(outcome) => {
            write_outputs(&cfg, &outcome)?;
            println!(
                "reached t = 1: {} accepted / {} attempted steps, J = {:.6} (initial {:.6})",
                outcome.trace.num_accepted(),
                outcome.trace.len(),
                outcome.final_objective(),
                outcome.initial_objective()
            );
            Ok(())
        }
        Err(SolverError::Trace(TraceError::StepUnderflow { t, dt_min, trace })) => {
            let path = cfg.out_dir.join("param_history.csv");
            if !trace.is_empty() {
                history::write_param_history(&trace, &path).map_err(|e| e.to_string())?;
            }
            Err(format!("step size fell below {dt_min:e} at t = {t}"))
        }
        Err(e) => Err(e.to_string()),
    }
}

/// Writes `param_history.csv`, snapshot density files and `rho_final.vtk`.
pub fn write_outputs(cfg: &SolverConfig, outcome: &SolveOutcome) -> Result<(), String> {
    let dir: &Path = &cfg.out_dir;
    let digest = vtk::config_digest(cfg);
    let mesh = &outcome.lagrangian.mesh;
    history::write_param_history(&outcome.trace, &dir.join("param_history.csv"))
        .map_err(|e| e.to_string())?;
    for snap in &outcome.snapshots {
        let path = dir.join(vtk::snapshot_file_name(snap.t));
        let title = vtk::density_title(mesh, snap.t, &digest);
        vtk::write_density_vtk(mesh, &snap.rho, &title, &path).map_err(|e| e.to_string())?;
    }
    let title = vtk::density_title(mesh, 1.0, &digest);
    vtk::write_density_vtk(mesh, &outcome.point.rho, &title, &dir.join("rho_final.vtk"))
        .map_err(|e| e.to_string())
}

fn run_demos() -> Result<(), String> {
    let mut checks = demos::cubic_demo().map_err(|e| e.to_string())?;
    checks.extend(demos::quartic_demo().map_err(|e| e.to_string())?);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(format!("{failed} scalar check(s) failed"))
    }
}

fn run_check(config: Option<PathBuf>, points: usize, seed: u64) -> Result<(), String> {
    let cfg = load_config(config)?;
    let lag = solver::build_lagrangian(&cfg).map_err(|e| e.to_string())?;
    let reports = derivatives::check_random_points(&lag, points, seed).map_err(|e| e.to_string())?;
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for (k, r) in reports.iter().enumerate() {
        for b in r.gradient.iter().chain(&r.hessian) {
            println!("point {k} {:<12} max relative error {:.3e}", b.block, b.relative());
        }
        worst_g = worst_g.max(r.max_gradient_error());
        worst_h = worst_h.max(r.max_hessian_error());
    }
    let ok = worst_g <= 1e-6 && worst_h <= 1e-5;
    println!(
        "{} gradient {worst_g:.3e} (tol 1e-6), hessian {worst_h:.3e} (tol 1e-5)",
        if ok { "PASS" } else { "FAIL" }
    );
    if ok {
        Ok(())
    } else {
        Err("finite-difference check failed".into())
    }
}
