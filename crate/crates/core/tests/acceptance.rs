use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use barrier_homotopy::cli::write_outputs;
use barrier_homotopy::solver::{
    self, f_box, initialize, intermediate_fraction, kkt_residual_norm, residual, symmetry_defect,
    KktPoint, SolveOutcome,
};
use barrier_homotopy::{demos, derivatives, sparse, SolverConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn coarse() -> SolverConfig {
    SolverConfig {
        nx: 20,
        ny: 8,
        ..SolverConfig::default()
    }
}

fn checks_outcome(checks: &[demos::Check], elapsed: Duration, budget: Duration) -> Outcome {
    for c in checks {
        println!("    {c}");
    }
    let all = checks.iter().all(demos::Check::passed);
    Outcome::new(
        all && elapsed < budget,
        format!("{} checks, {elapsed:.2?}", checks.len()),
    )
}

fn scalar_homotopy() -> Outcome {
    let start = Instant::now();
    match demos::cubic_demo() {
        Ok(checks) => checks_outcome(&checks, start.elapsed(), Duration::from_secs(1)),
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn scalar_barrier() -> Outcome {
    let start = Instant::now();
    match demos::quartic_demo() {
        Ok(checks) => checks_outcome(&checks, start.elapsed(), Duration::from_secs(1)),
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn derivative_consistency() -> Outcome {
    let start = Instant::now();
    let lag = solver::build_lagrangian(&coarse()).expect("coarse problem");
    let reports = match derivatives::check_random_points(&lag, 5, 20) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let grad = reports.iter().map(|r| r.max_gradient_error()).fold(0.0, f64::max);
    let hess = reports.iter().map(|r| r.max_hessian_error()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    Outcome::new(
        grad <= 1e-6 && hess <= 1e-5 && elapsed < Duration::from_secs(30),
        format!("gradient {grad:.2e}, hessian {hess:.2e}, {elapsed:.2?}"),
    )
}

fn homotopy_map() -> Outcome {
    let cfg = coarse();
    let lag = solver::build_lagrangian(&cfg).expect("coarse problem");
    let schedule = solver::schedule(&cfg).expect("schedule");
    let (start, anchor) = initialize(&lag, cfg.rho0, cfg.mu0).expect("initial point");
    let r0 = sparse::norm2(&residual(&lag, &start, &anchor, 0.0, &schedule).unwrap());

    let mut x = start.to_vector();
    for (k, v) in x.iter_mut().enumerate() {
        *v += 1e-3 * ((k % 7) as f64 - 3.0);
    }
    let moved = KktPoint::from_vector(lag.n(), lag.l(), &x);
    let mut diff = 0.0f64;
    for point in [&start, &moved] {
        let h = residual(&lag, point, &anchor, 1.0, &schedule).unwrap();
        let f = f_box(&lag, point, cfg.mu_inf).unwrap();
        diff = h.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(diff, f64::max);
    }
    Outcome::new(
        r0 <= 1e-10 && diff <= 1e-14,
        format!("|H(x0,0)| = {r0:.2e}, max|H(x,1) - F_box(x)| = {diff:.2e}"),
    )
}

fn desk_scale(out: &SolveOutcome, cfg: &SolverConfig, elapsed: Duration) -> Outcome {
    let lag = &out.lagrangian;
    let rho = &out.point.rho;
    let res = kkt_residual_norm(lag, &out.point, cfg.mu_inf).unwrap();
    let comp = out.point.complementarity_defect(cfg.mu_inf);
    let inter = intermediate_fraction(rho);
    let (j0, j1) = (out.initial_objective(), out.final_objective());
    let sym = symmetry_defect(lag, rho);
    let parts = [
        ("residual", res <= out.tol, format!("{res:.2e} <= {:.2e}", out.tol)),
        ("interior", out.point.is_interior(), String::new()),
        ("complementarity", comp <= 10.0 * out.tol, format!("{comp:.2e}")),
        ("intermediate", inter <= 0.15, format!("{inter:.4}")),
        ("objective", j1 < j0, format!("{j0:.4} -> {j1:.4}")),
        ("symmetry", sym <= 1e-3, format!("{sym:.2e}")),
    ];
    for (name, ok, detail) in &parts {
        println!("    {} {name} {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    println!(
        "    steps: {} accepted, {} attempted",
        out.trace.num_accepted(),
        out.trace.len()
    );
    Outcome::new(
        parts.iter().all(|p| p.1),
        format!("{}x{} in {elapsed:.1?}", cfg.nx, cfg.ny),
    )
}

fn interior_violation() -> Outcome {
    let mut cfg = coarse();
    cfg.dt_init = 0.9;
    cfg.dt_max = 1.0;
    let out = match solver::solve(&cfg) {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let records = &out.trace.records;
    let halved = records.windows(2).find(|w| !w[0].accepted).map(|w| (w[0].dt, w[1].dt));
    match halved {
        Some((tried, next)) => Outcome::new(
            records[0].dt == 0.9 && next == 0.5 * tried,
            format!(
                "first attempt dt {}, rejected dt {tried} then {next}, {} rejections",
                records[0].dt,
                out.trace.num_rejected()
            ),
        ),
        None => Outcome::new(false, "no rejected step"),
    }
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            (name, std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism(first: &Path, cfg: &SolverConfig) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig {
        out_dir: dir.path().to_path_buf(),
        ..cfg.clone()
    };
    let out = match solver::solve(&cfg) {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    write_outputs(&cfg, &out).unwrap();
    let (a, b) = (read_dir_files(first), read_dir_files(dir.path()));
    let identical = !a.is_empty() && a == b;
    Outcome::new(identical, format!("{} files compared", a.len()))
}

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let mut results = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        println!(
            "criterion {n} {name}: {} ({})",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push(o.passed);
    };

    report(1, "scalar homotopy", scalar_homotopy());
    report(2, "scalar barrier", scalar_barrier());
    report(3, "derivative consistency", derivative_consistency());
    report(4, "homotopy map", homotopy_map());

    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig {
        out_dir: dir.path().to_path_buf(),
        ..SolverConfig::default()
    };
    let start = Instant::now();
    let default_run = solver::solve(&cfg);
    let elapsed = start.elapsed();
    match &default_run {
        Ok(out) => {
            write_outputs(&cfg, out).unwrap();
            report(5, "desk-scale solve", desk_scale(out, &cfg, elapsed));
        }
        Err(e) => report(5, "desk-scale solve", Outcome::new(false, e.to_string())),
    }

    report(6, "interior violation", interior_violation());

    match &default_run {
        Ok(_) => report(7, "determinism", determinism(dir.path(), &cfg)),
        Err(e) => report(7, "determinism", Outcome::new(false, format!("default run failed: {e}"))),
    }

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
