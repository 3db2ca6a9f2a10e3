//! One-dimensional reference problems with known answers: a cubic traced by
//! the global homotopy and a quartic solved by the box barrier method.

use crate::barrier::{
    barrier_value, run_pd_barrier, BarrierConfig, BarrierError, BoxConstraints, MuRule,
    SmoothObjective,
};
use crate::homotopy::{
    global_homotopy, trace_with_observer, NewtonConfig, PredictorOrder, StepController,
    TraceError,
};
use crate::sparse::SparseMatrix;

/// `4x³ − 3x² − 2x + 1`
pub fn cubic(x: f64) -> f64 {
    4.0 * x.powi(3) - 3.0 * x * x - 2.0 * x + 1.0
}

pub fn cubic_prime(x: f64) -> f64 {
    12.0 * x * x - 6.0 * x - 2.0
}

/// The root reached from `x₀ = −1.2`.
pub fn cubic_left_root() -> f64 {
    (-1.0 - 17f64.sqrt()) / 8.0
}

/// `x⁴ − x³ − x² + x + 0.25`; its derivative is [`cubic`].
pub struct Quartic;

impl SmoothObjective for Quartic {
    fn value(&self, x: &[f64]) -> f64 {
        let x = x[0];
        x.powi(4) - x.powi(3) - x * x + x + 0.25
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![cubic(x[0])]
    }
    fn hessian(&self, x: &[f64]) -> SparseMatrix {
        SparseMatrix::from_diagonal(&[cubic_prime(x[0])])
    }
}

pub fn quartic_box() -> BoxConstraints {
    BoxConstraints::new(vec![-0.5], vec![1.0]).expect("valid box")
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `B(·; μ)` left of the interior maximum of the quartic's slope.
pub fn quartic_barrier_minimizer(mu: f64) -> f64 {
    let b = quartic_box();
    let slacks = |x: &[f64]| [b.lower_slack(x), b.upper_slack(x)].concat();
    let f = |x: f64| {
        barrier_value(|v| Quartic.value(v), slacks, &[x], mu).unwrap_or(f64::INFINITY)
    };
    golden_section(f, -0.5 + 1e-14, 0.39, 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
}

impl Check {
    fn new(label: impl Into<String>, value: f64, expected: f64, tol: f64) -> Self {
        Self {
            label: label.into(),
            value,
            expected,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tol
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.7} (expected {:.7}, tol {:e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.label,
            self.value,
            self.expected,
            self.tol
        )
    }
}

/// Traces the cubic from `x₀ = −1.2`, landing on `t = 0.4, 0.65, 0.9`.
pub fn cubic_demo() -> Result<Vec<Check>, TraceError> {
    let h = global_homotopy(
        |x: &[f64]| vec![cubic(x[0])],
        |x: &[f64]| SparseMatrix::from_diagonal(&[cubic_prime(x[0])]),
        &[-1.2],
    );
    let ctl = StepController::new(0.25, 0.25)
        .expect("valid steps")
        .with_landmarks(vec![0.4, 0.65, 0.9]);
    let cfg = NewtonConfig {
        tol: 1e-12,
        ..NewtonConfig::default()
    };
    let mut seen = Vec::new();
    let result = trace_with_observer(&h, &[-1.2], ctl, &cfg, PredictorOrder::Zero, |x, t| {
        seen.push((t, x[0]))
    })?;
    let mut checks: Vec<Check> = [(0.4, -1.0420), (0.65, -0.9147), (0.9, -0.7399)]
        .into_iter()
        .map(|(t, expected)| {
            let x = seen
                .iter()
                .find(|(s, _)| *s == t)
                .map_or(f64::NAN, |(_, x)| *x);
            Check::new(format!("cubic x({t})"), x, expected, 1e-3)
        })
        .collect();
    checks.push(Check::new("cubic x(1)", result.x[0], cubic_left_root(), 1e-6));
    Ok(checks)
}

/// Barrier subproblems at μ = 2.9, 1.1, 0.4, 0.1, then continuation to 1e-6.
pub fn quartic_demo() -> Result<Vec<Check>, BarrierError> {
    let b = quartic_box();
    let rule = MuRule::Sequence {
        values: vec![2.9, 1.1, 0.4, 0.1],
        then: 0.5,
    };
    let run = run_pd_barrier(
        &Quartic,
        &b.analytic_center(),
        &b,
        &rule,
        5.0,
        1e-6,
        &BarrierConfig::default(),
    )?;
    let mut checks = Vec::new();
    for (mu, expected) in [(2.9, 0.2008), (1.1, 0.0315), (0.4, -0.2456), (0.1, -0.41)] {
        let x = run
            .subproblems
            .iter()
            .find(|s| s.mu == mu)
            .map_or(f64::NAN, |s| s.x[0]);
        checks.push(Check::new(format!("quartic x(mu={mu})"), x, expected, 1e-3));
        checks.push(Check::new(
            format!("quartic x(mu={mu}) vs golden section"),
            x,
            quartic_barrier_minimizer(mu),
            1e-6,
        ));
    }
    checks.push(Check::new("quartic x(mu=1e-6)", run.x[0], -0.5, 1e-3));
    Ok(checks)
}
