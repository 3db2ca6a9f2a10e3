//! Primal-dual logarithmic barrier for box constraints `a ≤ x ≤ b`.

use thiserror::Error;

use crate::homotopy::{DivergenceReason, NewtonConfig};
use crate::sparse::{self, Block, BlockSystem, SparseError, SparseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("point is not strictly interior (constraint {index} has value {value})")]
    NonInterior { index: usize, value: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid barrier schedule: {0}")]
    InvalidSchedule(String),
    #[error("subproblem at mu = {mu} diverged ({reason:?}) after {iterations} Newton steps")]
    Diverged {
        mu: f64,
        reason: DivergenceReason,
        iterations: usize,
        history: Vec<SubproblemRecord>,
    },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraints {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxConstraints {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BarrierError> {
        if lower.len() != upper.len() {
            return Err(BarrierError::InvalidBox(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(BarrierError::InvalidBox(format!(
                "bound {i}: {} is not below {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 1]ⁿ`.
    pub fn unit(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `cᵃ(x) = x − a`
    pub fn lower_slack(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.lower).map(|(x, a)| x - a).collect()
    }

    /// `cᵇ(x) = b − x`
    pub fn upper_slack(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.upper).map(|(x, b)| b - x).collect()
    }

    /// Minimizer of `−Σ log c(x)`, i.e. `(a + b) / 2`.
    pub fn analytic_center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn strictly_inside(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (a, b))| x > a && x < b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
}

impl DualPair {
    /// `z = μ ⊘ c(x)` for both sides of the box.
    pub fn from_barrier(bounds: &BoxConstraints, x: &[f64], mu: f64) -> Self {
        Self {
            z_lower: bounds.lower_slack(x).iter().map(|c| mu / c).collect(),
            z_upper: bounds.upper_slack(x).iter().map(|c| mu / c).collect(),
        }
    }

    pub fn positive(&self) -> bool {
        self.z_lower.iter().chain(&self.z_upper).all(|&z| z > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleKind {
    /// `μ(t) = t μ∞ + (1 − t) μ₀`
    #[default]
    Linear,
    /// `μ(t) = μ₀^(1−t) μ∞^t`
    Geometric,
}

/// Barrier parameter as a function of the homotopy parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSchedule {
    pub mu0: f64,
    pub mu_inf: f64,
    pub kind: ScheduleKind,
}

impl BarrierSchedule {
    pub fn new(mu0: f64, mu_inf: f64, kind: ScheduleKind) -> Result<Self, BarrierError> {
        if !(mu_inf > 0.0 && mu0.is_finite()) {
            return Err(BarrierError::InvalidSchedule(format!(
                "barrier parameters must be positive, got mu0={mu0}, mu_inf={mu_inf}"
            )));
        }
        if !(mu0 > mu_inf) {
            return Err(BarrierError::InvalidSchedule(format!(
                "mu0={mu0} must exceed mu_inf={mu_inf}"
            )));
        }
        Ok(Self { mu0, mu_inf, kind })
    }

    pub fn linear(mu0: f64, mu_inf: f64) -> Result<Self, BarrierError> {
        Self::new(mu0, mu_inf, ScheduleKind::Linear)
    }

    pub fn mu(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Linear => t * self.mu_inf + (1.0 - t) * self.mu0,
            ScheduleKind::Geometric => self.mu0.powf(1.0 - t) * self.mu_inf.powf(t),
        }
    }

    pub fn dmu_dt(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Linear => self.mu_inf - self.mu0,
            ScheduleKind::Geometric => self.mu(t) * (self.mu_inf / self.mu0).ln(),
        }
    }
}

/// `B(x; μ) = f(x) − μ Σ log cᵢ(x)`.
pub fn barrier_value<F, C>(f: F, c: C, x: &[f64], mu: f64) -> Result<f64, BarrierError>
where
    F: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    let slacks = c(x);
    let mut log_sum = 0.0;
    for (index, &value) in slacks.iter().enumerate() {
        if !(value > 0.0) {
            return Err(BarrierError::NonInterior { index, value });
        }
        log_sum += value.ln();
    }
    if mu == 0.0 {
        return Ok(f(x));
    }
    Ok(f(x) - mu * log_sum)
}

/// Stacked `[∇f − zᵃ + zᵇ; zᵃ⊙cᵃ − μe; zᵇ⊙cᵇ − μe]`.
pub fn pd_residual_box(
    grad: &[f64],
    x: &[f64],
    bounds: &BoxConstraints,
    duals: &DualPair,
    mu: f64,
) -> Vec<f64> {
    let n = x.len();
    let ca = bounds.lower_slack(x);
    let cb = bounds.upper_slack(x);
    let mut r = Vec::with_capacity(3 * n);
    r.extend((0..n).map(|i| grad[i] - duals.z_lower[i] + duals.z_upper[i]));
    r.extend((0..n).map(|i| duals.z_lower[i] * ca[i] - mu));
    r.extend((0..n).map(|i| duals.z_upper[i] * cb[i] - mu));
    r
}

/// The 3×3 block Newton matrix `[H, −I, I; Zᵃ, Cᵃ, 0; −Zᵇ, 0, Cᵇ]`.
pub fn pd_newton_matrix_box(
    hess: &SparseMatrix,
    x: &[f64],
    bounds: &BoxConstraints,
    duals: &DualPair,
) -> Result<BlockSystem, BarrierError> {
    let n = x.len();
    let mut sys = BlockSystem::new([("x", n), ("z_lower", n), ("z_upper", n)]);
    sys.set(0, 0, Block::Sparse(hess.clone()))?;
    sys.set(0, 1, Block::Identity(-1.0))?;
    sys.set(0, 2, Block::Identity(1.0))?;
    sys.set(1, 0, Block::Diagonal(duals.z_lower.clone()))?;
    sys.set(1, 1, Block::Diagonal(bounds.lower_slack(x)))?;
    sys.set(2, 0, Block::Diagonal(duals.z_upper.iter().map(|z| -z).collect()))?;
    sys.set(2, 2, Block::Diagonal(bounds.upper_slack(x)))?;
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStep {
    pub dx: Vec<f64>,
    pub dz_lower: Vec<f64>,
    pub dz_upper: Vec<f64>,
}

impl BoxStep {
    pub fn norm(&self) -> f64 {
        let all: Vec<f64> = [&self.dx[..], &self.dz_lower, &self.dz_upper].concat();
        sparse::norm2(&all)
    }
}

/// Solves the primal-dual Newton system with right-hand side `−F_box`.
pub fn pd_newton_step_box(
    hess: &SparseMatrix,
    grad: &[f64],
    x: &[f64],
    bounds: &BoxConstraints,
    duals: &DualPair,
    mu: f64,
) -> Result<BoxStep, BarrierError> {
    let n = x.len();
    let matrix = pd_newton_matrix_box(hess, x, bounds, duals)?.assemble()?;
    let rhs: Vec<f64> = pd_residual_box(grad, x, bounds, duals, mu)
        .iter()
        .map(|v| -v)
        .collect();
    let sol = sparse::solve_direct(&matrix, &rhs)?;
    Ok(BoxStep {
        dx: sol[..n].to_vec(),
        dz_lower: sol[n..2 * n].to_vec(),
        dz_upper: sol[2 * n..].to_vec(),
    })
}

/// Twice differentiable objective on `ℝⁿ`.
pub trait SmoothObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> SparseMatrix;
}

/// Update rule `μ ← θ(μ)` for the standalone barrier method.
#[derive(Debug, Clone, PartialEq)]
pub enum MuRule {
    /// `θ(μ) = α μ`
    Contraction(f64),
    /// Visit the listed values in order, then contract by `then`.
    Sequence { values: Vec<f64>, then: f64 },
}

impl MuRule {
    fn next(&self, mu: f64) -> f64 {
        match self {
            MuRule::Contraction(alpha) => alpha * mu,
            MuRule::Sequence { values, then } => values
                .iter()
                .copied()
                .find(|&v| v < mu)
                .unwrap_or(then * mu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    pub newton: NewtonConfig,
    /// Optional fraction-to-the-boundary damping factor (e.g. 0.995). Off by
    /// default: a step that leaves the interior counts as divergence.
    pub fraction_to_boundary: Option<f64>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            fraction_to_boundary: None,
        }
    }
}

/// Solution of one barrier subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemRecord {
    pub mu: f64,
    pub x: Vec<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierRun {
    pub x: Vec<f64>,
    pub duals: DualPair,
    pub subproblems: Vec<SubproblemRecord>,
}

fn max_step_to_boundary(values: &[f64], steps: &[f64], tau: f64) -> f64 {
    values
        .iter()
        .zip(steps)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -tau * v / d)
        .fold(1.0, f64::min)
}

/// Primal-dual barrier method: decrease μ from `mu0` with `rule` and solve
/// each perturbed KKT system with full Newton steps until `mu_inf` is reached.
pub fn run_pd_barrier<O: SmoothObjective + ?Sized>(
    objective: &O,
    x0: &[f64],
    bounds: &BoxConstraints,
    rule: &MuRule,
    mu0: f64,
    mu_inf: f64,
    cfg: &BarrierConfig,
) -> Result<BarrierRun, BarrierError> {
    if let Some(index) = (0..x0.len()).find(|&i| !(x0[i] > bounds.lower[i] && x0[i] < bounds.upper[i])) {
        return Err(BarrierError::NonInterior {
            index,
            value: x0[index],
        });
    }
    if !(mu0 >= mu_inf && mu_inf > 0.0) {
        return Err(BarrierError::InvalidSchedule(format!(
            "need mu0 >= mu_inf > 0, got mu0={mu0}, mu_inf={mu_inf}"
        )));
    }

    let n = x0.len();
    let mut x = x0.to_vec();
    let mut duals = DualPair::from_barrier(bounds, &x, mu0);
    let mut mu = mu0;
    let mut subproblems = Vec::new();

    while mu > mu_inf {
        mu = rule.next(mu).max(mu_inf);
        let mut iterations = 0;
        let mut residual = pd_residual_box(&objective.gradient(&x), &x, bounds, &duals, mu);
        let mut norm = sparse::norm2(&residual);
        let mut best = norm;
        let fail = |reason, iterations, history: &Vec<SubproblemRecord>| BarrierError::Diverged {
            mu,
            reason,
            iterations,
            history: history.clone(),
        };
        while norm > cfg.newton.tol {
            if iterations == cfg.newton.max_iter {
                return Err(fail(DivergenceReason::MaxIterations, iterations, &subproblems));
            }
            let step = match pd_newton_step_box(
                &objective.hessian(&x),
                &objective.gradient(&x),
                &x,
                bounds,
                &duals,
                mu,
            ) {
                Ok(s) => s,
                Err(BarrierError::Sparse(SparseError::Singular { .. })) => {
                    return Err(fail(DivergenceReason::SingularJacobian, iterations, &subproblems))
                }
                Err(e) => return Err(e),
            };
            let alpha = match cfg.fraction_to_boundary {
                Some(tau) => {
                    let ca = bounds.lower_slack(&x);
                    let cb = bounds.upper_slack(&x);
                    let neg_dx: Vec<f64> = step.dx.iter().map(|d| -d).collect();
                    max_step_to_boundary(&ca, &step.dx, tau)
                        .min(max_step_to_boundary(&cb, &neg_dx, tau))
                        .min(max_step_to_boundary(&duals.z_lower, &step.dz_lower, tau))
                        .min(max_step_to_boundary(&duals.z_upper, &step.dz_upper, tau))
                }
                None => 1.0,
            };
            for i in 0..n {
                x[i] += alpha * step.dx[i];
                duals.z_lower[i] += alpha * step.dz_lower[i];
                duals.z_upper[i] += alpha * step.dz_upper[i];
            }
            iterations += 1;
            if !bounds.strictly_inside(&x) || !duals.positive() {
                return Err(fail(DivergenceReason::LeftDomain, iterations, &subproblems));
            }
            residual = pd_residual_box(&objective.gradient(&x), &x, bounds, &duals, mu);
            norm = sparse::norm2(&residual);
            if !norm.is_finite() {
                return Err(fail(DivergenceReason::NotFinite, iterations, &subproblems));
            }
            if norm > cfg.newton.divergence_growth * best {
                return Err(fail(DivergenceReason::ResidualGrowth, iterations, &subproblems));
            }
            best = best.min(norm);
        }
        log::debug!("barrier subproblem mu={mu:e}: x[0]={} after {iterations} steps", x[0]);
        subproblems.push(SubproblemRecord {
            mu,
            x: x.clone(),
            newton_iters: iterations,
            residual_norm: norm,
        });
    }

    Ok(BarrierRun {
        x,
        duals,
        subproblems,
    })
}
