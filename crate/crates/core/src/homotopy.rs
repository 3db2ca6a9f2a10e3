//! Predictor-corrector tracing of a homotopy zero curve `H(x, t) = 0` from
//! `t = 0` to `t = 1`.

use thiserror::Error;

use crate::sparse::{self, LuFactors, SparseMatrix};

/// A residual map together with its derivatives in `x` and `t`.
pub trait HomotopyProblem {
    fn dim(&self) -> usize;

    fn residual(&self, x: &[f64], t: f64) -> Vec<f64>;

    fn jacobian(&self, x: &[f64], t: f64) -> SparseMatrix;

    /// Partial derivative `∂H/∂t`.
    fn dh_dt(&self, x: &[f64], t: f64) -> Vec<f64>;

    /// Whether an iterate may be accepted; Newton iterates that fail this are
    /// treated as divergence.
    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }

    /// Barrier parameter attached to `t`, reported in traces.
    fn barrier_parameter(&self, _t: f64) -> Option<f64> {
        None
    }
}

/// `H(x, t) = F(x) − (1 − t) F(x₀)`.
pub struct GlobalHomotopy<F, J> {
    f: F,
    jf: J,
    anchor: Vec<f64>,
}

pub fn global_homotopy<F, J>(f: F, jf: J, x0: &[f64]) -> GlobalHomotopy<F, J>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> SparseMatrix,
{
    let anchor = f(x0);
    GlobalHomotopy { f, jf, anchor }
}

impl<F, J> GlobalHomotopy<F, J> {
    /// The frozen value `F(x₀)`.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }
}

impl<F, J> HomotopyProblem for GlobalHomotopy<F, J>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> SparseMatrix,
{
    fn dim(&self) -> usize {
        self.anchor.len()
    }

    fn residual(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.f)(x)
            .iter()
            .zip(&self.anchor)
            .map(|(fx, a)| fx - (1.0 - t) * a)
            .collect()
    }

    fn jacobian(&self, x: &[f64], _t: f64) -> SparseMatrix {
        (self.jf)(x)
    }

    fn dh_dt(&self, _x: &[f64], _t: f64) -> Vec<f64> {
        self.anchor.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Absolute tolerance on the Euclidean residual norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence is declared once the residual exceeds this multiple of the
    /// smallest residual seen in the current solve.
    pub divergence_growth: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20,
            divergence_growth: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    MaxIterations,
    SingularJacobian,
    ResidualGrowth,
    NotFinite,
    LeftDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectorOutcome {
    Converged {
        x: Vec<f64>,
        iterations: usize,
        residual_norm: f64,
    },
    Diverged {
        reason: DivergenceReason,
        iterations: usize,
        residual_norm: f64,
    },
}

impl CorrectorOutcome {
    pub fn iterations(&self) -> usize {
        match self {
            Self::Converged { iterations, .. } | Self::Diverged { iterations, .. } => *iterations,
        }
    }

    pub fn residual_norm(&self) -> f64 {
        match self {
            Self::Converged { residual_norm, .. } | Self::Diverged { residual_norm, .. } => {
                *residual_norm
            }
        }
    }
}

/// Full-step Newton iteration on `H(·, t) = 0`, without line search.
pub fn newton_corrector<P: HomotopyProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    t: f64,
    cfg: &NewtonConfig,
) -> CorrectorOutcome {
    let mut x = x.to_vec();
    let diverged = |reason, iterations, residual_norm| CorrectorOutcome::Diverged {
        reason,
        iterations,
        residual_norm,
    };
    if !problem.admissible(&x) {
        return diverged(DivergenceReason::LeftDomain, 0, f64::INFINITY);
    }
    let mut r = problem.residual(&x, t);
    let mut norm = sparse::norm2(&r);
    if !norm.is_finite() {
        return diverged(DivergenceReason::NotFinite, 0, norm);
    }
    let mut best = norm;
    let mut iterations = 0;
    while norm > cfg.tol {
        if iterations == cfg.max_iter {
            return diverged(DivergenceReason::MaxIterations, iterations, norm);
        }
        let jac = problem.jacobian(&x, t);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = match sparse::solve_direct(&jac, &rhs) {
            Ok(dx) => dx,
            Err(_) => return diverged(DivergenceReason::SingularJacobian, iterations, norm),
        };
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        iterations += 1;
        if !problem.admissible(&x) {
            return diverged(DivergenceReason::LeftDomain, iterations, norm);
        }
        r = problem.residual(&x, t);
        norm = sparse::norm2(&r);
        log::trace!("newton {iterations} at t={t}: |H|={norm:e}");
        if !norm.is_finite() {
            return diverged(DivergenceReason::NotFinite, iterations, norm);
        }
        if norm > cfg.divergence_growth * best {
            return diverged(DivergenceReason::ResidualGrowth, iterations, norm);
        }
        best = best.min(norm);
    }
    CorrectorOutcome::Converged {
        x,
        iterations,
        residual_norm: norm,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x: Vec<f64>,
    /// Set when the tangent could not be computed and `x` was reused.
    pub fell_back: bool,
}

/// First-order predictor `x + dt x'` with `H_x x' = −H_t`.
pub fn tangent_predictor<P: HomotopyProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    t: f64,
    dt: f64,
) -> Prediction {
    let jac = problem.jacobian(x, t);
    let rhs: Vec<f64> = problem.dh_dt(x, t).iter().map(|v| -v).collect();
    match LuFactors::factor(&jac).and_then(|lu| lu.solve(&rhs)) {
        Ok(dxdt) => Prediction {
            x: x.iter().zip(&dxdt).map(|(xi, vi)| xi + dt * vi).collect(),
            fell_back: false,
        },
        Err(_) => Prediction {
            x: x.to_vec(),
            fell_back: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictorOrder {
    /// Reuse the last accepted point.
    #[default]
    Zero,
    /// Tangent predictor.
    First,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("step sizes must satisfy 0 < dt_init <= dt_max, got dt_init={dt_init}, dt_max={dt_max}")]
    InvalidSteps { dt_init: f64, dt_max: f64 },
    #[error("growth must be >= 1 and shrink in (0, 1), got growth={growth}, shrink={shrink}")]
    InvalidFactors { growth: f64, shrink: f64 },
}

/// Adaptive step rule on the homotopy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub dt_init: f64,
    pub dt_max: f64,
    pub growth: f64,
    pub shrink: f64,
    pub dt_min: f64,
    dt: f64,
    landmarks: Vec<f64>,
}

impl StepController {
    pub fn new(dt_init: f64, dt_max: f64) -> Result<Self, StepError> {
        Self::with_factors(dt_init, dt_max, 1.5, 0.5, 1e-8)
    }

    pub fn with_factors(
        dt_init: f64,
        dt_max: f64,
        growth: f64,
        shrink: f64,
        dt_min: f64,
    ) -> Result<Self, StepError> {
        if !(dt_init > 0.0 && dt_init <= dt_max) {
            return Err(StepError::InvalidSteps { dt_init, dt_max });
        }
        if !(growth >= 1.0 && shrink > 0.0 && shrink < 1.0) {
            return Err(StepError::InvalidFactors { growth, shrink });
        }
        Ok(Self {
            dt_init,
            dt_max,
            growth,
            shrink,
            dt_min,
            dt: dt_init,
            landmarks: Vec::new(),
        })
    }

    /// Parameter values the controller must land on exactly.
    pub fn with_landmarks(mut self, mut landmarks: Vec<f64>) -> Self {
        landmarks.retain(|t| *t > 0.0 && *t < 1.0);
        landmarks.sort_by(f64::total_cmp);
        self.landmarks = landmarks;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `θ(t) = min(t + dt, 1)`, further clipped to the next landmark.
    pub fn next_t(&self, t: f64) -> f64 {
        let mut next = (t + self.dt).min(1.0);
        if let Some(&mark) = self.landmarks.iter().find(|&&m| m > t) {
            next = next.min(mark);
        }
        next
    }

    pub fn accept(&mut self) {
        self.dt = (self.growth * self.dt).min(self.dt_max);
    }

    /// Halves the increment that was just attempted.
    pub fn reject(&mut self, attempted: f64) {
        self.dt = self.shrink * attempted;
    }

    pub fn underflowed(&self) -> bool {
        self.dt < self.dt_min
    }
}

/// One attempted step of the tracer.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based attempt counter.
    pub index: usize,
    pub t: f64,
    pub dt: f64,
    pub mu: Option<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub accepted: bool,
    pub predictor_fallback: bool,
    pub divergence: Option<DivergenceReason>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn num_accepted(&self) -> usize {
        self.accepted().count()
    }

    pub fn num_rejected(&self) -> usize {
        self.records.len() - self.num_accepted()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("starting point is not on the zero curve (residual {residual_norm:e})")]
    InconsistentStart { residual_norm: f64 },
    #[error("step size fell below {dt_min:e} at t = {t}")]
    StepUnderflow {
        t: f64,
        dt_min: f64,
        trace: SolveTrace,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub x: Vec<f64>,
    pub trace: SolveTrace,
}

pub fn trace<P: HomotopyProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    controller: StepController,
    cfg: &NewtonConfig,
    predictor: PredictorOrder,
) -> Result<TraceResult, TraceError> {
    trace_with_observer(problem, x0, controller, cfg, predictor, |_, _| {})
}

/// Traces the zero curve; `on_accept(x, t)` runs after every accepted step.
///
/// A rejected step restarts from the last accepted point with half the
/// attempted increment.
pub fn trace_with_observer<P, O>(
    problem: &P,
    x0: &[f64],
    mut controller: StepController,
    cfg: &NewtonConfig,
    predictor: PredictorOrder,
    mut on_accept: O,
) -> Result<TraceResult, TraceError>
where
    P: HomotopyProblem + ?Sized,
    O: FnMut(&[f64], f64),
{
    let start = sparse::norm2(&problem.residual(x0, 0.0));
    if !(start <= cfg.tol) {
        return Err(TraceError::InconsistentStart {
            residual_norm: start,
        });
    }

    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut records = Vec::new();
    while t < 1.0 {
        let t_next = controller.next_t(t);
        let dt = if t_next == t + controller.dt() {
            controller.dt()
        } else {
            t_next - t
        };
        let guess = match predictor {
            PredictorOrder::Zero => Prediction {
                x: x.clone(),
                fell_back: false,
            },
            PredictorOrder::First => {
                let p = tangent_predictor(problem, &x, t, dt);
                if p.fell_back || problem.admissible(&p.x) {
                    p
                } else {
                    Prediction {
                        x: x.clone(),
                        fell_back: true,
                    }
                }
            }
        };
        let outcome = newton_corrector(problem, &guess.x, t_next, cfg);
        let mut record = TraceRecord {
            index: records.len() + 1,
            t: t_next,
            dt,
            mu: problem.barrier_parameter(t_next),
            newton_iters: outcome.iterations(),
            residual_norm: outcome.residual_norm(),
            accepted: false,
            predictor_fallback: guess.fell_back,
            divergence: None,
        };
        match outcome {
            CorrectorOutcome::Converged { x: xn, .. } => {
                record.accepted = true;
                log::debug!(
                    "step {} accepted: t={t_next} dt={dt:e} iters={} |H|={:e}",
                    record.index,
                    record.newton_iters,
                    record.residual_norm
                );
                records.push(record);
                x = xn;
                t = t_next;
                controller.accept();
                on_accept(&x, t);
            }
            CorrectorOutcome::Diverged { reason, .. } => {
                record.divergence = Some(reason);
                log::debug!(
                    "step {} rejected at t={t_next} dt={dt:e}: {reason:?}",
                    record.index
                );
                records.push(record);
                controller.reject(dt);
                if controller.underflowed() {
                    return Err(TraceError::StepUnderflow {
                        t,
                        dt_min: controller.dt_min,
                        trace: SolveTrace { records },
                    });
                }
            }
        }
    }
    Ok(TraceResult {
        x,
        trace: SolveTrace { records },
    })
}
