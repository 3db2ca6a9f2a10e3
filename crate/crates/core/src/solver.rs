//! Barrier-homotopy driver for the density problem.
//!
//! The unknown is `x = [ρ; u; p; zᵃ; zᵇ]` and the traced map is
//!
//! ```text
//! H(x, t) = [ ∂L/∂ρ − zᵃ + zᵇ − (1 − t) r₀ ]
//!           [ ∂L/∂u                         ]
//!           [ ∂L/∂p                         ]
//!           [ zᵃ ⊙ ρ − μ(t)                 ]
//!           [ zᵇ ⊙ (1 − ρ) − μ(t)           ]
//! ```
//!
//! where `r₀` is the stationarity residual at the initial point.

use thiserror::Error;

use crate::barrier::{BarrierError, BarrierSchedule};
use crate::config::{ConfigError, SolverConfig};
use crate::homotopy::{
    self, HomotopyProblem, NewtonConfig, SolveTrace, StepController, StepError, TraceError,
};
use crate::lagrangian::{Lagrangian, ProblemError};
use crate::mesh::{build_structured_mesh, DomainSpec, MeshError};
use crate::sparse::{self, Block, BlockSystem, SparseError, SparseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("initial density must lie strictly inside (0, 1)")]
    InitialDensity,
}

/// Approximate KKT point `(ρ, u, p, zᵃ, zᵇ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub p_adj: Vec<f64>,
    pub z_a: Vec<f64>,
    pub z_b: Vec<f64>,
}

impl KktPoint {
    pub fn to_vector(&self) -> Vec<f64> {
        [&self.rho[..], &self.u, &self.p_adj, &self.z_a, &self.z_b].concat()
    }

    pub fn from_vector(n: usize, l: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), 3 * n + 2 * l, "KKT vector has wrong length");
        let (rho, rest) = x.split_at(n);
        let (u, rest) = rest.split_at(l);
        let (p_adj, rest) = rest.split_at(l);
        let (z_a, z_b) = rest.split_at(n);
        Self {
            rho: rho.to_vec(),
            u: u.to_vec(),
            p_adj: p_adj.to_vec(),
            z_a: z_a.to_vec(),
            z_b: z_b.to_vec(),
        }
    }

    pub fn is_interior(&self) -> bool {
        self.rho.iter().all(|&r| r > 0.0 && r < 1.0)
            && self.z_a.iter().chain(&self.z_b).all(|&z| z > 0.0)
    }

    /// `max_i max(|zᵃᵢρᵢ − μ|, |zᵇᵢ(1 − ρᵢ) − μ|)`.
    pub fn complementarity_defect(&self, mu: f64) -> f64 {
        self.rho
            .iter()
            .zip(self.z_a.iter().zip(&self.z_b))
            .map(|(r, (za, zb))| (za * r - mu).abs().max((zb * (1.0 - r) - mu).abs()))
            .fold(0.0, f64::max)
    }
}

/// Frozen stationarity residual of the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyAnchor {
    r0: Vec<f64>,
}

impl HomotopyAnchor {
    pub fn values(&self) -> &[f64] {
        &self.r0
    }
}

/// Constant density, state and adjoint solves, and `z = μ₀ ⊘ c(ρ)`.
pub fn initialize(
    lag: &Lagrangian,
    rho0: f64,
    mu0: f64,
) -> Result<(KktPoint, HomotopyAnchor), SolverError> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(SolverError::InitialDensity);
    }
    let n = lag.n();
    let rho = vec![rho0; n];
    let u = lag.solve_state(&rho)?;
    let p_adj = lag.solve_adjoint(&rho)?;
    let point = KktPoint {
        z_a: rho.iter().map(|r| mu0 / r).collect(),
        z_b: rho.iter().map(|r| mu0 / (1.0 - r)).collect(),
        rho,
        u,
        p_adj,
    };
    let g = lag.gradient(&point.rho, &point.u, &point.p_adj)?;
    let r0 = (0..n)
        .map(|i| g.d_rho[i] - point.z_a[i] + point.z_b[i])
        .collect();
    Ok((point, HomotopyAnchor { r0 }))
}

/// Unanchored primal-dual residual `F_box(x; μ)`.
pub fn f_box(lag: &Lagrangian, point: &KktPoint, mu: f64) -> Result<Vec<f64>, SolverError> {
    let g = lag.gradient(&point.rho, &point.u, &point.p_adj)?;
    let n = lag.n();
    let mut r = Vec::with_capacity(3 * n + 2 * lag.l());
    r.extend((0..n).map(|i| g.d_rho[i] - point.z_a[i] + point.z_b[i]));
    r.extend_from_slice(&g.d_u);
    r.extend_from_slice(&g.d_p);
    r.extend((0..n).map(|i| point.z_a[i] * point.rho[i] - mu));
    r.extend((0..n).map(|i| point.z_b[i] * (1.0 - point.rho[i]) - mu));
    Ok(r)
}

pub fn residual(
    lag: &Lagrangian,
    point: &KktPoint,
    anchor: &HomotopyAnchor,
    t: f64,
    schedule: &BarrierSchedule,
) -> Result<Vec<f64>, SolverError> {
    let mut r = f_box(lag, point, schedule.mu(t))?;
    if t != 1.0 {
        let w = 1.0 - t;
        r.iter_mut().zip(&anchor.r0).for_each(|(ri, a)| *ri -= w * a);
    }
    Ok(r)
}

pub fn jacobian(lag: &Lagrangian, point: &KktPoint) -> Result<BlockSystem, SolverError> {
    let (n, l) = (lag.n(), lag.l());
    let h = lag.hessian(&point.rho, &point.u, &point.p_adj)?;
    let mut sys = BlockSystem::new([("rho", n), ("u", l), ("p", l), ("z_a", n), ("z_b", n)]);
    sys.set(0, 0, Block::Sparse(h.rho_rho))?;
    sys.set(0, 1, Block::Sparse(h.rho_u.clone()))?;
    sys.set(0, 2, Block::Sparse(h.rho_p.clone()))?;
    sys.set(0, 3, Block::Identity(-1.0))?;
    sys.set(0, 4, Block::Identity(1.0))?;
    sys.set(1, 0, Block::Sparse(h.rho_u.transpose()))?;
    sys.set(1, 2, Block::Sparse(h.u_p.transpose()))?;
    sys.set(2, 0, Block::Sparse(h.rho_p.transpose()))?;
    sys.set(2, 1, Block::Sparse(h.u_p))?;
    sys.set(3, 0, Block::Diagonal(point.z_a.clone()))?;
    sys.set(3, 3, Block::Diagonal(point.rho.clone()))?;
    sys.set(4, 0, Block::Diagonal(point.z_b.iter().map(|z| -z).collect()))?;
    sys.set(4, 4, Block::Diagonal(point.rho.iter().map(|r| 1.0 - r).collect()))?;
    Ok(sys)
}

/// `∂H/∂t = [r₀; 0; 0; −μ'(t); −μ'(t)]`.
pub fn h_t(
    lag: &Lagrangian,
    anchor: &HomotopyAnchor,
    t: f64,
    schedule: &BarrierSchedule,
) -> Vec<f64> {
    let (n, l) = (lag.n(), lag.l());
    let dmu = schedule.dmu_dt(t);
    let mut v = Vec::with_capacity(3 * n + 2 * l);
    v.extend_from_slice(&anchor.r0);
    v.extend(std::iter::repeat(0.0).take(2 * l));
    v.extend(std::iter::repeat(-dmu).take(2 * n));
    v
}

/// The traced map as a [`HomotopyProblem`].
pub struct BarrierHomotopy<'a> {
    lag: &'a Lagrangian,
    anchor: HomotopyAnchor,
    schedule: BarrierSchedule,
}

impl<'a> BarrierHomotopy<'a> {
    pub fn new(lag: &'a Lagrangian, anchor: HomotopyAnchor, schedule: BarrierSchedule) -> Self {
        Self {
            lag,
            anchor,
            schedule,
        }
    }

    fn point(&self, x: &[f64]) -> KktPoint {
        KktPoint::from_vector(self.lag.n(), self.lag.l(), x)
    }
}

impl HomotopyProblem for BarrierHomotopy<'_> {
    fn dim(&self) -> usize {
        3 * self.lag.n() + 2 * self.lag.l()
    }

    fn residual(&self, x: &[f64], t: f64) -> Vec<f64> {
        residual(self.lag, &self.point(x), &self.anchor, t, &self.schedule)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn jacobian(&self, x: &[f64], _t: f64) -> SparseMatrix {
        let dim = x.len();
        jacobian(self.lag, &self.point(x))
            .ok()
            .and_then(|sys| sys.assemble().ok())
            .unwrap_or_else(|| SparseMatrix::zeros(dim, dim))
    }

    fn dh_dt(&self, _x: &[f64], t: f64) -> Vec<f64> {
        h_t(self.lag, &self.anchor, t, &self.schedule)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let n = self.lag.n();
        let l = self.lag.l();
        x[..n].iter().all(|&r| r > 0.0 && r < 1.0)
            && x[n + 2 * l..].iter().all(|&z| z > 0.0)
    }

    fn barrier_parameter(&self, t: f64) -> Option<f64> {
        Some(self.schedule.mu(t))
    }
}

pub fn build_lagrangian(cfg: &SolverConfig) -> Result<Lagrangian, SolverError> {
    cfg.validate()?;
    let spec = DomainSpec::bridge();
    let mesh = build_structured_mesh(&spec, cfg.nx, cfg.ny, cfg.diagonal)?;
    Ok(Lagrangian::new(mesh, &spec, cfg.material, cfg.params)?)
}

pub fn schedule(cfg: &SolverConfig) -> Result<BarrierSchedule, SolverError> {
    Ok(BarrierSchedule::new(cfg.mu0, cfg.mu_inf, cfg.schedule)?)
}

/// Absolute Newton tolerance for a system of dimension `dim`.
pub fn scaled_tolerance(cfg: &SolverConfig, dim: usize) -> f64 {
    cfg.newton.tol * (dim as f64).sqrt()
}

/// Density captured at the first accepted `t` at or past `requested`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub t: f64,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub lagrangian: Lagrangian,
    pub initial: KktPoint,
    pub point: KktPoint,
    pub trace: SolveTrace,
    pub snapshots: Vec<Snapshot>,
    pub tol: f64,
}

impl SolveOutcome {
    pub fn initial_objective(&self) -> f64 {
        self.lagrangian.objective(&self.initial.rho, &self.initial.u)
    }

    pub fn final_objective(&self) -> f64 {
        self.lagrangian.objective(&self.point.rho, &self.point.u)
    }
}

pub fn run(cfg: &SolverConfig) -> Result<(KktPoint, SolveTrace), SolverError> {
    solve(cfg).map(|o| (o.point, o.trace))
}

pub fn solve(cfg: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let lag = build_lagrangian(cfg)?;
    let schedule = schedule(cfg)?;
    let (initial, anchor) = initialize(&lag, cfg.rho0, cfg.mu0)?;
    let controller =
        StepController::with_factors(cfg.dt_init, cfg.dt_max, cfg.growth, cfg.shrink, cfg.dt_min)?;

    let problem = BarrierHomotopy::new(&lag, anchor, schedule);
    let x0 = initial.to_vector();
    let tol = scaled_tolerance(cfg, x0.len());
    let newton = NewtonConfig { tol, ..cfg.newton };
    log::info!(
        "mesh {}x{}: {} densities, {} displacements, {} unknowns, tol {tol:e}",
        cfg.nx,
        cfg.ny,
        lag.n(),
        lag.l(),
        x0.len()
    );

    let mut requested: Vec<f64> = cfg.snapshots.clone();
    requested.sort_by(f64::total_cmp);
    requested.dedup();
    let mut snapshots = Vec::new();
    let mut pending = requested.into_iter().peekable();
    let mut capture = |x: &[f64], t: f64| {
        while let Some(&want) = pending.peek() {
            if t < want {
                break;
            }
            snapshots.push(Snapshot {
                requested: want,
                t,
                rho: x[..lag.n()].to_vec(),
            });
            pending.next();
        }
    };
    capture(&x0, 0.0);

    let result =
        homotopy::trace_with_observer(&problem, &x0, controller, &newton, cfg.predictor, |x, t| {
            capture(x, t)
        })?;
    let trace = result.trace;
    log::info!(
        "reached t = 1 after {} accepted of {} attempted steps",
        trace.num_accepted(),
        trace.len()
    );
    let point = KktPoint::from_vector(lag.n(), lag.l(), &result.x);
    Ok(SolveOutcome {
        lagrangian: lag,
        initial,
        point,
        trace,
        snapshots,
        tol,
    })
}

/// Fraction of densities in `(0.1, 0.9)`.
pub fn intermediate_fraction(rho: &[f64]) -> f64 {
    let count = rho.iter().filter(|&&r| r > 0.1 && r < 0.9).count();
    count as f64 / rho.len() as f64
}

/// `max_i |ρ(xᵢ, yᵢ) − ρ(W − xᵢ, yᵢ)|` on a mirror-symmetric grid.
pub fn symmetry_defect(lag: &Lagrangian, rho: &[f64]) -> f64 {
    (0..rho.len())
        .map(|v| (rho[v] - rho[lag.mesh.mirror_vertex(v)]).abs())
        .fold(0.0, f64::max)
}

/// Residual norm of `F_box` at `μ`.
pub fn kkt_residual_norm(lag: &Lagrangian, point: &KktPoint, mu: f64) -> Result<f64, SolverError> {
    Ok(sparse::norm2(&f_box(lag, point, mu)?))
}
