//! Discrete Lagrangian of the regularized compliance problem
//!
//! `L(ρ, u, p) = fᵀu + γ cᵀρ + (β/2) [ε ρᵀK_ρ ρ + (cᵀρ − ρᵀMρ)/ε] + pᵀ(K(ρ)u − f)`
//!
//! together with its gradient and second-derivative blocks. All
//! density-dependent integrals use the six-point rule from [`crate::fem`],
//! the same rule used by the state operator.

use thiserror::Error;

use crate::fem::{self, DofMap, ElementKernels, FemError, GlOperators, MaterialModel, QUADRATURE};
use crate::mesh::{DomainSpec, TriMesh};
use crate::sparse::{self, Block, BlockSystem, SparseError, SparseMatrix, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Weights of the volume and phase-field terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            gamma: 9.75,
            beta: 0.5,
            epsilon: 0.0075,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProblemError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlocks {
    pub d_rho: Vec<f64>,
    /// Adjoint equation residual `f + K(ρ)ᵀ p`.
    pub d_u: Vec<f64>,
    /// State equation residual `K(ρ) u − f`.
    pub d_p: Vec<f64>,
}

impl GradientBlocks {
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.d_rho.len() + 2 * self.d_u.len());
        v.extend_from_slice(&self.d_rho);
        v.extend_from_slice(&self.d_u);
        v.extend_from_slice(&self.d_p);
        v
    }
}

/// Second derivatives; `∂²L/∂u²` and `∂²L/∂p²` vanish for compliance.
#[derive(Debug, Clone)]
pub struct HessianBlocks {
    pub rho_rho: SparseMatrix,
    pub rho_u: SparseMatrix,
    pub rho_p: SparseMatrix,
    /// `∂²L/∂u∂p = K(ρ)`.
    pub u_p: SparseMatrix,
}

impl HessianBlocks {
    /// The symmetric 3×3 block matrix over `(ρ, u, p)`.
    pub fn super_block(&self) -> Result<SparseMatrix, SparseError> {
        let (n, l) = (self.rho_rho.nrows(), self.u_p.nrows());
        let mut sys = BlockSystem::new([("rho", n), ("u", l), ("p", l)]);
        sys.set(0, 0, Block::Sparse(self.rho_rho.clone()))?;
        sys.set(0, 1, Block::Sparse(self.rho_u.clone()))?;
        sys.set(0, 2, Block::Sparse(self.rho_p.clone()))?;
        sys.set(1, 0, Block::Sparse(self.rho_u.transpose()))?;
        sys.set(1, 2, Block::Sparse(self.u_p.clone()))?;
        sys.set(2, 0, Block::Sparse(self.rho_p.transpose()))?;
        sys.set(2, 1, Block::Sparse(self.u_p.transpose()))?;
        sys.assemble()
    }
}

/// Everything needed to evaluate the Lagrangian on one mesh.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    pub mesh: TriMesh,
    pub dofs: DofMap,
    pub material: MaterialModel,
    pub params: ProblemParams,
    pub gl: GlOperators,
    /// Traction load vector `f`.
    pub load: Vec<f64>,
    kernels: Vec<ElementKernels>,
}

/// Quadrature moments of the interpolation derivatives on one element:
/// `∫ (ρᵖ)' φ_a` and `∫ (ρᵖ)'' φ_a φ_b`.
struct PowerMoments {
    first: [f64; 3],
    second: [[f64; 3]; 3],
}

fn power_moments(el: &ElementKernels, material: &MaterialModel, rho: &[f64]) -> PowerMoments {
    let local = el.geometry.vertices.map(|v| rho[v]);
    let area = el.geometry.area;
    let mut first = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    for (bary, w) in QUADRATURE {
        let r = bary[0] * local[0] + bary[1] * local[1] + bary[2] * local[2];
        let (_, d1, d2) = material.power(r);
        for a in 0..3 {
            first[a] += area * w * d1 * bary[a];
            for b in 0..3 {
                second[a][b] += area * w * d2 * bary[a] * bary[b];
            }
        }
    }
    PowerMoments { first, second }
}

impl Lagrangian {
    pub fn new(
        mesh: TriMesh,
        spec: &DomainSpec,
        material: MaterialModel,
        params: ProblemParams,
    ) -> Result<Self, ProblemError> {
        material.validate()?;
        params.validate()?;
        let dofs = DofMap::new(&mesh);
        let gl = fem::assemble_gl_operators(&mesh, &dofs);
        let load = fem::assemble_traction_load(&mesh, &dofs, spec);
        let kernels = fem::element_kernels(&mesh, &dofs);
        Ok(Self {
            mesh,
            dofs,
            material,
            params,
            gl,
            load,
            kernels,
        })
    }

    /// Number of density unknowns.
    pub fn n(&self) -> usize {
        self.dofs.n_density()
    }

    /// Number of displacement (and adjoint) unknowns.
    pub fn l(&self) -> usize {
        self.dofs.n_disp()
    }

    pub fn state_operator(&self, rho: &[f64]) -> Result<SparseMatrix, ProblemError> {
        Ok(fem::assemble_state_operator_with(
            &self.kernels,
            &self.dofs,
            &self.material,
            rho,
        )?)
    }

    pub fn solve_state(&self, rho: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let k = self.state_operator(rho)?;
        Ok(sparse::solve_direct(&k, &self.load)?)
    }

    /// Solves the adjoint equation `K(ρ)ᵀ p = −f`.
    pub fn solve_adjoint(&self, rho: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let kt = self.state_operator(rho)?.transpose();
        let rhs: Vec<f64> = self.load.iter().map(|v| -v).collect();
        Ok(sparse::solve_direct(&kt, &rhs)?)
    }

    pub fn compliance(&self, u: &[f64]) -> f64 {
        sparse::dot(&self.load, u)
    }

    /// Phase-field energy `ε ρᵀK_ρ ρ + (cᵀρ − ρᵀMρ)/ε`.
    pub fn ginzburg_landau(&self, rho: &[f64]) -> f64 {
        let eps = self.params.epsilon;
        let grad = sparse::dot(rho, &self.gl.stiffness.matvec(rho));
        let well = sparse::dot(&self.gl.lumped, rho) - sparse::dot(rho, &self.gl.mass.matvec(rho));
        eps * grad + well / eps
    }

    /// Objective `J(ρ, u)`.
    pub fn objective(&self, rho: &[f64], u: &[f64]) -> f64 {
        let ProblemParams { gamma, beta, .. } = self.params;
        self.compliance(u)
            + gamma * sparse::dot(&self.gl.lumped, rho)
            + 0.5 * beta * self.ginzburg_landau(rho)
    }

    /// `L(ρ, u, p) = J(ρ, u) + pᵀ(K(ρ)u − f)`.
    pub fn value(&self, rho: &[f64], u: &[f64], p: &[f64]) -> Result<f64, ProblemError> {
        let ku = self.state_operator(rho)?.matvec(u);
        let residual: Vec<f64> = ku.iter().zip(&self.load).map(|(a, b)| a - b).collect();
        Ok(self.objective(rho, u) + sparse::dot(p, &residual))
    }

    fn coupling_coefficient(&self, divdiv: f64, strain: f64) -> f64 {
        let m = &self.material;
        (m.lambda1 - m.lambda0) * divdiv + (m.mu1 - m.mu0) * strain
    }

    pub fn gradient(&self, rho: &[f64], u: &[f64], p: &[f64]) -> Result<GradientBlocks, ProblemError> {
        let ProblemParams { gamma, beta, epsilon } = self.params;
        let k = self.state_operator(rho)?;

        let k_rho = self.gl.stiffness.matvec(rho);
        let m_rho = self.gl.mass.matvec(rho);
        let mut d_rho: Vec<f64> = (0..self.n())
            .map(|i| {
                let c = self.gl.lumped[i];
                gamma * c + beta * (epsilon * k_rho[i] + (c - 2.0 * m_rho[i]) / (2.0 * epsilon))
            })
            .collect();

        for el in &self.kernels {
            let ul = el.geometry.gather(&self.dofs, u);
            let pl = el.geometry.gather(&self.dofs, p);
            let (dd, ee) = el.bilinear_parts(&ul, &pl);
            let kappa = self.coupling_coefficient(dd, ee);
            if kappa == 0.0 {
                continue;
            }
            let pm = power_moments(el, &self.material, rho);
            for a in 0..3 {
                d_rho[el.geometry.vertices[a]] += pm.first[a] * kappa;
            }
        }

        let d_u: Vec<f64> = k
            .matvec_transpose(p)
            .iter()
            .zip(&self.load)
            .map(|(kp, f)| f + kp)
            .collect();
        let d_p: Vec<f64> = k.matvec(u).iter().zip(&self.load).map(|(ku, f)| ku - f).collect();
        Ok(GradientBlocks { d_rho, d_u, d_p })
    }

    pub fn hessian(&self, rho: &[f64], u: &[f64], p: &[f64]) -> Result<HessianBlocks, ProblemError> {
        let ProblemParams { beta, epsilon, .. } = self.params;
        let (n, l) = (self.n(), self.l());
        let ne = self.kernels.len();

        let mut rr = Triplets::with_capacity(n, n, 9 * ne);
        let mut ru = Triplets::with_capacity(n, l, 18 * ne);
        let mut rp = Triplets::with_capacity(n, l, 18 * ne);

        for el in &self.kernels {
            let ul = el.geometry.gather(&self.dofs, u);
            let pl = el.geometry.gather(&self.dofs, p);
            let pm = power_moments(el, &self.material, rho);
            let verts = el.geometry.vertices;

            let (dd, ee) = el.bilinear_parts(&ul, &pl);
            let kappa = self.coupling_coefficient(dd, ee);
            if kappa != 0.0 {
                for a in 0..3 {
                    for b in 0..3 {
                        rr.push(verts[a], verts[b], pm.second[a][b] * kappa);
                    }
                }
            }

            // Columns against the adjoint give ∂²L/∂ρ∂u, against the state ∂²L/∂ρ∂p.
            for (target, other) in [(&mut ru, &pl), (&mut rp, &ul)] {
                let cols = el.bilinear_columns(other);
                for (bdof, &(cd, ce)) in cols.iter().enumerate() {
                    let Some(j) = el.dofs[bdof] else { continue };
                    let kb = self.coupling_coefficient(cd, ce);
                    if kb == 0.0 {
                        continue;
                    }
                    for a in 0..3 {
                        target.push(verts[a], j, pm.first[a] * kb);
                    }
                }
            }
        }

        let coupling = rr.finalize()?;
        let regular = self
            .gl
            .stiffness
            .scaled(beta * epsilon)
            .add_scaled(&self.gl.mass, -beta / epsilon)?;
        Ok(HessianBlocks {
            rho_rho: regular.add_scaled(&coupling, 1.0)?,
            rho_u: ru.finalize()?,
            rho_p: rp.finalize()?,
            u_p: self.state_operator(rho)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, DiagonalPattern};
    use rand::{Rng, SeedableRng};

    fn problem(nx: usize, ny: usize) -> Lagrangian {
        let spec = DomainSpec::bridge();
        let mesh = build_structured_mesh(&spec, nx, ny, DiagonalPattern::Forward).unwrap();
        Lagrangian::new(mesh, &spec, MaterialModel::default(), ProblemParams::default()).unwrap()
    }

    fn random_point(lag: &Lagrangian, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rho = (0..lag.n()).map(|_| rng.gen_range(0.1..0.9)).collect();
        let u = (0..lag.l()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = (0..lag.l()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (rho, u, p)
    }

    #[test]
    fn objective_closed_forms() {
        let lag = problem(20, 4);
        let (n, l) = (lag.n(), lag.l());
        let zero_u = vec![0.0; l];
        assert!(lag.objective(&vec![0.0; n], &zero_u).abs() < 1e-14);
        let full = lag.objective(&vec![1.0; n], &zero_u);
        assert!((full - 18.72).abs() < 1e-10, "{full}");
        let ProblemParams { gamma, beta, epsilon } = lag.params;
        let half = lag.objective(&vec![0.5; n], &zero_u);
        let expected = gamma * 0.96 + 0.5 * beta / epsilon * 0.25 * 1.92;
        assert!((half - expected).abs() < 1e-10, "{half} vs {expected}");
    }

    #[test]
    fn constant_half_density_gradient() {
        let lag = problem(20, 4);
        let (n, l) = (lag.n(), lag.l());
        let g = lag.gradient(&vec![0.5; n], &vec![0.0; l], &vec![0.0; l]).unwrap();
        for (gi, ci) in g.d_rho.iter().zip(&lag.gl.lumped) {
            assert!((gi - lag.params.gamma * ci).abs() < 1e-12);
        }
    }

    #[test]
    fn state_residual_vanishes_at_state_solution() {
        let lag = problem(20, 4);
        let (rho, _, p) = random_point(&lag, 1);
        let u = lag.solve_state(&rho).unwrap();
        let g = lag.gradient(&rho, &u, &p).unwrap();
        assert!(sparse::norm_inf(&g.d_p) < 1e-10);
        let (_, u_bad, _) = random_point(&lag, 2);
        let g = lag.gradient(&rho, &u_bad, &p).unwrap();
        assert!(sparse::norm_inf(&g.d_p) > 1e-3);
    }

    #[test]
    fn adjoint_equals_negative_state() {
        let lag = problem(20, 4);
        let (rho, _, _) = random_point(&lag, 3);
        let u = lag.solve_state(&rho).unwrap();
        let p = lag.solve_adjoint(&rho).unwrap();
        let g = lag.gradient(&rho, &u, &p).unwrap();
        assert!(sparse::norm_inf(&g.d_u) < 1e-10);
        assert!(sparse::norm_inf(&g.d_p) < 1e-10);
        let sum: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + b).collect();
        assert!(sparse::norm2(&sum) <= 1e-10 * sparse::norm2(&u));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let lag = problem(20, 3);
        let (rho, u, p) = random_point(&lag, 4);
        let g = lag.gradient(&rho, &u, &p).unwrap().stacked();
        let (n, l) = (lag.n(), lag.l());
        let h = 1e-6;
        let mut x: Vec<f64> = [rho.clone(), u.clone(), p.clone()].concat();
        let eval = |x: &[f64]| lag.value(&x[..n], &x[n..n + l], &x[n + l..]).unwrap();
        let scale = sparse::norm_inf(&g);
        for i in (0..x.len()).step_by(7) {
            let orig = x[i];
            x[i] = orig + h;
            let fp = eval(&x);
            x[i] = orig - h;
            let fm = eval(&x);
            x[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * scale, "entry {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hessian_without_state_reduces_to_phase_field() {
        let lag = problem(20, 3);
        let (rho, _, _) = random_point(&lag, 5);
        let zero = vec![0.0; lag.l()];
        let h = lag.hessian(&rho, &zero, &zero).unwrap();
        assert_eq!(h.rho_u.nnz(), 0);
        assert_eq!(h.rho_p.nnz(), 0);
        let ProblemParams { beta, epsilon, .. } = lag.params;
        let expected = lag
            .gl
            .stiffness
            .scaled(beta * epsilon)
            .add_scaled(&lag.gl.mass, -beta / epsilon)
            .unwrap();
        let diff = h.rho_rho.add_scaled(&expected, -1.0).unwrap();
        assert_eq!(diff.max_abs(), 0.0);
    }

    #[test]
    fn hessian_columns_match_gradient_differences() {
        let lag = problem(20, 3);
        let (rho, u, p) = random_point(&lag, 6);
        let (n, l) = (lag.n(), lag.l());
        let hess = lag.hessian(&rho, &u, &p).unwrap().super_block().unwrap();
        let dense = hess.to_dense();
        let scale = hess.max_abs();
        let mut x: Vec<f64> = [rho, u, p].concat();
        let grad = |x: &[f64]| {
            lag.gradient(&x[..n], &x[n..n + l], &x[n + l..])
                .unwrap()
                .stacked()
        };
        let h = 1e-6;
        for j in (0..x.len()).step_by(11) {
            let orig = x[j];
            x[j] = orig + h;
            let gp = grad(&x);
            x[j] = orig - h;
            let gm = grad(&x);
            x[j] = orig;
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!(
                    (fd - dense[i][j]).abs() <= 1e-5 * scale,
                    "({i},{j}): {fd} vs {}",
                    dense[i][j]
                );
            }
        }
    }

    #[test]
    fn super_block_is_symmetric() {
        let lag = problem(20, 3);
        let (rho, u, p) = random_point(&lag, 7);
        let a = lag.hessian(&rho, &u, &p).unwrap().super_block().unwrap();
        let diff = a.add_scaled(&a.transpose(), -1.0).unwrap();
        assert!(diff.max_abs() <= 1e-11 * a.max_abs());
    }

    #[test]
    fn params_must_be_positive() {
        assert!(ProblemParams::default().validate().is_ok());
        let bad = ProblemParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProblemParams {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
