//! P1 finite elements: density-dependent elasticity operator, traction load,
//! and the density-space operators used by the Ginzburg-Landau term.

use thiserror::Error;

use crate::mesh::{BoundaryTag, DomainSpec, TriMesh};
use crate::sparse::{self, SparseError, SparseMatrix, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("expected a vector of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Lamé moduli of solid and ersatz material with power-law interpolation
/// `λ(ρ) = λ₀ + ρᵖ (λ₁ − λ₀)`, and likewise for μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub lambda0: f64,
    pub lambda1: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub exponent: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            lambda0: 7.498e-5,
            lambda1: 0.750,
            mu0: 3.750e-5,
            mu1: 0.375,
            exponent: 3.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |m: &str| Err(FemError::InvalidMaterial(m.to_string()));
        if !(self.lambda0 > 0.0 && self.lambda1 > 0.0 && self.mu0 > 0.0 && self.mu1 > 0.0) {
            return bad("all Lamé moduli must be positive");
        }
        if !(self.lambda1 > self.lambda0) {
            return bad("lambda1 must exceed lambda0");
        }
        if !(self.mu1 > self.mu0) {
            return bad("mu1 must exceed mu0");
        }
        if !(self.exponent >= 1.0) {
            return bad("interpolation exponent must be at least 1");
        }
        Ok(())
    }

    /// `ρᵖ` and its first two derivatives.
    pub fn power(&self, rho: f64) -> (f64, f64, f64) {
        let p = self.exponent;
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            let k = p as i32;
            let d2 = if k >= 2 {
                p * (p - 1.0) * rho.powi(k - 2)
            } else {
                0.0
            };
            (rho.powi(k), p * rho.powi(k - 1), d2)
        } else {
            (
                rho.powf(p),
                p * rho.powf(p - 1.0),
                p * (p - 1.0) * rho.powf(p - 2.0),
            )
        }
    }

    pub fn lame(&self, rho: f64) -> (f64, f64) {
        let (s, _, _) = self.power(rho);
        (
            self.lambda0 + s * (self.lambda1 - self.lambda0),
            self.mu0 + s * (self.mu1 - self.mu0),
        )
    }
}

/// Six-point symmetric rule on the reference triangle, exact for degree 4.
/// Barycentric coordinates and weights (weights sum to one).
pub const QUADRATURE: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_964_886_3;
    const B: f64 = 0.091_576_213_509_770_743_46;
    const WA: f64 = 0.223_381_589_678_011_465_7;
    const WB: f64 = 0.109_951_743_655_321_867_6;
    const A1: f64 = 1.0 - 2.0 * A;
    const B1: f64 = 1.0 - 2.0 * B;
    [
        ([A, A, A1], WA),
        ([A, A1, A], WA),
        ([A1, A, A], WA),
        ([B, B, B1], WB),
        ([B, B1, B], WB),
        ([B1, B, B], WB),
    ]
};

/// Density and displacement numbering. Dirichlet vertices carry no
/// displacement unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_density: usize,
    n_disp: usize,
    disp: Vec<Option<[usize; 2]>>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> Self {
        let dirichlet = mesh.dirichlet_vertex_set();
        let mut next = 0;
        let disp = (0..mesh.num_vertices())
            .map(|v| {
                if dirichlet.contains(&v) {
                    None
                } else {
                    next += 2;
                    Some([next - 2, next - 1])
                }
            })
            .collect();
        Self {
            n_density: mesh.num_vertices(),
            n_disp: next,
            disp,
        }
    }

    /// Number of density unknowns `n`.
    pub fn n_density(&self) -> usize {
        self.n_density
    }

    /// Number of displacement unknowns `l`.
    pub fn n_disp(&self) -> usize {
        self.n_disp
    }

    pub fn displacement(&self, vertex: usize) -> Option<[usize; 2]> {
        self.disp[vertex]
    }

    /// Free-DOF vector of a vertex-wise displacement field.
    pub fn restrict(&self, field: impl Fn(usize) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_disp];
        for (v, d) in self.disp.iter().enumerate() {
            if let Some([ix, iy]) = d {
                let val = field(v);
                out[*ix] = val[0];
                out[*iy] = val[1];
            }
        }
        out
    }
}

/// Per-element geometry of a P1 triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [usize; 3],
    pub area: f64,
    /// Constant gradients of the three barycentric basis functions.
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &TriMesh, tri: usize) -> Self {
        let vertices = mesh.triangles[tri];
        let [a, b, c] = vertices.map(|v| mesh.vertices[v]);
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let p = [a, b, c];
        let mut grads = [[0.0; 2]; 3];
        for k in 0..3 {
            let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            grads[k] = [(q[1] - r[1]) / two_area, (r[0] - q[0]) / two_area];
        }
        Self {
            vertices,
            area: 0.5 * two_area,
            grads,
        }
    }

    /// Divergence of each of the six local displacement basis functions;
    /// local DOF `2k + c` is component `c` at local vertex `k`.
    pub fn divergence(&self) -> [f64; 6] {
        let mut d = [0.0; 6];
        for k in 0..3 {
            d[2 * k] = self.grads[k][0];
            d[2 * k + 1] = self.grads[k][1];
        }
        d
    }

    /// Matrix of `2 E(ψ_a) : E(ψ_b)` over local displacement basis functions.
    pub fn strain_product(&self) -> [[f64; 6]; 6] {
        let strain = |a: usize| -> [[f64; 2]; 2] {
            let (k, c) = (a / 2, a % 2);
            let g = self.grads[k];
            // ∇ψ has row c equal to g.
            let mut grad = [[0.0; 2]; 2];
            grad[c] = g;
            [
                [grad[0][0], 0.5 * (grad[0][1] + grad[1][0])],
                [0.5 * (grad[0][1] + grad[1][0]), grad[1][1]],
            ]
        };
        let e: Vec<[[f64; 2]; 2]> = (0..6).map(strain).collect();
        let mut out = [[0.0; 6]; 6];
        for a in 0..6 {
            for b in 0..6 {
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += e[a][i][j] * e[b][i][j];
                    }
                }
                out[a][b] = 2.0 * s;
            }
        }
        out
    }

    /// Global free-DOF index of each local displacement DOF.
    pub fn disp_dofs(&self, dofs: &DofMap) -> [Option<usize>; 6] {
        let mut out = [None; 6];
        for k in 0..3 {
            if let Some([ix, iy]) = dofs.displacement(self.vertices[k]) {
                out[2 * k] = Some(ix);
                out[2 * k + 1] = Some(iy);
            }
        }
        out
    }

    /// Local displacement values (zero at Dirichlet vertices).
    pub fn gather(&self, dofs: &DofMap, global: &[f64]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (a, d) in self.disp_dofs(dofs).iter().enumerate() {
            if let Some(i) = d {
                out[a] = global[*i];
            }
        }
        out
    }
}

/// Cached element geometry and per-element elasticity kernels.
#[derive(Debug, Clone)]
pub struct ElementKernels {
    pub geometry: ElementGeometry,
    pub div: [f64; 6],
    pub strain: [[f64; 6]; 6],
    pub dofs: [Option<usize>; 6],
}

pub fn element_kernels(mesh: &TriMesh, dofs: &DofMap) -> Vec<ElementKernels> {
    (0..mesh.num_triangles())
        .map(|t| {
            let geometry = ElementGeometry::new(mesh, t);
            ElementKernels {
                div: geometry.divergence(),
                strain: geometry.strain_product(),
                dofs: geometry.disp_dofs(dofs),
                geometry,
            }
        })
        .collect()
}

impl ElementKernels {
    /// `(∫ λ(ρ), ∫ μ(ρ))` over the element with the six-point rule.
    pub fn integrated_lame(&self, material: &MaterialModel, rho: &[f64]) -> (f64, f64) {
        let local = self.geometry.vertices.map(|v| rho[v]);
        let mut lam = 0.0;
        let mut mu = 0.0;
        for (bary, w) in QUADRATURE {
            let r = bary[0] * local[0] + bary[1] * local[1] + bary[2] * local[2];
            let (l, m) = material.lame(r);
            lam += w * l;
            mu += w * m;
        }
        (lam * self.geometry.area, mu * self.geometry.area)
    }

    /// Local 6×6 elasticity matrix for integrated moduli.
    pub fn local_stiffness(&self, lam: f64, mu: f64) -> [[f64; 6]; 6] {
        let mut k = [[0.0; 6]; 6];
        for a in 0..6 {
            for b in 0..6 {
                k[a][b] = lam * self.div[a] * self.div[b] + mu * self.strain[a][b];
            }
        }
        k
    }

    /// `(div u div v, 2 E(u):E(v))` for local coefficient vectors.
    pub fn bilinear_parts(&self, u: &[f64; 6], v: &[f64; 6]) -> (f64, f64) {
        let du: f64 = self.div.iter().zip(u).map(|(d, x)| d * x).sum();
        let dv: f64 = self.div.iter().zip(v).map(|(d, x)| d * x).sum();
        let mut ee = 0.0;
        for a in 0..6 {
            for b in 0..6 {
                ee += u[a] * self.strain[a][b] * v[b];
            }
        }
        (du * dv, ee)
    }

    /// Column-wise parts: entry `b` is `(div ψ_b div v, 2 E(ψ_b):E(v))`.
    pub fn bilinear_columns(&self, v: &[f64; 6]) -> [(f64, f64); 6] {
        let dv: f64 = self.div.iter().zip(v).map(|(d, x)| d * x).sum();
        let mut out = [(0.0, 0.0); 6];
        for b in 0..6 {
            let ee: f64 = (0..6).map(|a| self.strain[b][a] * v[a]).sum();
            out[b] = (self.div[b] * dv, ee);
        }
        out
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<(), FemError> {
    if v.len() != expected {
        return Err(FemError::Length {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

/// Assembles the reduced elasticity matrix `K(ρ)` from cached kernels.
pub fn assemble_state_operator_with(
    kernels: &[ElementKernels],
    dofs: &DofMap,
    material: &MaterialModel,
    rho: &[f64],
) -> Result<SparseMatrix, FemError> {
    check_len(rho, dofs.n_density())?;
    let l = dofs.n_disp();
    let mut t = Triplets::with_capacity(l, l, 36 * kernels.len());
    for el in kernels {
        let (lam, mu) = el.integrated_lame(material, rho);
        let ke = el.local_stiffness(lam, mu);
        for a in 0..6 {
            let Some(i) = el.dofs[a] else { continue };
            for b in 0..6 {
                if let Some(j) = el.dofs[b] {
                    t.push(i, j, ke[a][b]);
                }
            }
        }
    }
    Ok(t.finalize()?)
}

pub fn assemble_state_operator(
    mesh: &TriMesh,
    dofs: &DofMap,
    material: &MaterialModel,
    rho: &[f64],
) -> Result<SparseMatrix, FemError> {
    assemble_state_operator_with(&element_kernels(mesh, dofs), dofs, material, rho)
}

/// Consistent load of the boundary traction; the P1 edge integral gives each
/// endpoint half the edge force.
pub fn assemble_traction_load(mesh: &TriMesh, dofs: &DofMap, spec: &DomainSpec) -> Vec<f64> {
    let mut f = vec![0.0; dofs.n_disp()];
    for e in mesh.edges_with_tag(BoundaryTag::NeumannTraction) {
        let half = 0.5 * mesh.edge_length(e);
        for v in e.vertices {
            if let Some([ix, iy]) = dofs.displacement(v) {
                f[ix] += half * spec.traction[0];
                f[iy] += half * spec.traction[1];
            }
        }
    }
    f
}

/// Density-space operators for the phase-field term.
#[derive(Debug, Clone)]
pub struct GlOperators {
    /// `∫ ∇φᵢ·∇φⱼ`
    pub stiffness: SparseMatrix,
    /// `∫ φᵢ φⱼ`
    pub mass: SparseMatrix,
    /// `∫ φᵢ`
    pub lumped: Vec<f64>,
}

pub fn assemble_gl_operators(mesh: &TriMesh, dofs: &DofMap) -> GlOperators {
    let n = dofs.n_density();
    let mut k = Triplets::with_capacity(n, n, 9 * mesh.num_triangles());
    let mut m = Triplets::with_capacity(n, n, 9 * mesh.num_triangles());
    let mut c = vec![0.0; n];
    for t in 0..mesh.num_triangles() {
        let g = ElementGeometry::new(mesh, t);
        for a in 0..3 {
            let va = g.vertices[a];
            c[va] += g.area / 3.0;
            for b in 0..3 {
                let vb = g.vertices[b];
                let grad = g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1];
                k.push(va, vb, g.area * grad);
                let mass = if a == b { g.area / 6.0 } else { g.area / 12.0 };
                m.push(va, vb, mass);
            }
        }
    }
    GlOperators {
        stiffness: k.finalize().expect("density indices in range"),
        mass: m.finalize().expect("density indices in range"),
        lumped: c,
    }
}

/// Solves the state equation `K(ρ) u = f`.
pub fn solve_state(
    mesh: &TriMesh,
    dofs: &DofMap,
    material: &MaterialModel,
    rho: &[f64],
    load: &[f64],
) -> Result<Vec<f64>, FemError> {
    check_len(load, dofs.n_disp())?;
    let k = assemble_state_operator(mesh, dofs, material, rho)?;
    Ok(sparse::solve_direct(&k, load)?)
}
