//! Finite-difference checks of the Lagrangian gradient and Hessian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lagrangian::{Lagrangian, ProblemError};
use crate::sparse;

const BLOCKS: [&str; 3] = ["rho", "u", "p"];

/// Largest deviation within one block, with the block's magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub block: String,
    pub max_abs_error: f64,
    pub scale: f64,
}

impl BlockError {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs_error / self.scale
        } else {
            self.max_abs_error
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub gradient: Vec<BlockError>,
    pub hessian: Vec<BlockError>,
}

impl DerivativeReport {
    pub fn max_gradient_error(&self) -> f64 {
        self.gradient.iter().map(BlockError::relative).fold(0.0, f64::max)
    }

    pub fn max_hessian_error(&self) -> f64 {
        self.hessian.iter().map(BlockError::relative).fold(0.0, f64::max)
    }
}

fn block_of(i: usize, n: usize, l: usize) -> usize {
    if i < n {
        0
    } else if i < n + l {
        1
    } else {
        2
    }
}

/// Central differences of `L` against the gradient and of the gradient
/// against every Hessian column, all with step `h`.
pub fn check_point(
    lag: &Lagrangian,
    rho: &[f64],
    u: &[f64],
    p: &[f64],
    h: f64,
) -> Result<DerivativeReport, ProblemError> {
    let (n, l) = (lag.n(), lag.l());
    let mut x: Vec<f64> = [rho, u, p].concat();
    let split = |x: &[f64]| (x[..n].to_vec(), x[n..n + l].to_vec(), x[n + l..].to_vec());
    let value = |x: &[f64]| {
        let (r, u, p) = split(x);
        lag.value(&r, &u, &p)
    };
    let grad = |x: &[f64]| {
        let (r, u, p) = split(x);
        lag.gradient(&r, &u, &p).map(|g| g.stacked())
    };

    let g = grad(&x)?;
    let hess = lag.hessian(rho, u, p)?.super_block()?.to_dense();

    let mut g_err = [0.0f64; 3];
    let mut g_scale = [0.0f64; 3];
    let mut h_err = [[0.0f64; 3]; 3];
    let mut h_scale = [[0.0f64; 3]; 3];
    for j in 0..x.len() {
        let orig = x[j];
        x[j] = orig + h;
        let (fp, gp) = (value(&x)?, grad(&x)?);
        x[j] = orig - h;
        let (fm, gm) = (value(&x)?, grad(&x)?);
        x[j] = orig;

        let bj = block_of(j, n, l);
        let fd = (fp - fm) / (2.0 * h);
        g_err[bj] = g_err[bj].max((fd - g[j]).abs());
        g_scale[bj] = g_scale[bj].max(g[j].abs());
        for i in 0..x.len() {
            let bi = block_of(i, n, l);
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            h_err[bi][bj] = h_err[bi][bj].max((fd - hess[i][j]).abs());
            h_scale[bi][bj] = h_scale[bi][bj].max(hess[i][j].abs());
        }
    }

    let whole = h_scale.iter().flatten().copied().fold(0.0, f64::max);
    let gradient = (0..3)
        .map(|b| BlockError {
            block: format!("dL/d{}", BLOCKS[b]),
            max_abs_error: g_err[b],
            scale: g_scale[b],
        })
        .collect();
    let mut hessian = Vec::new();
    for bi in 0..3 {
        for bj in bi..3 {
            let scale = if h_scale[bi][bj] > 0.0 { h_scale[bi][bj] } else { whole };
            hessian.push(BlockError {
                block: format!("d2L/d{}d{}", BLOCKS[bi], BLOCKS[bj]),
                max_abs_error: h_err[bi][bj].max(h_err[bj][bi]),
                scale,
            });
        }
    }
    Ok(DerivativeReport { gradient, hessian })
}

/// Random interior points: `ρ ∈ (0.1, 0.9)`, `u, p ∈ (−1, 1)`.
pub fn random_points(
    lag: &Lagrangian,
    count: usize,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rho = (0..lag.n()).map(|_| rng.gen_range(0.1..0.9)).collect();
            let u = (0..lag.l()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = (0..lag.l()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (rho, u, p)
        })
        .collect()
}

pub fn check_random_points(
    lag: &Lagrangian,
    count: usize,
    seed: u64,
) -> Result<Vec<DerivativeReport>, ProblemError> {
    random_points(lag, count, seed)
        .iter()
        .map(|(r, u, p)| check_point(lag, r, u, p, 1e-6))
        .collect()
}

/// `‖a − b‖₂ / ‖b‖₂`
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sparse::norm2(&diff) / sparse::norm2(b)
}
