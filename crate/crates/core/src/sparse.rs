//! Sparse matrix storage, block assembly and a direct solver.
//!
//! Matrices are collected as coordinate triplets and finalized into a
//! compressed-row layout. The direct solver reorders the symmetric sparsity
//! pattern with reverse Cuthill-McKee and factors the permuted matrix as a
//! banded LU with partial pivoting, which suits the structured meshes used
//! here and handles the nonsymmetric barrier rows of the KKT matrix.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is numerically singular (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },
}

/// Coordinate-format accumulator. Duplicates are allowed and summed by
/// [`Triplets::finalize`] in insertion order.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn finalize(&self) -> Result<SparseMatrix, SparseError> {
        finalize(self.nrows, self.ncols, &self.entries)
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Builds a compressed matrix from triplets, summing duplicates.
///
/// Entries are bucketed by row with a stable counting sort and then stably
/// sorted by column, so duplicates are always summed in the order they were
/// supplied.
pub fn finalize(
    nrows: usize,
    ncols: usize,
    entries: &[(usize, usize, f64)],
) -> Result<SparseMatrix, SparseError> {
    for &(row, col, _) in entries {
        if row >= nrows || col >= ncols {
            return Err(SparseError::IndexOutOfRange {
                row,
                col,
                nrows,
                ncols,
            });
        }
    }

    let mut counts = vec![0usize; nrows + 1];
    for &(r, _, _) in entries {
        counts[r + 1] += 1;
    }
    for i in 0..nrows {
        counts[i + 1] += counts[i];
    }
    let mut next = counts.clone();
    let mut bucketed = vec![(0usize, 0.0f64); entries.len()];
    for &(r, c, v) in entries {
        bucketed[next[r]] = (c, v);
        next[r] += 1;
    }

    let mut row_ptr = Vec::with_capacity(nrows + 1);
    let mut col_idx = Vec::with_capacity(entries.len());
    let mut values = Vec::with_capacity(entries.len());
    row_ptr.push(0);
    for r in 0..nrows {
        let row = &mut bucketed[counts[r]..counts[r + 1]];
        row.sort_by_key(|&(c, _)| c);
        let mut k = 0;
        while k < row.len() {
            let col = row[k].0;
            let mut sum = 0.0;
            while k < row.len() && row[k].0 == col {
                sum += row[k].1;
                k += 1;
            }
            col_idx.push(col);
            values.push(sum);
        }
        row_ptr.push(col_idx.len());
    }

    Ok(SparseMatrix {
        nrows,
        ncols,
        row_ptr,
        col_idx,
        values,
    })
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, SparseError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(SparseError::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {ncols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.finalize()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_transpose dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.finalize().expect("transpose indices are in range")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &SparseMatrix, factor: f64) -> Result<SparseMatrix, SparseError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (i, j, v) in self.iter() {
            t.push(i, j, v);
        }
        for (i, j, v) in other.iter() {
            t.push(i, j, factor * v);
        }
        t.finalize()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    /// Copy of the sub-matrix with rows `r0..r0+nr` and columns `c0..c0+nc`.
    pub fn submatrix(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> SparseMatrix {
        let mut t = Triplets::new(nr, nc);
        for i in r0..r0 + nr {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= c0 && j < c0 + nc {
                    t.push(i - r0, j - c0, v);
                }
            }
        }
        t.finalize().expect("submatrix indices are in range")
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    while order.len() < n {
        // Lowest-degree unvisited node seeds the next component.
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unvisited node exists");
        let start = pseudo_peripheral(seed, &adj, &degree, &visited, &mut level);

        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(
    seed: usize,
    adj: &[Vec<usize>],
    degree: &[usize],
    visited: &[bool],
    level: &mut [usize],
) -> usize {
    let mut root = seed;
    let mut ecc = bfs_levels(root, adj, visited, level).0;
    loop {
        let (depth, last) = bfs_levels(root, adj, visited, level);
        let candidate = last
            .into_iter()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (cand_depth, _) = bfs_levels(candidate, adj, visited, level);
        if cand_depth > depth.max(ecc) {
            root = candidate;
            ecc = cand_depth;
        } else {
            return root;
        }
    }
}

/// BFS restricted to unvisited nodes; returns the depth and the last level.
fn bfs_levels(
    root: usize,
    adj: &[Vec<usize>],
    visited: &[bool],
    level: &mut [usize],
) -> (usize, Vec<usize>) {
    let mut touched = vec![root];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = depth + 1;
                    touched.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        depth += 1;
        frontier = next;
    }
    for v in touched {
        level[v] = usize::MAX;
    }
    (depth, frontier)
}

/// Relative pivot threshold for declaring a matrix singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Banded LU factors of a symmetrically permuted matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    kl: usize,
    ku: usize,
    /// LAPACK `gbtrf` layout: column-major with leading dimension `2*kl+ku+1`.
    band: Vec<f64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &SparseMatrix) -> Result<Self, SparseError> {
        if !a.is_square() {
            return Err(SparseError::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }

        let kv = kl + ku;
        let ld = 2 * kl + ku + 1;
        let mut band = vec![0.0; ld * n];
        for (i, j, v) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            band[pj * ld + kv + pi - pj] += v;
        }

        let scale = a.max_abs();
        let threshold = SINGULAR_PIVOT_RATIO * scale;
        let mut pivots = vec![0usize; n];
        let idx = |r: usize, c: usize| c * ld + kv + r - c;
        // Rightmost column touched by U so far.
        let mut ju = 0usize;

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = band[idx(j, j)].abs();
            for r in j + 1..=j + km {
                let v = band[idx(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if n > 0 && (best <= threshold || best == 0.0 || !best.is_finite()) {
                return Err(SparseError::Singular {
                    step: j,
                    pivot: best,
                });
            }
            pivots[j] = p;
            ju = ju.max((p + ku).min(n - 1));
            if p != j {
                for c in j..=ju {
                    band.swap(idx(j, c), idx(p, c));
                }
            }
            let inv_pivot = 1.0 / band[idx(j, j)];
            let col = j * ld + kv;
            for r in 1..=km {
                band[col + r] *= inv_pivot;
            }
            for c in j + 1..=ju {
                let ujc = band[idx(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                let base = c * ld + kv + j - c;
                for r in 1..=km {
                    band[base + r] -= band[col + r] * ujc;
                }
            }
        }

        Ok(Self {
            n,
            kl,
            ku,
            band,
            pivots,
            perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        if b.len() != self.n {
            return Err(SparseError::DimensionMismatch(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        let kv = self.kl + self.ku;
        let ld = 2 * self.kl + self.ku + 1;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();

        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                y.swap(j, p);
            }
            let yj = y[j];
            if yj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let col = j * ld + kv;
                for r in 1..=km {
                    y[j + r] -= self.band[col + r] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ld + kv;
            y[j] /= self.band[col];
            let yj = y[j];
            if yj != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    y[i] -= self.band[col + i - j] * yj;
                }
            }
        }

        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// Solves `A x = b` with a fresh factorization.
pub fn solve_direct(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, SparseError> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(SparseError::DimensionMismatch(format!(
            "matrix {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    LuFactors::factor(a)?.solve(b)
}

/// One block of a [`BlockSystem`].
#[derive(Debug, Clone)]
pub enum Block {
    Sparse(SparseMatrix),
    /// Diagonal matrix given by its diagonal.
    Diagonal(Vec<f64>),
    /// `scale * I`.
    Identity(f64),
}

impl Block {
    fn shape(&self) -> Option<(usize, usize)> {
        match self {
            Block::Sparse(m) => Some((m.nrows(), m.ncols())),
            Block::Diagonal(d) => Some((d.len(), d.len())),
            Block::Identity(_) => None,
        }
    }
}

/// Block-partitioned square matrix with named row/column blocks.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    names: Vec<String>,
    sizes: Vec<usize>,
    blocks: Vec<Option<Block>>,
}

impl BlockSystem {
    /// Creates an empty system; row and column partitions coincide.
    pub fn new<S: Into<String>>(layout: impl IntoIterator<Item = (S, usize)>) -> Self {
        let (names, sizes): (Vec<String>, Vec<usize>) =
            layout.into_iter().map(|(n, s)| (n.into(), s)).unzip();
        let nb = names.len();
        Self {
            names,
            sizes,
            blocks: vec![None; nb * nb],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn offset(&self, k: usize) -> usize {
        self.sizes[..k].iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn set(&mut self, row: usize, col: usize, block: Block) -> Result<(), SparseError> {
        let nb = self.num_blocks();
        if row >= nb || col >= nb {
            return Err(SparseError::DimensionMismatch(format!(
                "block ({row}, {col}) outside a {nb}x{nb} block layout"
            )));
        }
        let expected = (self.sizes[row], self.sizes[col]);
        match block.shape() {
            Some(shape) if shape != expected => {
                return Err(SparseError::DimensionMismatch(format!(
                    "block ({}, {}) is {}x{}, expected {}x{}",
                    self.names[row], self.names[col], shape.0, shape.1, expected.0, expected.1
                )))
            }
            None if expected.0 != expected.1 => {
                return Err(SparseError::DimensionMismatch(format!(
                    "identity block ({}, {}) must be square, layout is {}x{}",
                    self.names[row], self.names[col], expected.0, expected.1
                )))
            }
            _ => {}
        }
        self.blocks[row * nb + col] = Some(block);
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&Block> {
        self.blocks[row * self.num_blocks() + col].as_ref()
    }

    pub fn assemble(&self) -> Result<SparseMatrix, SparseError> {
        assemble_block_system(self)
    }

    /// Extracts block `(row, col)` from an assembled global matrix.
    pub fn extract(&self, global: &SparseMatrix, row: usize, col: usize) -> SparseMatrix {
        global.submatrix(
            self.offset(row),
            self.sizes[row],
            self.offset(col),
            self.sizes[col],
        )
    }
}

/// Flattens a block system into one sparse matrix.
pub fn assemble_block_system(system: &BlockSystem) -> Result<SparseMatrix, SparseError> {
    let nb = system.num_blocks();
    let dim = system.dim();
    let offsets: Vec<usize> = (0..nb).map(|k| system.offset(k)).collect();
    let cap = system
        .blocks
        .iter()
        .flatten()
        .map(|b| match b {
            Block::Sparse(m) => m.nnz(),
            Block::Diagonal(d) => d.len(),
            Block::Identity(_) => 0,
        })
        .sum::<usize>();
    let mut t = Triplets::with_capacity(dim, dim, cap);
    for bi in 0..nb {
        for bj in 0..nb {
            let Some(block) = system.get(bi, bj) else {
                continue;
            };
            let (r0, c0) = (offsets[bi], offsets[bj]);
            match block {
                Block::Sparse(m) => {
                    for (i, j, v) in m.iter() {
                        t.push(r0 + i, c0 + j, v);
                    }
                }
                Block::Diagonal(d) => {
                    for (k, &v) in d.iter().enumerate() {
                        t.push(r0 + k, c0 + k, v);
                    }
                }
                Block::Identity(s) => {
                    for k in 0..system.sizes[bi] {
                        t.push(r0 + k, c0 + k, *s);
                    }
                }
            }
        }
    }
    t.finalize()
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn duplicates_are_summed() {
        let m = finalize(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = finalize(3, 3, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.matvec(&[1.0, -2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn identity_matvec() {
        let m = finalize(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let v = [0.3, -7.25];
        assert_eq!(m.matvec(&v), v.to_vec());
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        let err = finalize(2, 2, &[(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseError::IndexOutOfRange { col: 2, .. }));
    }

    #[test]
    fn columns_sorted_and_unique() {
        let m = finalize(2, 4, &[(0, 3, 1.0), (0, 1, 1.0), (0, 3, 1.0), (1, 0, 5.0)]).unwrap();
        assert_eq!(m.row(0).0, &[1, 3]);
        assert_eq!(m.row(0).1, &[1.0, 2.0]);
    }

    #[test]
    fn solve_identity() {
        let b = vec![1.5, -2.0, 3.25, 0.0];
        let x = solve_direct(&SparseMatrix::identity(4), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_diagonal_two_by_two() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = solve_direct(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn singular_is_distinct_from_dimension_mismatch() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_direct(&a, &[1.0, 1.0]),
            Err(SparseError::Singular { .. })
        ));
        assert!(matches!(
            solve_direct(&a, &[1.0]),
            Err(SparseError::DimensionMismatch(_))
        ));
        let rect = SparseMatrix::zeros(2, 3);
        assert!(matches!(
            solve_direct(&rect, &[1.0, 1.0]),
            Err(SparseError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_pivot_needs_pivoting() {
        // Saddle-point pattern with an exact zero on the diagonal.
        let a = SparseMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 2.0],
            vec![0.0, 2.0, 1.0],
        ])
        .unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = solve_direct(&a, &b).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        // B with ~10% fill, A = BᵀB + n I.
        let mut bmat = vec![vec![0.0; n]; n];
        for row in bmat.iter_mut() {
            for v in row.iter_mut() {
                if rng.gen::<f64>() < 0.1 {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| bmat[k][i] * bmat[k][j]).sum();
            }
            dense[i][i] += n as f64;
        }
        let a = SparseMatrix::from_dense(&dense).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_direct(&a, &b).unwrap();
        let x_ref = dense_solve(dense, b.clone());
        for (xi, ri) in x.iter().zip(&x_ref) {
            assert!((xi - ri).abs() <= 1e-10 * ri.abs().max(1.0));
        }
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-10 * (a.max_abs() * norm2(&x) + norm2(&b)));
    }

    #[test]
    fn block_two_scalars() {
        let mut sys = BlockSystem::new([("a", 1), ("d", 1)]);
        sys.set(0, 0, Block::Diagonal(vec![3.0])).unwrap();
        sys.set(1, 1, Block::Diagonal(vec![-5.0])).unwrap();
        let m = sys.assemble().unwrap();
        assert_eq!(m.to_dense(), vec![vec![3.0, 0.0], vec![0.0, -5.0]]);
    }

    #[test]
    fn identity_blocks_everywhere_on_diagonal() {
        let mut sys = BlockSystem::new([("x", 2), ("y", 3), ("z", 1)]);
        for k in 0..3 {
            sys.set(k, k, Block::Identity(1.0)).unwrap();
        }
        let m = sys.assemble().unwrap();
        assert_eq!(m, SparseMatrix::identity(6));
    }

    #[test]
    fn block_shape_is_checked() {
        let mut sys = BlockSystem::new([("x", 2), ("y", 3)]);
        let err = sys.set(0, 1, Block::Sparse(SparseMatrix::zeros(2, 2))).unwrap_err();
        assert!(matches!(err, SparseError::DimensionMismatch(_)));
        assert!(sys.set(0, 1, Block::Identity(1.0)).is_err());
        assert!(sys.set(1, 1, Block::Diagonal(vec![1.0; 2])).is_err());
    }

    fn arb_triplets() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            let entry = (0..r, 0..c, -10.0f64..10.0);
            (Just(r), Just(c), prop::collection::vec(entry, 0..40))
        })
    }

    proptest! {
        #[test]
        fn matvec_agrees_with_triplet_accumulation((r, c, entries) in arb_triplets(),
                                                   x in prop::collection::vec(-5.0f64..5.0, 8)) {
            let m = finalize(r, c, &entries).unwrap();
            let x = &x[..c];
            let mut y = vec![0.0; r];
            for &(i, j, v) in &entries {
                y[i] += v * x[j];
            }
            for (a, b) in m.matvec(x).iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn solve_inverts_matvec(n in 1usize..30, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = Triplets::new(n, n);
            for i in 0..n {
                // Nonsymmetric but diagonally dominant.
                t.push(i, i, 4.0 + rng.gen::<f64>());
                for _ in 0..3 {
                    let j = rng.gen_range(0..n);
                    if j != i {
                        t.push(i, j, rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let a = t.finalize().unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = a.matvec(&x);
            let y = solve_direct(&a, &b).unwrap();
            for (p, q) in x.iter().zip(&y) {
                prop_assert!((p - q).abs() <= 1e-10);
            }
        }

        #[test]
        fn block_assembly_round_trips(s0 in 1usize..4, s1 in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sizes = [s0, s1];
            let mut sys = BlockSystem::new([("a", s0), ("b", s1)]);
            let mut expected = Vec::new();
            for bi in 0..2 {
                for bj in 0..2 {
                    let mut t = Triplets::new(sizes[bi], sizes[bj]);
                    for i in 0..sizes[bi] {
                        for j in 0..sizes[bj] {
                            if rng.gen::<f64>() < 0.6 {
                                t.push(i, j, rng.gen_range(-3.0..3.0));
                            }
                        }
                    }
                    let m = t.finalize().unwrap();
                    sys.set(bi, bj, Block::Sparse(m.clone())).unwrap();
                    expected.push(((bi, bj), m));
                }
            }
            let global = sys.assemble().unwrap();
            for ((bi, bj), m) in expected {
                prop_assert_eq!(sys.extract(&global, bi, bj), m);
            }
        }
    }
}
