//! Sparse matrices and linear solves.
//!
//! Small and medium systems use a sparse LU factorization. Large saddle
//! point systems use restarted GMRES, right-preconditioned with an upper
//! block-triangular preconditioner whose velocity block is a sparse
//! Cholesky factorization of the symmetric positive definite part of the
//! momentum Jacobian and whose pressure block is a viscosity-weighted
//! pressure mass matrix bordered by the mean constraint.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Side;

use crate::error::{Error, Result};

/// Relative residual every solve must reach.
pub const RESIDUAL_CONTRACT: f64 = 1e-11;

/// Square sparse matrix in compressed sparse column format with sorted
/// row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a zero matrix with the given pattern. `columns[j]` lists the
    /// rows of column `j`; they are sorted and deduplicated here.
    pub fn from_pattern(n: usize, mut columns: Vec<Vec<usize>>) -> Result<Self> {
        if columns.len() != n {
            return Err(Error::Mismatch(format!("{} columns for an {n}x{n} matrix", columns.len())));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let total: usize = columns.iter().map(|c| c.len()).sum();
        let mut row_idx = Vec::with_capacity(total);
        for col in columns.iter_mut() {
            col.sort_unstable();
            col.dedup();
            if col.last().is_some_and(|&r| r >= n) {
                return Err(Error::Mismatch("row index out of range".into()));
            }
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let nnz = row_idx.len();
        Ok(Self { n, col_ptr, row_idx, values: vec![0.0; nnz] })
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols = vec![Vec::new(); n];
        for &(r, c, _) in triplets {
            if c >= n {
                return Err(Error::Mismatch("column index out of range".into()));
            }
            cols[c].push(r);
        }
        let mut m = Self::from_pattern(n, cols)?;
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self { n, col_ptr: (0..=n).collect(), row_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Position of entry `(row, col)` in the value array.
    #[inline]
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (a, b) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[a..b].binary_search(&row).ok().map(|k| a + k)
    }

    /// Adds `v` to entry `(row, col)`, which must be in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        match self.position(row, col) {
            Some(k) => self.values[k] += v,
            None => panic!("entry ({row}, {col}) is not in the sparsity pattern"),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    /// Principal submatrix on the index range `range`.
    pub fn submatrix(&self, range: std::ops::Range<usize>) -> CscMatrix {
        let n = range.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in range.clone() {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.row_idx[k];
                if range.contains(&r) {
                    row_idx.push(r - range.start);
                    values.push(self.values[k]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { n, col_ptr, row_idx, values }
    }

    fn symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.symbolic(), &self.values)
    }

    /// Dense copy, row-major. Intended for tests on tiny systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[k]][j] += self.values[k];
            }
        }
        d
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &CscMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
}

fn check_contract(a: &CscMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("solution contains non-finite values (numerically singular matrix)".into()));
    }
    let bn = norm2(b);
    let rel = if bn == 0.0 { norm2(x) } else { norm2(&residual(a, x, b)) / bn };
    if rel > RESIDUAL_CONTRACT {
        return Err(Error::Solver(format!(
            "relative residual {rel:.3e} exceeds {RESIDUAL_CONTRACT:e} (matrix numerically singular or ill-conditioned)"
        )));
    }
    Ok(rel)
}

/// Solves `A x = b` by sparse LU and checks `‖b − A x‖ ≤ 1e-11 ‖b‖`.
pub fn linear_solve(a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::default().solve(a, b)
}

/// Sparse LU that keeps its symbolic analysis between calls with the
/// same pattern.
#[derive(Default)]
pub struct DirectSolver {
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl DirectSolver {
    pub fn solve(&mut self, a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != a.n() {
            return Err(Error::Mismatch("right-hand side length differs from matrix size".into()));
        }
        let reuse = matches!(&self.symbolic, Some((cp, ri, _)) if *cp == a.col_ptr && *ri == a.row_idx);
        if !reuse {
            let sym = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Solver(format!("symbolic LU failed: {e:?}")))?;
            self.symbolic = Some((a.col_ptr.clone(), a.row_idx.clone(), sym));
        }
        let sym = self.symbolic.as_ref().expect("set above").2.clone();
        let lu = Lu::try_new_with_symbolic(sym, a.as_faer()).map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        let rhs = Col::<f64>::from_fn(a.n(), |i| b[i]);
        let mut x: Vec<f64> = {
            let sol = lu.solve(&rhs);
            (0..a.n()).map(|i| sol[i]).collect()
        };
        // A couple of refinement sweeps recover digits lost to pivoting.
        for _ in 0..3 {
            let bn = norm2(b);
            let r = residual(a, &x, b);
            if !x.iter().all(|v| v.is_finite()) || bn == 0.0 || norm2(&r) <= 0.1 * RESIDUAL_CONTRACT * bn {
                break;
            }
            let rc = Col::<f64>::from_fn(a.n(), |i| r[i]);
            let d = lu.solve(&rc);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[i];
            }
        }
        check_contract(a, &x, b)?;
        Ok(x)
    }
}

/// Sparse Cholesky factor of a symmetric positive definite matrix (lower
/// triangle accessed).
pub struct CholeskyFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl CholeskyFactor {
    pub fn new(a: &CscMatrix) -> Result<Self> {
        let sym = SymbolicLlt::try_new(a.symbolic(), Side::Lower).map_err(|e| Error::Solver(format!("symbolic Cholesky failed: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(sym, a.as_faer(), Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed (matrix not positive definite?): {e:?}")))?;
        Ok(Self { llt, n: a.n() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// LU factor reused as a preconditioner block.
struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    fn new(a: &CscMatrix) -> Result<Self> {
        let sym = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Solver(format!("symbolic LU failed: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(sym, a.as_faer()).map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self { lu, n: a.n() })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Blocks for the saddle point preconditioner. Unknowns are ordered
/// velocity (`nv`) then the remaining constraint unknowns.
#[derive(Clone, Debug)]
pub struct SaddleBlocks {
    pub nv: usize,
    /// Symmetric positive definite approximation of the velocity block.
    pub velocity: CscMatrix,
    /// Approximate Schur complement on the constraint unknowns.
    pub schur: CscMatrix,
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Restarted right-preconditioned GMRES on `A x = b`.
pub fn gmres_solve(a: &CscMatrix, b: &[f64], blocks: &SaddleBlocks, restart: usize, max_iter: usize) -> Result<(Vec<f64>, KrylovStats)> {
    let n = a.n();
    if b.len() != n || blocks.velocity.n() != blocks.nv || blocks.nv + blocks.schur.n() != n {
        return Err(Error::Mismatch("inconsistent saddle point block sizes".into()));
    }
    let nv = blocks.nv;
    let chol = CholeskyFactor::new(&blocks.velocity)?;
    let schur = LuFactor::new(&blocks.schur)?;
    // Coupling of the constraint unknowns into the momentum rows.
    let apply_prec = |r: &[f64]| -> Vec<f64> {
        let yp = schur.solve(&r[nv..]);
        let mut full = vec![0.0; n];
        full[nv..].copy_from_slice(&yp);
        let coupling = a.matvec(&full);
        let rv: Vec<f64> = (0..nv).map(|i| r[i] - coupling[i]).collect();
        let yv = chol.solve(&rv);
        full[..nv].copy_from_slice(&yv);
        full
    };
    let bn = norm2(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, relative_residual: 0.0 }));
    }
    let target = 0.05 * RESIDUAL_CONTRACT * bn;
    let mut total = 0;
    while total < max_iter {
        let r = residual(a, &x, b);
        let beta = norm2(&r);
        if beta <= target {
            break;
        }
        let m = restart.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        v.push(r.iter().map(|x| x / beta).collect());
        let mut k_used = 0;
        for k in 0..m {
            let zk = apply_prec(&v[k]);
            let mut w = a.matvec(&zk);
            z.push(zk);
            let mut h = vec![0.0; k + 2];
            // Modified Gram–Schmidt, twice for stability.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let dot: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                    h[i] += dot;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= dot * vj;
                    }
                }
            }
            let wn = norm2(&w);
            h[k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let d = h[k].hypot(h[k + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (h[k] / d, h[k + 1] / d) };
            cs.push(c);
            sn.push(s);
            h[k] = d;
            h[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            hcols.push(h);
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= 0.5 * target || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hcols[j][i] * y[j];
            }
            y[i] = s / hcols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
    }
    let rel_now = norm2(&residual(a, &x, b)) / bn;
    let stats = KrylovStats { iterations: total, relative_residual: rel_now };
    if x.iter().any(|v| !v.is_finite()) || rel_now > RESIDUAL_CONTRACT {
        return Err(Error::Solver(format!(
            "GMRES reached relative residual {rel_now:.3e} after {total} iterations (contract {RESIDUAL_CONTRACT:e})"
        )));
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_swap() {
        let x = linear_solve(&CscMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = CscMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = linear_solve(&a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CscMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(linear_solve(&a, &[1.0, 0.0]), Err(Error::Solver(_))));
    }

    #[test]
    fn pattern_queries() {
        let mut a = CscMatrix::from_pattern(3, vec![vec![2, 0], vec![1], vec![0, 2, 2]]).unwrap();
        assert_eq!(a.nnz(), 5);
        a.add(2, 0, 1.5);
        a.add(2, 0, 1.0);
        assert_eq!(a.get(2, 0), 2.5);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.matvec(&[1.0, 0.0, 0.0]), vec![0.0, 0.0, 2.5]);
        let s = a.submatrix(1..3);
        assert_eq!(s.n(), 2);
        assert_eq!(s.nnz(), 2);
    }
}
