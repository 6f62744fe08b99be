//! CSR storage, strong Dirichlet elimination, sparse LU solves and 2-norm
//! condition numbers.
//!
//! Factorizations are delegated to `faer` (sparse LU with partial pivoting,
//! sparse Cholesky, dense SVD). Everything runs with sequential parallelism so
//! results are bitwise reproducible.

use std::io::Write;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};
use faer::{Par, Side};

use crate::error::{invalid, Error, Result};

/// Matrices up to this size get an exact dense SVD in [`condition_number`].
pub const DENSE_CONDITION_LIMIT: usize = 2000;

/// Relative residual accepted by [`solve`].
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in insertion order and exact zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return invalid(format!("triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"));
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut k = 0;
        while k < order.len() {
            let (i, j, _) = triplets[order[k]];
            let mut sum = 0.0;
            while k < order.len() && triplets[order[k]].0 == i && triplets[order[k]].1 == j {
                sum += triplets[order[k]].2;
                k += 1;
            }
            if sum != 0.0 {
                col_idx.push(j);
                values.push(sum);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
        let ncols = rows.first().map_or(0, Vec::len);
        let trips: Vec<(usize, usize, f64)> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .collect();
        CsrMatrix::from_triplets(rows.len(), ncols, &trips).expect("indices in range")
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate().take(self.nrows) {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t).expect("indices in range")
    }

    /// `alpha * A + beta * B`.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<CsrMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return invalid("matrix dimensions differ");
        }
        let mut t: Vec<(usize, usize, f64)> = self.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, beta * v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|`.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .iter()
            .map(|&(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    fn to_faer(&self) -> SparseRowMat<usize, f64> {
        let symbolic =
            SymbolicSparseRowMat::new_checked(self.nrows, self.ncols, self.row_ptr.clone(), None, self.col_idx.clone());
        SparseRowMat::new(symbolic, self.values.clone())
    }

    /// Plain-text `row col value` triples, one per line, 0-based.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Accumulates matrix entries before conversion to CSR.
#[derive(Debug, Clone, Default)]
pub struct TripletList {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new(n: usize) -> TripletList {
        TripletList { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(&self) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(self.n, self.n, &self.entries)
    }
}

/// Linear system `A x = b` with the set of DOFs fixed by strong elimination.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Sorted, unique constrained DOF indices.
    pub constrained: Vec<usize>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Result<SparseSystem> {
        if matrix.nrows() != matrix.ncols() || rhs.len() != matrix.nrows() {
            return invalid("system matrix must be square and match the right-hand side");
        }
        Ok(SparseSystem {
            matrix,
            rhs,
            constrained: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }
}

/// Symmetric elimination of `dofs` with prescribed `values`: constrained
/// columns are moved to the right-hand side and constrained rows replaced by
/// identity rows.
pub fn apply_strong_dirichlet(system: &SparseSystem, dofs: &[usize], values: &[f64]) -> Result<SparseSystem> {
    let n = system.n();
    if dofs.len() != values.len() {
        return invalid("one value per constrained DOF is required");
    }
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (&k, &g) in dofs.iter().zip(values) {
        if k >= n {
            return invalid(format!("constrained DOF {k} out of range"));
        }
        fixed[k] = Some(g);
    }
    for &k in &system.constrained {
        if fixed[k].is_none() {
            fixed[k] = Some(system.rhs[k]);
        }
    }
    let a = &system.matrix;
    let mut rhs = system.rhs.clone();
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        if let Some(g) = fixed[i] {
            t.push((i, i, 1.0));
            rhs[i] = g;
            continue;
        }
        for (j, v) in a.row(i) {
            match fixed[j] {
                Some(g) => rhs[i] -= v * g,
                None => t.push((i, j, v)),
            }
        }
    }
    let constrained = (0..n).filter(|&k| fixed[k].is_some()).collect();
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, n, &t)?,
        rhs,
        constrained,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sparse LU factorization of a square CSR matrix.
pub struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<LuFactor> {
        if a.nrows() != a.ncols() {
            return invalid("LU needs a square matrix");
        }
        faer::set_global_parallelism(Par::Seq);
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
        Ok(LuFactor { lu, n: a.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

/// Direct sparse LU solve. Fails with [`Error::SingularMatrix`] when the
/// factorization breaks down or the relative residual exceeds
/// [`RESIDUAL_TOL`].
pub fn solve(system: &SparseSystem) -> Result<Vec<f64>> {
    if system.n() == 0 {
        return invalid("empty system");
    }
    let lu = LuFactor::new(&system.matrix)?;
    let x = lu.solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite solution".into()));
    }
    let ax = system.matrix.matvec(&x);
    let r: Vec<f64> = ax.iter().zip(&system.rhs).map(|(a, b)| a - b).collect();
    let scale = norm(&system.rhs)
        .max(system.matrix.max_abs() * norm(&x))
        .max(f64::MIN_POSITIVE);
    let rel = norm(&r) / scale;
    if rel > RESIDUAL_TOL {
        return Err(Error::SingularMatrix(format!("relative residual {rel:.3e}")));
    }
    Ok(x)
}

/// 2-norm condition number `sigma_max / sigma_min`; infinity when singular.
pub fn condition_number(a: &CsrMatrix) -> f64 {
    if a.nrows() <= DENSE_CONDITION_LIMIT {
        dense_condition_number(a)
    } else {
        iterative_condition_number(a)
    }
}

pub fn dense_condition_number(a: &CsrMatrix) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    faer::set_global_parallelism(Par::Seq);
    let mut m = Mat::<f64>::zeros(n, a.ncols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] = v;
    }
    match m.singular_values() {
        Ok(s) => {
            let (hi, lo) = (s[0], s[s.len() - 1]);
            if lo > 0.0 && hi.is_finite() {
                hi / lo
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

fn start_vector(n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract())
        .collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Power iteration on `A^T A` for the largest singular value.
pub fn sigma_max(a: &CsrMatrix) -> f64 {
    let mut v = start_vector(a.ncols());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = a.matvec_transpose(&a.matvec(&v));
        let next = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / wn).collect();
        if (next - lambda).abs() <= 1e-7 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Inverse iteration on `A^T A` through the LU factor of `A` for the smallest
/// singular value; `None` when `A` is singular.
pub fn sigma_min(a: &CsrMatrix) -> Option<f64> {
    let lu = LuFactor::new(a).ok()?;
    let mut v = start_vector(a.ncols());
    let mut mu = 0.0;
    for _ in 0..1000 {
        let w = lu.solve(&lu.solve_transpose(&v));
        if w.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let next = dot(&v, &w);
        let wn = norm(&w);
        v = w.into_iter().map(|x| x / wn).collect();
        if (next - mu).abs() <= 1e-10 * next {
            mu = next;
            break;
        }
        mu = next;
    }
    if mu > 0.0 && mu.is_finite() {
        Some(1.0 / mu.sqrt())
    } else {
        None
    }
}

pub fn iterative_condition_number(a: &CsrMatrix) -> f64 {
    match sigma_min(a) {
        Some(lo) if lo > 0.0 => sigma_max(a) / lo,
        _ => f64::INFINITY,
    }
}

/// True when `(A + A^T) / 2` admits a Cholesky factorization.
pub fn symmetric_part_is_positive_definite(a: &CsrMatrix) -> bool {
    let Ok(s) = a.add_scaled(0.5, &a.transpose(), 0.5) else {
        return false;
    };
    faer::set_global_parallelism(Par::Seq);
    s.to_faer().sp_cholesky(Side::Lower).is_ok()
}
