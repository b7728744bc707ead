//! Direct solution of the bordered saddle point systems.
//!
//! Sparse LU comes from faer (column ordering by COLAMD). The row-compressed
//! matrix is handed over as the column-compressed storage of its transpose,
//! so `A x = b` is a transposed solve and no index arrays are copied. The
//! symbolic factorization is cached while the sparsity pattern is unchanged.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::SparseSystem;
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `||b - A x|| / ||b||` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("sparse LU factorization failed: {0}")]
    Factorization(String),
    #[error("system of size {0} is not square")]
    NotSquare(usize),
    #[error("relative residual {:.3e} above tolerance {tolerance:.1e}", report.relative_residual)]
    Residual { report: SolveReport, tolerance: f64 },
}

/// Solves with a factored operator.
pub trait Factored {
    fn dim(&self) -> usize;
    /// Solves `A x = b` in place.
    fn solve_in_place(&self, b: &mut [f64]);
    /// Solves `A^T x = b` in place.
    fn solve_transpose_in_place(&self, b: &mut [f64]);
}

/// Numeric LU factors of one matrix.
pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factored for Factorization {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        self.lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(b, self.n, 1));
    }

    fn solve_transpose_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(b, self.n, 1));
    }
}

/// Factors of a bordered saddle point operator
/// `[[A, B^T, 0], [B, 0, m], [0, m^T, 0]]`.
///
/// A single dense border row couples every pressure unknown and ruins the
/// fill of a general sparse LU. Instead the unbordered operator is factored
/// with its first pressure unknown pinned; since constant pressures span its
/// kernel (`B^T 1 = 0`), the bordered solution follows exactly: the
/// multiplier from the sum of the pressure rows, the pressure constant from
/// the mean constraint.
pub struct BorderedFactorization {
    reduced: Factorization,
    n_velocity: usize,
    n_pressure: usize,
    mean: Vec<f64>,
    mean_total: f64,
}

impl BorderedFactorization {
    fn solve_with(&self, b: &mut [f64], transpose: bool) {
        let (nv, np) = (self.n_velocity, self.n_pressure);
        assert_eq!(b.len(), nv + np + 1);
        let pressure_sum: f64 = b[nv..nv + np].iter().sum();
        let multiplier = pressure_sum / self.mean_total;
        let target_mean = b[nv + np];
        for (bp, m) in b[nv..nv + np].iter_mut().zip(&self.mean) {
            *bp -= m * multiplier;
        }
        let reduced = &mut b[..nv + np];
        reduced[nv] = 0.0;
        if transpose {
            self.reduced.solve_transpose_in_place(reduced);
        } else {
            self.reduced.solve_in_place(reduced);
        }
        let current_mean: f64 = reduced[nv..].iter().zip(&self.mean).map(|(p, m)| p * m).sum();
        let shift = (target_mean - current_mean) / self.mean_total;
        reduced[nv..].iter_mut().for_each(|p| *p += shift);
        b[nv + np] = multiplier;
    }
}

impl Factored for BorderedFactorization {
    fn dim(&self) -> usize {
        self.n_velocity + self.n_pressure + 1
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_with(b, false);
    }

    fn solve_transpose_in_place(&self, b: &mut [f64]) {
        self.solve_with(b, true);
    }
}

/// LU solver with a cached symbolic analysis.
pub struct DirectSolver {
    tolerance: f64,
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl Default for DirectSolver {
    fn default() -> Self {
        Self::new(DEFAULT_TOLERANCE)
    }
}

impl DirectSolver {
    pub fn new(tolerance: f64) -> Self {
        Self { tolerance, cached: None }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn factorize(&mut self, a: &CsrMatrix<f64>) -> Result<Factorization, SolveError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SolveError::NotSquare(n));
        }
        let reuse = matches!(&self.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !reuse {
            let pattern = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
            let symbolic = SymbolicLu::try_new(pattern).map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
            self.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), symbolic));
        }
        let (rp, ci, symbolic) = self.cached.as_ref().expect("cached above");
        let view = SparseColMatRef::new(SymbolicSparseColMatRef::new_checked(n, n, rp, None, ci), a.values());
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), view).map_err(|e| SolveError::Factorization(e.to_string()))?;
        Ok(Factorization { lu, n })
    }

    /// Factors a bordered saddle point system (see [`BorderedFactorization`]).
    pub fn factorize_bordered(&mut self, system: &SparseSystem<f64>) -> Result<BorderedFactorization, SolveError> {
        let (nv, np) = (system.n_velocity, system.n_pressure);
        let n = nv + np;
        let a = &system.matrix;
        if a.nrows() != n + 1 || a.ncols() != n + 1 {
            return Err(SolveError::NotSquare(a.nrows()));
        }
        let pin = nv;
        let mut trip = Vec::with_capacity(a.nnz());
        for i in 0..n {
            if i == pin {
                trip.push((i, i, 1.0));
                continue;
            }
            trip.extend(a.row(i).filter(|&(j, _)| j < n && j != pin).map(|(j, v)| (i, j, v)));
        }
        let reduced = CsrMatrix::from_triplets(n, n, &trip);
        let mut mean = vec![0.0; np];
        for (j, v) in a.row(n) {
            if (nv..n).contains(&j) {
                mean[j - nv] = v;
            }
        }
        let mean_total: f64 = mean.iter().sum();
        if mean_total == 0.0 {
            return Err(SolveError::Factorization("mean-value border is zero".into()));
        }
        Ok(BorderedFactorization { reduced: self.factorize(&reduced)?, n_velocity: nv, n_pressure: np, mean, mean_total })
    }

    /// Solves `A x = b` with iterative refinement; fails when the relative
    /// residual stays above the tolerance.
    pub fn solve(&mut self, a: &CsrMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let f = self.factorize(a)?;
        solve_with(&f, a, b, self.tolerance)
    }

    pub fn solve_system(&mut self, system: &SparseSystem<f64>) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let f = self.factorize_bordered(system)?;
        solve_with(&f, &system.matrix, &system.rhs, self.tolerance)
    }
}

/// Solves with existing factors, refining until the residual meets `tolerance`.
pub fn solve_with(f: &impl Factored, a: &CsrMatrix<f64>, b: &[f64], tolerance: f64) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let b_norm = norm(b);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut x = b.to_vec();
    f.solve_in_place(&mut x);
    let mut residual = residual(a, &x, b);
    let mut report = SolveReport { relative_residual: norm(&residual) / scale, refinement_steps: 0 };
    while !(report.relative_residual <= tolerance) && report.refinement_steps < MAX_REFINEMENT && report.relative_residual.is_finite() {
        f.solve_in_place(&mut residual);
        for (xi, di) in x.iter_mut().zip(&residual) {
            *xi += di;
        }
        residual = self::residual(a, &x, b);
        report.relative_residual = norm(&residual) / scale;
        report.refinement_steps += 1;
    }
    if report.relative_residual <= tolerance {
        Ok((x, report))
    } else {
        Err(SolveError::Residual { report, tolerance })
    }
}

fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Estimate of the spectral condition number `sigma_max / sigma_min`.
///
/// `sigma_max^2` comes from power iteration on `A^T A`, `sigma_min^-2` from
/// power iteration on `A^-1 A^-T` using the LU factors. Returns infinity if
/// the factorization fails.
pub fn condition_estimate(a: &CsrMatrix<f64>, iterations: usize) -> f64 {
    let mut solver = DirectSolver::default();
    match solver.factorize(a) {
        Ok(f) => condition_estimate_with(&f, a, iterations),
        Err(_) => f64::INFINITY,
    }
}

pub fn condition_estimate_with(f: &impl Factored, a: &CsrMatrix<f64>, iterations: usize) -> f64 {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut v = start.clone();
    normalize(&mut v);
    let mut big = 0.0;
    for _ in 0..iterations.max(1) {
        v = a.mul_vec_transposed(&a.mul_vec(&v));
        big = normalize(&mut v);
    }

    let mut v = start;
    normalize(&mut v);
    let mut inv = 0.0;
    for _ in 0..iterations.max(1) {
        f.solve_transpose_in_place(&mut v);
        f.solve_in_place(&mut v);
        inv = normalize(&mut v);
        if !inv.is_finite() {
            return f64::INFINITY;
        }
    }
    (big * inv).sqrt()
}
