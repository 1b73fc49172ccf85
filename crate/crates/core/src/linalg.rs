//! Small dense linear-algebra helpers built on nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vectorize<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize<T: Real>(v: &DVector<T>, nrows: usize, ncols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}

/// Numerical rank: singular values below `rel_tol * sigma_max` count as zero.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, rel_tol: T) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if smax <= T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum of `m`.
pub fn spectral_abscissa<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues(m)
        .into_iter()
        .map(|l| l.re)
        .fold(-T::infinity(), |a, b| a.max(b))
}

pub fn min_symmetric_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(T::infinity(), |a, b| a.min(b))
}

/// Controllability matrix `[B, AB, …, A^{n-1}B]`.
pub fn controllability_matrix<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    out
}

/// Solution of `Aᵀ X + X A + Q = 0`, together with the reciprocal condition
/// number of the vectorised operator.
#[derive(Debug, Clone)]
pub struct LyapunovSolution<T: Real> {
    pub x: DMatrix<T>,
    pub rcond: T,
}

/// Solves the continuous Lyapunov equation `Aᵀ X + X A + Q = 0` through the
/// Kronecker form `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec X = -vec Q`. Intended for the small
/// per-agent blocks this crate works with.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<LyapunovSolution<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("lyapunov: A must be square", n, a.ncols()));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::dim("lyapunov: Q shape", n, q.nrows()));
    }
    let eye = DMatrix::<T>::identity(n, n);
    let at = a.transpose();
    let op = kron(&eye, &at) + kron(&at, &eye);
    let sv = op.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(T::zero(), |x, y| x.max(y));
    let smin = sv.iter().copied().fold(T::infinity(), |x, y| x.min(y));
    let rcond = if smax > T::zero() { smin / smax } else { T::zero() };
    let rhs = -vectorize(q);
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    let x = unvectorize(&sol, n, n);
    let x = (&x + x.transpose()) * T::lit(0.5);
    Ok(LyapunovSolution { x, rcond })
}

/// Block-diagonal assembly.
pub fn block_diag<T: Real>(blocks: &[DMatrix<T>]) -> DMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn l1_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}
