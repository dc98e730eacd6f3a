//! Dense complex Hermitian linear-algebra primitives.
//!
//! Everything downstream (Schmidt decompositions, the spectrahedral cone, the
//! separability construction) is built on the operations here. Tolerances are
//! always relative to `max(1, ‖·‖_F)` and come from [`Config`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::config::Config;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = Complex::new(0.0, 0.0);
pub const ONE: C64 = Complex::new(1.0, 0.0);

/// `max(1, ‖M‖_F)`, the scale every relative tolerance is measured against.
pub fn rel_scale(m: &CMat) -> f64 {
    m.norm().max(1.0)
}

/// Hermitian part `(M + M†)/2`. The single source of truth for this split.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Anti-Hermitian component as a Hermitian matrix: `-i(M − M†)/2`,
/// so that `M = hermitian_part(M) + i · antihermitian_part(M)`.
pub fn antihermitian_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * C64::new(0.0, -0.5)
}

/// Row-major vectorization, `vec(M)[i·cols + j] = M[(i, j)]`.
pub fn vec_rm(m: &CMat) -> CVec {
    let (r, c) = m.shape();
    CVec::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Inverse of [`vec_rm`] for square matrices of dimension `dim`.
pub fn unvec_rm(v: &CVec, dim: usize) -> CMat {
    assert_eq!(v.len(), dim * dim);
    CMat::from_fn(dim, dim, |i, j| v[i * dim + j])
}

/// A complex matrix as a real vector `[Re vec(M); Im vec(M)]`, for real-linear
/// span computations.
pub fn real_repr(m: &CMat) -> DVector<f64> {
    let v = vec_rm(m);
    let n = v.len();
    DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

/// All entries finite.
pub fn entries_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A matrix checked to be Hermitian at tolerance. The stored matrix is the
/// exact Hermitian part of the input, so downstream eigensolves see a
/// bit-Hermitian operand.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix {
    mat: CMat,
}

impl HermMatrix {
    pub fn new(m: CMat, cfg: &Config) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "HermMatrix requires square input, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = (&m - m.adjoint()).norm();
        if deviation > cfg.herm_tol * rel_scale(&m) {
            return Err(Error::NonHermitianInput { deviation });
        }
        Ok(HermMatrix {
            mat: hermitian_part(&m),
        })
    }

    /// Wrap a matrix that is Hermitian by construction.
    pub fn symmetrize(m: &CMat) -> Self {
        HermMatrix {
            mat: hermitian_part(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues ascending,
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigSystem {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl EigSystem {
    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMat {
        let d = CMat::from_diagonal(&self.values.map(|x| C64::new(x, 0.0)));
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition, eigenvalues sorted ascending.
pub fn herm_eig(h: &HermMatrix) -> Result<EigSystem> {
    let se = nalgebra::SymmetricEigen::try_new(h.as_mat().clone(), f64::EPSILON, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let n = h.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = DVector::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let mut vectors = CMat::zeros(n, n);
    for (i, &k) in order.iter().enumerate() {
        vectors.set_column(i, &se.eigenvectors.column(k));
    }
    Ok(EigSystem { values, vectors })
}

/// PSD test: true iff `λ_min ≥ −tol · max(1, ‖H‖_F)`. Always returns `λ_min`.
pub fn is_psd(h: &HermMatrix, tol: f64) -> Result<(bool, f64)> {
    if h.dim() == 0 {
        return Ok((true, 0.0));
    }
    let eig = herm_eig(h)?;
    let min_eig = eig.values[0];
    Ok((min_eig >= -tol * rel_scale(h.as_mat()), min_eig))
}

/// For positive definite `H`, an invertible `P` with `P† H P = I`
/// (namely `P = V diag(λ^{-1/2})`).
pub fn congruence_normalizer(h: &HermMatrix, cfg: &Config) -> Result<CMat> {
    let eig = herm_eig(h)?;
    let min_eig = eig.values[0];
    if min_eig <= cfg.pd_tol {
        return Err(Error::NotPositiveDefinite { min_eig });
    }
    let scale = CMat::from_diagonal(&eig.values.map(|x| C64::new(1.0 / x.sqrt(), 0.0)));
    Ok(&eig.vectors * scale)
}

/// Orthonormal basis of the span of eigenvectors with
/// `|λ| ≤ tol · max(1, ‖H‖_F)`. Empty when `H` is nonsingular at `tol`.
pub fn kernel_basis(h: &HermMatrix, tol: f64) -> Result<Vec<CVec>> {
    let eig = herm_eig(h)?;
    let cutoff = tol * rel_scale(h.as_mat());
    Ok((0..h.dim())
        .filter(|&i| eig.values[i].abs() <= cutoff)
        .map(|i| eig.vectors.column(i).into_owned())
        .collect())
}

/// Thin SVD `M = U diag(s) V†` with singular values sorted descending.
pub struct SvdResult {
    pub u: CMat,
    pub singular_values: DVector<f64>,
    /// Columns are the right singular vectors (so `M = U diag(s) V†`).
    pub v: CMat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> CMat {
        let d = CMat::from_diagonal(&self.singular_values.map(|x| C64::new(x, 0.0)));
        &self.u * d * self.v.adjoint()
    }
}

/// One-sided complex Jacobi SVD.
///
/// Chosen over a bidiagonalization method for its high relative accuracy:
/// rank decisions downstream cut at `1e-9 · s_max` and need small singular
/// values computed cleanly.
pub fn svd(m: &CMat) -> Result<SvdResult> {
    if !entries_finite(m) {
        return Err(Error::Parse("non-finite entries in SVD input".into()));
    }
    if m.nrows() < m.ncols() {
        // decompose the adjoint and swap factors
        let t = svd(&m.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (rows, n) = m.shape();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    let tol = 1e-15;
    let mut last_off = f64::INFINITY;
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        // columns driven below machine noise are flushed to exact zero, or
        // the relative rotation criterion chases them forever
        let max_norm = (0..n).map(|j| a.column(j).norm()).fold(0.0, f64::max);
        let tiny = max_norm * f64::EPSILON * 1e-2;
        for j in 0..n {
            if a.column(j).norm() <= tiny {
                a.column_mut(j).fill(ZERO);
            }
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let app: f64 = a.column(p).norm_squared();
                let aqq: f64 = a.column(q).norm_squared();
                let apq: C64 = a.column(p).dotc(&a.column(q));
                let denom = (app * aqq).sqrt();
                if denom == 0.0 || apq.norm() <= tol * denom {
                    continue;
                }
                off = off.max(apq.norm() / denom);
                // phase out the Gram off-diagonal, then a real Jacobi rotation
                let theta = apq.arg();
                let g = apq.norm();
                let tau = (aqq - app) / (2.0 * g);
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e_pos = C64::from_polar(1.0, theta);
                let e_neg = e_pos.conj();
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = x * c + y * e_neg * s;
                    a[(i, q)] = -x * e_pos * s + y * c;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = x * c + y * e_neg * s;
                    v[(i, q)] = -x * e_pos * s + y * c;
                }
            }
        }
        last_off = off;
        if off <= tol {
            break;
        }
    }
    // rotations at machine precision can keep the strict target just out of
    // reach; anything below 1e-12 is ample for the 1e-9 rank cutoffs
    if last_off > 1e-12 {
        return Err(Error::ConvergenceFailure);
    }
    // read off singular values and sort descending
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let singular_values = DVector::from_fn(n, |i, _| norms[order[i]]);
    let mut u = CMat::zeros(rows, n);
    let mut v_sorted = CMat::zeros(n, n);
    let mut null_cols = Vec::new();
    for (i, &j) in order.iter().enumerate() {
        v_sorted.set_column(i, &v.column(j));
        if norms[j] > 0.0 {
            let col = a.column(j) / C64::new(norms[j], 0.0);
            u.set_column(i, &col);
        } else {
            null_cols.push(i);
        }
    }
    // orthonormal completion for exactly-zero columns
    for i in null_cols {
        let mut cand = CVec::zeros(rows);
        for basis in 0..rows {
            let mut w = CVec::zeros(rows);
            w[basis] = ONE;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let proj = u.column(k).dotc(&w);
                w -= u.column(k) * proj;
            }
            let wn = w.norm();
            if wn > 0.5 {
                cand = w / C64::new(wn, 0.0);
                break;
            }
        }
        u.set_column(i, &cand);
    }
    Ok(SvdResult {
        u,
        singular_values,
        v: v_sorted,
    })
}

/// Numerical rank: count of singular values above `tol · s_max`.
pub fn numerical_rank(s: &DVector<f64>, tol: f64) -> usize {
    if s.len() == 0 {
        return 0;
    }
    let smax = s[0];
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// Stack vectorized matrices as columns and test whether they are linearly
/// independent. Returns `(independent, numerical rank)`.
pub fn lin_independent(mats: &[CMat], tol: f64) -> Result<(bool, usize)> {
    if mats.is_empty() {
        return Err(Error::EmptyList);
    }
    let dim = mats[0].nrows();
    for m in mats {
        if m.nrows() != dim || m.ncols() != mats[0].ncols() {
            return Err(Error::DimensionMismatch(
                "matrices in lin_independent must share dimensions".into(),
            ));
        }
    }
    let n = dim * mats[0].ncols();
    let stacked = CMat::from_fn(n, mats.len(), |i, j| vec_rm(&mats[j])[i]);
    let s = svd(&stacked)?.singular_values;
    let rank = numerical_rank(&s, tol);
    Ok((rank == mats.len(), rank))
}

/// Real-linear independence: stacks `[Re; Im]` representations instead.
pub fn lin_independent_real(mats: &[CMat], tol: f64) -> Result<(bool, usize)> {
    if mats.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = 2 * mats[0].nrows() * mats[0].ncols();
    let stacked = DMatrix::<f64>::from_fn(n, mats.len(), |i, j| real_repr(&mats[j])[i]);
    let dec = stacked.svd(false, false);
    let mut s: Vec<f64> = dec.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let rank = numerical_rank(&DVector::from_vec(s), tol);
    Ok((rank == mats.len(), rank))
}
