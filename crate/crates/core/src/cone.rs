//! The planar spectrahedral cone `S(A, B) = {(x, y) | xA + yB ⪰ 0}` and its
//! extreme rays.
//!
//! For a positive semidefinite `ρ = A⊗C + B⊗D`, each diagonal pair
//! `(C_ii, D_ii)` is a point of the cone by construction, since
//! `(I⊗⟨i|) ρ (I⊗|i⟩) = C_ii A + D_ii B`. A positive definite compression
//! gives the interior point for the generic path; if every compression is
//! singular, the joint kernel of `A` and `B` is split off first.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{
    congruence_normalizer, herm_eig, is_psd, kernel_basis, lin_independent_real, rel_scale, CMat,
    C64, HermMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    /// Two linearly independent extreme rays.
    Simplex,
    /// The cone degenerates to one ray; the state is a product state.
    SingleRay,
    /// `A = B = 0`; only the zero operator.
    Zero,
}

/// How the rays were obtained, recorded in certificate metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeCase {
    /// A positive definite compression existed.
    Interior,
    /// All compressions singular, two independent extremal pairs found.
    SingularDirect,
    /// All compressions singular and parallel; perturbed and split the joint
    /// kernel, then ran the interior path on the compressed pencil.
    SingularKernelSplit,
    /// No pencil work was needed (degenerate or single-ray input).
    Trivial,
}

/// Classification of `S(A, B)` with canonically normalized extreme rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone2 {
    pub kind: ConeKind,
    /// Unit rays, oriented so `x·A + y·B` is PSD, sorted lexicographically.
    pub rays: Vec<[f64; 2]>,
    pub case: ConeCase,
    /// Index of the compression used for the interior path, when one was.
    pub compression_index: Option<usize>,
    /// Dimension of the joint kernel split off, if any.
    pub kernel_split: usize,
}

pub fn classify_cone(cone: &Cone2) -> ConeKind {
    cone.kind
}

/// Unit length only. The sign carries meaning: `(x, y)` and `(−x, −y)` name
/// different operators `xA + yB`, and only one of them is PSD, so the
/// orientation is fixed by cone membership rather than a lexicographic rule.
fn normalize_ray(x: f64, y: f64) -> [f64; 2] {
    let n = x.hypot(y);
    [x / n, y / n]
}

fn sort_rays(mut rays: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    rays.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    rays
}

/// `xA + yB` as a Hermitian matrix.
fn pencil(a: &HermMatrix, b: &HermMatrix, x: f64, y: f64) -> HermMatrix {
    HermMatrix::symmetrize(&(a.as_mat() * C64::new(x, 0.0) + b.as_mat() * C64::new(y, 0.0)))
}

/// Diagonal pairs `(C_ii, D_ii)`; each one is asserted to be a PSD point of
/// `S(A, B)`.
pub fn compression_points(
    a: &HermMatrix,
    b: &HermMatrix,
    c: &HermMatrix,
    d: &HermMatrix,
    cfg: &Config,
) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::with_capacity(c.dim());
    for i in 0..c.dim() {
        let (ci, di) = (c.as_mat()[(i, i)].re, d.as_mat()[(i, i)].re);
        let (ok, min_eig) = is_psd(&pencil(a, b, ci, di), cfg.cert_tol)?;
        if !ok {
            return Err(Error::CompressionNotPSD { min_eig });
        }
        points.push((ci, di));
    }
    Ok(points)
}

/// Interior-point path: `x0·A + y0·B` positive definite. Returns the two
/// (possibly coincident) extreme rays.
fn rays_from_interior(
    a: &HermMatrix,
    b: &HermMatrix,
    x0: f64,
    y0: f64,
    cfg: &Config,
) -> Result<(Vec<[f64; 2]>, bool)> {
    let base = pencil(a, b, x0, y0);
    let p = congruence_normalizer(&base, cfg)?;
    let a_t = p.adjoint() * a.as_mat() * &p;
    let b_t = p.adjoint() * b.as_mat() * &p;
    let m = HermMatrix::symmetrize(&(&b_t * C64::new(x0, 0.0) - &a_t * C64::new(y0, 0.0)));
    let eig = herm_eig(&m)?;
    let (lmin, lmax) = (eig.values[0], eig.values[eig.values.len() - 1]);
    if (lmax - lmin).abs() <= cfg.single_ray_tol * (lmax.abs() + lmin.abs()).max(1.0) {
        return Ok((vec![normalize_ray(x0, y0)], true));
    }
    let u = normalize_ray(-(lmin * x0 + y0), -(lmin * y0 - x0));
    let v = normalize_ray(lmax * x0 + y0, lmax * y0 - x0);
    Ok((sort_rays(vec![u, v]), false))
}

fn ray_is_valid(a: &HermMatrix, b: &HermMatrix, ray: &[f64; 2], cfg: &Config) -> Result<bool> {
    let (ok, _) = is_psd(&pencil(a, b, ray[0], ray[1]), cfg.cert_tol * 10.0)?;
    Ok(ok)
}

/// Extreme rays of `S(A, B)` given the compression source `(C, D)`.
pub fn extreme_rays(
    a: &HermMatrix,
    b: &HermMatrix,
    c: &HermMatrix,
    d: &HermMatrix,
    cfg: &Config,
) -> Result<Cone2> {
    let scale = rel_scale(a.as_mat()).max(rel_scale(b.as_mat()));
    if a.as_mat().norm() <= cfg.rank_tol && b.as_mat().norm() <= cfg.rank_tol {
        return Ok(Cone2 {
            kind: ConeKind::Zero,
            rays: vec![],
            case: ConeCase::Trivial,
            compression_index: None,
            kernel_split: 0,
        });
    }
    let (indep, _) = lin_independent_real(&[a.as_mat().clone(), b.as_mat().clone()], cfg.rank_tol)?;
    if !indep {
        return Err(Error::DependentPencil);
    }
    let points = compression_points(a, b, c, d, cfg)?;
    // first positive definite compression wins (deterministic scan order)
    for (i, &(x0, y0)) in points.iter().enumerate() {
        let min_eig = herm_eig(&pencil(a, b, x0, y0))?.values[0];
        if min_eig > cfg.pd_tol * scale {
            let (rays, single) = rays_from_interior(a, b, x0, y0, cfg)?;
            for r in &rays {
                if !ray_is_valid(a, b, r, cfg)? {
                    return Err(Error::ConvergenceFailure);
                }
            }
            return Ok(Cone2 {
                kind: if single {
                    ConeKind::SingleRay
                } else {
                    ConeKind::Simplex
                },
                rays,
                case: ConeCase::Interior,
                compression_index: Some(i),
                kernel_split: 0,
            });
        }
    }
    // all compressions singular: each nonzero (C_ii, D_ii) is extremal
    let nonzero: Vec<(usize, (f64, f64))> = points
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, (x, y))| x.hypot(y) > cfg.rank_tol)
        .collect();
    let Some(&(first_idx, (px, py))) = nonzero.first() else {
        // C and D have zero diagonals; with ρ PSD this forces ρ = 0
        return Ok(Cone2 {
            kind: ConeKind::Zero,
            rays: vec![],
            case: ConeCase::Trivial,
            compression_index: None,
            kernel_split: 0,
        });
    };
    for &(_, (qx, qy)) in &nonzero[1..] {
        let det = px * qy - py * qx;
        if det.abs() > cfg.rank_tol * px.hypot(py) * qx.hypot(qy) {
            let rays = sort_rays(vec![normalize_ray(px, py), normalize_ray(qx, qy)]);
            for r in &rays {
                if !ray_is_valid(a, b, r, cfg)? {
                    return Err(Error::ConvergenceFailure);
                }
            }
            return Ok(Cone2 {
                kind: ConeKind::Simplex,
                rays,
                case: ConeCase::SingularDirect,
                compression_index: Some(first_idx),
                kernel_split: 0,
            });
        }
    }
    // all extremal pairs parallel: rotate slightly into the interior, split
    // off the joint kernel of A and B, and rerun the interior path
    for eps_scale in [cfg.case2_eps, cfg.case2_eps / 100.0] {
        for sign in [1.0, -1.0] {
            let eps = eps_scale * sign;
            let (x0, y0) = (px - eps * py, py + eps * px);
            let k = pencil(a, b, x0, y0);
            let (psd, _) = is_psd(&k, cfg.cert_tol)?;
            if !psd {
                continue;
            }
            let kernel = kernel_basis(&k, cfg.rank_tol)?;
            let (a_c, b_c, q) = if kernel.is_empty() {
                (a.clone(), b.clone(), None)
            } else {
                // orthonormal complement of the kernel from the eigensystem
                let eig = herm_eig(&k)?;
                let cutoff = cfg.rank_tol * rel_scale(k.as_mat());
                let keep: Vec<usize> = (0..k.dim())
                    .filter(|&i| eig.values[i].abs() > cutoff)
                    .collect();
                if keep.is_empty() {
                    continue;
                }
                let mut q = CMat::zeros(k.dim(), keep.len());
                for (col, &i) in keep.iter().enumerate() {
                    q.set_column(col, &eig.vectors.column(i));
                }
                let a_c = HermMatrix::symmetrize(&(q.adjoint() * a.as_mat() * &q));
                let b_c = HermMatrix::symmetrize(&(q.adjoint() * b.as_mat() * &q));
                (a_c, b_c, Some(keep.len()))
            };
            let base = pencil(&a_c, &b_c, x0, y0);
            let min_eig = herm_eig(&base)?.values[0];
            if min_eig <= cfg.pd_tol * rel_scale(base.as_mat()) {
                continue;
            }
            let (rays, single) = rays_from_interior(&a_c, &b_c, x0, y0, cfg)?;
            // split soundness: rays must hold for the ORIGINAL pencil
            let mut all_valid = true;
            for r in &rays {
                if !ray_is_valid(a, b, r, cfg)? {
                    all_valid = false;
                }
            }
            if !all_valid {
                continue;
            }
            let split = q.unwrap_or(k.dim());
            return Ok(Cone2 {
                kind: if single {
                    ConeKind::SingleRay
                } else {
                    ConeKind::Simplex
                },
                rays,
                case: ConeCase::SingularKernelSplit,
                compression_index: Some(first_idx),
                kernel_split: k.dim() - split,
            });
        }
    }
    Err(Error::ConvergenceFailure)
}
