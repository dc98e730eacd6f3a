//! Operator Schmidt decompositions, MPDO cores, and Hermitization.
//!
//! The realignment map sends a bipartite operator to a rectangular matrix
//! whose rank is the operator Schmidt rank; its SVD yields the operator
//! Schmidt decomposition. Hermitization rewrites a Hermitian sum of tensor
//! products with Hermitian local factors: in the bipartite case without
//! increasing the term count, in the multipartite case either preserving bond
//! dimensions (when every site family is linearly independent) or via the
//! even-grade expansion with bond dimensions at most `2^{n-1}` times larger.

use nalgebra::{DMatrix, DVector};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{
    entries_finite, hermitian_part, lin_independent, lin_independent_real, numerical_rank,
    real_repr, rel_scale, svd, unvec_rm, CMat, C64, ONE,
};

/// An ordered list of factor pairs `(A_α, B_α)` with `ρ = Σ A_α ⊗ B_α`.
#[derive(Debug, Clone)]
pub struct PairDecomposition {
    pub d1: usize,
    pub d2: usize,
    pub pairs: Vec<(CMat, CMat)>,
    /// Both factor families passed an independence check.
    pub independent: bool,
}

impl PairDecomposition {
    pub fn rank(&self) -> usize {
        self.pairs.len()
    }

    /// `Σ A_α ⊗ B_α`.
    pub fn reconstruct(&self) -> CMat {
        let mut acc = CMat::zeros(self.d1 * self.d2, self.d1 * self.d2);
        for (a, b) in &self.pairs {
            acc += a.kronecker(b);
        }
        acc
    }
}

/// Per-site local matrices of an MPDO, indexed by bond values.
///
/// Site `l` holds `left_bond(l) · right_bond(l)` matrices of dimension
/// `dims[l]`, stored row-major in the bond pair `(a, b)`. The outermost bonds
/// have size one.
#[derive(Debug, Clone)]
pub struct MpdoCores {
    pub dims: Vec<usize>,
    pub bond_dims: Vec<usize>,
    pub cores: Vec<Vec<CMat>>,
    pub hermitian: bool,
}

impl MpdoCores {
    pub fn new(
        dims: Vec<usize>,
        bond_dims: Vec<usize>,
        cores: Vec<Vec<CMat>>,
        hermitian: bool,
    ) -> Result<Self> {
        let n = dims.len();
        if n == 0 || bond_dims.len() != n.saturating_sub(1) || cores.len() != n {
            return Err(Error::DimensionMismatch(
                "inconsistent MPDO site/bond counts".into(),
            ));
        }
        let m = MpdoCores {
            dims,
            bond_dims,
            cores,
            hermitian,
        };
        for l in 0..n {
            if m.cores[l].len() != m.left_bond(l) * m.right_bond(l) {
                return Err(Error::DimensionMismatch(format!(
                    "site {l} holds {} cores, expected {}",
                    m.cores[l].len(),
                    m.left_bond(l) * m.right_bond(l)
                )));
            }
            for c in &m.cores[l] {
                if c.nrows() != m.dims[l] || c.ncols() != m.dims[l] {
                    return Err(Error::DimensionMismatch(format!(
                        "site {l} core is {}x{}, expected {}",
                        c.nrows(),
                        c.ncols(),
                        m.dims[l]
                    )));
                }
                if !entries_finite(c) {
                    return Err(Error::Parse("non-finite MPDO core entry".into()));
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn left_bond(&self, l: usize) -> usize {
        if l == 0 {
            1
        } else {
            self.bond_dims[l - 1]
        }
    }

    pub fn right_bond(&self, l: usize) -> usize {
        if l + 1 == self.n() {
            1
        } else {
            self.bond_dims[l]
        }
    }

    pub fn core(&self, l: usize, a: usize, b: usize) -> &CMat {
        &self.cores[l][a * self.right_bond(l) + b]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Largest Hermiticity deviation over all cores, relative per core.
    pub fn max_core_herm_deviation(&self) -> f64 {
        self.cores
            .iter()
            .flatten()
            .map(|c| (c - c.adjoint()).norm() / rel_scale(c))
            .fold(0.0, f64::max)
    }
}

/// Index reshuffle `⟨i,k|ρ|j,l⟩ → R[(i,j), (k,l)]` (row-major pair indices).
///
/// Linear and invertible; sends `A ⊗ B` to the rank-one matrix
/// `vec(A) vec(B)ᵀ`, so the rank of the result is the operator Schmidt rank.
pub fn realign(rho: &CMat, d1: usize, d2: usize) -> Result<CMat> {
    if rho.nrows() != d1 * d2 || rho.ncols() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, dims say {}x{}",
            rho.nrows(),
            rho.ncols(),
            d1 * d2,
            d1 * d2
        )));
    }
    Ok(CMat::from_fn(d1 * d1, d2 * d2, |r, c| {
        let (i, j) = (r / d1, r % d1);
        let (k, l) = (c / d2, c % d2);
        rho[(i * d2 + k, j * d2 + l)]
    }))
}

/// Operator Schmidt decomposition via SVD of the realignment.
///
/// Returns `p = ` numerical rank of `realign(ρ)` pairs, Hilbert–Schmidt
/// orthogonal within each factor family.
pub fn operator_schmidt(rho: &CMat, d1: usize, d2: usize, cfg: &Config) -> Result<PairDecomposition> {
    let r = realign(rho, d1, d2)?;
    let dec = svd(&r)?;
    let p = numerical_rank(&dec.singular_values, cfg.rank_tol);
    let mut pairs = Vec::with_capacity(p.max(1));
    for alpha in 0..p {
        let s = dec.singular_values[alpha].sqrt();
        let a = unvec_rm(&(dec.u.column(alpha) * C64::new(s, 0.0)), d1);
        let b = unvec_rm(&(dec.v.column(alpha).map(|z| z.conj() * s)), d2);
        pairs.push((a, b));
    }
    if p == 0 {
        // the zero operator: represent as a single zero pair
        pairs.push((CMat::zeros(d1, d1), CMat::zeros(d2, d2)));
    }
    let independent = p > 0;
    Ok(PairDecomposition {
        d1,
        d2,
        pairs,
        independent,
    })
}

/// A Hermitian basis of the complex span of `mats`, together with the change
/// of basis `G` such that `basis[j] = Σ_k G[(j,k)] mats[k]`.
///
/// Fails with `NotHermitianSum` if the span is not closed under conjugate
/// transposition at tolerance; the count always equals `mats.len()`.
pub fn hermitian_basis(mats: &[CMat], cfg: &Config) -> Result<(Vec<CMat>, CMat)> {
    let r = mats.len();
    if r == 0 {
        return Err(Error::EmptyList);
    }
    let dim_sq = mats[0].nrows() * mats[0].ncols();
    // real basis of span over R: {M_k, i·M_k}
    let mut real_basis: Vec<CMat> = mats.to_vec();
    real_basis.extend(mats.iter().map(|m| m * C64::new(0.0, 1.0)));
    let s = DMatrix::<f64>::from_fn(2 * dim_sq, 2 * r, |i, j| real_repr(&real_basis[j])[i]);
    let s_svd = s.clone().svd(true, true);
    // matrix of the conjugate-transpose map restricted to the span, in the
    // real basis; large solve residual means the span is not †-closed
    let mut theta = DMatrix::<f64>::zeros(2 * r, 2 * r);
    for k in 0..2 * r {
        let target = real_repr(&real_basis[k].adjoint());
        let x = s_svd
            .solve(&target, 1e-12)
            .map_err(|_| Error::ConvergenceFailure)?;
        let resid = (&s * &x - &target).norm();
        if resid > cfg.recon_tol * target.norm().max(1.0) {
            return Err(Error::NotHermitianSum { deviation: resid });
        }
        theta.set_column(k, &x);
    }
    // Hermitian elements = fixed space of theta
    let fix = &theta - DMatrix::<f64>::identity(2 * r, 2 * r);
    let fix_svd = fix.svd(false, true);
    let vt = fix_svd.v_t.expect("requested v_t");
    let mut kernel_rows: Vec<usize> = (0..2 * r)
        .filter(|&i| fix_svd.singular_values[i] <= cfg.rank_tol * 10.0_f64.max(1.0))
        .collect();
    kernel_rows.sort();
    if kernel_rows.len() != r {
        return Err(Error::NotHermitianSum {
            deviation: kernel_rows.len() as f64 - r as f64,
        });
    }
    // coefficient rows -> candidate Hermitian matrices
    let mut basis = Vec::with_capacity(r);
    let mut g = CMat::zeros(r, r);
    for (j, &row) in kernel_rows.iter().enumerate() {
        let mut m = CMat::zeros(mats[0].nrows(), mats[0].ncols());
        for k in 0..r {
            let coeff = C64::new(vt[(row, k)], vt[(row, k + r)]);
            m += &mats[k] * coeff;
            g[(j, k)] = coeff;
        }
        let dev = (&m - m.adjoint()).norm();
        if dev > cfg.recon_tol * rel_scale(&m) * 100.0 {
            return Err(Error::NotHermitianSum { deviation: dev });
        }
        basis.push(hermitian_part(&m));
    }
    // deterministic orientation: first significant coefficient positive real part
    for j in 0..r {
        let pivot = (0..r)
            .map(|k| g[(j, k)])
            .find(|z| z.norm() > 1e-8)
            .unwrap_or(ONE);
        let phase = if pivot.re < 0.0 || (pivot.re == 0.0 && pivot.im < 0.0) {
            -1.0
        } else {
            1.0
        };
        if phase < 0.0 {
            basis[j] = &basis[j] * C64::new(-1.0, 0.0);
            for k in 0..r {
                g[(j, k)] = -g[(j, k)];
            }
        }
    }
    Ok((basis, g))
}

/// Rewrite `ρ = Σ A_α ⊗ B_α` (Hermitian total, independent factor families)
/// with the same number of pairs and every factor Hermitian.
pub fn hermitize_bipartite(dec: &PairDecomposition, cfg: &Config) -> Result<PairDecomposition> {
    let r = dec.rank();
    let rho = dec.reconstruct();
    let dev = (&rho - rho.adjoint()).norm();
    if dev > cfg.herm_tol * rel_scale(&rho) * 10.0 {
        return Err(Error::NotHermitianSum { deviation: dev });
    }
    let left: Vec<CMat> = dec.pairs.iter().map(|(a, _)| a.clone()).collect();
    let right: Vec<CMat> = dec.pairs.iter().map(|(_, b)| b.clone()).collect();
    for fam in [&left, &right] {
        let (ok, rank) = lin_independent(fam, cfg.rank_tol)?;
        if !ok {
            return Err(Error::DependentFactors {
                rank,
                count: fam.len(),
            });
        }
    }
    let (herm_left, g) = hermitian_basis(&left, cfg)?;
    // with A' = G A, the partners solve B = Gᵀ B'
    let gt_inv = g
        .transpose()
        .try_inverse()
        .ok_or(Error::DependentFactors { rank: 0, count: r })?;
    let mut pairs = Vec::with_capacity(r);
    for j in 0..r {
        let mut b = CMat::zeros(dec.d2, dec.d2);
        for k in 0..r {
            b += &right[k] * gt_inv[(j, k)];
        }
        let bdev = (&b - b.adjoint()).norm();
        if bdev > cfg.recon_tol * rel_scale(&b) * 100.0 {
            return Err(Error::NotHermitianSum { deviation: bdev });
        }
        pairs.push((herm_left[j].clone(), hermitian_part(&b)));
    }
    let out = PairDecomposition {
        d1: dec.d1,
        d2: dec.d2,
        pairs,
        independent: true,
    };
    let resid = (out.reconstruct() - &rho).norm();
    if resid > cfg.recon_tol * rel_scale(&rho) * 10.0 {
        return Err(Error::NotHermitianSum { deviation: resid });
    }
    let out_left: Vec<CMat> = out.pairs.iter().map(|(a, _)| a.clone()).collect();
    let (ok, rank) = lin_independent_real(&out_left, cfg.rank_tol)?;
    if !ok {
        return Err(Error::DependentFactors { rank, count: r });
    }
    Ok(out)
}

/// Contract MPDO cores to the dense operator.
pub fn dense_from_mpdo(cores: &MpdoCores) -> Result<CMat> {
    let total = cores.total_dim();
    // running family of partial contractions indexed by the open right bond
    let mut partial: Vec<CMat> = (0..cores.right_bond(0))
        .map(|b| cores.core(0, 0, b).clone())
        .collect();
    for l in 1..cores.n() {
        let rb = cores.right_bond(l);
        let lb = cores.left_bond(l);
        let pd: usize = cores.dims[..=l].iter().product();
        let mut next: Vec<CMat> = vec![CMat::zeros(pd, pd); rb];
        for b in 0..rb {
            for a in 0..lb {
                next[b] += partial[a].kronecker(cores.core(l, a, b));
            }
        }
        partial = next;
    }
    debug_assert_eq!(partial.len(), 1);
    debug_assert_eq!(partial[0].nrows(), total);
    Ok(partial.remove(0))
}

/// Decompose a dense multipartite operator into MPDO cores with minimal bond
/// dimensions (each bond dimension equals the operator Schmidt rank across
/// that cut). Left-to-right sequential SVD splits at the module rank
/// tolerance.
pub fn mpdo_from_dense(rho: &CMat, dims: &[usize], cfg: &Config) -> Result<MpdoCores> {
    let n = dims.len();
    let total: usize = dims.iter().product();
    if total > cfg.dense_limit {
        return Err(Error::DimensionLimit {
            total,
            limit: cfg.dense_limit,
        });
    }
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, dims product is {total}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if n == 1 {
        return MpdoCores::new(dims.to_vec(), vec![], vec![vec![rho.clone()]], false);
    }
    // permute ρ into the site-major tensor t[m_1, ..., m_n], m_l = (i_l, j_l)
    let modes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let full: usize = modes.iter().product();
    let mut t = DVector::<C64>::zeros(full);
    for row in 0..total {
        for col in 0..total {
            let mut idx = 0usize;
            let (mut r, mut c) = (row, col);
            // decompose row/col into per-site indices, most significant first
            let mut strides = vec![1usize; n];
            for l in (0..n - 1).rev() {
                strides[l] = strides[l + 1] * dims[l + 1];
            }
            for l in 0..n {
                let i = (r / strides[l]) % dims[l];
                let j = (c / strides[l]) % dims[l];
                r %= strides[l];
                c %= strides[l];
                idx = idx * modes[l] + (i * dims[l] + j);
            }
            t[idx] = rho[(row, col)];
        }
    }
    // sequential TT-SVD
    let mut bond_dims = Vec::with_capacity(n - 1);
    let mut cores: Vec<Vec<CMat>> = Vec::with_capacity(n);
    let mut r_prev = 1usize;
    let mut rest: usize = full;
    let mut cur = CMat::from_fn(1, full, |_, j| t[j]);
    for l in 0..n - 1 {
        let m = modes[l];
        rest /= m;
        // reshape (r_prev, m·rest) -> (r_prev·m, rest)
        let mat = CMat::from_fn(r_prev * m, rest, |i, j| {
            let (a, mm) = (i / m, i % m);
            cur[(a, mm * rest + j)]
        });
        let dec = svd(&mat)?;
        let rank = numerical_rank(&dec.singular_values, cfg.rank_tol).max(1);
        let mut site = Vec::with_capacity(r_prev * rank);
        for a in 0..r_prev {
            for b in 0..rank {
                let slice = DVector::<C64>::from_fn(m, |mm, _| dec.u[(a * m + mm, b)]);
                site.push(unvec_rm(&slice, dims[l]));
            }
        }
        cores.push(site);
        // carry diag(s) V† forward
        cur = CMat::from_fn(rank, rest, |i, j| {
            dec.v[(j, i)].conj() * C64::new(dec.singular_values[i], 0.0)
        });
        bond_dims.push(rank);
        r_prev = rank;
    }
    // last site
    let m = modes[n - 1];
    debug_assert_eq!(rest, m);
    let mut site = Vec::with_capacity(r_prev);
    for a in 0..r_prev {
        let slice = DVector::<C64>::from_fn(m, |mm, _| cur[(a, mm)]);
        site.push(unvec_rm(&slice, dims[n - 1]));
    }
    cores.push(site);
    let out = MpdoCores::new(dims.to_vec(), bond_dims, cores, false)?;
    let resid = (dense_from_mpdo(&out)? - rho).norm();
    if resid > cfg.recon_tol * rel_scale(rho) * 10.0 {
        return Err(Error::ConvergenceFailure);
    }
    Ok(out)
}

/// Partial contraction of sites `0..=l` with the right bond left open.
fn left_contractions(cores: &MpdoCores, l: usize) -> Vec<CMat> {
    let mut partial: Vec<CMat> = (0..cores.right_bond(0))
        .map(|b| cores.core(0, 0, b).clone())
        .collect();
    for site in 1..=l {
        let rb = cores.right_bond(site);
        let lb = cores.left_bond(site);
        let pd: usize = cores.dims[..=site].iter().product();
        let mut next: Vec<CMat> = vec![CMat::zeros(pd, pd); rb];
        for b in 0..rb {
            for a in 0..lb {
                next[b] += partial[a].kronecker(cores.core(site, a, b));
            }
        }
        partial = next;
    }
    partial
}

/// Hermitize MPDO cores.
///
/// When the left partial contractions at every bond are linearly independent
/// (always true at minimal bond dimensions), the bond dimensions are
/// preserved: at each bond, the left partial contractions are rotated onto a
/// Hermitian basis and the inverse transform is pushed into the next site.
/// Otherwise falls back to the Hermitian/anti-Hermitian grade expansion,
/// keeping only even-grade terms, with bond dimensions at most `2^{n-1}` times
/// the input.
pub fn hermitize_mpdo(cores: &MpdoCores, cfg: &Config) -> Result<MpdoCores> {
    let rho = dense_from_mpdo(cores)?;
    let dev = (&rho - rho.adjoint()).norm();
    if dev > cfg.herm_tol * rel_scale(&rho) * 10.0 {
        return Err(Error::NotHermitianSum { deviation: dev });
    }
    let herm_tol_abs = |m: &CMat| cfg.recon_tol * rel_scale(m) * 100.0;
    // already Hermitian sitewise
    if cores.max_core_herm_deviation() <= cfg.herm_tol * 100.0 {
        let cleaned: Vec<Vec<CMat>> = cores
            .cores
            .iter()
            .map(|site| site.iter().map(hermitian_part).collect())
            .collect();
        return MpdoCores::new(cores.dims.clone(), cores.bond_dims.clone(), cleaned, true);
    }
    // bond-preserving path; any failure falls back to the grade expansion
    match hermitize_sitewise(cores, cfg, &rho, herm_tol_abs) {
        Ok(out) => Ok(out),
        Err(_) => hermitize_grade_expansion(cores, cfg, &rho),
    }
}

fn hermitize_sitewise(
    cores: &MpdoCores,
    cfg: &Config,
    rho: &CMat,
    herm_tol_abs: impl Fn(&CMat) -> f64,
) -> Result<MpdoCores> {
    let n = cores.n();
    let mut work = cores.clone();
    for bond in 0..n - 1 {
        let lefts = left_contractions(&work, bond);
        let (ok, rank) = lin_independent(&lefts, cfg.rank_tol)?;
        if !ok {
            return Err(Error::DependentFactors {
                rank,
                count: lefts.len(),
            });
        }
        let (_herm, g) = hermitian_basis(&lefts, cfg)?;
        let d_bond = work.bond_dims[bond];
        // rotate the right bond of site `bond` by G
        let lb = work.left_bond(bond);
        let mut new_site = Vec::with_capacity(lb * d_bond);
        for a in 0..lb {
            for j in 0..d_bond {
                let mut m = CMat::zeros(work.dims[bond], work.dims[bond]);
                for k in 0..d_bond {
                    m += work.core(bond, a, k) * g[(j, k)];
                }
                new_site.push(m);
            }
        }
        work.cores[bond] = new_site;
        // compensate on the left bond of site `bond + 1` with (Gᵀ)⁻¹
        let gt_inv = g.transpose().try_inverse().ok_or(Error::DependentFactors {
            rank: 0,
            count: d_bond,
        })?;
        let rb = work.right_bond(bond + 1);
        let mut new_next = Vec::with_capacity(d_bond * rb);
        for j in 0..d_bond {
            for b in 0..rb {
                let mut m = CMat::zeros(work.dims[bond + 1], work.dims[bond + 1]);
                for k in 0..d_bond {
                    m += work.core(bond + 1, k, b) * gt_inv[(j, k)];
                }
                new_next.push(m);
            }
        }
        work.cores[bond + 1] = new_next;
        // the just-rotated site must now be Hermitian
        for c in &work.cores[bond] {
            if (c - c.adjoint()).norm() > herm_tol_abs(c) {
                return Err(Error::NotHermitianCores);
            }
        }
    }
    for c in &work.cores[n - 1] {
        if (c - c.adjoint()).norm() > herm_tol_abs(c) {
            return Err(Error::NotHermitianCores);
        }
    }
    let cleaned: Vec<Vec<CMat>> = work
        .cores
        .iter()
        .map(|site| site.iter().map(hermitian_part).collect())
        .collect();
    let out = MpdoCores::new(work.dims, work.bond_dims, cleaned, true)?;
    let resid = (dense_from_mpdo(&out)? - rho).norm();
    if resid > cfg.recon_tol * rel_scale(rho) * 10.0 {
        return Err(Error::NotHermitianCores);
    }
    Ok(out)
}

/// Grade-expansion fallback: split each core into Hermitian and
/// anti-Hermitian parts, track the accumulated grade modulo four along the
/// bond, and keep only even total grade. The discarded odd part must contract
/// to zero for a Hermitian total, which is verified.
fn hermitize_grade_expansion(cores: &MpdoCores, cfg: &Config, rho: &CMat) -> Result<MpdoCores> {
    let n = cores.n();
    if n == 1 {
        return MpdoCores::new(
            cores.dims.clone(),
            vec![],
            vec![vec![hermitian_part(&cores.cores[0][0])]],
            true,
        );
    }
    // Hermitian/anti-Hermitian parts per core: part(k=0) + i·part(k=1)
    let part = |m: &CMat, k: usize| -> CMat {
        if k == 0 {
            hermitian_part(m)
        } else {
            crate::linalg::antihermitian_part(m)
        }
    };
    // accumulated grade values reachable at each bond
    let grade_count = |l: usize| (l + 2).min(4);
    let mut new_bond_dims = Vec::with_capacity(n - 1);
    for l in 0..n - 1 {
        new_bond_dims.push(cores.bond_dims[l] * grade_count(l));
    }
    let mut new_cores: Vec<Vec<CMat>> = Vec::with_capacity(n);
    // site 0: right index (α, q) with q = k_0 ∈ {0, 1}
    {
        let rb0 = cores.right_bond(0);
        let q0 = grade_count(0);
        let mut site = Vec::with_capacity(rb0 * q0);
        for a in 0..rb0 {
            for q in 0..q0 {
                site.push(if q <= 1 {
                    part(cores.core(0, 0, a), q)
                } else {
                    CMat::zeros(cores.dims[0], cores.dims[0])
                });
            }
        }
        new_cores.push(site);
    }
    for l in 1..n - 1 {
        let (lq, rq) = (grade_count(l - 1), grade_count(l));
        let (lb, rb) = (cores.left_bond(l), cores.right_bond(l));
        let mut site = Vec::with_capacity(lb * lq * rb * rq);
        for a in 0..lb {
            for qa in 0..lq {
                for b in 0..rb {
                    for qb in 0..rq {
                        let k = (qb + 4 - qa) % 4;
                        site.push(if k <= 1 {
                            part(cores.core(l, a, b), k)
                        } else {
                            CMat::zeros(cores.dims[l], cores.dims[l])
                        });
                    }
                }
            }
        }
        new_cores.push(site);
    }
    // last site: choose k to make the total grade even; sign = i^{total}
    {
        let lq = grade_count(n - 2);
        let lb = cores.left_bond(n - 1);
        let mut site = Vec::with_capacity(lb * lq);
        for a in 0..lb {
            for q in 0..lq {
                let k = q % 2;
                let total = (q + k) % 4;
                let sign = if total == 0 { 1.0 } else { -1.0 };
                site.push(part(cores.core(n - 1, a, 0), k) * C64::new(sign, 0.0));
            }
        }
        new_cores.push(site);
    }
    let out = MpdoCores::new(cores.dims.clone(), new_bond_dims, new_cores, true)?;
    // the even part must reproduce ρ, i.e. the odd part contracts to zero
    let even = dense_from_mpdo(&out)?;
    let odd_norm = (&even - rho).norm();
    if odd_norm > cfg.recon_tol * rel_scale(rho) * 10.0 {
        return Err(Error::NotHermitianSum {
            deviation: odd_norm,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{vec_rm, ZERO};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> Config {
        Config::default()
    }

    fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn sigma_y() -> CMat {
        CMat::from_row_slice(
            2,
            2,
            &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
        )
    }

    fn random_cmat(rng: &mut impl Rng, d: usize) -> CMat {
        CMat::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_herm(rng: &mut impl Rng, d: usize) -> CMat {
        hermitian_part(&random_cmat(rng, d))
    }

    fn example1() -> CMat {
        (CMat::identity(4, 4) + sigma_x().kronecker(&sigma_x())) * C64::new(0.5, 0.0)
    }

    #[test]
    fn realign_product_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_cmat(&mut rng, 2);
        let b = random_cmat(&mut rng, 3);
        let r = realign(&a.kronecker(&b), 2, 3).unwrap();
        let s = svd(&r).unwrap().singular_values;
        assert_eq!(numerical_rank(&s, 1e-9), 1);
        // realign(A⊗B) = vec(A) vec(B)ᵀ entrywise
        let expected = CMat::from_fn(4, 9, |i, j| vec_rm(&a)[i] * vec_rm(&b)[j]);
        assert!((r - expected).norm() < 1e-12);
    }

    #[test]
    fn realign_example1_rank_two() {
        let r = realign(&example1(), 2, 2).unwrap();
        let s = svd(&r).unwrap().singular_values;
        assert_eq!(numerical_rank(&s, 1e-9), 2);
    }

    #[test]
    fn realign_three_term_rank_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rho = CMat::zeros(12, 12);
        for _ in 0..3 {
            rho += random_cmat(&mut rng, 3).kronecker(&random_cmat(&mut rng, 4));
        }
        let r = realign(&rho, 3, 4).unwrap();
        let s = svd(&r).unwrap().singular_values;
        assert_eq!(numerical_rank(&s, 1e-9), 3);
    }

    #[test]
    fn operator_schmidt_rank_one_and_two() {
        let c = cfg();
        let dec = operator_schmidt(&CMat::identity(4, 4), 2, 2, &c).unwrap();
        assert_eq!(dec.rank(), 1);
        assert!((dec.reconstruct() - CMat::identity(4, 4)).norm() < 1e-12);

        let rho = example1();
        let dec = operator_schmidt(&rho, 2, 2, &c).unwrap();
        assert_eq!(dec.rank(), 2);
        assert!((dec.reconstruct() - &rho).norm() < 1e-12);
        // factor span equals span{I, σx}
        for (a, _) in &dec.pairs {
            let (_, rank) =
                lin_independent(&[CMat::identity(2, 2), sigma_x(), a.clone()], 1e-9).unwrap();
            assert_eq!(rank, 2);
        }
        // Hilbert–Schmidt orthogonality within each family
        let hs = |x: &CMat, y: &CMat| (x.adjoint() * y).trace();
        assert!(hs(&dec.pairs[0].0, &dec.pairs[1].0).norm() < 1e-12);
        assert!(hs(&dec.pairs[0].1, &dec.pairs[1].1).norm() < 1e-12);
    }

    #[test]
    fn hermitize_bipartite_already_hermitian() {
        let c = cfg();
        let dec = PairDecomposition {
            d1: 2,
            d2: 2,
            pairs: vec![
                (CMat::identity(2, 2), CMat::identity(2, 2)),
                (sigma_x(), sigma_x()),
            ],
            independent: true,
        };
        let out = hermitize_bipartite(&dec, &c).unwrap();
        assert_eq!(out.rank(), 2);
        assert!((out.reconstruct() - dec.reconstruct()).norm() < 1e-10);
        assert!(out
            .pairs
            .iter()
            .all(|(a, b)| (a - a.adjoint()).norm() < 1e-12 && (b - b.adjoint()).norm() < 1e-12));
    }

    #[test]
    fn hermitize_bipartite_ladder_pair() {
        // ρ = A⊗A† + A†⊗A with A = |0⟩⟨1|; one valid Hermitian form is
        // ½(σx⊗σx + σy⊗σy)
        let c = cfg();
        let a = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let dec = PairDecomposition {
            d1: 2,
            d2: 2,
            pairs: vec![(a.clone(), a.adjoint()), (a.adjoint(), a.clone())],
            independent: true,
        };
        let rho = dec.reconstruct();
        let expected =
            (sigma_x().kronecker(&sigma_x()) + sigma_y().kronecker(&sigma_y())) * C64::new(0.5, 0.0);
        assert!((&rho - expected).norm() < 1e-12);
        let out = hermitize_bipartite(&dec, &c).unwrap();
        assert_eq!(out.rank(), 2);
        assert!((out.reconstruct() - rho).norm() < 1e-10);
        for (p, q) in &out.pairs {
            assert!((p - p.adjoint()).norm() < 1e-12);
            assert!((q - q.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitize_bipartite_single_pair_psd() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = {
            let m = random_cmat(&mut rng, 2);
            &m * m.adjoint()
        };
        let q = {
            let m = random_cmat(&mut rng, 3);
            &m * m.adjoint()
        };
        let phase = C64::new(0.0, 1.0);
        let dec = PairDecomposition {
            d1: 2,
            d2: 3,
            pairs: vec![(&p * phase, &q * phase.conj())],
            independent: true,
        };
        let out = hermitize_bipartite(&dec, &c).unwrap();
        assert_eq!(out.rank(), 1);
        assert!((out.reconstruct() - dec.reconstruct()).norm() < 1e-10);
        let (a, b) = &out.pairs[0];
        assert!((a - a.adjoint()).norm() < 1e-12);
        assert!((b - b.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn hermitize_bipartite_preserves_count_random() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let d1 = rng.gen_range(2..5);
            let d2 = rng.gen_range(2..5);
            // Hermitian total via a Hermitian pencil, then re-decomposed to
            // generically non-Hermitian Schmidt factors
            let rho = random_herm(&mut rng, d1).kronecker(&random_herm(&mut rng, d2))
                + random_herm(&mut rng, d1).kronecker(&random_herm(&mut rng, d2));
            let dec = operator_schmidt(&rho, d1, d2, &c).unwrap();
            if dec.rank() != 2 {
                continue;
            }
            let out = hermitize_bipartite(&dec, &c).unwrap();
            assert_eq!(out.rank(), dec.rank());
            assert!((out.reconstruct() - &rho).norm() < 1e-9 * rel_scale(&rho));
        }
    }

    #[test]
    fn mpdo_round_trips() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        // product state: all bond dims 1
        let s1 = random_cmat(&mut rng, 2);
        let s2 = random_cmat(&mut rng, 2);
        let s3 = random_cmat(&mut rng, 3);
        let rho = s1.kronecker(&s2).kronecker(&s3);
        let m = mpdo_from_dense(&rho, &[2, 2, 3], &c).unwrap();
        assert_eq!(m.bond_dims, vec![1, 1]);
        assert!((dense_from_mpdo(&m).unwrap() - &rho).norm() < 1e-10 * rel_scale(&rho));

        // GHZ-X type: ½(I⊗I⊗I + X⊗X⊗X) has bond dims (2, 2)
        let x = sigma_x();
        let ghz = (CMat::identity(8, 8) + x.kronecker(&x).kronecker(&x)) * C64::new(0.5, 0.0);
        let m = mpdo_from_dense(&ghz, &[2, 2, 2], &c).unwrap();
        assert_eq!(m.bond_dims, vec![2, 2]);
        assert!((dense_from_mpdo(&m).unwrap() - &ghz).norm() < 1e-10);
    }

    #[test]
    fn mpdo_round_trip_random_bond_two() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        // random bond-2 three-site operator, contract then re-decompose
        let site1: Vec<CMat> = (0..2).map(|_| random_cmat(&mut rng, 2)).collect();
        let site2: Vec<CMat> = (0..4).map(|_| random_cmat(&mut rng, 3)).collect();
        let site3: Vec<CMat> = (0..2).map(|_| random_cmat(&mut rng, 2)).collect();
        let m = MpdoCores::new(vec![2, 3, 2], vec![2, 2], vec![site1, site2, site3], false)
            .unwrap();
        let rho = dense_from_mpdo(&m).unwrap();
        let back = mpdo_from_dense(&rho, &[2, 3, 2], &c).unwrap();
        assert!(back.bond_dims.iter().all(|&b| b <= 2));
        let resid = (dense_from_mpdo(&back).unwrap() - &rho).norm() / rel_scale(&rho);
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn hermitize_mpdo_hermitian_input_unchanged() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let site1: Vec<CMat> = (0..2).map(|_| random_herm(&mut rng, 2)).collect();
        let site2: Vec<CMat> = (0..4).map(|_| random_herm(&mut rng, 2)).collect();
        let site3: Vec<CMat> = (0..2).map(|_| random_herm(&mut rng, 2)).collect();
        let m = MpdoCores::new(vec![2, 2, 2], vec![2, 2], vec![site1, site2, site3], false)
            .unwrap();
        let out = hermitize_mpdo(&m, &c).unwrap();
        assert!(out.hermitian);
        assert_eq!(out.bond_dims, vec![2, 2]);
        let resid =
            (dense_from_mpdo(&out).unwrap() - dense_from_mpdo(&m).unwrap()).norm();
        assert!(resid < 1e-10);
    }

    #[test]
    fn hermitize_mpdo_two_sites_matches_bipartite() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // Hermitian total with non-Hermitian independent factors
        let rho = random_herm(&mut rng, 2).kronecker(&random_herm(&mut rng, 3))
            + random_herm(&mut rng, 2).kronecker(&random_herm(&mut rng, 3));
        let dec = operator_schmidt(&rho, 2, 3, &c).unwrap();
        assert_eq!(dec.rank(), 2);
        let site1: Vec<CMat> = dec.pairs.iter().map(|(a, _)| a.clone()).collect();
        let site2: Vec<CMat> = dec.pairs.iter().map(|(_, b)| b.clone()).collect();
        let m = MpdoCores::new(vec![2, 3], vec![2], vec![site1, site2], false).unwrap();
        let out = hermitize_mpdo(&m, &c).unwrap();
        assert_eq!(out.bond_dims, vec![2]); // count preserved, as bipartite
        assert!(out.hermitian);
        assert!((dense_from_mpdo(&out).unwrap() - &rho).norm() < 1e-9 * rel_scale(&rho));
    }

    #[test]
    fn hermitize_mpdo_fallback_bound() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        // n = 3, bond-2, dependent site-1 family with non-Hermitian locals,
        // built so the total is Hermitian: ρ = T + T†
        let a = random_cmat(&mut rng, 2);
        let b = random_cmat(&mut rng, 2);
        let site1 = vec![a.clone(), a * C64::new(2.0, 0.0)]; // dependent family
        let site2: Vec<CMat> = (0..4).map(|_| random_cmat(&mut rng, 2)).collect();
        let site3 = vec![b.clone(), b * C64::new(-0.5, 0.0)]; // dependent family
        let m = MpdoCores::new(vec![2, 2, 2], vec![2, 2], vec![site1, site2, site3], false)
            .unwrap();
        let t = dense_from_mpdo(&m).unwrap();
        let rho = &t + t.adjoint();
        // Hermitian total as a bond-2 MPDO needs combining: use the dense
        // decomposition, whose factors are generically non-Hermitian
        let m = mpdo_from_dense(&rho, &[2, 2, 2], &c).unwrap();
        let d_in = *m.bond_dims.iter().max().unwrap();
        let out = hermitize_mpdo(&m, &c).unwrap();
        assert!(out.hermitian);
        for (l, &bd) in out.bond_dims.iter().enumerate() {
            assert!(
                bd <= 4 * m.bond_dims[l],
                "bond {l}: {bd} > 2^(n-1)·{}",
                d_in
            );
        }
        assert!(out.max_core_herm_deviation() < 1e-10);
        let resid = (dense_from_mpdo(&out).unwrap() - &rho).norm() / rel_scale(&rho);
        assert!(resid < 1e-9, "residual {resid}");
    }
}
