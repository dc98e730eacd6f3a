//! Derived results on top of the separator: Choi matrices and
//! entanglement-breaking certification, the entanglement-of-purification
//! bound, the diagonal-state ↔ nonnegative-matrix correspondence, and the
//! partial-transpose oracle.

use nalgebra::DVector;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{
    is_psd, numerical_rank, rel_scale, svd, unvec_rm, vec_rm, CMat, C64,
    HermMatrix, ZERO,
};
use crate::schmidt::{hermitize_bipartite, hermitize_mpdo, mpdo_from_dense, operator_schmidt};
use crate::separator::{separate_bipartite, verify_certificate, SepCertificate};

/// A linear map in term form `E(X) = Σ_α P_α tr(Q_αᵗ X)`.
#[derive(Debug, Clone)]
pub struct ChannelRep {
    pub d_in: usize,
    pub d_out: usize,
    /// `(P_α, Q_α)` with `P_α` of dimension `d_out`, `Q_α` of `d_in`.
    pub terms: Vec<(CMat, CMat)>,
    /// Whether the term factor lists are linearly independent.
    pub minimal: bool,
}

impl ChannelRep {
    pub fn new(d_in: usize, d_out: usize, terms: Vec<(CMat, CMat)>) -> Result<Self> {
        for (p, q) in &terms {
            if p.nrows() != d_out || p.ncols() != d_out || q.nrows() != d_in || q.ncols() != d_in {
                return Err(Error::DimensionMismatch(format!(
                    "channel term is {}x{} / {}x{}, expected {d_out}/{d_in}",
                    p.nrows(),
                    p.ncols(),
                    q.nrows(),
                    q.ncols()
                )));
            }
        }
        Ok(ChannelRep {
            d_in,
            d_out,
            terms,
            minimal: false,
        })
    }

    /// Equivalent representation with the minimal number of terms (the rank
    /// of the term matrix `Σ vec(P_α) vec(Q_α)ᵀ`).
    pub fn minimized(&self, cfg: &Config) -> Result<ChannelRep> {
        let (dn, dt) = (self.d_in, self.d_out);
        let mut t = CMat::zeros(dt * dt, dn * dn);
        for (p, q) in &self.terms {
            t += vec_rm(p) * vec_rm(q).transpose();
        }
        let dec = svd(&t)?;
        let r = numerical_rank(&dec.singular_values, cfg.rank_tol);
        let mut terms = Vec::with_capacity(r.max(1));
        for alpha in 0..r {
            let s = dec.singular_values[alpha].sqrt();
            let p = unvec_rm(&(dec.u.column(alpha) * C64::new(s, 0.0)), dt);
            let q = unvec_rm(&(dec.v.column(alpha).map(|z| z.conj() * s)), dn);
            terms.push((p, q));
        }
        if r == 0 {
            terms.push((CMat::zeros(dt, dt), CMat::zeros(dn, dn)));
        }
        Ok(ChannelRep {
            d_in: dn,
            d_out: dt,
            terms,
            minimal: r > 0,
        })
    }

    /// Apply the map to a matrix.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.d_in || x.ncols() != self.d_in {
            return Err(Error::DimensionMismatch(format!(
                "argument is {}x{}, channel input dimension is {}",
                x.nrows(),
                x.ncols(),
                self.d_in
            )));
        }
        let mut out = CMat::zeros(self.d_out, self.d_out);
        for (p, q) in &self.terms {
            let w: C64 = (q.transpose() * x).diagonal().iter().sum();
            out += p * w;
        }
        Ok(out)
    }
}

/// The state dual to the map: `(1/√(d_out·d_in)) Σ P_α ⊗ Q_α`.
pub fn choi_from_channel(ch: &ChannelRep) -> Result<CMat> {
    let total = ch.d_out * ch.d_in;
    let scale = C64::new(1.0 / ((ch.d_out * ch.d_in) as f64).sqrt(), 0.0);
    let mut rho = CMat::zeros(total, total);
    for (p, q) in &ch.terms {
        rho += p.kronecker(q);
    }
    Ok(rho * scale)
}

/// Entanglement-breaking verdict for a channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EbVerdict {
    /// Certified: the Choi matrix is separable.
    EB,
    /// Term rank is three or more; the method does not decide.
    Unknown,
}

/// Certify a channel entanglement breaking when its term rank is at most two.
///
/// The verdict is one-sided: `Unknown` never means "not entanglement
/// breaking". Works for non-trace-preserving maps too.
pub fn eb_check_rank2(
    ch: &ChannelRep,
    cfg: &Config,
) -> Result<(EbVerdict, Option<SepCertificate>)> {
    let min = ch.minimized(cfg)?;
    let choi = choi_from_channel(&min)?;
    let h = HermMatrix::new(choi.clone(), cfg).map_err(|_| Error::ChoiNotPSD {
        min_eig: f64::NAN,
    })?;
    let (psd, min_eig) = is_psd(&h, cfg.cert_tol)?;
    if !psd {
        return Err(Error::ChoiNotPSD { min_eig });
    }
    if min.terms.len() > 2 {
        return Ok((EbVerdict::Unknown, None));
    }
    let cert = separate_bipartite(&choi, min.d_out, min.d_in, cfg)?;
    Ok((EbVerdict::EB, Some(cert)))
}

/// Upper bound on the entanglement of purification implied by a rank-≤2
/// certificate: `log_{d₁} 2` for two terms, `0` for a product.
pub fn ep_bound(cert: &SepCertificate) -> f64 {
    let dec = &cert.decomposition;
    let terms = dec.bond_dims.first().copied().unwrap_or(1);
    if terms <= 1 {
        return 0.0;
    }
    let d1 = dec.dims[0] as f64;
    std::f64::consts::LN_2 / d1.ln()
}

/// Entrywise-nonnegative real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Parse("negative or non-finite matrix entry".into()));
        }
        Ok(NonnegMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| C64::new(self.get(i, j), 0.0))
    }
}

/// The diagonal state `ρ = Σ M_{ij} |i,j⟩⟨i,j|` on `rows × cols`.
pub fn diag_state_from_nonneg(m: &NonnegMatrix) -> (CMat, (usize, usize)) {
    let total = m.rows * m.cols;
    let rho = CMat::from_fn(total, total, |r, c| {
        if r == c {
            C64::new(m.get(r / m.cols, r % m.cols), 0.0)
        } else {
            ZERO
        }
    });
    (rho, (m.rows, m.cols))
}

/// Exact nonnegative 2-term factorization `M = a₁b₁ᵀ + a₂b₂ᵀ` of a rank-2
/// nonnegative matrix, extracted from a separability certificate of the
/// corresponding diagonal state.
pub fn nonneg_factorization_rank2(
    m: &NonnegMatrix,
    cfg: &Config,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let dec = svd(&m.to_cmat())?;
    let rank = numerical_rank(&dec.singular_values, cfg.rank_tol);
    if rank != 2 {
        return Err(Error::RankNotTwo { rank });
    }
    let (rho, (d1, d2)) = diag_state_from_nonneg(m);
    let mut cert = separate_bipartite(&rho, d1, d2, cfg)?;
    // the cone construction need not preserve diagonality; project the
    // factors onto the diagonal and re-verify independently
    let mut leak = 0.0f64;
    for site in &mut cert.decomposition.cores {
        for core in site.iter_mut() {
            let mut off = 0.0;
            for i in 0..core.nrows() {
                for j in 0..core.ncols() {
                    if i != j {
                        off += core[(i, j)].norm_sqr();
                        core[(i, j)] = ZERO;
                    } else {
                        core[(i, j)] = C64::new(core[(i, j)].re.max(0.0), 0.0);
                    }
                }
            }
            leak = leak.max(off.sqrt() / rel_scale(core));
        }
    }
    let report = verify_certificate(&cert, &rho, cfg)?;
    if !report.pass {
        return Err(Error::OffDiagonalLeak { leak });
    }
    let terms = cert.decomposition.bond_dims[0];
    let mut out = Vec::with_capacity(terms);
    for alpha in 0..terms {
        let sigma = cert.decomposition.core(0, 0, alpha);
        let tau = cert.decomposition.core(1, alpha, 0);
        let a = DVector::from_fn(d1, |i, _| sigma[(i, i)].re.max(0.0));
        let b = DVector::from_fn(d2, |j, _| tau[(j, j)].re.max(0.0));
        out.push((a, b));
    }
    Ok(out)
}

/// Partial transpose on the second tensor factor.
pub fn partial_transpose_second(rho: &CMat, d1: usize, d2: usize) -> Result<CMat> {
    if rho.nrows() != d1 * d2 || rho.ncols() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, dims say {}",
            rho.nrows(),
            rho.ncols(),
            d1 * d2
        )));
    }
    Ok(CMat::from_fn(d1 * d2, d1 * d2, |r, c| {
        let (i, k) = (r / d2, r % d2);
        let (j, l) = (c / d2, c % d2);
        rho[(i * d2 + l, j * d2 + k)]
    }))
}

/// Positivity of the partial transpose. Necessary for separability always;
/// sufficient only in the 2×2, 2×3 and 3×2 cases.
pub fn ppt_check(rho: &CMat, d1: usize, d2: usize, cfg: &Config) -> Result<bool> {
    let pt = partial_transpose_second(rho, d1, d2)?;
    let h = HermMatrix::symmetrize(&pt);
    let (psd, _) = is_psd(&h, cfg.cert_tol)?;
    Ok(psd)
}

/// Computable rank facts about a state and the consistency checks they admit.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub dims: Vec<usize>,
    /// Operator Schmidt rank per cut (one entry for bipartite states).
    pub osr: Vec<usize>,
    /// Bond dimensions of a Hermitian decomposition, when one was found;
    /// an upper bound on the Hermitian operator Schmidt rank per cut.
    pub hosr_bound: Option<Vec<usize>>,
    /// Separable rank found by the constructive method (1, 2, or unknown).
    pub sep_rank: Option<usize>,
    pub sep_error: Option<String>,
    /// Rank inequalities that are checkable from the found quantities.
    pub checks_pass: bool,
}

/// Report osr per cut, a Hermitian-decomposition bound, the separable rank
/// found (if any), and the rank inequalities these quantities admit.
pub fn rank_relations_report(rho: &CMat, dims: &[usize], cfg: &Config) -> Result<RankReport> {
    let cores = mpdo_from_dense(rho, dims, cfg)?;
    let osr = cores.bond_dims.clone();
    let hosr_bound = if dims.len() == 2 {
        operator_schmidt(rho, dims[0], dims[1], cfg)
            .and_then(|d| hermitize_bipartite(&d, cfg))
            .ok()
            .map(|d| vec![d.rank()])
    } else {
        hermitize_mpdo(&cores, cfg).ok().map(|h| h.bond_dims)
    };
    let (sep_rank, sep_error) = if dims.len() == 2 {
        match separate_bipartite(rho, dims[0], dims[1], cfg) {
            Ok(cert) => (Some(cert.decomposition.bond_dims[0]), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        match crate::separator::separate_mpdo(&cores, cfg) {
            Ok(cert) => (
                Some(cert.decomposition.bond_dims.iter().copied().max().unwrap_or(1)),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let max_osr = osr.iter().copied().max().unwrap_or(1);
    let mut pass = true;
    if let Some(s) = sep_rank {
        // osr ≤ sep-rank and osr ≤ sep-rank² whenever a certificate exists
        pass &= max_osr <= s && max_osr <= s * s;
        // osr = 1 ⟺ sep-rank = 1 on states the method certifies
        pass &= (max_osr == 1) == (s == 1);
    }
    if let Some(hb) = &hosr_bound {
        pass &= hb.iter().zip(&osr).all(|(h, o)| h >= o);
    }
    Ok(RankReport {
        dims: dims.to_vec(),
        osr,
        hosr_bound,
        sep_rank,
        sep_error,
        checks_pass: pass,
    })
}
