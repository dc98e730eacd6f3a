//! Central tolerance policy.
//!
//! Every tolerance in the crate is relative to `max(1, ‖·‖_F)` and lives here,
//! so that a certificate can record the exact policy it was produced under.

use serde::{Deserialize, Serialize};

/// Numerical tolerances and limits shared by all modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Hermiticity check: `‖M − M†‖_F ≤ herm_tol · max(1, ‖M‖_F)`.
    pub herm_tol: f64,
    /// Positive definiteness: `λ_min > pd_tol`.
    pub pd_tol: f64,
    /// Numerical rank / kernel cutoff relative to the largest singular value
    /// (or to `max(1, ‖·‖_F)` for kernel extraction).
    pub rank_tol: f64,
    /// Reconstruction residual allowed for internal factorizations.
    pub recon_tol: f64,
    /// Residual and eigenvalue slack allowed in an emitted certificate.
    /// Looser than `recon_tol` so verification has headroom.
    pub cert_tol: f64,
    /// Pencil degeneracy threshold: `|λ_max − λ_min|` below this (relative)
    /// collapses the cone to a single ray.
    pub single_ray_tol: f64,
    /// Relative rotation applied to a lone extremal ray in the singular-cone
    /// path before splitting off the joint kernel.
    pub case2_eps: f64,
    /// Largest total dimension accepted for dense multipartite work.
    pub dense_limit: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            herm_tol: 1e-10,
            pd_tol: 1e-9,
            rank_tol: 1e-9,
            recon_tol: 1e-9,
            cert_tol: 1e-8,
            single_ray_tol: 1e-9,
            case2_eps: 1e-6,
            dense_limit: 256,
        }
    }
}
