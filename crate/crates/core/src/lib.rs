//! Constructive separability certificates for low operator Schmidt rank.
//!
//! A bipartite positive semidefinite matrix with operator Schmidt rank two is
//! separable, and an explicit two-term positive decomposition can be computed
//! from the extreme rays of a planar spectrahedral cone. The same machinery
//! extends by induction to Hermitian matrix product density operators of bond
//! dimension two, which admit separable decompositions with at most four
//! positive semidefinite matrices per interior site.
//!
//! The crate is organized as:
//!
//! - [`linalg`]: dense complex Hermitian primitives with explicit tolerance
//!   semantics (eigendecomposition, SVD, kernels, congruence normalization).
//! - [`schmidt`]: operator Schmidt decompositions, realignment, MPDO cores and
//!   Hermitization (bipartite and multipartite).
//! - [`cone`]: the planar spectrahedral cone `S(A,B)` and its extreme rays.
//! - [`separator`]: the separability construction itself, certificates and
//!   their independent verification.
//! - [`apps`]: Choi matrices and entanglement-breaking checks, the
//!   nonnegative-matrix correspondence for diagonal states, PPT, rank reports.
//! - [`io`]: the JSON file format used by the `seprank` CLI.

pub mod apps;
pub mod config;
pub mod cone;
pub mod error;
pub mod io;
pub mod linalg;
pub mod schmidt;
pub mod separator;

pub use config::Config;
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64, EigSystem, HermMatrix};
