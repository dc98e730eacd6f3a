use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not Hermitian: ‖M − M†‖_F = {deviation:.3e} exceeds tolerance")]
    NonHermitianInput { deviation: f64 },
    #[error("eigen/SVD iteration failed to converge")]
    ConvergenceFailure,
    #[error("matrix is not positive definite (λ_min = {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("empty matrix list")]
    EmptyList,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("total dimension {total} exceeds dense limit {limit}")]
    DimensionLimit { total: usize, limit: usize },
    #[error("sum of tensor products is not Hermitian (deviation {deviation:.3e})")]
    NotHermitianSum { deviation: f64 },
    #[error("factor family is linearly dependent (rank {rank} of {count})")]
    DependentFactors { rank: usize, count: usize },
    #[error("pencil {{A, B}} is linearly dependent")]
    DependentPencil,
    #[error("degenerate pencil: A = B = 0")]
    DegenerateInput,
    #[error("compression C_ii·A + D_ii·B has negative eigenvalue {min_eig:.3e}; input was not PSD")]
    CompressionNotPSD { min_eig: f64 },
    #[error("extreme rays are linearly dependent")]
    DependentRays,
    #[error("solved H_{index} is not PSD (λ_min = {min_eig:.3e}); upstream cone failure")]
    HNotPsd { index: usize, min_eig: f64 },
    #[error("operator Schmidt rank {osr} is unsupported (method applies up to rank 2)")]
    RankTooHigh { osr: usize },
    #[error("input is not positive semidefinite (λ_min = {min_eig:.3e})")]
    NotPSDInput { min_eig: f64 },
    #[error("MPDO cores are not all Hermitian")]
    NotHermitianCores,
    #[error("certificate factor {index} lies outside span{{A, B}} (fit residual {residual:.3e})")]
    FactorsOutsideSpan { index: usize, residual: f64 },
    #[error("matrix has numerical rank {rank}, expected 2")]
    RankNotTwo { rank: usize },
    #[error("certificate factors have off-diagonal mass {leak:.3e}; diagonal structure lost")]
    OffDiagonalLeak { leak: f64 },
    #[error("Choi matrix is not PSD (λ_min = {min_eig:.3e}); map is not completely positive")]
    ChoiNotPSD { min_eig: f64 },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
