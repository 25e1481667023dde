//! Dense interior-point machinery for the small conic programs that appear in
//! joint beamforming design: semidefinite programs over complex Hermitian or
//! real symmetric blocks, and second-order cone feasibility problems.
//!
//! Everything is solved by one homogeneous self-dual interior-point method
//! ([`conelp`]) over products of orthant, second-order and semidefinite cones.

pub mod cone;
pub mod conelp;
pub mod linalg;
pub mod sdp;
pub mod socp;

pub use cone::{ConeDims, ConeVec};
pub use conelp::{solve_conelp, Column, ConeProgram, ConeSettings, ConeSolution, ConeStatus, PsdTerm, INACCURATE_FACTOR};
pub use linalg::{
    embed_hermitian, hermitian_eig, hermitize, outer, rank_eps, rank_of_spectrum, trace_inner, unembed_symmetric,
    CMat, CVec, HermitianEig, C64, DEFAULT_RANK_TOL,
};
pub use sdp::{
    solve_sdp, write_sdpa, BlockField, BlockSpec, HermTerm, SdpConstraint, SdpProblem, SdpSolution, SdpTolerances,
    Sense, SolverStatus,
};
pub use socp::{solve_socp_feasibility, ComplexSoc, PowerGroup, SocpFeasibilityProblem, SocpOutcome};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (relative defect {0:.3e})")]
    NotHermitian(f64),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("interior-point method failed numerically")]
    NumericalFailure,
}
