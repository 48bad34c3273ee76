//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside family domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("time {t} outside integrated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty or inverted interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("frame is rank deficient: smallest relative singular value {sigma:.3e}")]
    RankDeficientFrame { sigma: f64 },

    #[error("subspace is not {class}: max relative omega-Gram entry {gram:.3e}")]
    NotIsotropic { class: &'static str, gram: f64 },

    #[error("operation is defined only for isotropic or Lagrangian subspaces")]
    NotIsotropicInput,

    #[error("anchor mismatch: subspace anchored at t = {subspace}, solution at t = {solution}")]
    AnchorMismatch { subspace: f64, solution: f64 },

    #[error("step size underflow near t = {t}")]
    StepUnderflow { t: f64 },

    #[error("unrecoverable symplectic defect {defect:.3e} near t = {t}")]
    SymplecticDefect { defect: f64, t: f64 },

    #[error("curvature norm bound violated at t = {t}: |R| = {norm:.6e} > bound {bound:.6e}")]
    NormBoundViolated { t: f64, norm: f64, bound: f64 },

    #[error("endpoint t = {t} is focal (index {index}); move the interval endpoint")]
    FocalEndpoint { t: f64, index: usize },

    #[error("unresolvable focal cluster near t = {t}; tighten rank/localization tolerances")]
    UnresolvableCluster { t: f64 },

    #[error("winding angle jump {jump:.3} rad near t = {t} exceeds pi/2 after maximal refinement")]
    WindingJump { jump: f64, t: f64 },

    #[error("horizontal frame residual {residual:.3e} exceeds {tol:.3e} after {refinements} grid refinements")]
    FrameResidual {
        residual: f64,
        tol: f64,
        refinements: usize,
    },

    #[error("subspace is not contained in the larger one: projection residual {residual:.3e}")]
    NotContained { residual: f64 },

    #[error("no focal-free anchor available in [{lo}, {hi}]")]
    NoFocalFreeAnchor { lo: f64, hi: f64 },

    #[error("combined value/derivative system has rank {rank} < {expected} at t = {t}")]
    SubbundleRank { t: f64, rank: usize, expected: usize },

    #[error("negative curvature bound {0}")]
    NegativeBound(f64),

    #[error("degenerate random draw after {attempts} attempts")]
    DegenerateDraw { attempts: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
