use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("mode data violates the reality symmetry (defect {0:e})")]
    RealitySymmetry(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("section needs at least {needed} time slices, got {got}")]
    TooFewSlices { needed: usize, got: usize },
    #[error("expected one variation per slice ({expected}), got {actual}")]
    VariationCount { expected: usize, actual: usize },
    #[error("variation does not vanish on the first and last slices (sup {0:e})")]
    VariationNotCompact(f64),
    #[error("moving frames are not dynamical (|v| = {0})")]
    MovingFrame(f64),
    #[error("difference one-form is not closed (residual {0:e}); check the sign ledger")]
    NotClosed(f64),
    #[error("observable depends on W (Reeb derivative {0:e})")]
    NotWIndependent(f64),
    #[error("observable `{name}` is not in the Darboux representation")]
    RepresentationMismatch { name: String },
    #[error("analytic and finite-difference gradients of `{name}` disagree (relative {mismatch:e})")]
    GradientMismatch { name: String, mismatch: f64 },
    #[error("observable and point belong to different theories")]
    TheoryMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
