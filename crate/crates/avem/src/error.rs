use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cube at {0:?} duplicates an earlier cube")]
    OverlappingCubes([i32; 3]),

    #[error("mesh needs at least one cube")]
    EmptyDomain,

    #[error("element {0} is not a leaf")]
    NotALeaf(usize),

    #[error("refinement depth exceeds the exact-arithmetic guard ({0} midpoint generations)")]
    DepthExceeded(u16),

    #[error("mesh repair did not terminate within {0} sweeps")]
    RepairStalled(usize),

    #[error("admissibility level must be at least 1")]
    BadLevel,

    #[error("system is singular: no Dirichlet nodes and no reaction term")]
    SingularSystem,

    #[error("conjugate gradients stalled at relative residual {residual:.3e} after {iters} iterations")]
    SolverStalled { residual: f64, iters: usize },
}
