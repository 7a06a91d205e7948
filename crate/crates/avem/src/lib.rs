//! Adaptive virtual element method for 3D diffusion-reaction problems.
//!
//! The crate solves `-div(K grad u) + c u = f` with Dirichlet data on domains
//! assembled from unit cubes, using lowest-order virtual elements on
//! tetrahedral meshes refined by newest-vertex bisection. Meshes may keep
//! hanging nodes up to a configurable nesting level; every hanging node is a
//! genuine degree of freedom, which is what separates this solver from a
//! conforming FEM code on the same forest.
//!
//! The pieces mirror the usual adaptive cycle:
//!
//! * [`mesh`]: bisection forest, hanging-node bookkeeping, admissibility.
//! * [`vem`]: element-local projectors, stabilization, interpolation.
//! * [`system`]: global assembly, Dirichlet elimination, preconditioned CG.
//! * [`estimator`]: residual error indicators and the stabilization term.
//! * [`driver`]: solve -> estimate -> mark -> refine loop.
//! * [`fichera`]: the Fichera-corner benchmark problem and its H1 error.

pub mod driver;
pub mod estimator;
pub mod fichera;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod system;
pub mod vem;

mod error;


pub use error::{Error, Result};


pub use driver::{build_locals, dorfler_mark, galerkin_loop, DataSampling, ErrorGauge, GalerkinConfig, IterationRecord, MatrixField, ProblemSpec, ScalarField, Snapshot};
pub use estimator::{global_estimate, h1_seminorm_oracle, nonconformity_oracle, EstimatorReport};
pub use fichera::{exact_gradient, exact_solution, fichera_domain, fichera_problem, h1_denominator, relative_h1_error, FICHERA_CUBES};
pub use geometry::{Mat3, Vec3};
pub use mesh::{
    FacetId, InterfaceSide, MeshForest, NodeId, RefineMode, RefinementReport, TetId,
};
pub use system::{assemble, quasi_orthogonality_residual, solve_cg, Assembled, Csr, DofMap};
pub use vem::{facet_projector, ElementLocal, FacetPolygon, LinearFunc};


