//! Shared fixture for the criterion benches.
//!
//! The interesting costs only show up on meshes that look like the middle
//! of a real adaptive run: strongly graded toward the singular corner, with
//! hanging nodes if the policy allows them. The fixture replays the
//! solve, estimate, mark, refine cycle on the corner-singularity problem up
//! to a dof budget and hands out the final solved state, so each bench can
//! time one stage in isolation.

use avem::{
    assemble, build_locals, fichera_domain, fichera_problem, galerkin_loop, global_estimate,
    solve_cg, Assembled, DataSampling, ElementLocal, GalerkinConfig, MeshForest, ProblemSpec,
};

/// Everything the individual benches pick from: the refined mesh, its local
/// systems, the assembled free system, the solved nodal vector, and the
/// squared error indicators in `locals` order.
pub struct SolvedState {
    pub mesh: MeshForest,
    pub problem: ProblemSpec,
    pub locals: Vec<ElementLocal>,
    pub system: Assembled,
    pub solution: Vec<f64>,
    pub eta_sq: Vec<f64>,
}

/// Refines the corner-singularity benchmark adaptively until the mesh
/// passes `max_dofs` free nodes, then solves that final mesh once.
/// `lambda_max = 0` produces a conforming state, anything larger one with
/// hanging nodes.
pub fn solved_state(max_dofs: usize, lambda_max: u32) -> SolvedState {
    let mut problem = fichera_problem(0.5);
    // The exact-error gauge costs a graded quadrature pass per iteration
    // and none of the benches read it.
    problem.error_gauge = None;
    let mut mesh = fichera_domain().expect("benchmark domain");
    let config = GalerkinConfig { lambda_max, max_dofs, ..GalerkinConfig::default() };
    galerkin_loop(&mut mesh, &problem, &config, |_| {}).expect("setup loop");

    // The loop stops before solving the mesh that broke the budget; solve
    // it here so every bench starts from the same state.
    let locals = build_locals(&mesh, &problem, DataSampling::Centroid);
    let system = assemble(&mesh, &locals, &|p| (problem.dirichlet)(p), config.gamma)
        .expect("assemble fixture");
    let (free, _) = solve_cg(&system.matrix, &system.rhs, config.cg_tol).expect("solve fixture");
    let solution = system.expand(&free);
    let report = global_estimate(&mesh, &locals, &solution);
    SolvedState { mesh, problem, locals, system, solution, eta_sq: report.eta_sq }
}
