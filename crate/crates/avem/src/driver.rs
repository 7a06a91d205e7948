//! The adaptive solve, estimate, mark, refine loop.
//!
//! One call to [`galerkin_loop`] runs the whole cycle: build local systems
//! from sampled coefficients, assemble and solve, evaluate the residual
//! estimator, mark a minimal bulk set, refine with the configured hanging
//! node policy, and repeat until the estimate drops below tolerance or the
//! next mesh would exceed the dof budget. Every iteration leaves behind an
//! [`IterationRecord`]; an observer sees each solved state before the mesh
//! moves on, which is where exports hook in.

use std::sync::Arc;

use rayon::prelude::*;

use crate::estimator::global_estimate;
use crate::geometry::{tet_centroid, Mat3, Vec3};
use crate::mesh::{MeshForest, NodeId, RefineMode, TetId};
use crate::system::{assemble, quasi_orthogonality_residual, solve_cg};
use crate::vem::ElementLocal;
use crate::Result;

pub type ScalarField = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(Vec3) -> Mat3 + Send + Sync>;
/// Independent error measure evaluated on each solved state, typically a
/// relative energy error against a known exact solution.
pub type ErrorGauge = Arc<dyn Fn(&MeshForest, &[ElementLocal], &[f64]) -> f64 + Send + Sync>;

/// Coefficients and data of `-div(K grad u) + c u = f` with Dirichlet data.
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusion: MatrixField,
    pub reaction: ScalarField,
    pub load: ScalarField,
    pub dirichlet: ScalarField,
    pub error_gauge: Option<ErrorGauge>,
}

/// How per-element constant coefficients are sampled from the fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataSampling {
    /// Evaluate at the element centroid. Safe for data with point
    /// singularities at mesh nodes, since centroids avoid them.
    Centroid,
    /// Average the values at the four element vertices.
    VertexMean,
}

#[derive(Clone, Debug)]
pub struct GalerkinConfig {
    /// Bulk fraction of the squared estimate covered by the marked set.
    pub theta: f64,
    /// Stabilization weight in the discrete bilinear form.
    pub gamma: f64,
    /// Bound on hanging node depth; zero refines conformingly instead.
    pub lambda_max: u32,
    /// Stop once the global estimate falls to this value.
    pub tol: f64,
    /// Stop before solving a mesh with more free dofs than this.
    pub max_dofs: usize,
    pub cg_tol: f64,
    /// Number of leading iterations that also evaluate the hat residual
    /// probe (it costs an extra pass over the elements).
    pub qo_iters: usize,
    pub sampling: DataSampling,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig {
            theta: 0.5,
            gamma: 1.0,
            lambda_max: 1,
            tol: 0.0,
            max_dofs: 10_000,
            cg_tol: 1e-10,
            qo_iters: 0,
            sampling: DataSampling::Centroid,
        }
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iter: usize,
    /// Free (non-Dirichlet) nodes of the solved mesh.
    pub ndofs: usize,
    pub ncells: usize,
    /// Global estimate, square root of the summed squared indicators.
    pub eta: f64,
    /// Stabilization energy of the solution, without the gamma weight.
    pub stab: f64,
    pub h1_err: Option<f64>,
    pub lambda_max: u32,
    pub n_marked: usize,
    /// Marked elements plus whatever the closure policy forced.
    pub n_refined: usize,
    pub cg_iters: usize,
    pub qo_residual: Option<f64>,
}

/// A solved state, handed to the observer before the mesh is refined.
pub struct Snapshot<'a> {
    pub iter: usize,
    pub mesh: &'a MeshForest,
    pub locals: &'a [ElementLocal],
    /// One value per mesh node.
    pub solution: &'a [f64],
    /// Squared indicator per entry of `locals`.
    pub eta_sq: &'a [f64],
}

/// Builds the local element systems for every leaf with coefficients
/// sampled per element.
pub fn build_locals(
    mesh: &MeshForest,
    problem: &ProblemSpec,
    sampling: DataSampling,
) -> Vec<ElementLocal> {
    mesh.leaf_ids()
        .into_par_iter()
        .map(|t| {
            let v = mesh.tet_vertex_positions(t);
            let (k_e, c_e, f_e) = match sampling {
                DataSampling::Centroid => {
                    let p = tet_centroid(&v);
                    ((problem.diffusion)(p), (problem.reaction)(p), (problem.load)(p))
                }
                DataSampling::VertexMean => {
                    let mut k = [[0.0; 3]; 3];
                    let mut c = 0.0;
                    let mut f = 0.0;
                    for &p in &v {
                        let kp = (problem.diffusion)(p);
                        for r in 0..3 {
                            for s in 0..3 {
                                k[r][s] += 0.25 * kp[r][s];
                            }
                        }
                        c += 0.25 * (problem.reaction)(p);
                        f += 0.25 * (problem.load)(p);
                    }
                    (k, c, f)
                }
            };
            ElementLocal::build(mesh, t, k_e, c_e, f_e)
        })
        .collect()
}

/// Smallest set of elements whose squared indicators cover `theta` times
/// the total, largest first, ties broken toward older elements. A
/// non-positive total or `theta` marks nothing.
pub fn dorfler_mark(indicators: &[(TetId, f64)], theta: f64) -> Vec<TetId> {
    let total: f64 = indicators.iter().map(|&(_, e)| e).sum();
    if !(total > 0.0) || theta <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| {
        indicators[b]
            .1
            .partial_cmp(&indicators[a].1)
            .expect("indicator is NaN")
            .then_with(|| indicators[a].0.cmp(&indicators[b].0))
    });
    let target = theta * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for i in order {
        acc += indicators[i].1;
        out.push(indicators[i].0);
        if acc >= target {
            break;
        }
    }
    out
}

/// Runs the adaptive loop on `mesh` until the estimate reaches
/// `config.tol`, nothing is marked, or the next mesh would exceed
/// `config.max_dofs`. Returns the per-iteration history; the observer is
/// called once per iteration with the solved state.
pub fn galerkin_loop(
    mesh: &mut MeshForest,
    problem: &ProblemSpec,
    config: &GalerkinConfig,
    mut observer: impl FnMut(&Snapshot),
) -> Result<Vec<IterationRecord>> {
    let mode = if config.lambda_max == 0 {
        RefineMode::Conforming
    } else {
        RefineMode::Admissible(config.lambda_max)
    };
    let mut records = Vec::new();
    let mut iter = 0usize;
    loop {
        let locals = build_locals(mesh, problem, config.sampling);
        let assembled = assemble(mesh, &locals, &|p| (problem.dirichlet)(p), config.gamma)?;
        let (x, cg_iters) = solve_cg(&assembled.matrix, &assembled.rhs, config.cg_tol)?;
        let solution = assembled.expand(&x);
        let report = global_estimate(mesh, &locals, &solution);
        let h1_err = problem
            .error_gauge
            .as_ref()
            .map(|gauge| gauge(mesh, &locals, &solution));
        let qo_residual = (iter < config.qo_iters).then(|| {
            let nrm = assembled.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nrm = if nrm > 0.0 { nrm } else { 1.0 };
            quasi_orthogonality_residual(mesh, &locals, &solution, nrm, config.gamma)
        });
        observer(&Snapshot {
            iter,
            mesh,
            locals: &locals,
            solution: &solution,
            eta_sq: &report.eta_sq,
        });

        let mut record = IterationRecord {
            iter,
            ndofs: assembled.dofs.n_free(),
            ncells: locals.len(),
            eta: report.total_eta_sq.sqrt(),
            stab: report.total_stab,
            h1_err,
            lambda_max: mesh.lambda_max(),
            n_marked: 0,
            n_refined: 0,
            cg_iters,
            qo_residual,
        };
        let done = record.eta <= config.tol;
        let marked = if done {
            Vec::new()
        } else {
            let pairs: Vec<(TetId, f64)> = locals
                .iter()
                .zip(&report.eta_sq)
                .map(|(el, &e)| (el.tet, e))
                .collect();
            dorfler_mark(&pairs, config.theta)
        };
        if !marked.is_empty() {
            let rep = mesh.refine_set(&marked, mode)?;
            record.n_marked = rep.n_marked;
            record.n_refined = rep.n_refined;
        }
        let stop = marked.is_empty();
        records.push(record);
        if stop {
            break;
        }
        let next_ndofs = (0..mesh.n_nodes() as u32)
            .filter(|&i| !mesh.node(NodeId(i)).on_boundary)
            .count();
        if next_ndofs > config.max_dofs {
            break;
        }
        iter += 1;
    }
    Ok(records)
}
