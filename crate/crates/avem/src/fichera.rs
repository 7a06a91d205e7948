//! Corner singularity benchmark on the three-quarter cube.
//!
//! The domain is `(-1,1)^3` minus the closed positive octant, meshed from
//! seven unit cubes meeting at the re-entrant corner in the origin. The
//! manufactured solution `u = |x|^alpha` solves
//! `-laplace(u) + u = -alpha(alpha+1)|x|^(alpha-2) + |x|^alpha` with its own
//! trace as Dirichlet data; for `alpha < 1` the gradient blows up at the
//! corner and adaptive refinement has to grade toward it.
//!
//! Quadrature respects the singularity: elements touching the corner are
//! integrated with geometric grading toward it, everything else with the
//! plain degree-5 rule.

use std::sync::Arc;

use rayon::prelude::*;

use crate::driver::{ErrorGauge, ProblemSpec};
use crate::geometry::{Vec3, MAT3_IDENTITY};
use crate::mesh::MeshForest;
use crate::quadrature::{integrate_tet, integrate_tet_graded};
use crate::vem::ElementLocal;
use crate::Result;

/// Lower corners of the seven unit cubes: all octants except the positive one.
pub const FICHERA_CUBES: [[i32; 3]; 7] = [
    [-1, -1, -1],
    [0, -1, -1],
    [-1, 0, -1],
    [0, 0, -1],
    [-1, -1, 0],
    [0, -1, 0],
    [-1, 0, 0],
];

/// Shell count for graded quadrature on corner elements.
const GRADE_LEVELS: u32 = 6;

pub fn fichera_domain() -> Result<MeshForest> {
    MeshForest::from_unit_cubes(&FICHERA_CUBES)
}

/// `u(x) = |x|^alpha`.
pub fn exact_solution(alpha: f64, p: Vec3) -> f64 {
    p.dot(p).powf(0.5 * alpha)
}

/// `grad u = alpha |x|^(alpha-2) x`. Not defined at the corner itself.
pub fn exact_gradient(alpha: f64, p: Vec3) -> Vec3 {
    let r2 = p.dot(p);
    assert!(r2 > 0.0, "gradient evaluated at the singular corner");
    p * (alpha * r2.powf(0.5 * alpha - 1.0))
}

/// The benchmark problem with unit diffusion and unit reaction. The load is
/// singular at the corner; it must only ever be sampled away from it, which
/// centroid sampling guarantees.
pub fn fichera_problem(alpha: f64) -> ProblemSpec {
    assert!(alpha > 0.0);
    let denominator = h1_denominator(alpha);
    let gauge: ErrorGauge = Arc::new(move |mesh, locals, solution| {
        relative_h1_error(mesh, locals, solution, alpha, denominator)
    });
    ProblemSpec {
        diffusion: Arc::new(|_| MAT3_IDENTITY),
        reaction: Arc::new(|_| 1.0),
        load: Arc::new(move |p| {
            let r2 = p.dot(p);
            assert!(r2 > 0.0, "load sampled at the singular corner");
            -alpha * (alpha + 1.0) * r2.powf(0.5 * alpha - 1.0) + r2.powf(0.5 * alpha)
        }),
        dirichlet: Arc::new(move |p| exact_solution(alpha, p)),
        error_gauge: Some(gauge),
    }
}

fn at_origin(p: Vec3) -> bool {
    p.bits() == Vec3::ZERO.bits()
}

/// H1 seminorm error of the projected gradients against the exact one,
/// relative to `denominator`.
pub fn relative_h1_error(
    mesh: &MeshForest,
    locals: &[ElementLocal],
    solution: &[f64],
    alpha: f64,
    denominator: f64,
) -> f64 {
    let err: f64 = locals
        .par_iter()
        .map(|el| {
            let u: Vec<f64> = el.dofs.iter().map(|&d| solution[d.idx()]).collect();
            let g = el.project(&u).g;
            let v = mesh.tet_vertex_positions(el.tet);
            let mut f = |p: Vec3| {
                let d = g - exact_gradient(alpha, p);
                d.dot(d)
            };
            match v.iter().position(|&q| at_origin(q)) {
                Some(apex) => integrate_tet_graded(&v, apex, GRADE_LEVELS, &mut f),
                None => integrate_tet(&v, &mut f),
            }
        })
        .sum();
    err.sqrt() / denominator
}

/// `|u|_{H1}` of the exact solution over the whole domain, by uniform
/// geometric bisection of the initial elements plus grading at the corner.
pub fn h1_denominator(alpha: f64) -> f64 {
    let mesh = fichera_domain().expect("initial domain");
    let total: f64 = mesh
        .leaf_ids()
        .into_par_iter()
        .map(|t| {
            let v = mesh.tet_vertex_positions(t);
            seminorm_piece(alpha, &v, mesh.tet(t).tag, 9)
        })
        .sum();
    total.sqrt()
}

/// Integral of `|grad u|^2 = alpha^2 |x|^(2 alpha - 2)` over one tetrahedron,
/// recursing through `depth` more generations of the bisection rule first.
fn seminorm_piece(alpha: f64, v: &[Vec3; 4], tag: u8, depth: u32) -> f64 {
    if depth == 0 {
        let mut f = |p: Vec3| alpha * alpha * p.dot(p).powf(alpha - 1.0);
        return match v.iter().position(|&q| at_origin(q)) {
            Some(apex) => integrate_tet_graded(v, apex, 8, &mut f),
            None => integrate_tet(v, &mut f),
        };
    }
    let k = tag as usize;
    let mid = Vec3::midpoint(v[0], v[k]);
    let mut c1 = *v;
    c1[k] = mid;
    let c2 = match k {
        1 => [v[1], mid, v[2], v[3]],
        2 => [v[1], v[2], mid, v[3]],
        _ => [v[1], v[2], v[3], mid],
    };
    let child_tag = if k == 1 { 3 } else { (k - 1) as u8 };
    seminorm_piece(alpha, &c1, child_tag, depth - 1)
        + seminorm_piece(alpha, &c2, child_tag, depth - 1)
}
