//! Residual error indicators and hierarchical surrogates.
//!
//! The indicator needs no stabilization term: on each element it combines
//! the volume residual of the projected solution with the flux jumps of the
//! projected gradients across all flat interface pieces,
//!
//! `eta^2(E) = h_E^2 ||f_E - c_E P u||^2_E
//!           + sum_F (h_E/2) |F| ((K_E g_E - K_N g_N) . n)^2`.
//!
//! Each side contributes the jump with its own mesh size, so the pair adds
//! the usual averaged weight. Domain boundary pieces contribute nothing.
//!
//! The lift oracles replay the bisection pattern of an element until its
//! hanging nodes are vertices, interpolate nodal values piecewise linearly
//! on that virtual partition, and integrate the exact gradient. They give an
//! independent conforming H1 quantity to band the algebraic stabilization
//! against.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::{
    tet_barycentric, tet_barycentric_gradients, tet_contains, tet_det, mat3_mul_vec,
    triangle_cross, Vec3,
};
use crate::mesh::{InterfaceSide, MeshForest, TetId};
use crate::quadrature::int_tet_linear_product;
use crate::vem::ElementLocal;

/// Squared indicators per element plus the global stabilization total.
#[derive(Clone, Debug)]
pub struct EstimatorReport {
    /// `eta^2(E)` per entry of the `locals` slice, in the same order.
    pub eta_sq: Vec<f64>,
    pub total_eta_sq: f64,
    /// `S(u) = sum_E h_E |D u_E|^2`, the stabilization energy of the solution.
    pub total_stab: f64,
}

impl EstimatorReport {
    pub fn eta(&self) -> f64 {
        self.total_eta_sq.sqrt()
    }
}

/// Evaluates the stabilization-free residual estimator for a solved state.
/// `solution` holds one value per mesh node.
pub fn global_estimate(
    mesh: &MeshForest,
    locals: &[ElementLocal],
    solution: &[f64],
) -> EstimatorReport {
    let by_tet: HashMap<TetId, usize> =
        locals.iter().enumerate().map(|(i, el)| (el.tet, i)).collect();
    let grads: Vec<crate::vem::LinearFunc> = locals
        .par_iter()
        .map(|el| {
            let u: Vec<f64> = el.dofs.iter().map(|&d| solution[d.idx()]).collect();
            el.project(&u)
        })
        .collect();

    let parts: Vec<(f64, f64)> = locals
        .par_iter()
        .enumerate()
        .map(|(i, el)| {
            let geo = &el.geo;
            let vpos: [Vec3; 4] = std::array::from_fn(|a| mesh.node_pos(el.dofs[a]));
            // Volume residual of the affine integrand f_E - c_E P u.
            let q: [f64; 4] =
                std::array::from_fn(|a| el.f_e - el.c_e * grads[i].eval(vpos[a]));
            let mut eta = geo.h * geo.h * int_tet_linear_product(geo.volume, &q, &q);

            let own_flux = mat3_mul_vec(&el.k_e, grads[i].g);
            for (f, side) in mesh.interface_facets(el.tet) {
                let InterfaceSide::Neighbor(nb) = side else { continue };
                let j = by_tet[&nb];
                let their_flux = mat3_mul_vec(&locals[j].k_e, grads[j].g);
                let tri = mesh.facet(f).corners.map(|n| mesh.node_pos(n));
                let cross = triangle_cross(tri[0], tri[1], tri[2]);
                let area = cross.norm() * 0.5;
                let normal = cross / cross.norm();
                // Jump of the normal flux; the sign of n is immaterial.
                let jump = (own_flux - their_flux).dot(normal);
                eta += 0.5 * geo.h * area * jump * jump;
            }

            let u: Vec<f64> = el.dofs.iter().map(|&d| solution[d.idx()]).collect();
            (eta, el.stab_energy(&u))
        })
        .collect();

    let mut total_eta_sq = 0.0;
    let mut total_stab = 0.0;
    let mut eta_sq = Vec::with_capacity(parts.len());
    for &(e, s) in &parts {
        eta_sq.push(e);
        total_eta_sq += e;
        total_stab += s;
    }
    EstimatorReport { eta_sq, total_eta_sq, total_stab }
}

/// Exact H1 seminorm (squared) of the conforming piecewise linear lift of a
/// nodal vector: each element is virtually bisected until its hanging nodes
/// are vertices, and the interpolant's gradient integrated exactly.
pub fn h1_seminorm_oracle(mesh: &MeshForest, locals: &[ElementLocal], values: &[f64]) -> f64 {
    locals
        .par_iter()
        .map(|el| {
            let vpos: [Vec3; 4] = std::array::from_fn(|a| mesh.node_pos(el.dofs[a]));
            let vals: [f64; 4] = std::array::from_fn(|a| values[el.dofs[a].idx()]);
            let hang: Vec<(Vec3, f64)> = el.dofs[4..]
                .iter()
                .map(|&d| (mesh.node_pos(d), values[d.idx()]))
                .collect();
            lift_energy(mesh.tet(el.tet).tag, &vpos, &vals, &hang, 0)
        })
        .sum()
}

/// H1 seminorm (squared) of the lifted nonconformity defect: per element,
/// vertex values are zeroed and hanging values replaced by their deviation
/// from the affine extension of the vertex data. This is the conforming
/// counterpart of the algebraic stabilization energy.
pub fn nonconformity_oracle(mesh: &MeshForest, locals: &[ElementLocal], values: &[f64]) -> f64 {
    locals
        .par_iter()
        .map(|el| {
            if el.n_dofs() == 4 {
                return 0.0;
            }
            let vpos: [Vec3; 4] = std::array::from_fn(|a| mesh.node_pos(el.dofs[a]));
            let vvals: [f64; 4] = std::array::from_fn(|a| values[el.dofs[a].idx()]);
            let hang: Vec<(Vec3, f64)> = el.dofs[4..]
                .iter()
                .map(|&d| {
                    let p = mesh.node_pos(d);
                    let bary = tet_barycentric(&vpos, p);
                    let affine: f64 = (0..4).map(|a| bary[a] * vvals[a]).sum();
                    (p, values[d.idx()] - affine)
                })
                .collect();
            lift_energy(mesh.tet(el.tet).tag, &vpos, &[0.0; 4], &hang, 0)
        })
        .sum()
}

/// Recursive replay of the bisection rule on value-carrying vertices.
fn lift_energy(tag: u8, pos: &[Vec3; 4], vals: &[f64; 4], hang: &[(Vec3, f64)], depth: usize) -> f64 {
    let needs_split = hang.iter().any(|&(p, _)| {
        tet_contains(pos, p) && pos.iter().all(|&v| v.bits() != p.bits())
    });
    if !needs_split {
        let grads = tet_barycentric_gradients(pos);
        let mut g = Vec3::ZERO;
        for a in 0..4 {
            g = g + grads[a] * vals[a];
        }
        return tet_det(pos).abs() / 6.0 * g.dot(g);
    }
    assert!(depth < 64, "hanging nodes unreachable by bisection replay");
    let k = tag as usize;
    let mid = Vec3::midpoint(pos[0], pos[k]);
    // A replay midpoint on the element boundary may be one of the real
    // hanging nodes; interior ones are never mesh nodes and interpolate.
    let midval = hang
        .iter()
        .find(|&&(p, _)| p.bits() == mid.bits())
        .map(|&(_, v)| v)
        .unwrap_or(0.5 * (vals[0] + vals[k]));
    let mut p1 = *pos;
    let mut v1 = *vals;
    p1[k] = mid;
    v1[k] = midval;
    let (p2, v2) = match k {
        1 => ([pos[1], mid, pos[2], pos[3]], [vals[1], midval, vals[2], vals[3]]),
        2 => ([pos[1], pos[2], mid, pos[3]], [vals[1], vals[2], midval, vals[3]]),
        _ => ([pos[1], pos[2], pos[3], mid], [vals[1], vals[2], vals[3], midval]),
    };
    let child_tag = if k == 1 { 3 } else { (k - 1) as u8 };
    lift_energy(child_tag, &p1, &v1, hang, depth + 1)
        + lift_energy(child_tag, &p2, &v2, hang, depth + 1)
}
