//! Global assembly and the preconditioned conjugate gradient solver.
//!
//! Dirichlet data is eliminated exactly: boundary nodes never enter the
//! linear system, their values are folded into the right-hand side during
//! assembly. The remaining free system is symmetric positive definite and
//! solved by Jacobi-preconditioned CG. An empty free system is legal (on
//! coarse meshes every node can sit on the boundary) and solves trivially.

use rayon::prelude::*;

use crate::geometry::Vec3;
use crate::mesh::{MeshForest, NodeId};
use crate::vem::ElementLocal;
use crate::{Error, Result};

/// Numbering of the free (non-Dirichlet) nodes.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// Free node ids in creation order; position = equation index.
    pub free: Vec<NodeId>,
    /// Equation index per node, `None` for Dirichlet nodes.
    pub index: Vec<Option<u32>>,
}

impl DofMap {
    /// Numbers every node not flagged as boundary.
    pub fn new(mesh: &MeshForest) -> DofMap {
        let mut free = Vec::new();
        let mut index = vec![None; mesh.n_nodes()];
        for i in 0..mesh.n_nodes() as u32 {
            let n = NodeId(i);
            if !mesh.node(n).on_boundary {
                index[n.idx()] = Some(free.len() as u32);
                free.push(n);
            }
        }
        DofMap { free, index }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn index_of(&self, n: NodeId) -> Option<usize> {
        self.index[n.idx()].map(|i| i as usize)
    }
}

/// Compressed sparse row matrix, symmetric by construction here.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Builds from triplets, summing duplicates. Column order within a row
    /// follows the sorted column index, so the result is deterministic.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Csr {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            rows[r as usize].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k] as usize];
            }
            y[r] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] as usize == r {
                    d[r] = self.val[k];
                }
            }
        }
        d
    }
}

/// The assembled free system together with everything needed to expand a
/// free solution back to all nodes.
pub struct Assembled {
    pub dofs: DofMap,
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    /// Full nodal vector holding Dirichlet values, zero on free nodes.
    pub boundary_values: Vec<f64>,
}

/// Assembles the global system from per-element local systems.
///
/// `locals` must hold one entry per current leaf. Local matrices are mirrored
/// across the diagonal entry by entry, so the assembled matrix is exactly
/// symmetric. Returns `SingularSystem` when nothing pins the solution: no
/// Dirichlet node and no reaction term anywhere.
pub fn assemble(
    mesh: &MeshForest,
    locals: &[ElementLocal],
    dirichlet: &dyn Fn(Vec3) -> f64,
    gamma: f64,
) -> Result<Assembled> {
    let dofs = DofMap::new(mesh);
    let mut boundary_values = vec![0.0; mesh.n_nodes()];
    let mut any_dirichlet = false;
    for i in 0..mesh.n_nodes() as u32 {
        let n = NodeId(i);
        if mesh.node(n).on_boundary {
            boundary_values[n.idx()] = dirichlet(mesh.node_pos(n));
            any_dirichlet = true;
        }
    }
    if !any_dirichlet && locals.iter().all(|el| el.c_e == 0.0) {
        return Err(Error::SingularSystem);
    }

    // Element contributions in parallel, then a deterministic sequential
    // reduction in element order.
    let contribs: Vec<(Vec<(u32, u32, f64)>, Vec<(u32, f64)>)> = locals
        .par_iter()
        .map(|el| {
            let b = el.local_matrix(gamma);
            let n = el.n_dofs();
            let mut trips = Vec::new();
            let mut loads = Vec::new();
            for i in 0..n {
                let Some(gi) = dofs.index_of(el.dofs[i]) else { continue };
                let mut load = el.rhs[i];
                for j in 0..n {
                    match dofs.index_of(el.dofs[j]) {
                        Some(gj) => trips.push((gi as u32, gj as u32, b[i][j])),
                        None => load -= b[i][j] * boundary_values[el.dofs[j].idx()],
                    }
                }
                loads.push((gi as u32, load));
            }
            (trips, loads)
        })
        .collect();

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; dofs.n_free()];
    for (trips, loads) in contribs {
        triplets.extend(trips);
        for (gi, v) in loads {
            rhs[gi as usize] += v;
        }
    }
    let matrix = Csr::from_triplets(dofs.n_free(), &triplets);
    Ok(Assembled { dofs, matrix, rhs, boundary_values })
}

impl Assembled {
    /// Expands a free solution vector to values on every node.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = self.boundary_values.clone();
        for (i, &n) in self.dofs.free.iter().enumerate() {
            full[n.idx()] = free[i];
        }
        full
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution and the
/// iteration count; stops when the residual 2-norm falls below `rel_tol`
/// times the norm of `b`, so the guarantee is a plain relative defect bound.
pub fn solve_cg(a: &Csr, b: &[f64], rel_tol: f64) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let inv_d: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let rr0: f64 = r.iter().map(|v| v * v).sum();
    let target = rr0.sqrt() * rel_tol;
    if rr0 == 0.0 {
        return Ok((x, 0));
    }
    let max_iter = 20 * (n as f64).sqrt() as usize + 1000;
    let mut ap = vec![0.0; n];
    for iter in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SolverStalled { residual: rz.sqrt(), iters: iter });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rr: f64 = r.iter().map(|v| v * v).sum();
        if rr.sqrt() <= target {
            return Ok((x, iter));
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rr: f64 = r.iter().map(|v| v * v).sum();
    Err(Error::SolverStalled { residual: rr.sqrt() / rr0.sqrt(), iters: max_iter })
}

/// Largest relative residual of the discrete equations tested against the
/// hat function of each interior proper node, transported to hanging nodes
/// by averaging along the midpoint genealogy.
///
/// The transported hats span the conforming hierarchical subspace; on a
/// genuinely solved system each residual reduces to a functional of the CG
/// defect, so the maximum stays at solver precision whatever the nonconformity.
pub fn quasi_orthogonality_residual(
    mesh: &MeshForest,
    locals: &[ElementLocal],
    solution: &[f64],
    rhs_norm: f64,
    gamma: f64,
) -> f64 {
    let n_nodes = mesh.n_nodes();
    let probes: Vec<NodeId> = (0..n_nodes as u32)
        .map(NodeId)
        .filter(|&n| mesh.node(n).proper && !mesh.node(n).on_boundary)
        .collect();
    if probes.is_empty() {
        return 0.0;
    }

    // Residuals are linear in the test vector: assemble the nodal defect
    // `rhs - B u` once, then each probe is a dot product against its hat.
    let defects: Vec<(Vec<u32>, Vec<f64>)> = locals
        .par_iter()
        .map(|el| {
            let b = el.local_matrix(gamma);
            let n = el.n_dofs();
            let u: Vec<f64> = el.dofs.iter().map(|&d| solution[d.idx()]).collect();
            let d: Vec<f64> = (0..n)
                .map(|i| el.rhs[i] - (0..n).map(|j| b[i][j] * u[j]).sum::<f64>())
                .collect();
            (el.dofs.iter().map(|&x| x.0).collect(), d)
        })
        .collect();
    let mut defect = vec![0.0f64; n_nodes];
    for (ids, d) in &defects {
        for (id, v) in ids.iter().zip(d) {
            defect[*id as usize] += v;
        }
    }

    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    probes
        .par_iter()
        .map(|&p| {
            // Hat coefficients in creation order; parent edges always point
            // to older nodes, so one pass resolves the averaging.
            let mut w = vec![0.0f64; n_nodes];
            w[p.idx()] = 1.0;
            let mut residual = 0.0;
            for i in 0..n_nodes {
                let rec = mesh.node(NodeId(i as u32));
                if !rec.proper {
                    let (a, b) = rec.parent_edge.expect("hanging node without parent edge");
                    w[i] = 0.5 * (w[a.idx()] + w[b.idx()]);
                }
                // Boundary entries are constrained, not tested.
                if !rec.on_boundary {
                    residual += w[i] * defect[i];
                }
            }
            residual.abs()
        })
        .reduce(|| 0.0, f64::max)
        / scale
}
