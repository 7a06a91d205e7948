//! Shared helpers for the integration tests: an independent textbook P1
//! assembler, a dense Cholesky solver, randomized admissible meshes, and
//! small curve-fitting utilities.

use avem::geometry::{tet_barycentric_gradients, tet_det};
use avem::mesh::RefineMode;
use avem::{DofMap, Mat3, MeshForest, TetId, Vec3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Marks a random fifth of the leaves per round. Rounds with an empty draw
/// fall back to the oldest leaf so every round refines something.
pub fn random_admissible_mesh(
    domain: &[[i32; 3]],
    seed: u64,
    lambda: u32,
    rounds: usize,
) -> MeshForest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = MeshForest::from_unit_cubes(domain).expect("test domain");
    for _ in 0..rounds {
        let leaves = mesh.leaf_ids();
        let mut marked: Vec<TetId> = leaves
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < 0.2)
            .collect();
        if marked.is_empty() {
            marked.push(leaves[0]);
        }
        mesh.refine_set(&marked, RefineMode::Admissible(lambda))
            .expect("refinement");
    }
    mesh
}

/// Dense symmetric system over the free nodes, plus its right hand side.
pub struct DenseSystem {
    pub n: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Textbook P1 finite element assembly with per-element constant data
/// sampled at centroids, for conforming meshes only: element stiffness
/// `vol (K grad_i) . grad_j`, mass `c vol/20 (1 + delta)`, load `f vol / 4`,
/// Dirichlet nodes eliminated exactly.
pub fn p1_fem_dense(
    mesh: &MeshForest,
    k: Mat3,
    c: f64,
    f: f64,
    dirichlet: &dyn Fn(Vec3) -> f64,
) -> DenseSystem {
    assert!(mesh.hanging_nodes().is_empty(), "P1 oracle needs a conforming mesh");
    let dofs = DofMap::new(mesh);
    let n = dofs.n_free();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for t in mesh.leaf_ids() {
        let verts = mesh.tet(t).verts;
        let v = mesh.tet_vertex_positions(t);
        let vol = tet_det(&v).abs() / 6.0;
        let grads = tet_barycentric_gradients(&v);
        let kg: Vec<Vec3> = grads
            .iter()
            .map(|g| {
                Vec3::new(
                    k[0][0] * g.x + k[0][1] * g.y + k[0][2] * g.z,
                    k[1][0] * g.x + k[1][1] * g.y + k[1][2] * g.z,
                    k[2][0] * g.x + k[2][1] * g.y + k[2][2] * g.z,
                )
            })
            .collect();
        for i in 0..4 {
            let gi = match dofs.index_of(verts[i]) {
                Some(gi) => gi,
                None => continue,
            };
            b[gi] += f * vol / 4.0;
            for j in 0..4 {
                let entry = vol * kg[i].dot(grads[j])
                    + c * vol / 20.0 * if i == j { 2.0 } else { 1.0 };
                match dofs.index_of(verts[j]) {
                    Some(gj) => a[gi][gj] += entry,
                    None => b[gi] -= entry * dirichlet(mesh.node_pos(verts[j])),
                }
            }
        }
    }
    DenseSystem { n, a, b }
}

/// Solves a dense SPD system by an unpivoted Cholesky factorization.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "matrix not positive definite at pivot {i}");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Least squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Piecewise log-log interpolation of `y` at `x` on a curve with strictly
/// increasing abscissae. `None` outside the covered range.
pub fn log_interp(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    if curve.len() < 2 || x < curve[0].0 || x > curve[curve.len() - 1].0 {
        return None;
    }
    let j = curve.partition_point(|&(cx, _)| cx < x).max(1);
    let (x0, y0) = curve[j - 1];
    let (x1, y1) = curve[j.min(curve.len() - 1)];
    if x0 == x1 {
        return Some(y0);
    }
    let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
    Some((y0.ln() + t * (y1.ln() - y0.ln())).exp())
}

/// Strictly decreasing envelope of an iteration history in its first
/// coordinate, returned reversed so the first coordinate increases.
pub fn decreasing_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(x, y) in points {
        if out.last().map_or(true, |&(px, _)| x < px) {
            out.push((x, y));
        }
    }
    out.reverse();
    out
}
