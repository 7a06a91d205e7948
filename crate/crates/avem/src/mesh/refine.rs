//! Bisection, hanging-node repair, and node status recomputation.

use std::collections::HashMap;

use super::{
    sorted_triple, FacetId, FacetRecord, MeshForest, NodeId, NodeRecord, RefineMode,
    RefinementReport, TetId, TetRecord,
};
use crate::geometry::{tet_contains, triangle_centroid, triangle_cross};
use crate::{Error, Result};

/// Most repair sweeps before giving up; each sweep fixes every currently
/// offending node, so legitimate repairs converge much faster.
const MAX_SWEEPS: usize = 1024;

/// Recursion guard inside a single hanging-node fix.
const MAX_FIX_DEPTH: usize = 256;

impl MeshForest {
    /// Bisects leaf `t` along its refinement edge `(verts[0], verts[tag])`,
    /// producing two children whose tag decreases by one (cycling 1 -> 3).
    pub fn bisect(&mut self, t: TetId) -> Result<[TetId; 2]> {
        self.leaf_or_err(t)?;
        let rec = self.tet(t).clone();
        let k = rec.tag as usize;
        let v = rec.verts;
        let (a, b) = (v[0], v[k]);
        let z = self.midpoint_node(a, b)?;

        // Maubach child orderings: the first child replaces the far endpoint
        // of the refinement edge by the midpoint, the second drops verts[0]
        // and inserts the midpoint right after the old edge endpoint.
        let mut c1v = v;
        c1v[k] = z;
        let c2v = match k {
            1 => [v[1], z, v[2], v[3]],
            2 => [v[1], v[2], z, v[3]],
            _ => [v[1], v[2], v[3], z],
        };
        let child_tag = if k == 1 { 3 } else { (k - 1) as u8 };

        // The two faces containing the refinement edge split at z, the two
        // others transfer whole, and one new facet separates the children.
        let wi: [usize; 2] = match k {
            1 => [2, 3],
            2 => [1, 3],
            _ => [1, 2],
        };
        let mut candidates: HashMap<[NodeId; 3], FacetId> = HashMap::new();
        for i in wi {
            let (fa, fb) = self.split_facet(rec.facets[i], a, b, z);
            candidates.insert(sorted_triple(self.facet(fa).corners), fa);
            candidates.insert(sorted_triple(self.facet(fb).corners), fb);
        }
        for i in [0, k] {
            candidates.insert(sorted_triple(self.facet(rec.facets[i]).corners), rec.facets[i]);
        }
        let nf = self.new_interior_facet([z, v[wi[0]], v[wi[1]]], v[0]);
        candidates.insert(sorted_triple(self.facet(nf).corners), nf);

        for f in rec.facets {
            self.drop_owner(f, t);
        }
        let t1 = TetId(self.tets.len() as u32);
        let t2 = TetId(self.tets.len() as u32 + 1);
        for (child, verts) in [(t1, c1v), (t2, c2v)] {
            let facets = std::array::from_fn(|i| {
                let mut tri = [NodeId(0); 3];
                let mut w = 0;
                for (j, &n) in verts.iter().enumerate() {
                    if j != i {
                        tri[w] = n;
                        w += 1;
                    }
                }
                *candidates
                    .get(&sorted_triple(tri))
                    .expect("child face missing from facet tables")
            });
            for (i, &f) in facets.iter().enumerate() {
                self.add_owner(f, child, i as u8);
            }
            self.tets.push(TetRecord {
                verts,
                tag: child_tag,
                parent: Some(t),
                children: None,
                facets,
                generation: rec.generation + 1,
            });
        }
        self.tets[t.idx()].children = Some([t1, t2]);
        Ok([t1, t2])
    }

    /// Splits facet `f` along its edge `(a, b)` at the existing midpoint
    /// node `z`, or verifies a split already made from the other side.
    /// Returns the parts containing `a` and `b` respectively.
    fn split_facet(&mut self, f: FacetId, a: NodeId, b: NodeId, z: NodeId) -> (FacetId, FacetId) {
        let fr = self.facet(f).clone();
        let corners = fr.corners;
        debug_assert!(corners.contains(&a) && corners.contains(&b));
        let third = corners
            .iter()
            .copied()
            .find(|&c| c != a && c != b)
            .expect("degenerate facet corners");
        let want_a = sorted_triple([a, z, third]);
        let want_b = sorted_triple([z, b, third]);
        if let Some([c1, c2]) = fr.children {
            let s1 = sorted_triple(self.facet(c1).corners);
            let s2 = sorted_triple(self.facet(c2).corners);
            if s1 == want_a && s2 == want_b {
                return (c1, c2);
            }
            if s1 == want_b && s2 == want_a {
                return (c2, c1);
            }
            panic!("facet {f} was split along a different edge by its far side");
        }
        // Replacing one endpoint by the midpoint keeps the orientation, and
        // the children's area vectors each equal half the parent's exactly.
        let ca_corners = corners.map(|c| if c == b { z } else { c });
        let cb_corners = corners.map(|c| if c == a { z } else { c });
        let ca = FacetId(self.facets.len() as u32);
        let cb = FacetId(self.facets.len() as u32 + 1);
        for corners in [ca_corners, cb_corners] {
            self.facets.push(FacetRecord {
                corners,
                parent: Some(f),
                children: None,
                owners: [None, None],
                boundary: fr.boundary,
            });
        }
        self.facets[f.idx()].children = Some([ca, cb]);
        self.facet_by_corners.insert(want_a, ca);
        self.facet_by_corners.insert(want_b, cb);
        (ca, cb)
    }

    /// Creates the facet separating the two children of a bisection, oriented
    /// away from `opposite` (the first child's off-facet vertex).
    fn new_interior_facet(&mut self, corners: [NodeId; 3], opposite: NodeId) -> FacetId {
        let tri = corners.map(|n| self.node(n).pos);
        let cross = triangle_cross(tri[0], tri[1], tri[2]);
        let outward = cross.dot(triangle_centroid(tri[0], tri[1], tri[2]) - self.node(opposite).pos);
        let corners = if outward > 0.0 {
            corners
        } else {
            [corners[0], corners[2], corners[1]]
        };
        let f = FacetId(self.facets.len() as u32);
        self.facets.push(FacetRecord {
            corners,
            parent: None,
            children: None,
            owners: [None, None],
            boundary: false,
        });
        self.facet_by_corners.insert(sorted_triple(corners), f);
        f
    }

    /// Recomputes properness, nesting indices, and the hanging-node index.
    ///
    /// A node is hanging when some leaf has it on its closed boundary without
    /// having it as a vertex. Nesting indices then follow the midpoint
    /// genealogy in creation order, which always points to older nodes.
    pub fn recompute_node_status(&mut self) {
        for n in &mut self.nodes {
            n.proper = true;
        }
        let mut hanging_in: HashMap<NodeId, Vec<TetId>> = HashMap::new();
        for t in self.leaf_ids() {
            let verts = self.tet(t).verts;
            for n in self.element_boundary_nodes(t) {
                if !verts.contains(&n) {
                    self.nodes[n.idx()].proper = false;
                    hanging_in.entry(n).or_default().push(t);
                }
            }
        }
        let mut lmax = 0;
        for i in 0..self.nodes.len() {
            if self.nodes[i].proper {
                self.nodes[i].lambda = 0;
            } else {
                let (a, b) = self.nodes[i]
                    .parent_edge
                    .expect("hanging node is not an edge midpoint");
                debug_assert!(a.idx() < i && b.idx() < i);
                let l = self.nodes[a.idx()].lambda.max(self.nodes[b.idx()].lambda) + 1;
                self.nodes[i].lambda = l;
                lmax = lmax.max(l);
            }
        }
        self.lambda_max = lmax;
        self.hanging_in = hanging_in;
    }

    /// Bisects descendants of `e` until node `x` is a vertex of every leaf
    /// of the subtree whose closure contains it. Returns the bisection count.
    fn fix_hanging(&mut self, e: TetId, x: NodeId, depth: usize) -> Result<usize> {
        if depth > MAX_FIX_DEPTH {
            return Err(Error::RepairStalled(depth));
        }
        if self.tet(e).verts.contains(&x) {
            return Ok(0);
        }
        let mut count = 0;
        if self.tet(e).is_leaf() {
            self.bisect(e)?;
            count += 1;
        }
        let children = self.tet(e).children.unwrap();
        let px = self.node(x).pos;
        for c in children {
            if tet_contains(&self.tet_vertex_positions(c), px) {
                count += self.fix_hanging(c, x, depth + 1)?;
            }
        }
        Ok(count)
    }

    fn repair_where(&mut self, offending: impl Fn(&NodeRecord) -> bool) -> Result<usize> {
        let mut total = 0;
        for _ in 0..MAX_SWEEPS {
            self.recompute_node_status();
            let offenders: Vec<NodeId> = (0..self.nodes.len() as u32)
                .map(NodeId)
                .filter(|&n| !self.nodes[n.idx()].proper && offending(&self.nodes[n.idx()]))
                .collect();
            if offenders.is_empty() {
                return Ok(total);
            }
            for x in offenders {
                for e in self.hanging_in(x).to_vec() {
                    total += self.fix_hanging(e, x, 0)?;
                }
            }
        }
        Err(Error::RepairStalled(MAX_SWEEPS))
    }

    /// Removes every hanging node by further bisection. Returns the count.
    pub fn close_conforming(&mut self) -> Result<usize> {
        self.repair_where(|_| true)
    }

    /// Bisects until every hanging node has nesting index at most `level`.
    /// Level 0 would mean conforming; use `close_conforming` for that.
    pub fn make_admissible(&mut self, level: u32) -> Result<usize> {
        if level == 0 {
            return Err(Error::BadLevel);
        }
        self.repair_where(|n| n.lambda > level)
    }

    /// Bisects each marked leaf once, then repairs the mesh per `mode`.
    pub fn refine_set(&mut self, marked: &[TetId], mode: RefineMode) -> Result<RefinementReport> {
        let mut uniq = marked.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        for &t in &uniq {
            self.leaf_or_err(t)?;
        }
        for &t in &uniq {
            self.bisect(t)?;
        }
        let repairs = match mode {
            RefineMode::Conforming => self.close_conforming()?,
            RefineMode::Admissible(level) => self.make_admissible(level)?,
        };
        Ok(RefinementReport { n_marked: uniq.len(), n_refined: uniq.len() + repairs })
    }

    /// Bisects every leaf once. On meshes built from unit cubes this needs
    /// no repairs and exactly doubles the element count.
    pub fn refine_uniform(&mut self) -> Result<RefinementReport> {
        let leaves = self.leaf_ids();
        self.refine_set(&leaves, RefineMode::Conforming)
    }
}
