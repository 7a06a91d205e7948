//! Forest of bisected tetrahedra with hanging-node bookkeeping.
//!
//! Elements are refined by newest-vertex bisection: a tagged tetrahedron
//! `(x0, x1, x2, x3)` with tag `k` splits along the edge `(x0, xk)`. All
//! ancestors are kept, so the mesh is a forest whose leaves are the current
//! elements. Three shared tables make the nonconforming bookkeeping exact:
//!
//! * a node table keyed by exact coordinates (dyadic, so f64-comparable),
//! * an edge-midpoint map recording which segment each node bisected,
//! * a facet forest: every triangular interface ever created, split in
//!   lockstep from both sides, with the current full-face owners.
//!
//! A node is *proper* when it is a vertex of every leaf whose closure
//! contains it, otherwise it is *hanging*. Each hanging node carries a
//! nesting index: one more than the larger index of its parent edge's
//! endpoints. Refinement modes either remove all hanging nodes (conforming
//! closure) or cap the nesting index at a configured level.

mod kuhn;
mod refine;

use std::collections::HashMap;

use crate::geometry::{
    tet_centroid, tet_det, triangle_centroid, triangle_contains, triangle_cross, Vec3,
};
use crate::{Error, Result};

/// Most midpoint generations a node may accumulate before coordinate
/// arithmetic would stop being exact in f64.
pub const DEPTH_GUARD: u16 = 50;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Index into the node table. Creation order, never reused.
    NodeId
);
id_type!(
    /// Index into the element table (leaves and interior forest nodes alike).
    TetId
);
id_type!(
    /// Index into the facet table.
    FacetId
);

#[derive(Clone, Debug)]
pub struct NodeRecord {
    pub pos: Vec3,
    /// Endpoints of the edge whose bisection created this node; `None` for
    /// initial mesh nodes.
    pub parent_edge: Option<(NodeId, NodeId)>,
    /// Midpoint generations behind this coordinate, for the exactness guard.
    pub depth: u16,
    pub on_boundary: bool,
    pub proper: bool,
    /// Nesting index: 0 for proper nodes, otherwise one more than the larger
    /// index of the parent edge endpoints.
    pub lambda: u32,
}

#[derive(Clone, Debug)]
pub struct TetRecord {
    /// Vertices in bisection order; the refinement edge is `(verts[0], verts[tag])`.
    pub verts: [NodeId; 4],
    pub tag: u8,
    pub parent: Option<TetId>,
    pub children: Option<[TetId; 2]>,
    /// `facets[i]` is the face opposite `verts[i]`.
    pub facets: [FacetId; 4],
    pub generation: u32,
}

impl TetRecord {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct FacetRecord {
    /// Corner nodes; children keep the orientation of their parent, so the
    /// area vectors of the two children sum exactly to the parent's.
    pub corners: [NodeId; 3],
    pub parent: Option<FacetId>,
    pub children: Option<[FacetId; 2]>,
    /// Leaf elements having this triangle as a full geometric face, at most
    /// one per side.
    pub owners: [Option<(TetId, u8)>; 2],
    pub boundary: bool,
}

impl FacetRecord {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// What lies on the far side of an interface facet of an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterfaceSide {
    Boundary,
    Neighbor(TetId),
}

/// How `refine_set` restores mesh quality after bisecting the marked elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineMode {
    /// Remove every hanging node (classical conforming closure).
    Conforming,
    /// Keep hanging nodes but cap their nesting index at the given level (>= 1).
    Admissible(u32),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefinementReport {
    /// Elements bisected because they were in the marked set.
    pub n_marked: usize,
    /// All bisections performed, marked plus closure or admissibility repairs.
    pub n_refined: usize,
}

/// Per-face metric data of a leaf element.
#[derive(Clone, Copy, Debug)]
pub struct FaceGeometry {
    pub area: f64,
    /// Unit normal pointing out of the element.
    pub normal: Vec3,
    pub centroid: Vec3,
}

/// Metric data of a leaf element.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Mesh size `|E|^(1/3)`.
    pub h: f64,
    pub centroid: Vec3,
    /// `faces[i]` belongs to the facet opposite vertex `i`.
    pub faces: [FaceGeometry; 4],
}

#[derive(Clone)]
pub struct MeshForest {
    nodes: Vec<NodeRecord>,
    tets: Vec<TetRecord>,
    facets: Vec<FacetRecord>,
    /// Lookup by sorted corner triple.
    facet_by_corners: HashMap<[NodeId; 3], FacetId>,
    /// Midpoint node of each bisected edge, keyed by sorted endpoints.
    edge_midpoint: HashMap<(NodeId, NodeId), NodeId>,
    /// Node lookup by exact coordinate bits.
    node_by_pos: HashMap<[u64; 3], NodeId>,
    /// Triangles covering the domain boundary, from the initial mesh.
    boundary_tris: Vec<[Vec3; 3]>,
    /// Leaves for which each node is hanging; rebuilt by `recompute_node_status`.
    hanging_in: HashMap<NodeId, Vec<TetId>>,
    lambda_max: u32,
}

impl MeshForest {
    // Construction lives in kuhn.rs, refinement in refine.rs.

    #[inline]
    pub fn node(&self, n: NodeId) -> &NodeRecord {
        &self.nodes[n.idx()]
    }

    #[inline]
    pub fn tet(&self, t: TetId) -> &TetRecord {
        &self.tets[t.idx()]
    }

    #[inline]
    pub fn facet(&self, f: FacetId) -> &FacetRecord {
        &self.facets[f.idx()]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn facet_ids(&self) -> impl Iterator<Item = FacetId> {
        (0..self.facets.len() as u32).map(FacetId)
    }

    pub fn n_leaves(&self) -> usize {
        self.tets.iter().filter(|t| t.is_leaf()).count()
    }

    /// Current elements in index order.
    pub fn leaf_ids(&self) -> Vec<TetId> {
        (0..self.tets.len() as u32)
            .map(TetId)
            .filter(|&t| self.tets[t.idx()].is_leaf())
            .collect()
    }

    /// Largest nesting index over all nodes, as of the last status pass.
    pub fn lambda_max(&self) -> u32 {
        self.lambda_max
    }

    /// Hanging nodes in creation order, as of the last status pass.
    pub fn hanging_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len() as u32)
            .map(NodeId)
            .filter(|&n| !self.nodes[n.idx()].proper)
            .collect()
    }

    pub fn node_pos(&self, n: NodeId) -> Vec3 {
        self.nodes[n.idx()].pos
    }

    pub fn tet_vertex_positions(&self, t: TetId) -> [Vec3; 4] {
        self.tets[t.idx()].verts.map(|n| self.nodes[n.idx()].pos)
    }

    /// Whether a point lies on the domain boundary. Exact for dyadic points.
    pub fn on_domain_boundary(&self, p: Vec3) -> bool {
        self.boundary_tris
            .iter()
            .any(|t| triangle_contains(t[0], t[1], t[2], p))
    }

    /// Midpoint node of the segment `(a, b)`, if that edge was ever bisected.
    pub fn edge_midpoint_of(&self, a: NodeId, b: NodeId) -> Option<NodeId> {
        self.edge_midpoint.get(&edge_key(a, b)).copied()
    }

    /// Nodes strictly inside the segment `(a, b)`, ordered from `a` to `b`.
    ///
    /// Recurses on exact midpoint positions: subdivision nodes always sit at
    /// dyadic positions of the segment, whichever edge's bisection created
    /// them, so probing the node table geometrically finds them all.
    pub fn nodes_on_segment(&self, a: NodeId, b: NodeId, out: &mut Vec<NodeId>) {
        self.nodes_between(self.node_pos(a), self.node_pos(b), out);
    }

    fn nodes_between(&self, pa: Vec3, pb: Vec3, out: &mut Vec<NodeId>) {
        let mid = Vec3::midpoint(pa, pb);
        if let Some(&m) = self.node_by_pos.get(&mid.bits()) {
            self.nodes_between(pa, mid, out);
            out.push(m);
            self.nodes_between(mid, pb, out);
        }
    }

    /// All current-mesh nodes on the closed boundary of leaf `t`: its four
    /// vertices first, then every other node sitting on its faces or edges,
    /// in creation order. These are exactly the degrees of freedom of the
    /// element.
    pub fn element_boundary_nodes(&self, t: TetId) -> Vec<NodeId> {
        let rec = &self.tets[t.idx()];
        debug_assert!(rec.is_leaf());
        let verts = rec.verts;
        let mut extra: Vec<NodeId> = Vec::new();
        // Nodes on the faces: corners of all leaf facets below each face.
        let mut stack: Vec<FacetId> = rec.facets.to_vec();
        while let Some(f) = stack.pop() {
            match self.facets[f.idx()].children {
                Some(ch) => stack.extend(ch),
                None => {
                    let c = self.facets[f.idx()].corners;
                    extra.extend(c);
                    // Edge-only neighbors may have bisected a facet edge
                    // without this facet or any facet of `t` noticing, so
                    // every leaf facet edge gets a segment scan. This also
                    // covers the six straight edges of the element, which
                    // the leaf facets tile.
                    self.nodes_on_segment(c[0], c[1], &mut extra);
                    self.nodes_on_segment(c[1], c[2], &mut extra);
                    self.nodes_on_segment(c[0], c[2], &mut extra);
                }
            }
        }
        extra.sort_unstable();
        extra.dedup();
        extra.retain(|n| !verts.contains(n));
        let mut out = Vec::with_capacity(4 + extra.len());
        out.extend(verts);
        out.extend(extra);
        out
    }

    /// The flat interface pieces of element `t`: the leaf facets below its
    /// four geometric faces, each with what lies on the other side.
    pub fn interface_facets(&self, t: TetId) -> Vec<(FacetId, InterfaceSide)> {
        let rec = &self.tets[t.idx()];
        debug_assert!(rec.is_leaf());
        let mut out = Vec::with_capacity(4);
        let mut stack: Vec<FacetId> = Vec::new();
        for root in rec.facets {
            stack.push(root);
            while let Some(f) = stack.pop() {
                let fr = &self.facets[f.idx()];
                if let Some(ch) = fr.children {
                    stack.extend(ch);
                    continue;
                }
                if fr.boundary {
                    out.push((f, InterfaceSide::Boundary));
                    continue;
                }
                // The far side may be coarser, owning an ancestor of this
                // piece as its full face; ascend until an owner appears.
                let mut other = None;
                let mut cur = f;
                'up: loop {
                    for owner in self.facets[cur.idx()].owners.iter().flatten() {
                        if owner.0 != t {
                            other = Some(owner.0);
                            break 'up;
                        }
                    }
                    match self.facets[cur.idx()].parent {
                        Some(p) => cur = p,
                        None => break,
                    }
                }
                let nb = other.expect("interior leaf facet without a far-side owner");
                debug_assert!(self.tets[nb.idx()].is_leaf());
                out.push((f, InterfaceSide::Neighbor(nb)));
            }
        }
        out
    }

    /// Chain of ancestors `[t, parent, ...]` ending at the first element
    /// that has at least one proper vertex. Empty when `t` itself has one.
    pub fn ancestor_chain(&self, t: TetId) -> Vec<TetId> {
        let has_proper = |id: TetId| {
            self.tets[id.idx()]
                .verts
                .iter()
                .any(|&n| self.nodes[n.idx()].proper)
        };
        if has_proper(t) {
            return Vec::new();
        }
        let mut out = vec![t];
        let mut cur = t;
        loop {
            let parent = self.tets[cur.idx()]
                .parent
                .expect("root element without a proper vertex");
            out.push(parent);
            if has_proper(parent) {
                return out;
            }
            cur = parent;
        }
    }

    /// Metric data of a leaf element.
    pub fn element_geometry(&self, t: TetId) -> ElementGeometry {
        let v = self.tet_vertex_positions(t);
        let volume = tet_det(&v).abs() / 6.0;
        let centroid = tet_centroid(&v);
        let faces = std::array::from_fn(|i| {
            let [a, b, c] = face_opposite(&v, i);
            let cr = triangle_cross(a, b, c);
            let fc = triangle_centroid(a, b, c);
            let area = cr.norm() * 0.5;
            let mut normal = cr / (2.0 * area);
            // Outward means pointing away from the opposite vertex.
            if normal.dot(fc - v[i]) < 0.0 {
                normal = -normal;
            }
            FaceGeometry { area, normal, centroid: fc }
        });
        ElementGeometry { volume, h: volume.cbrt(), centroid, faces }
    }

    /// Leaves for which `n` is a hanging node, as of the last status pass.
    pub fn hanging_in(&self, n: NodeId) -> &[TetId] {
        self.hanging_in.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn leaf_or_err(&self, t: TetId) -> Result<()> {
        if t.idx() >= self.tets.len() || !self.tets[t.idx()].is_leaf() {
            return Err(Error::NotALeaf(t.idx()));
        }
        Ok(())
    }
}

/// Corner positions of the face opposite vertex `i`.
pub(crate) fn face_opposite(v: &[Vec3; 4], i: usize) -> [Vec3; 3] {
    match i {
        0 => [v[1], v[2], v[3]],
        1 => [v[0], v[2], v[3]],
        2 => [v[0], v[1], v[3]],
        _ => [v[0], v[1], v[2]],
    }
}

pub(crate) fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn sorted_triple(mut c: [NodeId; 3]) -> [NodeId; 3] {
    c.sort_unstable();
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_cube() -> MeshForest {
        MeshForest::from_unit_cubes(&[[0, 0, 0]]).unwrap()
    }

    #[test]
    fn fresh_element_boundary_is_just_the_vertices() {
        let m = unit_cube();
        for t in m.leaf_ids() {
            let bn = m.element_boundary_nodes(t);
            assert_eq!(bn.len(), 4);
            assert_eq!(&bn[..], &m.tet(t).verts[..]);
            assert!(m.ancestor_chain(t).is_empty());
        }
    }

    #[test]
    fn fresh_interface_pieces_are_the_four_faces() {
        let m = unit_cube();
        for t in m.leaf_ids() {
            let pieces = m.interface_facets(t);
            assert_eq!(pieces.len(), 4);
            let boundary = pieces
                .iter()
                .filter(|(_, s)| *s == InterfaceSide::Boundary)
                .count();
            // Each path tet has two faces on the cube surface and two
            // interior diagonal faces.
            assert_eq!(boundary, 2);
            for (_, side) in pieces {
                if let InterfaceSide::Neighbor(nb) = side {
                    assert!(m.tet(nb).is_leaf());
                    assert_ne!(nb, t);
                }
            }
        }
    }

    #[test]
    fn element_geometry_of_a_path_tet() {
        let m = unit_cube();
        let g = m.element_geometry(TetId(0));
        assert_relative_eq!(g.volume, 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(g.h, (1.0f64 / 6.0).cbrt(), max_relative = 1e-15);
        let mut areas: Vec<f64> = g.faces.iter().map(|f| f.area).collect();
        areas.sort_by(f64::total_cmp);
        let half = 0.5;
        let diag = 0.5 * 2.0f64.sqrt();
        for (got, want) in areas.iter().zip([half, half, diag, diag]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        // Outward normals close up: sum of area-weighted normals vanishes.
        let mut s = Vec3::ZERO;
        for f in &g.faces {
            s = s + f.normal * f.area;
            assert!(f.normal.dot(f.centroid - g.centroid) > 0.0);
            assert_relative_eq!(f.normal.norm(), 1.0, max_relative = 1e-15);
        }
        assert!(s.norm() < 1e-14);
    }

    #[test]
    fn single_bisection_hangs_the_diagonal_midpoint() {
        let mut m = unit_cube();
        let [c1, c2] = m.bisect(TetId(0)).unwrap();
        m.recompute_node_status();
        let z = NodeId(8);
        assert_eq!(m.node_pos(z), Vec3::new(0.5, 0.5, 0.5));
        assert!(!m.node(z).proper);
        assert_eq!(m.node(z).lambda, 1);
        assert_eq!(m.lambda_max(), 1);
        // The cube diagonal belongs to all six path tets; the other five
        // now see the midpoint on their refinement edge without owning it.
        assert_eq!(m.hanging_in(z).len(), 5);
        assert_eq!(m.hanging_nodes(), vec![z]);
        for t in [c1, c2] {
            assert!(m.tet(t).verts.contains(&z));
        }
        for t in m.leaf_ids() {
            let bn = m.element_boundary_nodes(t);
            if m.tet(t).verts.contains(&z) {
                assert_eq!(bn.len(), 4);
            } else {
                assert_eq!(bn.len(), 5);
                assert_eq!(bn[4], z);
            }
        }
    }

    #[test]
    fn neighbor_of_a_split_face_sees_two_pieces() {
        let mut m = unit_cube();
        m.bisect(TetId(0)).unwrap();
        m.recompute_node_status();
        // Tet 1 shares with tet 0 the face through the main diagonal, which
        // the bisection split in two.
        let pieces = m.interface_facets(TetId(1));
        assert_eq!(pieces.len(), 5);
        let boundary = pieces
            .iter()
            .filter(|(_, s)| *s == InterfaceSide::Boundary)
            .count();
        assert_eq!(boundary, 2);
        let children_of_zero: Vec<_> = pieces
            .iter()
            .filter_map(|(_, s)| match s {
                InterfaceSide::Neighbor(nb) if m.tet(*nb).parent == Some(TetId(0)) => Some(*nb),
                _ => None,
            })
            .collect();
        assert_eq!(children_of_zero.len(), 2);
    }

    #[test]
    fn segment_nodes_come_back_in_order() {
        let mut m = unit_cube();
        let [a, b] = [m.tet(TetId(0)).verts[0], m.tet(TetId(0)).verts[3]];
        for _ in 0..4 {
            m.refine_uniform().unwrap();
        }
        let mut on_diag = Vec::new();
        m.nodes_on_segment(a, b, &mut on_diag);
        // Four uniform sweeps bisect the diagonal and then both halves.
        assert_eq!(on_diag.len(), 3);
        let expect = [0.25, 0.5, 0.75];
        for (n, c) in on_diag.iter().zip(expect) {
            assert_eq!(m.node_pos(*n), Vec3::new(c, c, c));
        }
    }
}
