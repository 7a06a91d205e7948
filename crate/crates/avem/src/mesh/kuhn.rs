//! Initial meshes: axis-aligned unit cubes, each cut into six tetrahedra.
//!
//! Every cube `c + [0,1]^3` is split along its main diagonal into the six
//! path tetrahedra `(c, c+e_i, c+e_i+e_j, c+(1,1,1))`, all tagged 3. Cubes
//! sharing a face induce the same diagonal on it (the one through the
//! lexicographically smallest and largest corners), so the union is
//! conforming and stays conforming under uniform bisection.

use std::collections::HashMap;

use super::{
    edge_key, face_opposite, sorted_triple, FacetId, FacetRecord, MeshForest, NodeId, NodeRecord,
    TetId, TetRecord,
};
use crate::geometry::{triangle_centroid, triangle_cross, Vec3};
use crate::{Error, Result};

/// The six paths from a cube corner to the opposite corner, one axis at a time.
const PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl MeshForest {
    /// Builds the initial forest over a union of distinct unit cubes with
    /// integer corners, given as their lexicographically smallest corner.
    pub fn from_unit_cubes(cubes: &[[i32; 3]]) -> Result<MeshForest> {
        if cubes.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut seen = std::collections::HashSet::new();
        for c in cubes {
            if !seen.insert(*c) {
                return Err(Error::OverlappingCubes(*c));
            }
        }

        let mut mesh = MeshForest {
            nodes: Vec::new(),
            tets: Vec::new(),
            facets: Vec::new(),
            facet_by_corners: HashMap::new(),
            edge_midpoint: HashMap::new(),
            node_by_pos: HashMap::new(),
            boundary_tris: Vec::new(),
            hanging_in: HashMap::new(),
            lambda_max: 0,
        };

        for corner in cubes {
            let base = Vec3::new(corner[0] as f64, corner[1] as f64, corner[2] as f64);
            for path in PATHS {
                let mut p = [base; 4];
                for step in 0..3 {
                    p[step + 1] = p[step];
                    match path[step] {
                        0 => p[step + 1].x += 1.0,
                        1 => p[step + 1].y += 1.0,
                        _ => p[step + 1].z += 1.0,
                    }
                }
                let verts = p.map(|pos| mesh.initial_node(pos));
                let t = TetId(mesh.tets.len() as u32);
                let facets =
                    std::array::from_fn(|i| mesh.initial_facet(t, i as u8, &p, &verts));
                mesh.tets.push(TetRecord {
                    verts,
                    tag: 3,
                    parent: None,
                    children: None,
                    facets,
                    generation: 0,
                });
            }
        }

        // Facets with a single owner form the domain boundary.
        for i in 0..mesh.facets.len() {
            let n_owners = mesh.facets[i].owners.iter().flatten().count();
            debug_assert!(n_owners >= 1);
            if n_owners == 1 {
                mesh.facets[i].boundary = true;
                mesh.boundary_tris
                    .push(mesh.facets[i].corners.map(|n| mesh.nodes[n.idx()].pos));
            }
        }
        for i in 0..mesh.nodes.len() {
            mesh.nodes[i].on_boundary = mesh.on_domain_boundary(mesh.nodes[i].pos);
        }
        mesh.recompute_node_status();
        Ok(mesh)
    }

    fn initial_node(&mut self, pos: Vec3) -> NodeId {
        if let Some(&n) = self.node_by_pos.get(&pos.bits()) {
            return n;
        }
        let n = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeRecord {
            pos,
            parent_edge: None,
            depth: 0,
            on_boundary: false, // set after boundary_tris is known
            proper: true,
            lambda: 0,
        });
        self.node_by_pos.insert(pos.bits(), n);
        n
    }

    fn initial_facet(
        &mut self,
        owner: TetId,
        local: u8,
        pos: &[Vec3; 4],
        verts: &[NodeId; 4],
    ) -> FacetId {
        let corner_ids = match local {
            0 => [verts[1], verts[2], verts[3]],
            1 => [verts[0], verts[2], verts[3]],
            2 => [verts[0], verts[1], verts[3]],
            _ => [verts[0], verts[1], verts[2]],
        };
        let key = sorted_triple(corner_ids);
        if let Some(&f) = self.facet_by_corners.get(&key) {
            self.add_owner(f, owner, local);
            return f;
        }
        // Store corners oriented outward with respect to the creating element.
        let tri = face_opposite(pos, local as usize);
        let cross = triangle_cross(tri[0], tri[1], tri[2]);
        let outward = cross.dot(triangle_centroid(tri[0], tri[1], tri[2]) - pos[local as usize]);
        let corners = if outward > 0.0 {
            corner_ids
        } else {
            [corner_ids[0], corner_ids[2], corner_ids[1]]
        };
        let f = FacetId(self.facets.len() as u32);
        self.facets.push(FacetRecord {
            corners,
            parent: None,
            children: None,
            owners: [Some((owner, local)), None],
            boundary: false,
        });
        self.facet_by_corners.insert(key, f);
        f
    }

    pub(super) fn add_owner(&mut self, f: FacetId, t: TetId, local: u8) {
        let owners = &mut self.facets[f.idx()].owners;
        for slot in owners.iter_mut() {
            if slot.is_none() {
                *slot = Some((t, local));
                return;
            }
        }
        panic!("facet {f} already has two owners");
    }

    pub(super) fn drop_owner(&mut self, f: FacetId, t: TetId) {
        let owners = &mut self.facets[f.idx()].owners;
        for slot in owners.iter_mut() {
            if matches!(slot, Some((o, _)) if *o == t) {
                *slot = None;
                return;
            }
        }
        panic!("element {t} does not own facet {f}");
    }

    /// The midpoint node of edge `(a, b)`, creating it if needed.
    pub(super) fn midpoint_node(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let key = edge_key(a, b);
        if let Some(&m) = self.edge_midpoint.get(&key) {
            return Ok(m);
        }
        let (pa, pb) = (self.nodes[a.idx()].pos, self.nodes[b.idx()].pos);
        let pos = Vec3::midpoint(pa, pb);
        let m = if let Some(&m) = self.node_by_pos.get(&pos.bits()) {
            m
        } else {
            let depth = self.nodes[a.idx()].depth.max(self.nodes[b.idx()].depth) + 1;
            if depth > super::DEPTH_GUARD {
                return Err(Error::DepthExceeded(depth));
            }
            let m = NodeId(self.nodes.len() as u32);
            self.nodes.push(NodeRecord {
                pos,
                parent_edge: Some(key),
                depth,
                on_boundary: self.on_domain_boundary(pos),
                proper: true,
                lambda: 0,
            });
            self.node_by_pos.insert(pos.bits(), m);
            m
        };
        self.edge_midpoint.insert(key, m);
        Ok(m)
    }
}
