//! Structured hexahedral meshes on an integer lattice.
//!
//! Level `k` of a domain lives on the lattice `{0, .., n}^3` with
//! `n = 2^(k+1)` cells per side; lattice point `i` maps to the physical
//! coordinate `-1 + i * 2^-k`. Every entity is keyed by its kind and its
//! minimum corner, and all edges point along the positive axis.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};

/// Coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i % 3]
    }

    /// The two remaining axes in cyclic order, `(d+1, d+2) mod 3`.
    pub fn transverse(self) -> (Axis, Axis) {
        let d = self.index();
        (Axis::from_index(d + 1), Axis::from_index(d + 2))
    }
}

/// The two benchmark domains, both unions of unit cubes of `(-1, 1)^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `(-1, 1)^3` as 2x2x2 unit cubes.
    Cube,
    /// `(-1, 1)^3 \ (-1, 0]^3` as 7 unit cubes.
    Fichera,
}

impl Domain {
    /// Whether the unit subdomain at position `p` in `{0, 1}^3` is part of the domain.
    pub fn has_subdomain(self, p: [usize; 3]) -> bool {
        debug_assert!(p.iter().all(|&c| c < 2));
        match self {
            Domain::Cube => true,
            Domain::Fichera => p != [0, 0, 0],
        }
    }

    pub fn subdomains(self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(8);
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..2 {
                    if self.has_subdomain([x, y, z]) {
                        out.push([x, y, z]);
                    }
                }
            }
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Cube => "cube",
            Domain::Fichera => "fichera",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cube" => Ok(Domain::Cube),
            "fichera" => Ok(Domain::Fichera),
            other => Err(MgError::Config(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Vertex,
    EdgeX,
    EdgeY,
    EdgeZ,
    FaceX,
    FaceY,
    FaceZ,
    Cell,
}

impl EntityKind {
    pub fn edge(axis: Axis) -> EntityKind {
        match axis {
            Axis::X => EntityKind::EdgeX,
            Axis::Y => EntityKind::EdgeY,
            Axis::Z => EntityKind::EdgeZ,
        }
    }

    /// Face with the given normal axis.
    pub fn face(normal: Axis) -> EntityKind {
        match normal {
            Axis::X => EntityKind::FaceX,
            Axis::Y => EntityKind::FaceY,
            Axis::Z => EntityKind::FaceZ,
        }
    }

    /// Edge direction or face normal.
    pub fn axis(self) -> Option<Axis> {
        match self {
            EntityKind::EdgeX | EntityKind::FaceX => Some(Axis::X),
            EntityKind::EdgeY | EntityKind::FaceY => Some(Axis::Y),
            EntityKind::EdgeZ | EntityKind::FaceZ => Some(Axis::Z),
            EntityKind::Vertex | EntityKind::Cell => None,
        }
    }

    pub fn is_edge(self) -> bool {
        matches!(self, EntityKind::EdgeX | EntityKind::EdgeY | EntityKind::EdgeZ)
    }

    pub fn is_face(self) -> bool {
        matches!(self, EntityKind::FaceX | EntityKind::FaceY | EntityKind::FaceZ)
    }

    /// Axes along which the entity has unit extent.
    fn spans(self) -> [bool; 3] {
        match self {
            EntityKind::Vertex => [false; 3],
            EntityKind::Cell => [true; 3],
            EntityKind::EdgeX => [true, false, false],
            EntityKind::EdgeY => [false, true, false],
            EntityKind::EdgeZ => [false, false, true],
            EntityKind::FaceX => [false, true, true],
            EntityKind::FaceY => [true, false, true],
            EntityKind::FaceZ => [true, true, false],
        }
    }
}

/// A mesh entity identified by kind and minimum lattice corner.
///
/// Ordered lexicographically by `(kind, z, y, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EntityKey {
    pub kind: EntityKind,
    pub coords: [i64; 3],
}

impl EntityKey {
    pub fn new(kind: EntityKind, coords: [i64; 3]) -> Self {
        EntityKey { kind, coords }
    }

    pub fn vertex(c: [i64; 3]) -> Self {
        Self::new(EntityKind::Vertex, c)
    }

    pub fn edge(axis: Axis, c: [i64; 3]) -> Self {
        Self::new(EntityKind::edge(axis), c)
    }

    pub fn face(normal: Axis, c: [i64; 3]) -> Self {
        Self::new(EntityKind::face(normal), c)
    }

    pub fn cell(c: [i64; 3]) -> Self {
        Self::new(EntityKind::Cell, c)
    }

    fn shifted(self, axis: Axis, by: i64) -> Self {
        let mut c = self.coords;
        c[axis.index()] += by;
        EntityKey { kind: self.kind, coords: c }
    }
}

impl Ord for EntityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |e: &EntityKey| (e.kind, e.coords[2], e.coords[1], e.coords[0]);
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for EntityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One refinement level of a domain: active lattice cells plus the
/// enumerated vertices, edges and faces touching them.
#[derive(Clone, Debug)]
pub struct LatticeMesh {
    domain: Domain,
    level: usize,
    n: usize,
    active: Vec<bool>,
    cells: Vec<EntityKey>,
    faces: Vec<EntityKey>,
    edges: Vec<EntityKey>,
    vertices: Vec<EntityKey>,
}

impl LatticeMesh {
    /// The initial mesh `T_0`: one cell per unit subdomain.
    pub fn build_initial(domain: Domain) -> LatticeMesh {
        let n = 2;
        let mut active = vec![false; n * n * n];
        for [x, y, z] in domain.subdomains() {
            active[x + n * (y + n * z)] = true;
        }
        LatticeMesh::from_active(domain, 0, n, active)
    }

    /// Uniform refinement: every cell is split into its 8 children.
    pub fn refine(&self) -> LatticeMesh {
        let n = 2 * self.n;
        let mut active = vec![false; n * n * n];
        for cell in &self.cells {
            let [x, y, z] = cell.coords.map(|c| 2 * c as usize);
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        active[(x + dx) + n * ((y + dy) + n * (z + dz))] = true;
                    }
                }
            }
        }
        LatticeMesh::from_active(self.domain, self.level + 1, n, active)
    }

    /// A mesh made of an explicit list of cells on an `n`-cell lattice, for fixtures.
    pub fn from_cells(domain: Domain, level: usize, n: usize, cells: &[[i64; 3]]) -> LatticeMesh {
        let mut active = vec![false; n * n * n];
        for c in cells {
            let [x, y, z] = c.map(|v| v as usize);
            assert!(x < n && y < n && z < n, "cell outside the lattice");
            active[x + n * (y + n * z)] = true;
        }
        LatticeMesh::from_active(domain, level, n, active)
    }

    /// `T_0, .., T_levels`.
    pub fn hierarchy(domain: Domain, levels: usize) -> Vec<LatticeMesh> {
        let mut out = vec![LatticeMesh::build_initial(domain)];
        for _ in 0..levels {
            let next = out.last().expect("non-empty").refine();
            out.push(next);
        }
        out
    }

    fn from_active(domain: Domain, level: usize, n: usize, active: Vec<bool>) -> LatticeMesh {
        let mut mesh = LatticeMesh {
            domain,
            level,
            n,
            active,
            cells: Vec::new(),
            faces: Vec::new(),
            edges: Vec::new(),
            vertices: Vec::new(),
        };
        let ni = n as i64;
        let scan = |kind: EntityKind, ext: [i64; 3]| -> Vec<EntityKey> {
            let mut out = Vec::new();
            for z in 0..ext[2] {
                for y in 0..ext[1] {
                    for x in 0..ext[0] {
                        let key = EntityKey::new(kind, [x, y, z]);
                        if mesh.adjacent_cells(&key).next().is_some() {
                            out.push(key);
                        }
                    }
                }
            }
            out
        };
        let extent = |kind: EntityKind| kind.spans().map(|s| if s { ni } else { ni + 1 });
        let cells = scan(EntityKind::Cell, extent(EntityKind::Cell));
        let vertices = scan(EntityKind::Vertex, extent(EntityKind::Vertex));
        let mut edges = Vec::new();
        let mut faces = Vec::new();
        for axis in Axis::ALL {
            edges.extend(scan(EntityKind::edge(axis), extent(EntityKind::edge(axis))));
            faces.extend(scan(EntityKind::face(axis), extent(EntityKind::face(axis))));
        }
        mesh.cells = cells;
        mesh.vertices = vertices;
        mesh.edges = edges;
        mesh.faces = faces;
        mesh
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Cells per side of the bounding lattice.
    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    /// Physical side length of one cell.
    pub fn cell_size(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    pub fn cells(&self) -> &[EntityKey] {
        &self.cells
    }

    pub fn faces(&self) -> &[EntityKey] {
        &self.faces
    }

    pub fn edges(&self) -> &[EntityKey] {
        &self.edges
    }

    pub fn vertices(&self) -> &[EntityKey] {
        &self.vertices
    }

    pub fn is_active_cell(&self, c: [i64; 3]) -> bool {
        let n = self.n as i64;
        if c.iter().any(|&v| v < 0 || v >= n) {
            return false;
        }
        self.active[(c[0] + n * (c[1] + n * c[2])) as usize]
    }

    /// Lattice cells that would surround the entity, whether active or not
    /// (1 for a cell, 2 for a face, 4 for an edge, 8 for a vertex).
    pub fn surrounding_cells(key: &EntityKey) -> impl Iterator<Item = [i64; 3]> {
        let spans = key.kind.spans();
        let base = key.coords;
        (0..8u8).filter_map(move |bits| {
            let mut c = base;
            for a in 0..3 {
                let bit = (bits >> a) & 1;
                if spans[a] {
                    if bit == 1 {
                        return None;
                    }
                } else {
                    c[a] -= bit as i64;
                }
            }
            Some(c)
        })
    }

    /// Active cells adjacent to the entity.
    pub fn adjacent_cells<'a>(&'a self, key: &EntityKey) -> impl Iterator<Item = [i64; 3]> + 'a {
        Self::surrounding_cells(key).filter(move |&c| self.is_active_cell(c))
    }

    pub fn contains(&self, key: &EntityKey) -> bool {
        self.adjacent_cells(key).next().is_some()
    }

    /// An entity lies on the boundary iff one of its surrounding lattice cells is absent.
    pub fn is_boundary(&self, key: &EntityKey) -> bool {
        Self::surrounding_cells(key).any(|c| !self.is_active_cell(c))
    }

    pub fn is_interior(&self, key: &EntityKey) -> bool {
        self.contains(key) && !self.is_boundary(key)
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = &EntityKey> + '_ {
        self.edges.iter().filter(move |e| !self.is_boundary(e))
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &EntityKey> + '_ {
        self.faces.iter().filter(move |e| !self.is_boundary(e))
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = &EntityKey> + '_ {
        self.vertices.iter().filter(move |e| !self.is_boundary(e))
    }

    /// The four faces sharing an edge.
    pub fn faces_around_edge(edge: &EntityKey) -> Vec<EntityKey> {
        let d = edge.kind.axis().expect("edge key");
        assert!(edge.kind.is_edge(), "faces_around_edge expects an edge");
        let (p, q) = d.transverse();
        let mut out = Vec::with_capacity(4);
        // faces spanned by (d, q) have normal p and vice versa
        for s in 0..2 {
            out.push(EntityKey::face(p, edge.coords).shifted(q, -s));
            out.push(EntityKey::face(q, edge.coords).shifted(p, -s));
        }
        out.sort();
        out
    }

    /// The six edges meeting at a vertex.
    pub fn edges_at_vertex(vertex: &EntityKey) -> Vec<EntityKey> {
        let mut out = Vec::with_capacity(6);
        for d in Axis::ALL {
            out.push(EntityKey::edge(d, vertex.coords));
            out.push(EntityKey::edge(d, vertex.coords).shifted(d, -1));
        }
        out.sort();
        out
    }

    /// The twelve faces meeting at a vertex.
    pub fn faces_at_vertex(vertex: &EntityKey) -> Vec<EntityKey> {
        let mut out = Vec::with_capacity(12);
        for d in Axis::ALL {
            let (p, q) = d.transverse();
            for sp in 0..2 {
                for sq in 0..2 {
                    out.push(EntityKey::face(d, vertex.coords).shifted(p, -sp).shifted(q, -sq));
                }
            }
        }
        out.sort();
        out
    }

    /// Fine-mesh edges associated with a coarse entity under one uniform refinement.
    ///
    /// * cell: the 6 fine edges strictly inside it,
    /// * face: the 4 fine edges strictly inside it,
    /// * edge: the 2 fine edges lying on it,
    /// * vertex: the fine edges incident to it.
    ///
    /// Boundary edges are included; callers filter through a `DofMap`.
    pub fn coarse_entity_members(
        fine: &LatticeMesh,
        coarse: &LatticeMesh,
        entity: &EntityKey,
    ) -> Result<Vec<EntityKey>> {
        if fine.level != coarse.level + 1 || fine.domain != coarse.domain {
            return Err(MgError::NotNested { fine: fine.level, coarse: coarse.level });
        }
        if !coarse.contains(entity) {
            return Err(MgError::InvalidEntity(*entity));
        }
        let c = entity.coords.map(|v| 2 * v);
        let mut out = Vec::new();
        match entity.kind {
            EntityKind::Cell => {
                for d in Axis::ALL {
                    let (p, q) = d.transverse();
                    for s in 0..2 {
                        let mut a = c;
                        a[d.index()] += s;
                        a[p.index()] += 1;
                        a[q.index()] += 1;
                        out.push(EntityKey::edge(d, a));
                    }
                }
            }
            kind if kind.is_face() => {
                let normal = kind.axis().expect("face");
                let (p, q) = normal.transverse();
                for (along, across) in [(p, q), (q, p)] {
                    for s in 0..2 {
                        let mut a = c;
                        a[along.index()] += s;
                        a[across.index()] += 1;
                        out.push(EntityKey::edge(along, a));
                    }
                }
            }
            kind if kind.is_edge() => {
                let d = kind.axis().expect("edge");
                for s in 0..2 {
                    let mut a = c;
                    a[d.index()] += s;
                    out.push(EntityKey::edge(d, a));
                }
            }
            EntityKind::Vertex => {
                for d in Axis::ALL {
                    for s in [-1, 0] {
                        let mut a = c;
                        a[d.index()] += s;
                        out.push(EntityKey::edge(d, a));
                    }
                }
                out.retain(|e| fine.contains(e));
            }
            _ => unreachable!(),
        }
        out.sort();
        Ok(out)
    }

    /// The coarse cell containing a fine cell.
    pub fn parent_cell(fine_cell: &EntityKey) -> EntityKey {
        EntityKey::cell(fine_cell.coords.map(|c| c.div_euclid(2)))
    }

    /// Position in `{0, 1}^3` of the initial subdomain containing a cell.
    pub fn subdomain_of(&self, cell: &EntityKey) -> [usize; 3] {
        cell.coords.map(|c| (c >> self.level) as usize)
    }
}
