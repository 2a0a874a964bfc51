//! Triangular meshes: Gmsh input/output, zone maps and the synthetic city generator.
//!
//! A [`Mesh`] is immutable once built. Construction validates connectivity,
//! fixes clockwise triangles, checks that the topological boundary is fully
//! tagged, and precomputes the geometric quantities the solvers need:
//! triangle areas, constant P1 gradients, outward edge normals and nodal
//! wall normals.

mod msh;
mod synth;
mod zones;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fem::SparsityPattern;

pub use msh::{parse_msh, write_msh, MshVersion};
pub use synth::{structured_rectangle, synthetic_city_mesh, Disc, SideTags, SyntheticCity};
pub use zones::{build_zone_map, Polygon, SelectedZone, Zone, ZoneMap, ZoneRole, ZoneSpec};

pub type Point = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("malformed MSH content: {0}")]
    MalformedHeader(String),
    #[error("unsupported MSH version or encoding: {0}")]
    UnsupportedVersion(String),
    #[error("element {element} references unknown node {node}")]
    DanglingNodeReference { element: usize, node: usize },
    #[error("boundary edge ({}, {}) carries no boundary tag", .nodes[0], .nodes[1])]
    UntaggedBoundaryEdge { nodes: [usize; 2] },
    #[error("triangle {triangle} has zero or negative area")]
    NonPositiveArea { triangle: usize },
    #[error("unknown physical group {0:?}")]
    UnknownPhysicalGroup(String),
    #[error("unsupported element type {0}")]
    UnsupportedElement(u32),
    #[error("triangle {0} belongs to no zone")]
    UnzonedTriangle(usize),
    #[error("tagged edge ({}, {}) is not on the boundary", .nodes[0], .nodes[1])]
    InteriorTaggedEdge { nodes: [usize; 2] },
    #[error("boundary edge ({}, {}) tagged both {first} and {second}", .nodes[0], .nodes[1])]
    ConflictingBoundaryTag {
        nodes: [usize; 2],
        first: BoundaryTag,
        second: BoundaryTag,
    },
    #[error("boundary does not form closed loops at node {0}")]
    OpenBoundary(usize),
    #[error("unknown boundary tag {0:?}")]
    UnknownTag(String),
    #[error("polygon {0:?} is not closed")]
    OpenPolygon(String),
    #[error("zone {0:?} lies outside the domain")]
    ZoneOutsideDomain(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    Wall,
    /// Accepted for compatibility with exit-based routing meshes; unused by the solvers.
    Exit,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [Self::Inlet, Self::Outlet, Self::Wall, Self::Exit];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Inlet => "inlet",
            Self::Outlet => "outlet",
            Self::Wall => "wall",
            Self::Exit => "exit",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inlet" => Ok(Self::Inlet),
            "outlet" => Ok(Self::Outlet),
            "wall" => Ok(Self::Wall),
            "exit" => Ok(Self::Exit),
            other => Err(MeshError::UnknownTag(other.to_string())),
        }
    }
}

/// Boundary edge oriented along its triangle's counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub length: f64,
    /// Outward unit normal.
    pub normal: [f64; 2],
}

/// A mesh cut from a parent mesh, with index maps back to the parent.
#[derive(Debug, Clone)]
pub struct SubMesh {
    pub mesh: Mesh,
    /// Parent index of each submesh node.
    pub node_map: Vec<usize>,
    /// Parent index of each submesh triangle.
    pub triangle_map: Vec<usize>,
}

impl SubMesh {
    /// Nodal values of the parent restricted to the submesh.
    pub fn restrict<T: Copy>(&self, parent: &[T]) -> Vec<T> {
        self.node_map.iter().map(|&v| parent[v]).collect()
    }

    /// Submesh nodal values extended to the parent, `fill` elsewhere.
    pub fn prolong<T: Copy>(&self, values: &[T], n_parent: usize, fill: T) -> Vec<T> {
        let mut out = vec![fill; n_parent];
        for (&v, &x) in self.node_map.iter().zip(values) {
            out[v] = x;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    zone_names: Vec<String>,
    triangle_zone: Vec<usize>,
    node_zone: Vec<usize>,
    areas: Vec<f64>,
    gradients: Vec<[[f64; 2]; 3]>,
    node_area: Vec<f64>,
    wall_normals: Vec<(usize, [f64; 2])>,
    inlet_nodes: Vec<usize>,
    outlet_nodes: Vec<usize>,
    pattern: Arc<SparsityPattern>,
    slots: Vec<[usize; 9]>,
}

impl Mesh {
    /// Builds and validates a mesh.
    ///
    /// `tagged_edges` must cover the topological boundary exactly once per
    /// edge; `triangle_zone` indexes into `zone_names`. Clockwise triangles
    /// are reoriented.
    pub fn new(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        tagged_edges: Vec<([usize; 2], BoundaryTag)>,
        zone_names: Vec<String>,
        triangle_zone: Vec<usize>,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        if triangles.is_empty() {
            return Err(MeshError::DegenerateGeometry("mesh has no triangles".into()));
        }
        if triangle_zone.len() != triangles.len() {
            return Err(MeshError::DegenerateGeometry(
                "zone list length differs from triangle count".into(),
            ));
        }
        if let Some(t) = triangle_zone.iter().position(|&z| z >= zone_names.len()) {
            return Err(MeshError::UnzonedTriangle(t));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::DanglingNodeReference {
                    element: t,
                    node: bad,
                });
            }
        }
        for (e, (edge, _)) in tagged_edges.iter().enumerate() {
            if let Some(&bad) = edge.iter().find(|&&v| v >= n) {
                return Err(MeshError::DanglingNodeReference {
                    element: triangles.len() + e,
                    node: bad,
                });
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let mut a = signed_area(&nodes, tri);
            if a < 0.0 {
                tri.swap(1, 2);
                a = -a;
            }
            if !(a > 0.0) || !a.is_finite() {
                return Err(MeshError::NonPositiveArea { triangle: t });
            }
            areas.push(a);
            gradients.push(p1_gradients(&nodes, tri, a));
        }

        // Topological boundary: edges owned by exactly one triangle, stored with
        // the owner's counterclockwise direction.
        let mut edge_owners: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                edge_owners
                    .entry(key)
                    .and_modify(|e| e.0 += 1)
                    .or_insert((1, [a, b]));
            }
        }
        let mut boundary: BTreeMap<(usize, usize), [usize; 2]> = edge_owners
            .into_iter()
            .filter(|(_, (count, _))| *count == 1)
            .map(|(k, (_, dir))| (k, dir))
            .collect();

        let mut tag_of: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
        let mut order = Vec::new();
        for (edge, tag) in &tagged_edges {
            let key = (edge[0].min(edge[1]), edge[0].max(edge[1]));
            if !boundary.contains_key(&key) {
                return Err(MeshError::InteriorTaggedEdge { nodes: *edge });
            }
            match tag_of.get(&key) {
                Some(prev) if prev != tag => {
                    return Err(MeshError::ConflictingBoundaryTag {
                        nodes: *edge,
                        first: *prev,
                        second: *tag,
                    })
                }
                Some(_) => {}
                None => {
                    tag_of.insert(key, *tag);
                    order.push(key);
                }
            }
        }
        if let Some((_, dir)) = boundary.iter().find(|(k, _)| !tag_of.contains_key(k)) {
            return Err(MeshError::UntaggedBoundaryEdge { nodes: *dir });
        }

        let mut boundary_degree = vec![0usize; n];
        for dir in boundary.values() {
            boundary_degree[dir[0]] += 1;
            boundary_degree[dir[1]] += 1;
        }
        if let Some(v) = boundary_degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(MeshError::OpenBoundary(v));
        }

        let boundary_edges: Vec<BoundaryEdge> = order
            .iter()
            .map(|key| {
                let dir = boundary.remove(key).expect("boundary edge");
                let [a, b] = dir;
                let dx = nodes[b][0] - nodes[a][0];
                let dy = nodes[b][1] - nodes[a][1];
                let length = dx.hypot(dy);
                BoundaryEdge {
                    nodes: dir,
                    tag: tag_of[key],
                    length,
                    normal: [dy / length, -dx / length],
                }
            })
            .collect();

        let mut node_area = vec![0.0; n];
        for (tri, &a) in triangles.iter().zip(&areas) {
            for &v in tri {
                node_area[v] += a / 3.0;
            }
        }

        let node_zone = majority_node_zone(n, &triangles, &triangle_zone, zone_names.len());

        let mut wall_acc: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        let mut inlet = Vec::new();
        let mut outlet = Vec::new();
        for e in &boundary_edges {
            match e.tag {
                BoundaryTag::Wall => {
                    for &v in &e.nodes {
                        let acc = wall_acc.entry(v).or_insert([0.0, 0.0]);
                        acc[0] += e.normal[0] * e.length;
                        acc[1] += e.normal[1] * e.length;
                    }
                }
                BoundaryTag::Inlet => inlet.extend_from_slice(&e.nodes),
                BoundaryTag::Outlet => outlet.extend_from_slice(&e.nodes),
                BoundaryTag::Exit => {}
            }
        }
        let wall_normals = wall_acc
            .into_iter()
            .filter_map(|(v, [x, y])| {
                let len = x.hypot(y);
                (len > 0.0).then(|| (v, [x / len, y / len]))
            })
            .collect();
        inlet.sort_unstable();
        inlet.dedup();
        outlet.sort_unstable();
        outlet.dedup();

        let pattern = Arc::new(SparsityPattern::from_triangles(n, &triangles));
        let slots = triangles
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = pattern.position(tri[a], tri[b]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();

        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            zone_names,
            triangle_zone,
            node_zone,
            areas,
            gradients,
            node_area,
            wall_normals,
            inlet_nodes: inlet,
            outlet_nodes: outlet,
            pattern,
            slots,
        })
    }

    /// Mesh made of the triangles with `keep[t]`, nodes renumbered in their
    /// original order. Boundary edges keep their tag; edges exposed by the
    /// removal get `exposed`.
    pub fn submesh(&self, keep: &[bool], exposed: BoundaryTag) -> Result<SubMesh, MeshError> {
        let mut node_new = vec![usize::MAX; self.n_nodes()];
        let mut triangle_map = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if keep[t] {
                triangle_map.push(t);
                for &v in tri {
                    node_new[v] = 0;
                }
            }
        }
        let mut node_map = Vec::new();
        for (v, slot) in node_new.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = node_map.len();
                node_map.push(v);
            }
        }
        let nodes = node_map.iter().map(|&v| self.nodes[v]).collect();
        let triangles: Vec<[usize; 3]> = triangle_map
            .iter()
            .map(|&t| self.triangles[t].map(|v| node_new[v]))
            .collect();
        let triangle_zone = triangle_map.iter().map(|&t| self.triangle_zone[t]).collect();
        let original: BTreeMap<(usize, usize), BoundaryTag> = self
            .boundary_edges
            .iter()
            .map(|e| {
                let [a, b] = e.nodes;
                ((a.min(b), a.max(b)), e.tag)
            })
            .collect();
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &t in &triangle_map {
            let tri = self.triangles[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let tagged = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(key, _)| {
                let tag = original.get(&key).copied().unwrap_or(exposed);
                ([node_new[key.0], node_new[key.1]], tag)
            })
            .collect();
        let mesh = Mesh::new(nodes, triangles, tagged, self.zone_names.clone(), triangle_zone)?;
        Ok(SubMesh {
            mesh,
            node_map,
            triangle_map,
        })
    }

    /// Same geometry with zone membership replaced by `zones`.
    pub fn with_zones(&self, zones: &ZoneMap) -> Self {
        let mut m = self.clone();
        m.zone_names = zones.zones().iter().map(|z| z.name.clone()).collect();
        m.triangle_zone = zones.triangle_zone().to_vec();
        m.node_zone = zones.node_zone().to_vec();
        m
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn zone_names(&self) -> &[String] {
        &self.zone_names
    }

    pub fn triangle_zone(&self) -> &[usize] {
        &self.triangle_zone
    }

    pub fn node_zone(&self) -> &[usize] {
        &self.node_zone
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Constant gradients of the three P1 basis functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.gradients[t]
    }

    /// `∫ λ_i` over the mesh, i.e. one third of the incident triangle areas.
    pub fn node_area(&self) -> &[f64] {
        &self.node_area
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[c][0]) / 3.0,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[c][1]) / 3.0,
        ]
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let tri = self.triangles[t];
        (0..3)
            .map(|k| dist(self.nodes[tri[k]], self.nodes[tri[(k + 1) % 3]]))
            .fold(0.0, f64::max)
    }

    /// Smallest triangle altitude, the length scale used for explicit time step limits.
    pub fn min_altitude(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| 2.0 * self.areas[t] / self.diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter_of_domain(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        dist(lo, hi)
    }

    /// Wall nodes with their normalized, length-weighted outward normals.
    pub fn wall_normals(&self) -> &[(usize, [f64; 2])] {
        &self.wall_normals
    }

    pub fn inlet_nodes(&self) -> &[usize] {
        &self.inlet_nodes
    }

    pub fn outlet_nodes(&self) -> &[usize] {
        &self.outlet_nodes
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Value-array positions of the 3×3 element block of triangle `t`, row-major.
    pub(crate) fn slots(&self, t: usize) -> &[usize; 9] {
        &self.slots[t]
    }

    /// Triangles incident to each node, in ascending order.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Stable fingerprint of node coordinates and connectivity.
    pub fn identity_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.nodes.len() as u64).to_le_bytes());
        for p in &self.nodes {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        h.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
        }
        for e in &self.boundary_edges {
            h.update((e.nodes[0] as u64).to_le_bytes());
            h.update((e.nodes[1] as u64).to_le_bytes());
            h.update([e.tag as u8]);
        }
        hex::encode(h.finalize())
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn signed_area(nodes: &[Point], tri: &[usize; 3]) -> f64 {
    let [p0, p1, p2] = tri.map(|v| nodes[v]);
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn p1_gradients(nodes: &[Point], tri: &[usize; 3], area: f64) -> [[f64; 2]; 3] {
    let p = tri.map(|v| nodes[v]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        g[i] = [
            (p[j][1] - p[k][1]) / (2.0 * area),
            (p[k][0] - p[j][0]) / (2.0 * area),
        ];
    }
    g
}

/// Zone of each node by majority over incident triangles; ties go to the lower zone id.
pub(crate) fn majority_node_zone(
    n: usize,
    triangles: &[[usize; 3]],
    triangle_zone: &[usize],
    n_zones: usize,
) -> Vec<usize> {
    let mut counts = vec![vec![0usize; n_zones.max(1)]; n];
    for (tri, &z) in triangles.iter().zip(triangle_zone) {
        for &v in tri {
            counts[v][z] += 1;
        }
    }
    counts
        .iter()
        .map(|c| {
            let mut best = 0;
            for (z, &k) in c.iter().enumerate() {
                if k > c[best] {
                    best = z;
                }
            }
            best
        })
        .collect()
}
