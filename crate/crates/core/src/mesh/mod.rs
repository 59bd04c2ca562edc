//! Geometry and topology of tetrahedral trusses.

mod bbox;
mod generate;
mod io;
mod quality;

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bbox::{bounding_box, principal_axes, OrientedBox};
pub use generate::{generate_grid_truss, generate_union, place_along, ChunkShape, GlueAxis};
pub use io::{read_mesh_json, write_mesh_json};
pub use quality::{
    signed_volume, tet_aspect_ratio, tets_penetrate, validate_edge_simple, volume_diameter_ratio,
    EdgeSimpleReport, QualityLimits,
};

/// A point in R³.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Point3 {
        self * (1.0 / self.norm())
    }

    pub fn dist(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Lexicographic total order on coordinates.
    pub fn total_cmp(&self, o: &Point3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Four vertex indices of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tetrahedron(pub [usize; 4]);

impl Tetrahedron {
    pub fn vertices(&self) -> [usize; 4] {
        self.0
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    /// The six vertex pairs.
    pub fn edges(&self) -> [Edge; 6] {
        let [a, b, c, d] = self.0;
        [
            Edge::new(a, b),
            Edge::new(a, c),
            Edge::new(a, d),
            Edge::new(b, c),
            Edge::new(b, d),
            Edge::new(c, d),
        ]
    }

    /// The four triangle faces, each with sorted vertex indices.
    pub fn faces(&self) -> [[usize; 3]; 4] {
        let [a, b, c, d] = self.0;
        let mut f = [[b, c, d], [a, c, d], [a, b, d], [a, b, c]];
        for face in &mut f {
            face.sort_unstable();
        }
        f
    }

    pub fn points(&self, pts: &[Point3]) -> [Point3; 4] {
        self.0.map(|i| pts[i])
    }

    pub fn centroid(&self, pts: &[Point3]) -> Point3 {
        let [a, b, c, d] = self.points(pts);
        (a + b + c + d) * 0.25
    }

    pub fn shared_vertices(&self, o: &Tetrahedron) -> usize {
        self.0.iter().filter(|v| o.0.contains(v)).count()
    }
}

/// Unordered vertex pair, stored with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }
}

/// Derive the edge set: every vertex pair that co-occurs in some tetrahedron.
pub fn edges_from_tets(tets: &[Tetrahedron], n_vertices: usize) -> Result<Vec<Edge>> {
    let mut edges = Vec::with_capacity(tets.len() * 6);
    for (t, tet) in tets.iter().enumerate() {
        for (k, &v) in tet.0.iter().enumerate() {
            if v >= n_vertices {
                return Err(Error::InvalidVertex { index: v, n: n_vertices });
            }
            if tet.0[..k].contains(&v) {
                return Err(Error::RepeatedVertex(t));
            }
        }
        edges.extend(tet.edges());
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// A 3-D truss: embedded vertices, tetrahedra, derived edges, stiffness
/// coefficients and an optional partition of the tetrahedra into chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrussMesh {
    points: Vec<Point3>,
    tets: Vec<Tetrahedron>,
    edges: Vec<Edge>,
    gamma_default: f64,
    gamma_overrides: BTreeMap<Edge, f64>,
    chunks: Option<Vec<Vec<usize>>>,
}

impl TrussMesh {
    pub fn new(points: Vec<Point3>, tets: Vec<Tetrahedron>, gamma_default: f64) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::DegenerateGeometry(format!("vertex {i} has a non-finite coordinate")));
        }
        let edges = edges_from_tets(&tets, points.len())?;
        Ok(TrussMesh {
            points,
            tets,
            edges,
            gamma_default,
            gamma_overrides: BTreeMap::new(),
            chunks: None,
        })
    }

    /// Per-edge stiffness overrides; every key must be a mesh edge.
    pub fn with_gamma_overrides(mut self, overrides: BTreeMap<Edge, f64>) -> Result<Self> {
        for e in overrides.keys() {
            if self.edges.binary_search(e).is_err() {
                return Err(Error::Format(format!(
                    "gamma.edges: ({}, {}) is not an edge of the mesh",
                    e.0, e.1
                )));
            }
        }
        self.gamma_overrides = overrides;
        Ok(self)
    }

    /// Declare the convex pieces. Every tetrahedron must appear in exactly one chunk.
    pub fn with_chunks(mut self, chunks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; self.tets.len()];
        for chunk in &chunks {
            for &t in chunk {
                if t >= self.tets.len() {
                    return Err(Error::Format(format!("chunks: tet index {t} out of range")));
                }
                if seen[t] {
                    return Err(Error::Format(format!("chunks: tet {t} listed twice")));
                }
                seen[t] = true;
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("chunks: tet {t} is not in any chunk")));
        }
        self.chunks = if chunks.len() <= 1 { None } else { Some(chunks) };
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn tets(&self) -> &[Tetrahedron] {
        &self.tets
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn gamma_default(&self) -> f64 {
        self.gamma_default
    }

    pub fn gamma_overrides(&self) -> &BTreeMap<Edge, f64> {
        &self.gamma_overrides
    }

    pub fn gamma(&self, e: Edge) -> f64 {
        self.gamma_overrides.get(&e).copied().unwrap_or(self.gamma_default)
    }

    pub fn edge_length(&self, e: Edge) -> f64 {
        self.points[e.0].dist(self.points[e.1])
    }

    pub fn declared_chunks(&self) -> Option<&[Vec<usize>]> {
        self.chunks.as_deref()
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.as_ref().map_or(1, |c| c.len())
    }

    /// Chunk partition, with a single chunk holding every tet when none was declared.
    pub fn chunk_list(&self) -> Vec<Vec<usize>> {
        match &self.chunks {
            Some(c) => c.clone(),
            None => vec![(0..self.tets.len()).collect()],
        }
    }

    /// Sorted vertex set of a tet subset.
    pub fn vertices_of(&self, tet_ids: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = tet_ids.iter().flat_map(|&t| self.tets[t].0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Sorted edge set of a tet subset.
    pub fn edges_of(&self, tet_ids: &[usize]) -> Vec<Edge> {
        let mut e: Vec<Edge> = tet_ids.iter().flat_map(|&t| self.tets[t].edges()).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Maximum pairwise vertex distance (brute force).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                best = best.max(self.points[i].dist(self.points[j]));
            }
        }
        best
    }

    /// Relabel vertices: new index of vertex `v` is `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<TrussMesh> {
        let n = self.n_vertices();
        let mut points = vec![Point3::default(); n];
        for (v, &p) in perm.iter().enumerate() {
            points[p] = self.points[v];
        }
        let tets = self.tets.iter().map(|t| Tetrahedron(t.0.map(|v| perm[v]))).collect();
        let overrides = self
            .gamma_overrides
            .iter()
            .map(|(e, &g)| (Edge::new(perm[e.0], perm[e.1]), g))
            .collect();
        let mut m = TrussMesh::new(points, tets, self.gamma_default)?.with_gamma_overrides(overrides)?;
        m.chunks = self.chunks.clone();
        Ok(m)
    }
}

/// Face-adjacency graph on tetrahedra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RigidityGraph {
    pub adjacency: Vec<Vec<usize>>,
}

impl RigidityGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.adjacency.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in &self.adjacency[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }
}

/// Rigidity graph of an arbitrary tet list; nodes are positions in `tets`.
pub fn rigidity_graph_of(tets: &[Tetrahedron]) -> RigidityGraph {
    let mut faces: HashMap<[usize; 3], Vec<usize>> = HashMap::with_capacity(tets.len() * 2);
    for (i, t) in tets.iter().enumerate() {
        for f in t.faces() {
            faces.entry(f).or_default().push(i);
        }
    }
    let mut adjacency = vec![Vec::new(); tets.len()];
    for owners in faces.values() {
        for (k, &a) in owners.iter().enumerate() {
            for &b in &owners[k + 1..] {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    RigidityGraph { adjacency }
}

pub fn rigidity_graph(mesh: &TrussMesh) -> RigidityGraph {
    rigidity_graph_of(mesh.tets())
}

/// Stiff connectivity of a tet list: the rigidity graph is connected and,
/// around every vertex, the tets containing it are face-connected among themselves.
pub fn tets_stiffly_connected(tets: &[Tetrahedron]) -> bool {
    let graph = rigidity_graph_of(tets);
    if !graph.is_connected() {
        return false;
    }
    let mut star: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, t) in tets.iter().enumerate() {
        for v in t.0 {
            star.entry(v).or_default().push(i);
        }
    }
    let mut local = vec![usize::MAX; tets.len()];
    star.values().all(|members| {
        for (k, &t) in members.iter().enumerate() {
            local[t] = k;
        }
        let mut seen = vec![false; members.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = stack.pop() {
            for &w in &graph.adjacency[members[k]] {
                let lw = local[w];
                if lw != usize::MAX && members.get(lw) == Some(&w) && !seen[lw] {
                    seen[lw] = true;
                    count += 1;
                    stack.push(lw);
                }
            }
        }
        for &t in members {
            local[t] = usize::MAX;
        }
        count == members.len()
    })
}

pub fn is_stiffly_connected(mesh: &TrussMesh) -> bool {
    tets_stiffly_connected(mesh.tets())
}
