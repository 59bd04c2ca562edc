//! Hollowings of convex chunks: r-division planes, boundary shells,
//! stiffening, interior chunks and the boundary vertex set U.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{OrientedBox, Point3, Tetrahedron, TrussMesh};
use crate::oracle::{self, DenseSym};
use crate::stiffness::rigid_body_basis;

/// Planes orthogonal to the box axes, uniformly spaced, cutting the box into cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RDivision {
    pub bbox: OrientedBox,
    pub r: f64,
    pub cells: [usize; 3],
    pub spacing: [f64; 3],
}

impl RDivision {
    /// Interior cut positions along axis `a`, in box-local coordinates.
    pub fn cuts(&self, a: usize) -> Vec<f64> {
        let h = self.bbox.half_lengths[a];
        (1..self.cells[a]).map(|k| -h + k as f64 * self.spacing[a]).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Whether a tet with these box-local vertex coordinates touches a cut plane.
    fn crosses(&self, local: &[[f64; 3]; 4], eps: f64) -> bool {
        (0..3).any(|a| {
            if self.cells[a] < 2 {
                return false;
            }
            let (lo, hi) = local.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c[a]), hi.max(c[a]))
            });
            let h = self.bbox.half_lengths[a];
            let sp = self.spacing[a];
            let kmin = (((lo - eps + h) / sp).ceil() as i64).max(1);
            let kmax = (((hi + eps + h) / sp).floor() as i64).min(self.cells[a] as i64 - 1);
            kmin <= kmax
        })
    }
}

/// Cells of side about r^{1/3}: ⌈side / r^{1/3}⌉ per axis, uniform spacing.
pub fn r_division(bbox: &OrientedBox, r: f64) -> Result<RDivision> {
    if !(r >= 8.0) {
        return Err(Error::RDivision(format!("r = {r} is below 8")));
    }
    let s = r.cbrt();
    let mut cells = [0usize; 3];
    let mut spacing = [0.0; 3];
    for a in 0..3 {
        let side = bbox.side(a);
        if side < s * (1.0 - 1e-9) {
            return Err(Error::RDivision(format!(
                "box side {side:.3} along axis {a} is shorter than r^(1/3) = {s:.3}"
            )));
        }
        cells[a] = ((side / s) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        spacing[a] = side / cells[a] as f64;
    }
    Ok(RDivision { bbox: *bbox, r, cells, spacing })
}

/// One connected piece of the chunk left after removing the hollowing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorChunk {
    /// Vertices not in U, sorted.
    pub vertices: Vec<usize>,
    /// Vertices of U that share a tet with this piece, sorted.
    pub contacts: Vec<usize>,
    /// Tets of this piece, sorted.
    pub tets: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HollowStats {
    pub plane_tets: usize,
    pub boundary_tets: usize,
    pub absorbed_tets: usize,
    pub stiffening_tets: usize,
}

/// A hollowing of one chunk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hollowing {
    /// Hollowing tets (global indices), sorted.
    pub tets: Vec<usize>,
    /// U: vertices of the hollowing tets, sorted.
    pub boundary_vertices: Vec<usize>,
    pub interior_chunks: Vec<InteriorChunk>,
    pub division: RDivision,
    pub stats: HollowStats,
}

impl Hollowing {
    pub fn interior_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.interior_chunks.iter().flat_map(|c| c.vertices.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

/// Chunk-local topology: tets, face adjacency and vertex stars.
struct ChunkTopo<'a> {
    mesh: &'a TrussMesh,
    tets: Vec<usize>,
    faces: Vec<Vec<usize>>,
    star: HashMap<usize, Vec<usize>>,
}

impl<'a> ChunkTopo<'a> {
    fn new(mesh: &'a TrussMesh, chunk: &[usize]) -> Self {
        let mut tets = chunk.to_vec();
        tets.sort_unstable();
        tets.dedup();
        let local: Vec<Tetrahedron> = tets.iter().map(|&t| mesh.tets()[t]).collect();
        let faces = crate::mesh::rigidity_graph_of(&local).adjacency;
        let mut star: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, t) in local.iter().enumerate() {
            for v in t.0 {
                star.entry(v).or_default().push(k);
            }
        }
        ChunkTopo { mesh, tets, faces, star }
    }

    fn tet(&self, k: usize) -> &Tetrahedron {
        &self.mesh.tets()[self.tets[k]]
    }

    fn len(&self) -> usize {
        self.tets.len()
    }
}

/// Tets with at least one face not shared with another tet of the chunk.
pub fn boundary_tets(mesh: &TrussMesh, chunk: &[usize]) -> Vec<usize> {
    let topo = ChunkTopo::new(mesh, chunk);
    (0..topo.len()).filter(|&k| topo.faces[k].len() < 4).map(|k| topo.tets[k]).collect()
}

/// Tets touching an interior cut plane of the division.
pub fn plane_tets(mesh: &TrussMesh, chunk: &[usize], division: &RDivision, eps: f64) -> Vec<usize> {
    let mut out: Vec<usize> = chunk
        .iter()
        .copied()
        .filter(|&t| {
            let local = mesh.tets()[t].0.map(|v| division.bbox.local(mesh.points()[v]));
            division.crosses(&local, eps)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Outcome of one connectivity repair step on an induced face subgraph.
enum Link {
    Connected,
    Path(Vec<usize>),
    Unreachable,
}

/// Within the face graph induced on `nodes`, find the components of the
/// H-tets; if there are several, return the intermediate tets of a shortest
/// path from the first component to any other one.
fn link_step(faces: &[Vec<usize>], nodes: &[usize], in_h: &[bool]) -> Link {
    let mut pos: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
    for (i, &k) in nodes.iter().enumerate() {
        pos.insert(k, i);
    }
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&k| faces[k].iter().filter_map(|w| pos.get(w).copied()).collect())
        .collect();
    let h: Vec<bool> = nodes.iter().map(|&k| in_h[k]).collect();
    let mut comp = vec![usize::MAX; nodes.len()];
    let mut count = 0;
    for s in 0..nodes.len() {
        if !h[s] || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if h[w] && comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    if count <= 1 {
        return Link::Connected;
    }
    let mut parent = vec![usize::MAX; nodes.len()];
    let mut queue = VecDeque::new();
    for i in 0..nodes.len() {
        if comp[i] == 0 {
            parent[i] = i;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if parent[w] != usize::MAX {
                continue;
            }
            parent[w] = u;
            if h[w] {
                let mut path = Vec::new();
                let mut x = u;
                while comp[x] != 0 {
                    path.push(nodes[x]);
                    x = parent[x];
                }
                return Link::Path(path);
            }
            queue.push_back(w);
        }
    }
    Link::Unreachable
}

/// One pass of global and per-vertex connectivity repair. Returns tets added.
fn stiffen_pass(topo: &ChunkTopo, in_h: &mut [bool]) -> usize {
    let m = topo.len();
    let mut added = 0;
    let all: Vec<usize> = (0..m).collect();

    // Global: join every face-graph component of H to the first one.
    while let Link::Path(path) = link_step(&topo.faces, &all, in_h) {
        for k in path {
            if !in_h[k] {
                in_h[k] = true;
                added += 1;
            }
        }
    }

    // Local: around every vertex of H, the H-tets must be face-connected.
    let mut verts: Vec<usize> = (0..m).filter(|&k| in_h[k]).flat_map(|k| topo.tet(k).0).collect();
    verts.sort_unstable();
    verts.dedup();
    let mut queue: VecDeque<usize> = verts.into_iter().collect();
    while let Some(v) = queue.pop_front() {
        let star = &topo.star[&v];
        while let Link::Path(path) = link_step(&topo.faces, star, in_h) {
            for k in path {
                if !in_h[k] {
                    in_h[k] = true;
                    added += 1;
                    queue.extend(topo.tet(k).0);
                }
            }
        }
    }
    added
}

fn stiffen_local(topo: &ChunkTopo, in_h: &mut [bool]) -> usize {
    let mut total = 0;
    loop {
        let added = stiffen_pass(topo, in_h);
        total += added;
        if added == 0 {
            return total;
        }
    }
}

/// Grow a tet subset of the chunk until it is stiffly connected, adding tets
/// along shortest face paths. Returns a sorted superset of `subset`.
pub fn stiffen(mesh: &TrussMesh, chunk: &[usize], subset: &[usize]) -> Vec<usize> {
    let topo = ChunkTopo::new(mesh, chunk);
    let mut in_h = vec![false; topo.len()];
    for t in subset {
        if let Ok(k) = topo.tets.binary_search(t) {
            in_h[k] = true;
        }
    }
    stiffen_local(&topo, &mut in_h);
    let mut out: Vec<usize> = (0..topo.len()).filter(|&k| in_h[k]).map(|k| topo.tets[k]).collect();
    out.extend(subset.iter().filter(|t| topo.tets.binary_search(t).is_err()));
    out.sort_unstable();
    out.dedup();
    out
}

/// Hollow a convex chunk with box `bbox` and size parameter `r`.
///
/// H = tets touching a division plane (within `geom_eps`) ∪ boundary tets, then
/// repeatedly: absorb non-H tets whose vertices all lie in U, and stiffen.
pub fn hollow(mesh: &TrussMesh, chunk: &[usize], bbox: &OrientedBox, r: f64, geom_eps: f64) -> Result<Hollowing> {
    if chunk.is_empty() {
        return Err(Error::RDivision("empty chunk".into()));
    }
    let division = r_division(bbox, r)?;
    let topo = ChunkTopo::new(mesh, chunk);
    let m = topo.len();
    let mut in_h = vec![false; m];
    let mut stats = HollowStats::default();

    for t in plane_tets(mesh, &topo.tets, &division, geom_eps) {
        let k = topo.tets.binary_search(&t).expect("chunk tet");
        in_h[k] = true;
        stats.plane_tets += 1;
    }
    for k in 0..m {
        if topo.faces[k].len() < 4 {
            stats.boundary_tets += 1;
            in_h[k] = true;
        }
    }

    let nv = mesh.n_vertices();
    loop {
        let mut in_u = vec![false; nv];
        for k in (0..m).filter(|&k| in_h[k]) {
            for v in topo.tet(k).0 {
                in_u[v] = true;
            }
        }
        let mut absorbed = 0;
        for k in 0..m {
            if !in_h[k] && topo.tet(k).0.iter().all(|&v| in_u[v]) {
                in_h[k] = true;
                absorbed += 1;
            }
        }
        stats.absorbed_tets += absorbed;
        let added = stiffen_local(&topo, &mut in_h);
        stats.stiffening_tets += added;
        if absorbed == 0 && added == 0 {
            break;
        }
    }

    let mut in_u = vec![false; nv];
    for k in (0..m).filter(|&k| in_h[k]) {
        for v in topo.tet(k).0 {
            in_u[v] = true;
        }
    }
    let tets: Vec<usize> = (0..m).filter(|&k| in_h[k]).map(|k| topo.tets[k]).collect();
    let boundary_vertices: Vec<usize> = (0..nv).filter(|&v| in_u[v]).collect();
    let interior_chunks = interior_components(&topo, &in_h, &in_u);

    Ok(Hollowing {
        tets,
        boundary_vertices,
        interior_chunks,
        division,
        stats,
    })
}

fn interior_components(topo: &ChunkTopo, in_h: &[bool], in_u: &[bool]) -> Vec<InteriorChunk> {
    let m = topo.len();
    // Union interior vertices that share a non-H tet.
    let mut label: HashMap<usize, usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for k in (0..m).filter(|&k| !in_h[k]) {
        let inner: Vec<usize> = topo.tet(k).0.iter().copied().filter(|&v| !in_u[v]).collect();
        let ids: Vec<usize> = inner
            .iter()
            .map(|&v| {
                *label.entry(v).or_insert_with(|| {
                    parent.push(parent.len());
                    parent.len() - 1
                })
            })
            .collect();
        for w in ids.windows(2) {
            let a = find(&mut parent, w[0]);
            let b = find(&mut parent, w[1]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: HashMap<usize, InteriorChunk> = HashMap::new();
    for k in (0..m).filter(|&k| !in_h[k]) {
        let t = topo.tet(k);
        let v0 = *t.0.iter().find(|&&v| !in_u[v]).expect("non-hollow tet has an interior vertex");
        let root = find(&mut parent, label[&v0]);
        let g = groups.entry(root).or_insert_with(|| InteriorChunk {
            vertices: Vec::new(),
            contacts: Vec::new(),
            tets: Vec::new(),
        });
        g.tets.push(topo.tets[k]);
        for v in t.0 {
            if in_u[v] {
                g.contacts.push(v);
            } else {
                g.vertices.push(v);
            }
        }
    }
    let mut out: Vec<InteriorChunk> = groups
        .into_values()
        .map(|mut g| {
            for v in [&mut g.vertices, &mut g.contacts, &mut g.tets] {
                v.sort_unstable();
                v.dedup();
            }
            g
        })
        .collect();
    out.sort_by_key(|g| g.vertices[0]);
    out
}

/// Number of listed tets whose vertices lie on both sides of (or on) the plane n·x = offset.
pub fn count_plane_crossings(mesh: &TrussMesh, tets: &[usize], normal: Point3, offset: f64, eps: f64) -> usize {
    tets.iter()
        .filter(|&&t| {
            let s = mesh.tets()[t].0.map(|v| mesh.points()[v].dot(normal) - offset);
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lo <= eps && hi >= -eps
        })
        .count()
}

/// Measurements of one hollowing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HollowMetrics {
    pub n: usize,
    pub r: f64,
    pub hollow_tets: usize,
    pub hollow_points: usize,
    pub num_chunks: usize,
    pub max_chunk_vertices: usize,
    pub max_chunk_contacts: usize,
    /// (θ, hollowing tets crossed, chunk tets crossed) per probe plane through the box center.
    pub plane_probes: Vec<(f64, usize, usize)>,
    /// Extreme eigenvalues of the pencil (Sc[A_chunk]_U, A_H), when computed.
    pub pencil: Option<oracle::PencilSpectrum>,
}

impl HollowMetrics {
    pub fn kappa(&self) -> Option<f64> {
        self.pencil.map(|p| p.kappa())
    }
}

/// Dense Schur complement of the chunk stiffness onto U, and the hollowing stiffness on U.
pub fn hollowing_pencil(mesh: &TrussMesh, chunk: &[usize], h: &Hollowing) -> Result<(DenseSym, DenseSym)> {
    let chunk_vertices = mesh.vertices_of(chunk);
    let a_chunk = oracle::dense_stiffness_on(mesh, &chunk_vertices, &mesh.edges_of(chunk));
    let pos: HashMap<usize, usize> = chunk_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let t: Vec<usize> = h
        .boundary_vertices
        .iter()
        .flat_map(|v| {
            let k = pos[v];
            [3 * k, 3 * k + 1, 3 * k + 2]
        })
        .collect();
    let sc = oracle::dense_schur(&a_chunk, &t)?;
    let a_h = oracle::dense_stiffness_on(mesh, &h.boundary_vertices, &mesh.edges_of(&h.tets));
    Ok((sc, a_h))
}

/// Sizes, plane probes and (when `with_oracle`) the pencil spectrum of a hollowing.
pub fn verify_hollowing(
    mesh: &TrussMesh,
    chunk: &[usize],
    h: &Hollowing,
    probe_angles: &[f64],
    with_oracle: bool,
) -> Result<HollowMetrics> {
    let bbox = &h.division.bbox;
    let mut plane_probes = Vec::with_capacity(probe_angles.len());
    for &theta in probe_angles {
        let normal = (bbox.axes[0] * theta.cos() + bbox.axes[1] * theta.sin()).normalized();
        let offset = bbox.center.dot(normal);
        plane_probes.push((
            theta,
            count_plane_crossings(mesh, &h.tets, normal, offset, 1e-9),
            count_plane_crossings(mesh, chunk, normal, offset, 1e-9),
        ));
    }
    let pencil = if with_oracle {
        let (sc, a_h) = hollowing_pencil(mesh, chunk, h)?;
        let pts: Vec<Point3> = h.boundary_vertices.iter().map(|&v| mesh.points()[v]).collect();
        let null = rigid_body_basis(&pts, 0).orthonormal;
        Some(oracle::generalized_condition(&sc, &a_h, Some(&null))?)
    } else {
        None
    };
    Ok(HollowMetrics {
        n: mesh.vertices_of(chunk).len(),
        r: h.division.r,
        hollow_tets: h.tets.len(),
        hollow_points: h.boundary_vertices.len(),
        num_chunks: h.interior_chunks.len(),
        max_chunk_vertices: h.interior_chunks.iter().map(|c| c.vertices.len()).max().unwrap_or(0),
        max_chunk_contacts: h.interior_chunks.iter().map(|c| c.contacts.len()).max().unwrap_or(0),
        plane_probes,
        pencil,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{bounding_box, generate_grid_truss, tets_stiffly_connected};

    fn grid_chunk(n: usize) -> (TrussMesh, Vec<usize>, OrientedBox) {
        let m = generate_grid_truss(n, n, n, 1.0);
        let chunk: Vec<usize> = (0..m.n_tets()).collect();
        let b = bounding_box(m.points()).unwrap();
        (m, chunk, b)
    }

    fn check_partition(m: &TrussMesh, chunk: &[usize], h: &Hollowing) {
        let mut seen = vec![0u8; m.n_tets()];
        for &t in &h.tets {
            seen[t] += 1;
        }
        let mut in_u = vec![false; m.n_vertices()];
        for &v in &h.boundary_vertices {
            in_u[v] = true;
        }
        let mut owner = vec![usize::MAX; m.n_vertices()];
        for (c, ic) in h.interior_chunks.iter().enumerate() {
            for &t in &ic.tets {
                seen[t] += 1;
                assert!(m.tets()[t].0.iter().all(|&v| in_u[v] || owner[v] == usize::MAX || owner[v] == c));
            }
            for &v in &ic.vertices {
                assert!(!in_u[v]);
                assert_eq!(owner[v], usize::MAX, "vertex {v} in two chunks");
                owner[v] = c;
            }
            for &v in &ic.contacts {
                assert!(in_u[v]);
            }
        }
        for &t in chunk {
            assert_eq!(seen[t], 1, "tet {t}");
        }
        let tets: Vec<Tetrahedron> = h.tets.iter().map(|&t| m.tets()[t]).collect();
        assert!(tets_stiffly_connected(&tets));
    }

    #[test]
    fn division_examples() {
        let (_, _, b) = grid_chunk(8);
        let d = r_division(&b, 64.0).unwrap();
        assert_eq!(d.cells, [2, 2, 2]);
        assert_eq!(d.n_cells(), 8);
        assert!(d.spacing.iter().all(|&s| (s - 4.0).abs() < 1e-12));
        assert_eq!(d.cuts(0).len(), 1);
        let d = r_division(&b, 8.0).unwrap();
        assert_eq!(d.cells, [4, 4, 4]);
        assert_eq!(d.n_cells(), 64);
        let beam = generate_grid_truss(4, 1, 1, 1.0);
        let bb = bounding_box(beam.points()).unwrap();
        assert!(matches!(r_division(&bb, 8.0), Err(Error::RDivision(_))));
        assert!(matches!(r_division(&b, 7.0), Err(Error::RDivision(_))));
    }

    #[test]
    fn spacing_within_factor_two() {
        let (_, _, b) = grid_chunk(7);
        for r in [8.0, 20.0, 27.0, 64.0, 100.0, 343.0] {
            let d = r_division(&b, r).unwrap();
            for s in d.spacing {
                assert!(s >= 0.5 * r.cbrt() && s <= 2.0 * r.cbrt(), "r={r} s={s}");
            }
        }
    }

    #[test]
    fn shallow_chunk_is_all_hollowing() {
        let (m, chunk, b) = grid_chunk(2);
        let h = hollow(&m, &chunk, &b, 8.0, 1e-9).unwrap();
        assert_eq!(h.tets, chunk);
        assert!(h.interior_chunks.is_empty());
        assert_eq!(h.boundary_vertices.len(), m.n_vertices());
    }

    #[test]
    fn eight_cubed_partition() {
        let (m, chunk, b) = grid_chunk(8);
        for r in [27.0, 64.0] {
            let h = hollow(&m, &chunk, &b, r, 1e-9).unwrap();
            check_partition(&m, &chunk, &h);
            assert!(!h.interior_chunks.is_empty(), "r={r}");
            assert!(h.boundary_vertices.len() < m.n_vertices());
        }
        // Lattice planes two cubes apart leave no vertex outside the touching tets.
        let h = hollow(&m, &chunk, &b, 8.0, 1e-9).unwrap();
        check_partition(&m, &chunk, &h);
        assert!(h.interior_chunks.is_empty());
    }

    #[test]
    fn boundary_tet_counts() {
        let single = TrussMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![Tetrahedron([0, 1, 2, 3])],
            1.0,
        )
        .unwrap();
        assert_eq!(boundary_tets(&single, &[0]), vec![0]);

        // Face-count oracle: a tet is on the boundary iff one of its faces lies in the grid's outer box.
        for n in [2, 4] {
            let (m, chunk, _) = grid_chunk(n);
            let nf = n as f64;
            let on_outer = |t: &Tetrahedron| {
                t.faces().iter().any(|f| {
                    let p = f.map(|v| m.points()[v].to_array());
                    (0..3).any(|a| (0..3).all(|k| p[k][a] == 0.0) || (0..3).all(|k| p[k][a] == nf))
                })
            };
            let expect: Vec<usize> = chunk.iter().copied().filter(|&t| on_outer(&m.tets()[t])).collect();
            let got = boundary_tets(&m, &chunk);
            assert_eq!(got, expect);
            if n == 4 {
                assert!(got.len() < chunk.len());
            }
        }
    }

    #[test]
    fn stiffen_fixpoint_and_links() {
        let m = generate_grid_truss(3, 1, 1, 1.0);
        let chunk: Vec<usize> = (0..m.n_tets()).collect();
        assert_eq!(stiffen(&m, &chunk, &chunk), chunk);
        // Cubes 0 and 2 share no face; cube 1 must supply a link.
        let subset: Vec<usize> = (0..5).chain(10..15).collect();
        let out = stiffen(&m, &chunk, &subset);
        assert!(out.len() > subset.len());
        assert!(subset.iter().all(|t| out.contains(t)));
        let tets: Vec<Tetrahedron> = out.iter().map(|&t| m.tets()[t]).collect();
        assert!(tets_stiffly_connected(&tets));
    }

    #[test]
    fn plane_through_hollow_crosses_fewer_tets() {
        let (m, chunk, b) = grid_chunk(8);
        let h = hollow(&m, &chunk, &b, 27.0, 1e-9).unwrap();
        let metrics = verify_hollowing(&m, &chunk, &h, &[0.3, 0.7], false).unwrap();
        for (theta, in_h, in_mesh) in metrics.plane_probes {
            assert!(in_h < in_mesh, "theta={theta}: {in_h} vs {in_mesh}");
        }
    }

    #[test]
    fn hollowing_is_dominated_by_schur_complement() {
        let (m, chunk, b) = grid_chunk(8);
        let h = hollow(&m, &chunk, &b, 64.0, 1e-9).unwrap();
        assert!(!h.interior_chunks.is_empty());
        let (sc, a_h) = hollowing_pencil(&m, &chunk, &h).unwrap();
        let diff = DenseSym::from_row_major(
            sc.order(),
            sc.data().iter().zip(a_h.data()).map(|(a, b)| a - b).collect(),
        )
        .unwrap();
        let vals = oracle::dense_eigenvalues(&diff).unwrap();
        assert!(vals[0] >= -1e-8 * sc.norm_inf());
        let rank_h = oracle::numerical_rank(&a_h, 1e-8).unwrap();
        let rank_sc = oracle::numerical_rank(&sc, 1e-8).unwrap();
        assert_eq!(rank_h, 3 * h.boundary_vertices.len() - 6);
        assert_eq!(rank_sc, rank_h);
        let metrics = verify_hollowing(&m, &chunk, &h, &[], true).unwrap();
        let p = metrics.pencil.unwrap();
        assert!(p.lambda_min >= 1.0 - 1e-8);
        assert!(p.kappa() >= 1.0);
    }
}
