//! Elimination orderings: layered nested dissection, direction picking and
//! plane separators for chunk unions, recursive geometric nested dissection,
//! and symbolic elimination for fill and flop accounting.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hollow::Hollowing;
use crate::mesh::{principal_axes, OrientedBox, Point3, Tetrahedron, TrussMesh};

/// Subsets at or below this size are leaves of geometric nested dissection.
pub const LEAF_SIZE: usize = 48;

/// Multiply-adds per 3×3 block product.
const BLOCK_FLOPS: u64 = 27;

/// Undirected simple graph on `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Self loops are dropped and repeated edges merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::InvalidVertex { index: x, n });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Graph { adj })
    }

    /// Graph whose edges are the edges of the given tetrahedra.
    pub fn from_tets<'a>(n: usize, tets: impl IntoIterator<Item = &'a Tetrahedron>) -> Result<Self> {
        Self::from_edges(n, tets.into_iter().flat_map(|t| t.edges().map(|e| (e.0, e.1))))
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, a)| a.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Leaf,
    TopSeparator,
    Separator,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Leaf => "leaf",
            NodeKind::TopSeparator => "top-separator",
            NodeKind::Separator => "separator",
        })
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaf" => Ok(NodeKind::Leaf),
            "top-separator" => Ok(NodeKind::TopSeparator),
            "separator" => Ok(NodeKind::Separator),
            _ => Err(Error::Format(format!("unknown node kind `{s}`"))),
        }
    }
}

/// A node of the separator tree. Its vertices are contiguous in the ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeparatorNode {
    pub vertices: Vec<usize>,
    /// Depth below the root (roots are level 0).
    pub level: usize,
    pub kind: NodeKind,
    /// Parents are always numbered after their children.
    pub parent: Option<usize>,
}

/// Vertex elimination order with its separator tree.
///
/// Nodes are stored in elimination order and their vertex lists concatenate
/// to the order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EliminationOrdering {
    order: Vec<usize>,
    nodes: Vec<SeparatorNode>,
}

impl EliminationOrdering {
    /// Levels are recomputed from the parent links.
    pub fn new(mut nodes: Vec<SeparatorNode>) -> Result<Self> {
        let m = nodes.len();
        for (i, node) in nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                if p <= i || p >= m {
                    return Err(Error::Format(format!("node {i} has invalid parent {p}")));
                }
            }
        }
        for i in (0..m).rev() {
            nodes[i].level = nodes[i].parent.map_or(0, |p| nodes[p].level + 1);
        }
        let order: Vec<usize> = nodes.iter().flat_map(|n| n.vertices.iter().copied()).collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Format(format!("vertex {} appears twice in the ordering", w[0])));
        }
        Ok(EliminationOrdering { order, nodes })
    }

    /// A single-leaf ordering.
    pub fn flat(order: Vec<usize>) -> Result<Self> {
        Self::new(vec![SeparatorNode {
            vertices: order,
            level: 0,
            kind: NodeKind::Leaf,
            parent: None,
        }])
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn nodes(&self) -> &[SeparatorNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position of each vertex `< n` in the order; `usize::MAX` when absent.
    pub fn positions(&self, n: usize) -> Vec<usize> {
        let mut pos = vec![usize::MAX; n];
        for (k, &v) in self.order.iter().enumerate() {
            if v < n {
                pos[v] = k;
            }
        }
        pos
    }

    /// Whether the order is a bijection onto `vertices`.
    pub fn is_permutation_of(&self, vertices: &[usize]) -> bool {
        let mut a = self.order.clone();
        let mut b = vertices.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }

    /// Graph edges joining two different child subtrees of a tree node (or two
    /// different roots).
    pub fn separator_violations(&self, graph: &Graph) -> usize {
        let mut node_of = vec![usize::MAX; graph.n()];
        for (i, node) in self.nodes.iter().enumerate() {
            for &v in &node.vertices {
                if v < graph.n() {
                    node_of[v] = i;
                }
            }
        }
        let depth: Vec<usize> = self.nodes.iter().map(|n| n.level).collect();
        let mut violations = 0;
        for (u, v) in graph.edges() {
            let (mut a, mut b) = (node_of[u], node_of[v]);
            if a == usize::MAX || b == usize::MAX || a == b {
                continue;
            }
            let (a0, b0) = (a, b);
            while depth[a] > depth[b] {
                a = self.nodes[a].parent.unwrap();
            }
            while depth[b] > depth[a] {
                b = self.nodes[b].parent.unwrap();
            }
            while a != b {
                match (self.nodes[a].parent, self.nodes[b].parent) {
                    (Some(pa), Some(pb)) => {
                        a = pa;
                        b = pb;
                    }
                    _ => break,
                }
            }
            // Fine only when one endpoint's node is an ancestor of the other's.
            if a != b || (a != a0 && b != b0) {
                violations += 1;
            }
        }
        violations
    }

    /// One vertex per line; each node starts with `# level k <kind>` and, for
    /// non-roots, ` parent p`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for node in &self.nodes {
            write!(w, "# level {} {}", node.level, node.kind)?;
            if let Some(p) = node.parent {
                write!(w, " parent {p}")?;
            }
            writeln!(w)?;
            for v in &node.vertices {
                writeln!(w, "{v}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut nodes: Vec<SeparatorNode> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let bad = |msg: &str| Error::Format(format!("ordering line {}: {msg}", lineno + 1));
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let tok: Vec<&str> = rest.split_whitespace().collect();
                let (level, kind, parent) = match tok.as_slice() {
                    ["level", k, kind] => (k, kind, None),
                    ["level", k, kind, "parent", p] => (k, kind, Some(p)),
                    _ => return Err(bad("malformed node header")),
                };
                nodes.push(SeparatorNode {
                    vertices: Vec::new(),
                    level: level.parse().map_err(|_| bad("bad level"))?,
                    kind: kind.parse()?,
                    parent: parent
                        .map(|p| p.parse().map_err(|_| bad("bad parent")))
                        .transpose()?,
                });
            } else {
                let v = line.parse().map_err(|_| bad("expected a vertex index"))?;
                match nodes.last_mut() {
                    Some(node) => node.vertices.push(v),
                    None => nodes.push(SeparatorNode {
                        vertices: vec![v],
                        level: 0,
                        kind: NodeKind::Leaf,
                        parent: None,
                    }),
                }
            }
        }
        Self::new(nodes)
    }
}

/// Collects separator-tree nodes in elimination order.
#[derive(Default)]
struct TreeBuilder {
    nodes: Vec<SeparatorNode>,
}

impl TreeBuilder {
    fn push(&mut self, mut vertices: Vec<usize>, kind: NodeKind, children: &[Option<usize>]) -> usize {
        vertices.sort_unstable();
        let id = self.nodes.len();
        for c in children.iter().flatten() {
            self.nodes[*c].parent = Some(id);
        }
        self.nodes.push(SeparatorNode {
            vertices,
            level: 0,
            kind,
            parent: None,
        });
        id
    }

    fn finish(self) -> EliminationOrdering {
        EliminationOrdering::new(self.nodes).expect("builder produces a valid tree")
    }
}

/// Vertex layers V₁…V_l with edges only inside a layer or between consecutive layers.
#[derive(Debug, Clone)]
pub struct LayeredGraph {
    layers: Vec<Vec<usize>>,
    graph: Graph,
}

impl LayeredGraph {
    /// The layers must partition the graph's vertices.
    pub fn new(layers: Vec<Vec<usize>>, graph: Graph) -> Result<Self> {
        let n = graph.n();
        let mut layer_of = vec![usize::MAX; n];
        for (i, layer) in layers.iter().enumerate() {
            for &v in layer {
                if v >= n {
                    return Err(Error::InvalidVertex { index: v, n });
                }
                if layer_of[v] != usize::MAX {
                    return Err(Error::Format(format!("vertex {v} is in two layers")));
                }
                layer_of[v] = i;
            }
        }
        if let Some(v) = layer_of.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Format(format!("vertex {v} is in no layer")));
        }
        if let Some((u, v)) = graph.edges().find(|&(u, v)| layer_of[u].abs_diff(layer_of[v]) > 1) {
            return Err(Error::Format(format!(
                "edge ({u}, {v}) joins layers {} and {}",
                layer_of[u], layer_of[v]
            )));
        }
        Ok(LayeredGraph { layers, graph })
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn max_layer_size(&self) -> usize {
        self.layers.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Number the middle layer ⌊(s+t)/2⌋ of layers s..=t last, recursing on
/// both sides. A single layer is numbered by vertex index.
pub fn layered_graph_nd(lg: &LayeredGraph) -> EliminationOrdering {
    let mut b = TreeBuilder::default();
    layered_tree(&mut b, &lg.layers, 0, lg.layers.len(), &[], NodeKind::TopSeparator);
    b.finish()
}

/// Emit layers `s..t` (exclusive) in layered ND order. `gaps[j]`, when
/// present, is the root of the already emitted subtree lying between layers
/// j−1 and j; it hangs below the separator that closes its segment.
fn layered_tree(
    b: &mut TreeBuilder,
    layers: &[Vec<usize>],
    s: usize,
    t: usize,
    gaps: &[Option<usize>],
    kind: NodeKind,
) -> Option<usize> {
    if s == t {
        return gaps.get(s).copied().flatten();
    }
    let mid = (s + t - 1) / 2;
    let left = layered_tree(b, layers, s, mid, gaps, kind);
    let right = layered_tree(b, layers, mid + 1, t, gaps, kind);
    Some(b.push(layers[mid].clone(), kind, &[left, right]))
}

/// Whether `1/(10k) ≤ |dᵀdᵢ| ≤ 1 − 1/(10k)` for every dᵢ.
pub fn direction_admissible(d: Point3, dirs: &[Point3]) -> bool {
    let lo = 1.0 / (10.0 * dirs.len() as f64);
    dirs.iter().all(|di| {
        let c = d.dot(*di).abs();
        c >= lo && c <= 1.0 - lo
    })
}

/// Uniformly random unit vector.
pub fn random_unit<R: Rng>(rng: &mut R) -> Point3 {
    loop {
        let p = Point3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let len = p.norm();
        if len > 1e-12 {
            return p * (1.0 / len);
        }
    }
}

/// Attempts allowed for a mesh with `n` vertices: 64·⌈log₂(n+2)⌉.
pub fn direction_budget(n: usize) -> usize {
    64 * ((n + 2) as f64).log2().ceil() as usize
}

/// Sample unit vectors until one is admissible against all `dirs`.
pub fn pick_direction(dirs: &[Point3], n: usize, seed: u64) -> Result<Point3> {
    if dirs.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = direction_budget(n);
    for _ in 0..budget {
        let d = random_unit(&mut rng);
        if direction_admissible(d, dirs) {
            return Ok(d);
        }
    }
    Err(Error::DirectionExhausted(budget))
}

/// Tetrahedra split into l+1 consecutive groups by centroid projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneSplit {
    pub direction: Point3,
    /// Plane offsets along `direction`, nondecreasing.
    pub offsets: Vec<f64>,
    pub part_of_tet: Vec<usize>,
    pub part_sizes: Vec<usize>,
}

/// Cut `tets` into l+1 parts at count quantiles of `centroid·d`.
pub fn separator_planes(points: &[Point3], tets: &[Tetrahedron], d: Point3, l: usize) -> PlaneSplit {
    let m = tets.len();
    let proj: Vec<f64> = tets.iter().map(|t| t.centroid(points).dot(d)).collect();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let parts = l + 1;
    let bound = |j: usize| j * m / parts;
    let mut part_of_tet = vec![0; m];
    let mut part_sizes = vec![0; parts];
    for j in 0..parts {
        for &t in &idx[bound(j)..bound(j + 1)] {
            part_of_tet[t] = j;
        }
        part_sizes[j] = bound(j + 1) - bound(j);
    }
    let offsets = (1..parts)
        .map(|j| {
            let k = bound(j);
            match (k, m) {
                (_, 0) => 0.0,
                (0, _) => proj[idx[0]],
                (k, m) if k >= m => proj[idx[m - 1]],
                (k, _) => 0.5 * (proj[idx[k - 1]] + proj[idx[k]]),
            }
        })
        .collect();
    PlaneSplit {
        direction: d,
        offsets,
        part_of_tet,
        part_sizes,
    }
}

/// A vertex separator with the two parts it disconnects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Separation {
    pub separator: Vec<usize>,
    pub parts: [Vec<usize>; 2],
}

/// Reusable per-vertex scratch space for separator searches.
struct Scratch {
    side: Vec<u8>,
    stamp: Vec<u32>,
    epoch: u32,
}

const OUT: u8 = 0;
const LEFT: u8 = 1;
const RIGHT: u8 = 2;

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            side: vec![OUT; n],
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }
}

/// Plane separator of the subgraph induced on `vertices`.
///
/// Candidate planes are orthogonal to the subset's principal axes or the
/// coordinate axes, at the median and at nearby quantiles. The side of the
/// split (left = lower projections) is swept by one endpoint of each edge
/// crossing it; the smaller endpoint set is the separator. Among cuts whose
/// parts each hold at most 3/4 of the vertices, the smallest separator wins.
/// A vertex-count bisection along the first axis is always a candidate, so a
/// balanced cut exists.
pub fn geometric_separator(points: &[Point3], graph: &Graph, vertices: &[usize]) -> Separation {
    let mut scratch = Scratch::new(graph.n());
    separate(points, graph, vertices, &mut scratch)
}

fn candidate_axes(pts: &[Point3]) -> Vec<Point3> {
    let mut axes = principal_axes(pts).to_vec();
    for e in [Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), Point3::new(0.0, 0.0, 1.0)] {
        if axes.iter().all(|a| a.dot(e).abs() < 1.0 - 1e-9) {
            axes.push(e);
        }
    }
    axes
}

fn separate(points: &[Point3], graph: &Graph, vertices: &[usize], scratch: &mut Scratch) -> Separation {
    let m = vertices.len();
    let pts: Vec<Point3> = vertices.iter().map(|&v| points[v]).collect();
    let axes = candidate_axes(&pts);

    let mut best: Option<(usize, usize, usize, bool)> = None; // (size, axis, k, right side)
    let mut orders: Vec<Vec<usize>> = Vec::with_capacity(axes.len());
    for (ai, axis) in axes.iter().enumerate() {
        let proj: Vec<f64> = pts.iter().map(|p| p.dot(*axis)).collect();
        let mut ord: Vec<usize> = (0..m).collect();
        ord.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(vertices[a].cmp(&vertices[b])));

        let mut cands: Vec<usize> = Vec::new();
        if ai == 0 {
            cands.push(m / 2);
        }
        for q in [0.5, 0.4, 0.6, 0.3, 0.7] {
            let k = ((m as f64 * q) as usize).min(m - 1);
            let pk = proj[ord[k]];
            let start = ord.partition_point(|&i| proj[i] < pk);
            let end = ord.partition_point(|&i| proj[i] <= pk);
            cands.extend([start, end]);
        }
        let mut seen = Vec::new();
        for k in cands {
            if k == 0 || k >= m || seen.contains(&k) {
                continue;
            }
            seen.push(k);
            if let Some((size, right)) = evaluate_split(graph, vertices, &ord, k, scratch) {
                if best.is_none_or(|b| size < b.0) {
                    best = Some((size, ai, k, right));
                }
            }
        }
        orders.push(ord);
    }

    let (_, ai, k, right) = best.unwrap_or_else(|| {
        // Unreachable for m ≥ 2; a single vertex is its own separator.
        (m, 0, m, true)
    });
    let ord = &orders[ai];
    let epoch = scratch.next_epoch();
    for (pos, &i) in ord.iter().enumerate() {
        let v = vertices[i];
        scratch.stamp[v] = epoch;
        scratch.side[v] = if pos < k { LEFT } else { RIGHT };
    }
    let (sep_side, other) = if right { (RIGHT, LEFT) } else { (LEFT, RIGHT) };
    let mut separator = Vec::new();
    let mut near = Vec::new();
    let mut far = Vec::new();
    for &v in vertices {
        let s = scratch.side[v];
        if s == sep_side
            && graph
                .neighbors(v)
                .iter()
                .any(|&w| scratch.stamp[w] == epoch && scratch.side[w] == other)
        {
            separator.push(v);
        } else if s == LEFT {
            near.push(v);
        } else {
            far.push(v);
        }
    }
    separator.sort_unstable();
    near.sort_unstable();
    far.sort_unstable();
    Separation {
        separator,
        parts: [near, far],
    }
}

/// Size of the smaller one-sided separator for the split at position `k`,
/// and whether it lies on the right. `None` when unbalanced.
fn evaluate_split(graph: &Graph, vertices: &[usize], ord: &[usize], k: usize, scratch: &mut Scratch) -> Option<(usize, bool)> {
    let m = vertices.len();
    let epoch = scratch.next_epoch();
    for (pos, &i) in ord.iter().enumerate() {
        let v = vertices[i];
        scratch.stamp[v] = epoch;
        scratch.side[v] = if pos < k { LEFT } else { RIGHT };
    }
    let (mut sl, mut sr) = (0usize, 0usize);
    for &v in vertices {
        let s = scratch.side[v];
        let other = if s == LEFT { RIGHT } else { LEFT };
        if graph
            .neighbors(v)
            .iter()
            .any(|&w| scratch.stamp[w] == epoch && scratch.side[w] == other)
        {
            if s == LEFT {
                sl += 1;
            } else {
                sr += 1;
            }
        }
    }
    let balanced = |a: usize, b: usize| 4 * a <= 3 * m && 4 * b <= 3 * m;
    let left = k;
    let right = m - k;
    let with_right = balanced(left, right - sr).then_some((sr, true));
    let with_left = balanced(left - sl, right).then_some((sl, false));
    match (with_right, with_left) {
        (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Recursive geometric nested dissection of the subgraph induced on `vertices`.
pub fn nested_dissection(points: &[Point3], graph: &Graph, vertices: &[usize]) -> EliminationOrdering {
    let mut b = TreeBuilder::default();
    let mut scratch = Scratch::new(graph.n());
    nd_tree(&mut b, points, graph, vertices.to_vec(), &mut scratch);
    b.finish()
}

fn nd_tree(b: &mut TreeBuilder, points: &[Point3], graph: &Graph, vertices: Vec<usize>, scratch: &mut Scratch) -> Option<usize> {
    if vertices.is_empty() {
        return None;
    }
    if vertices.len() <= LEAF_SIZE {
        return Some(b.push(vertices, NodeKind::Leaf, &[]));
    }
    let Separation { separator, parts } = separate(points, graph, &vertices, scratch);
    let [near, far] = parts;
    let left = nd_tree(b, points, graph, near, scratch);
    let right = nd_tree(b, points, graph, far, scratch);
    Some(b.push(separator, NodeKind::Separator, &[left, right]))
}

/// Tetrahedra of the preconditioner: the hollowing of every hollowed chunk
/// and every tet of the others. `hollowings[i]` is `Some` for hollowed chunks.
pub fn preconditioner_tets(mesh: &TrussMesh, hollowings: &[Option<Hollowing>]) -> Result<Vec<usize>> {
    let chunks = mesh.chunk_list();
    if chunks.len() != hollowings.len() {
        return Err(Error::DimensionMismatch {
            expected: chunks.len(),
            got: hollowings.len(),
        });
    }
    let mut tets: Vec<usize> = chunks
        .iter()
        .zip(hollowings)
        .flat_map(|(c, h)| match h {
            Some(h) => h.tets.clone(),
            None => c.clone(),
        })
        .collect();
    tets.sort_unstable();
    tets.dedup();
    Ok(tets)
}

/// Ordering of the preconditioner's vertices for a chunk union.
#[derive(Debug, Clone, Serialize)]
pub struct UnionOrdering {
    pub ordering: EliminationOrdering,
    pub direction: Point3,
    pub offsets: Vec<f64>,
    /// Sizes of the top-level separators S₁…S_l.
    pub layer_sizes: Vec<usize>,
    /// Preconditioner tets and vertices, sorted.
    pub tets: Vec<usize>,
    pub vertices: Vec<usize>,
}

/// Order the preconditioner of a chunk union.
///
/// A direction d transversal to every box's long axis is sampled; l planes
/// orthogonal to d split the whole mesh into l+1 equal tet-count parts. The
/// vertices of preconditioner tets touching plane j form top separator S_j
/// (a vertex touching several planes goes to the first). Vertices of each part
/// are ordered by geometric nested dissection, then the top separators are
/// numbered last by layered nested dissection.
pub fn convex_truss_union_nd(
    mesh: &TrussMesh,
    boxes: &[OrientedBox],
    hollowings: &[Option<Hollowing>],
    l: usize,
    seed: u64,
) -> Result<UnionOrdering> {
    let k = mesh.num_chunks();
    if boxes.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: boxes.len(),
        });
    }
    let tets = preconditioner_tets(mesh, hollowings)?;
    let n = mesh.n_vertices();
    let points = mesh.points();
    let graph = Graph::from_tets(n, tets.iter().map(|&t| &mesh.tets()[t]))?;
    let vertices = mesh.vertices_of(&tets);

    let dirs: Vec<Point3> = boxes.iter().map(OrientedBox::longest_axis).collect();
    let d = pick_direction(&dirs, n, seed)?;
    let split = separator_planes(points, mesh.tets(), d, l);
    let offsets = split.offsets;
    let eps = 1e-9 * mesh.diameter().max(1.0);

    let mut layer_of = vec![usize::MAX; n];
    for &t in &tets {
        let tet = mesh.tets()[t];
        let (lo, hi) = tet.0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            let p = points[v].dot(d);
            (lo.min(p), hi.max(p))
        });
        let first = offsets.partition_point(|&o| o < lo - eps);
        if first < offsets.len() && offsets[first] <= hi + eps {
            for v in tet.0 {
                layer_of[v] = layer_of[v].min(first);
            }
        }
    }
    let mut layers = vec![Vec::new(); offsets.len()];
    let mut parts = vec![Vec::new(); offsets.len() + 1];
    for &v in &vertices {
        if layer_of[v] != usize::MAX {
            layers[layer_of[v]].push(v);
        } else {
            let p = points[v].dot(d);
            parts[offsets.partition_point(|&o| o < p)].push(v);
        }
    }

    let mut b = TreeBuilder::default();
    let mut scratch = Scratch::new(n);
    let roots: Vec<Option<usize>> = parts
        .into_iter()
        .map(|part| nd_tree(&mut b, points, &graph, part, &mut scratch))
        .collect();
    layered_tree(&mut b, &layers, 0, layers.len(), &roots, NodeKind::TopSeparator);
    let ordering = b.finish();
    debug_assert_eq!(ordering.len(), vertices.len());
    Ok(UnionOrdering {
        ordering,
        direction: d,
        offsets,
        layer_sizes: layers.iter().map(Vec::len).collect(),
        tets,
        vertices,
    })
}

/// Column structure of the Cholesky factor for an ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbolic {
    /// Vertex eliminated at each position.
    pub order: Vec<usize>,
    /// Positions of the below-diagonal nonzero blocks of each column, sorted.
    pub columns: Vec<Vec<usize>>,
    /// Elimination tree parent (a position).
    pub parent: Vec<Option<usize>>,
    /// Off-diagonal graph edges among ordered vertices.
    pub original_edges: usize,
    pub fill_edges: usize,
    pub flops: u64,
}

impl Symbolic {
    /// Blocks of the lower factor, diagonal included.
    pub fn factor_blocks(&self) -> usize {
        self.order.len() + self.columns.iter().map(Vec::len).sum::<usize>()
    }
}

/// Multiply-adds to eliminate a pivot with `c` later neighbors: the pivot
/// block, `c` column blocks and the `c(c+1)/2` updated lower blocks.
pub fn pivot_flops(c: usize) -> u64 {
    let c = c as u64;
    BLOCK_FLOPS * (1 + c + c * (c + 1) / 2)
}

/// Symbolic block elimination of the subgraph induced on the ordered vertices.
pub fn symbolic_elimination(graph: &Graph, order: &[usize]) -> Symbolic {
    symbolic_prefix(graph, order, order.len())
}

/// Symbolic elimination of the first `n_elim` ordered vertices only; the
/// rest stay uneliminated and have empty columns.
pub fn symbolic_prefix(graph: &Graph, order: &[usize], n_elim: usize) -> Symbolic {
    let m = order.len();
    let n_elim = n_elim.min(m);
    let mut pos = vec![usize::MAX; graph.n()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut parent = vec![None; m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut mark = vec![usize::MAX; m];
    let mut original_edges = 0;
    let mut flops = 0;
    for j in 0..n_elim {
        let mut col = Vec::new();
        mark[j] = j;
        for &w in graph.neighbors(order[j]) {
            let p = pos[w];
            if p != usize::MAX && p > j && mark[p] != j {
                mark[p] = j;
                col.push(p);
            }
        }
        original_edges += col.len();
        for &c in &children[j] {
            for &p in &columns[c] {
                if mark[p] != j {
                    mark[p] = j;
                    col.push(p);
                }
            }
        }
        col.sort_unstable();
        if let Some(&p) = col.first() {
            parent[j] = Some(p);
            children[p].push(j);
        }
        flops += pivot_flops(col.len());
        columns.push(col);
    }
    columns.resize(m, Vec::new());
    let total: usize = columns.iter().map(Vec::len).sum();
    Symbolic {
        order: order.to_vec(),
        columns,
        parent,
        original_edges,
        fill_edges: total - original_edges,
        flops,
    }
}

/// Fill and work of block elimination under an ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FillStats {
    /// New vertex pairs created by elimination.
    pub fill_edges: usize,
    /// Scalar fill entries (nine per block).
    pub fill_entries: usize,
    pub factor_blocks: usize,
    pub flops: u64,
}

pub fn fillin_flop_simulate(graph: &Graph, ordering: &EliminationOrdering) -> FillStats {
    let s = symbolic_elimination(graph, ordering.order());
    FillStats {
        fill_edges: s.fill_edges,
        fill_entries: 9 * s.fill_edges,
        factor_blocks: s.factor_blocks(),
        flops: s.flops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{bounding_box, generate_grid_truss, generate_union, place_along, GlueAxis};
    use crate::hollow::hollow;
    use proptest::prelude::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    /// Brute-force fill: eliminate vertex by vertex, joining remaining neighbors.
    fn brute_fill(graph: &Graph, order: &[usize]) -> usize {
        let n = graph.n();
        let mut adj: Vec<std::collections::BTreeSet<usize>> =
            (0..n).map(|v| graph.neighbors(v).iter().copied().collect()).collect();
        let inset: std::collections::HashSet<usize> = order.iter().copied().collect();
        for a in &mut adj {
            a.retain(|w| inset.contains(w));
        }
        let mut done = vec![false; n];
        let mut fill = 0;
        for &v in order {
            let nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !done[w]).collect();
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if adj[a].insert(b) {
                        adj[b].insert(a);
                        fill += 1;
                    }
                }
            }
            done[v] = true;
        }
        fill
    }

    fn layered(s: usize, l: usize, dense: bool) -> LayeredGraph {
        let mut edges = Vec::new();
        let id = |layer: usize, i: usize| layer * s + i;
        for layer in 0..l {
            for i in 0..s {
                if i + 1 < s {
                    edges.push((id(layer, i), id(layer, i + 1)));
                }
                if layer + 1 < l {
                    edges.push((id(layer, i), id(layer + 1, i)));
                    if dense {
                        for j in 0..s {
                            edges.push((id(layer, i), id(layer + 1, j)));
                        }
                    }
                }
            }
        }
        let g = Graph::from_edges(s * l, edges).unwrap();
        let layers = (0..l).map(|layer| (0..s).map(|i| id(layer, i)).collect()).collect();
        LayeredGraph::new(layers, g).unwrap()
    }

    #[test]
    fn symbolic_simple_cases() {
        let g = path(6);
        let s = symbolic_elimination(&g, &[0, 1, 2, 3, 4, 5]);
        assert_eq!(s.fill_edges, 0);
        assert_eq!(s.flops, 5 * pivot_flops(1) + pivot_flops(0));

        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        for order in [[0, 1, 2, 3], [3, 1, 0, 2]] {
            assert_eq!(symbolic_elimination(&k4, &order).fill_edges, 0);
        }

        let star = Graph::from_edges(6, (1..6).map(|i| (0, i))).unwrap();
        let s = symbolic_elimination(&star, &[0, 1, 2, 3, 4, 5]);
        assert_eq!(s.fill_edges, 10);
        assert_eq!(symbolic_elimination(&star, &[1, 2, 3, 4, 5, 0]).fill_edges, 0);
    }

    #[test]
    fn layered_base_and_one_recursion() {
        let lg = layered(3, 1, false);
        let o = layered_graph_nd(&lg);
        assert_eq!(o.order(), &[0, 1, 2]);

        let lg = layered(2, 3, false);
        let o = layered_graph_nd(&lg);
        assert_eq!(&o.order()[4..], &[2, 3]);
        assert!(o.is_permutation_of(&(0..6).collect::<Vec<_>>()));
        assert_eq!(o.separator_violations(lg.graph()), 0);
    }

    #[test]
    fn layered_rejects_long_edges() {
        let g = Graph::from_edges(3, [(0, 2)]).unwrap();
        assert!(LayeredGraph::new(vec![vec![0], vec![1], vec![2]], g).is_err());
    }

    #[test]
    fn layered_fill_within_bound() {
        for s in [5, 10, 20] {
            for l in [4, 8, 16] {
                for dense in [false, true] {
                    let lg = layered(s, l, dense);
                    let o = layered_graph_nd(&lg);
                    let f = fillin_flop_simulate(lg.graph(), &o);
                    assert!(f.fill_edges <= 4 * s * s * l, "s={s} l={l}: {}", f.fill_edges);
                    assert_eq!(f.fill_edges, brute_fill(lg.graph(), o.order()));
                }
            }
        }
    }

    #[test]
    fn direction_examples() {
        let e = [Point3::new(1.0, 0.0, 0.0)];
        for seed in 0..200 {
            let d = pick_direction(&e, 1000, seed).unwrap();
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!((0.1..=0.9).contains(&d.x.abs()));
        }
        let two = [Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let d = pick_direction(&two, 1000, 7).unwrap();
        assert!(direction_admissible(d, &two));
        assert!(pick_direction(&[], 10, 0).is_err());
    }

    #[test]
    fn plane_parts_balanced() {
        let m = generate_grid_truss(8, 8, 8, 1.0);
        let d = Point3::new(1.0, 0.05, 0.02).normalized();
        let split = separator_planes(m.points(), m.tets(), d, 3);
        assert_eq!(split.part_sizes.iter().sum::<usize>(), m.n_tets());
        let bound = (1.1 * m.n_tets() as f64 / 4.0).ceil() as usize;
        assert!(split.part_sizes.iter().all(|&s| s <= bound));
        assert!(split.offsets.windows(2).all(|w| w[0] <= w[1]));
        let one = separator_planes(m.points(), m.tets(), d, 1);
        assert_eq!(one.part_sizes, vec![m.n_tets() / 2, m.n_tets() - m.n_tets() / 2]);
    }

    #[test]
    fn two_cube_separator_is_shared_face() {
        let m = generate_grid_truss(2, 1, 1, 1.0);
        let g = Graph::from_tets(m.n_vertices(), m.tets()).unwrap();
        let all: Vec<usize> = (0..m.n_vertices()).collect();
        let sep = geometric_separator(m.points(), &g, &all);
        let face: Vec<usize> = all.iter().copied().filter(|&v| m.points()[v].x == 1.0).collect();
        assert_eq!(sep.separator, face);
        assert_eq!(sep.parts[0].len(), 4);
        assert_eq!(sep.parts[1].len(), 4);
    }

    #[test]
    fn grid_separators_scale_like_surface() {
        let mut ratios = Vec::new();
        for n in [4, 6, 8] {
            let m = generate_grid_truss(n, n, n, 1.0);
            let g = Graph::from_tets(m.n_vertices(), m.tets()).unwrap();
            let all: Vec<usize> = (0..m.n_vertices()).collect();
            let sep = geometric_separator(m.points(), &g, &all);
            for &u in &sep.parts[0] {
                for &w in &sep.parts[1] {
                    assert!(!g.has_edge(u, w));
                }
            }
            for p in &sep.parts {
                assert!(4 * p.len() <= 3 * all.len());
            }
            ratios.push(sep.separator.len() as f64 / (all.len() as f64).powf(2.0 / 3.0));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo <= 3.0, "{ratios:?}");
    }

    #[test]
    fn nested_dissection_is_valid() {
        let m = generate_grid_truss(6, 5, 4, 1.0);
        let g = Graph::from_tets(m.n_vertices(), m.tets()).unwrap();
        let all: Vec<usize> = (0..m.n_vertices()).collect();
        let o = nested_dissection(m.points(), &g, &all);
        assert!(o.is_permutation_of(&all));
        assert_eq!(o.separator_violations(&g), 0);
        let nd = fillin_flop_simulate(&g, &o);
        let natural = fillin_flop_simulate(&g, &EliminationOrdering::flat(all.clone()).unwrap());
        assert!(nd.flops < natural.flops);
        assert_eq!(nd.fill_edges, brute_fill(&g, o.order()));
    }

    #[test]
    fn violations_detected() {
        let g = path(3);
        let nodes = vec![
            SeparatorNode { vertices: vec![0], level: 0, kind: NodeKind::Leaf, parent: Some(2) },
            SeparatorNode { vertices: vec![1], level: 0, kind: NodeKind::Leaf, parent: Some(2) },
            SeparatorNode { vertices: vec![2], level: 0, kind: NodeKind::Separator, parent: None },
        ];
        let o = EliminationOrdering::new(nodes).unwrap();
        assert_eq!(o.nodes()[0].level, 1);
        assert_eq!(o.separator_violations(&g), 1);
    }

    #[test]
    fn text_round_trip() {
        let lg = layered(3, 5, true);
        let o = layered_graph_nd(&lg);
        let mut buf = Vec::new();
        o.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# level "));
        assert!(text.contains("top-separator"));
        let back = EliminationOrdering::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, o);
        assert!(EliminationOrdering::read_text("1\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn single_chunk_without_planes_is_plain_nd() {
        let m = generate_grid_truss(6, 6, 6, 1.0);
        let b = bounding_box(m.points()).unwrap();
        let u = convex_truss_union_nd(&m, &[b], &[None], 0, 3).unwrap();
        let g = Graph::from_tets(m.n_vertices(), m.tets()).unwrap();
        let all: Vec<usize> = (0..m.n_vertices()).collect();
        let plain = nested_dissection(m.points(), &g, &all);
        assert_eq!(fillin_flop_simulate(&g, &u.ordering), fillin_flop_simulate(&g, &plain));
        assert!(u.layer_sizes.is_empty());
    }

    #[test]
    fn single_chunk_one_plane() {
        let m = generate_grid_truss(6, 6, 6, 1.0);
        let b = bounding_box(m.points()).unwrap();
        let u = convex_truss_union_nd(&m, &[b], &[None], 1, 3).unwrap();
        let g = Graph::from_tets(m.n_vertices(), m.tets()).unwrap();
        let nodes = u.ordering.nodes();
        let last = nodes.last().unwrap();
        assert_eq!(last.kind, NodeKind::TopSeparator);
        assert_eq!(last.parent, None);
        assert_eq!(last.vertices.len(), u.layer_sizes[0]);
        assert_eq!(u.ordering.separator_violations(&g), 0);
        assert!(u.ordering.is_permutation_of(&u.vertices));
    }

    #[test]
    fn two_chunk_union_with_hollowing() {
        let shapes = place_along(&[[6, 6, 6], [6, 6, 6]], GlueAxis::X);
        let m = generate_union(&shapes, 1.0).unwrap();
        let chunks = m.chunk_list();
        let boxes: Vec<OrientedBox> = chunks
            .iter()
            .map(|c| {
                let pts: Vec<Point3> = m.vertices_of(c).iter().map(|&v| m.points()[v]).collect();
                bounding_box(&pts).unwrap()
            })
            .collect();
        let hollowings: Vec<Option<Hollowing>> =
            vec![Some(hollow(&m, &chunks[0], &boxes[0], 27.0, 1e-9).unwrap()), None];
        for l in [1, 2, 3] {
            let u = convex_truss_union_nd(&m, &boxes, &hollowings, l, 11).unwrap();
            let g = Graph::from_tets(m.n_vertices(), u.tets.iter().map(|&t| &m.tets()[t])).unwrap();
            assert!(u.ordering.is_permutation_of(&u.vertices));
            assert_eq!(u.ordering.separator_violations(&g), 0);
            assert_eq!(u.layer_sizes.len(), l);
            let f = fillin_flop_simulate(&g, &u.ordering);
            assert_eq!(f.fill_edges, brute_fill(&g, u.ordering.order()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn symbolic_matches_brute_force(
            n in 2usize..30,
            raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80),
            seed in any::<u64>(),
        ) {
            let g = Graph::from_edges(n, raw.into_iter().map(|(a, b)| (a % n, b % n))).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
            let s = symbolic_elimination(&g, &order);
            prop_assert_eq!(s.fill_edges, brute_fill(&g, &order));
            prop_assert_eq!(s.original_edges, g.n_edges());
        }

        #[test]
        fn picked_direction_always_admissible(
            k in 1usize..20,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dirs: Vec<Point3> = (0..k).map(|_| random_unit(&mut rng)).collect();
            let d = pick_direction(&dirs, 1000, seed ^ 1).unwrap();
            prop_assert!(direction_admissible(d, &dirs));
        }

        #[test]
        fn layered_nd_is_valid(s in 1usize..8, l in 1usize..12, dense in any::<bool>()) {
            let lg = layered(s, l, dense);
            let o = layered_graph_nd(&lg);
            prop_assert!(o.is_permutation_of(&(0..s * l).collect::<Vec<_>>()));
            prop_assert_eq!(o.separator_violations(lg.graph()), 0);
        }
    }
}
