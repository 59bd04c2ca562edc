#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trussnd::dissect::{Graph, LayeredGraph};
use trussnd::mesh::{generate_grid_truss, generate_union, place_along, GlueAxis};
use trussnd::{Block, BlockMatrix, TrussMesh};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Small stiffly connected trusses, none above 60 vertices.
pub fn small_trusses() -> Vec<TrussMesh> {
    let grids = [
        [1, 1, 1],
        [2, 1, 1],
        [3, 1, 1],
        [2, 2, 1],
        [4, 1, 1],
        [3, 2, 1],
        [2, 2, 2],
        [5, 1, 1],
        [4, 2, 1],
        [3, 3, 1],
        [3, 2, 2],
        [6, 1, 1],
        [4, 3, 1],
        [4, 2, 2],
        [3, 3, 2],
        [5, 2, 2],
    ];
    let mut out: Vec<TrussMesh> = grids.iter().map(|d| generate_grid_truss(d[0], d[1], d[2], 1.0)).collect();
    for (dims, axis) in [
        (vec![[1, 1, 1], [1, 1, 1]], GlueAxis::X),
        (vec![[2, 1, 1], [1, 1, 1]], GlueAxis::Y),
        (vec![[2, 2, 1], [2, 2, 1]], GlueAxis::Z),
        (vec![[1, 1, 1], [2, 1, 1], [1, 1, 1]], GlueAxis::X),
    ] {
        out.push(generate_union(&place_along(&dims, axis), 1.0).unwrap());
    }
    out
}

/// Layers of `s` vertices; each layer is a path, and consecutive layers are
/// joined by matching edges plus random extra edges with probability `p`.
pub fn layered_graph(s: usize, l: usize, p: f64, seed: u64) -> LayeredGraph {
    let mut r = rng(seed);
    let id = |layer: usize, i: usize| layer * s + i;
    let mut edges = Vec::new();
    for layer in 0..l {
        for i in 0..s {
            if i + 1 < s {
                edges.push((id(layer, i), id(layer, i + 1)));
            }
            for j in 0..s {
                if j > i + 1 && r.random_bool(p) {
                    edges.push((id(layer, i), id(layer, j)));
                }
                if layer + 1 < l && (i == j || r.random_bool(p)) {
                    edges.push((id(layer, i), id(layer + 1, j)));
                }
            }
        }
    }
    let g = Graph::from_edges(s * l, edges).unwrap();
    let layers = (0..l).map(|layer| (0..s).map(|i| id(layer, i)).collect()).collect();
    LayeredGraph::new(layers, g).unwrap()
}

/// Random PSD block matrix: a sum of rank-one terms on random vertex pairs,
/// plus `shift`·I on the vertices flagged in `shifted`.
pub fn random_psd_blocks(n: usize, density: f64, shifted: &[bool], shift: f64, seed: u64) -> BlockMatrix {
    let mut r = rng(seed);
    let mut entries: Vec<(usize, usize, Block)> = Vec::new();
    let rank_one = |u: usize, v: usize, c: [f64; 6], entries: &mut Vec<(usize, usize, Block)>| {
        for (p, cp) in [(u, &c[..3]), (v, &c[3..])] {
            for (q, cq) in [(u, &c[..3]), (v, &c[3..])] {
                let mut b = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        b[i][j] = cp[i] * cq[j];
                    }
                }
                entries.push((p, q, b));
            }
        }
    };
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(density) {
                for _ in 0..2 {
                    let c: [f64; 6] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
                    rank_one(u, v, c, &mut entries);
                }
            }
        }
        let mut d = [[0.0; 3]; 3];
        if shifted[u] {
            (0..3).for_each(|i| d[i][i] = shift);
        }
        entries.push((u, u, d));
    }
    BlockMatrix::from_entries(n, entries).unwrap()
}

/// Scalar indices of a vertex list.
pub fn dofs(vertices: &[usize]) -> Vec<usize> {
    vertices.iter().flat_map(|&v| [3 * v, 3 * v + 1, 3 * v + 2]).collect()
}
