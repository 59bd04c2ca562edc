//! Deterministic grid trusses and unions of grid chunks.

use std::collections::{HashMap, HashSet};

use super::{Point3, Tetrahedron, TrussMesh};
use crate::error::{Error, Result};

/// Placement of one grid chunk: cube counts per axis and the position of its minimum corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkShape {
    pub dims: [usize; 3],
    pub origin: Point3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlueAxis {
    X,
    Y,
    Z,
}

impl GlueAxis {
    fn index(self) -> usize {
        match self {
            GlueAxis::X => 0,
            GlueAxis::Y => 1,
            GlueAxis::Z => 2,
        }
    }
}

impl std::str::FromStr for GlueAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(GlueAxis::X),
            "y" | "Y" => Ok(GlueAxis::Y),
            "z" | "Z" => Ok(GlueAxis::Z),
            other => Err(Error::Format(format!("unknown glue axis `{other}`"))),
        }
    }
}

/// Corner offsets of a unit cube, indexed by bit pattern dz<<2 | dy<<1 | dx.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Split one cube into five tets. Corners whose global coordinate sum is odd
/// form the central tet; each even corner gets a tet with its three neighbors.
/// Using a global parity keeps the face diagonals of adjacent cubes consistent.
fn cube_tets(corner_ids: [usize; 8], odd_base: bool) -> [Tetrahedron; 5] {
    let is_odd = |c: usize| {
        let s: usize = CORNERS[c].iter().sum();
        (s % 2 == 1) != odd_base
    };
    let odd: Vec<usize> = (0..8).filter(|&c| is_odd(c)).collect();
    let mut out = [Tetrahedron([0; 4]); 5];
    out[0] = Tetrahedron([corner_ids[odd[0]], corner_ids[odd[1]], corner_ids[odd[2]], corner_ids[odd[3]]]);
    let mut k = 1;
    for c in (0..8).filter(|&c| !is_odd(c)) {
        out[k] = Tetrahedron([corner_ids[c], corner_ids[c ^ 1], corner_ids[c ^ 2], corner_ids[c ^ 4]]);
        k += 1;
    }
    out
}

fn block(dims: [usize; 3], parity_offset: i64) -> (Vec<[usize; 3]>, Vec<Tetrahedron>) {
    let [nx, ny, nz] = dims;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut lattice = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                lattice.push([i, j, k]);
            }
        }
    }
    let mut tets = Vec::with_capacity(5 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let ids = CORNERS.map(|[dx, dy, dz]| id(i + dx, j + dy, k + dz));
                let odd_base = (i as i64 + j as i64 + k as i64 + parity_offset).rem_euclid(2) == 1;
                tets.extend(cube_tets(ids, odd_base));
            }
        }
    }
    (lattice, tets)
}

/// Box of `nx × ny × nz` unit cubes, five tets per cube, with uniform stiffness `gamma`.
/// Vertex (i, j, k) has index i + (nx+1)(j + (ny+1)k).
pub fn generate_grid_truss(nx: usize, ny: usize, nz: usize, gamma: f64) -> TrussMesh {
    assert!(nx >= 1 && ny >= 1 && nz >= 1, "grid dimensions must be positive");
    let (lattice, tets) = block([nx, ny, nz], 0);
    let points = lattice
        .iter()
        .map(|&[i, j, k]| Point3::new(i as f64, j as f64, k as f64))
        .collect();
    TrussMesh::new(points, tets, gamma).expect("grid construction is valid")
}

/// Consecutive placement of grid chunks along one axis, each touching the previous one.
pub fn place_along(dims: &[[usize; 3]], axis: GlueAxis) -> Vec<ChunkShape> {
    let a = axis.index();
    let mut offset = 0usize;
    dims.iter()
        .map(|&d| {
            let mut o = [0.0; 3];
            o[a] = offset as f64;
            offset += d[a];
            ChunkShape {
                dims: d,
                origin: Point3::from(o),
            }
        })
        .collect()
}

/// Glue grid chunks into one mesh. Vertices with bit-identical coordinates are merged;
/// distinct vertices closer than 1e-6 or overlapping cubes are rejected.
pub fn generate_union(shapes: &[ChunkShape], gamma: f64) -> Result<TrussMesh> {
    if shapes.is_empty() {
        return Err(Error::IncompatiblePlacement("no chunks given".into()));
    }
    let mut points: Vec<Point3> = Vec::new();
    let mut by_bits: HashMap<[u64; 3], usize> = HashMap::new();
    let mut tets = Vec::new();
    let mut chunks = Vec::with_capacity(shapes.len());
    let mut cubes: HashSet<[i64; 3]> = HashSet::new();

    for (c, shape) in shapes.iter().enumerate() {
        if shape.dims.contains(&0) {
            return Err(Error::IncompatiblePlacement(format!("chunk {c} has a zero dimension")));
        }
        if !shape.origin.is_finite() {
            return Err(Error::IncompatiblePlacement(format!("chunk {c} origin is not finite")));
        }
        let base = shape.origin.to_array().map(|v| v.round() as i64);
        for k in 0..shape.dims[2] as i64 {
            for j in 0..shape.dims[1] as i64 {
                for i in 0..shape.dims[0] as i64 {
                    if !cubes.insert([base[0] + i, base[1] + j, base[2] + k]) {
                        return Err(Error::IncompatiblePlacement(format!("chunk {c} overlaps an earlier chunk")));
                    }
                }
            }
        }
        let (lattice, local_tets) = block(shape.dims, base.iter().sum());
        let ids: Vec<usize> = lattice
            .iter()
            .map(|&[i, j, k]| {
                let p = shape.origin + Point3::new(i as f64, j as f64, k as f64);
                let key = p.to_array().map(|v| (v + 0.0).to_bits());
                *by_bits.entry(key).or_insert_with(|| {
                    points.push(p);
                    points.len() - 1
                })
            })
            .collect();
        let first = tets.len();
        tets.extend(local_tets.iter().map(|t| Tetrahedron(t.0.map(|v| ids[v]))));
        chunks.push((first..tets.len()).collect::<Vec<_>>());
    }

    check_near_duplicates(&points, 1e-6)?;
    TrussMesh::new(points, tets, gamma)?.with_chunks(chunks)
}

fn check_near_duplicates(points: &[Point3], tol: f64) -> Result<()> {
    let key = |p: Point3| p.to_array().map(|v| (v / tol).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    for (i, &p) in points.iter().enumerate() {
        let k = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in list.iter().filter(|&&j| j > i) {
                        if p.dist(points[j]) <= tol {
                            return Err(Error::IncompatiblePlacement(format!(
                                "vertices {i} and {j} nearly coincide"
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{edges_from_tets, is_stiffly_connected, validate_edge_simple, QualityLimits};

    #[test]
    fn single_cube_counts() {
        let m = generate_grid_truss(1, 1, 1, 1.0);
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.n_tets(), 5);
    }

    #[test]
    fn five_tet_cube_has_eighteen_edges() {
        // Brute force: count pairs that co-occur in some tet.
        let m = generate_grid_truss(1, 1, 1, 1.0);
        let mut count = 0;
        for a in 0..8 {
            for b in a + 1..8 {
                if m.tets().iter().any(|t| t.contains(a) && t.contains(b)) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 18);
        assert_eq!(edges_from_tets(m.tets(), 8).unwrap().len(), 18);
    }

    #[test]
    fn two_cubed_counts() {
        let m = generate_grid_truss(2, 2, 2, 1.0);
        assert_eq!(m.n_vertices(), 27);
        assert_eq!(m.n_tets(), 40);
    }

    #[test]
    fn grid_is_edge_simple_and_stiff() {
        for dims in [[1, 1, 1], [2, 2, 2], [3, 2, 1], [4, 1, 1]] {
            let m = generate_grid_truss(dims[0], dims[1], dims[2], 1.0);
            let r = validate_edge_simple(&m, &QualityLimits::default());
            assert!(r.is_edge_simple(), "{dims:?}: {r:?}");
            assert!(r.min_edge_length >= 1.0 - 1e-12);
            assert!(r.max_edge_length <= 2f64.sqrt() * 1.01);
            assert!(is_stiffly_connected(&m), "{dims:?}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_grid_truss(3, 2, 2, 1.0), generate_grid_truss(3, 2, 2, 1.0));
    }

    #[test]
    fn union_of_two() {
        let shapes = place_along(&[[2, 2, 2], [2, 2, 2]], GlueAxis::X);
        let m = generate_union(&shapes, 1.0).unwrap();
        assert_eq!(m.num_chunks(), 2);
        assert_eq!(m.n_vertices(), 5 * 3 * 3);
        assert!(validate_edge_simple(&m, &QualityLimits::default()).is_edge_simple());
        assert!(is_stiffly_connected(&m));
        // Same geometry as one 4x2x2 grid.
        assert_eq!(m.n_tets(), generate_grid_truss(4, 2, 2, 1.0).n_tets());
        assert_eq!(m.edges().len(), generate_grid_truss(4, 2, 2, 1.0).edges().len());
    }

    #[test]
    fn l_shape_of_three() {
        let shapes = [
            ChunkShape { dims: [2, 2, 2], origin: Point3::new(0.0, 0.0, 0.0) },
            ChunkShape { dims: [2, 2, 2], origin: Point3::new(2.0, 0.0, 0.0) },
            ChunkShape { dims: [2, 2, 2], origin: Point3::new(0.0, 2.0, 0.0) },
        ];
        let m = generate_union(&shapes, 1.0).unwrap();
        assert_eq!(m.num_chunks(), 3);
        assert!(is_stiffly_connected(&m));
        assert!(validate_edge_simple(&m, &QualityLimits::default()).is_edge_simple());
    }

    #[test]
    fn single_chunk_matches_grid() {
        let shapes = [ChunkShape { dims: [3, 2, 2], origin: Point3::default() }];
        assert_eq!(generate_union(&shapes, 1.0).unwrap(), generate_grid_truss(3, 2, 2, 1.0));
    }

    #[test]
    fn odd_offset_keeps_faces_conforming() {
        let shapes = place_along(&[[3, 2, 2], [1, 2, 2]], GlueAxis::X);
        let m = generate_union(&shapes, 1.0).unwrap();
        assert!(validate_edge_simple(&m, &QualityLimits::default()).is_edge_simple());
        assert!(is_stiffly_connected(&m));
    }

    #[test]
    fn incompatible_placements() {
        let near = [
            ChunkShape { dims: [1, 1, 1], origin: Point3::default() },
            ChunkShape { dims: [1, 1, 1], origin: Point3::new(1.0 + 1e-8, 0.0, 0.0) },
        ];
        assert!(matches!(generate_union(&near, 1.0), Err(Error::IncompatiblePlacement(_))));
        let overlap = [
            ChunkShape { dims: [2, 1, 1], origin: Point3::default() },
            ChunkShape { dims: [1, 1, 1], origin: Point3::new(1.0, 0.0, 0.0) },
        ];
        assert!(matches!(generate_union(&overlap, 1.0), Err(Error::IncompatiblePlacement(_))));
    }
}
