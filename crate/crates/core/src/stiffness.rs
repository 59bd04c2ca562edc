//! Truss stiffness matrices, rigid-body modes and Matrix Market export.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Edge, Point3, TrussMesh};
use crate::sparse::{block_add, block_scale, Block, BlockMatrix};

/// The 3n×3n stiffness operator of a truss.
pub type StiffnessMatrix = BlockMatrix;

/// Unit bar direction blocks: (p_i - p_j)/|p_i - p_j| at vertex i, its negation at j.
pub fn edge_vector(mesh: &TrussMesh, e: Edge) -> Result<Vec<f64>> {
    edge_vector_oriented(mesh.points(), e.0, e.1)
}

/// Same as [`edge_vector`] with an explicit orientation (i, j).
pub fn edge_vector_oriented(points: &[Point3], i: usize, j: usize) -> Result<Vec<f64>> {
    let d = points[i] - points[j];
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::ZeroLengthEdge(i.min(j), i.max(j)));
    }
    let u = d * (1.0 / len);
    let mut b = vec![0.0; 3 * points.len()];
    b[3 * i..3 * i + 3].copy_from_slice(&u.to_array());
    b[3 * j..3 * j + 3].copy_from_slice(&(-u).to_array());
    Ok(b)
}

/// (γ/len) · u uᵀ for the unit direction u of the bar.
fn bar_block(pi: Point3, pj: Point3, gamma: f64) -> Option<Block> {
    let d = pi - pj;
    let len = d.norm();
    if len == 0.0 {
        return None;
    }
    let u = (d * (1.0 / len)).to_array();
    let k = gamma / len;
    Some(std::array::from_fn(|r| std::array::from_fn(|c| k * u[r] * u[c])))
}

/// Assemble Σ_e (γ(e)/len(e)) b bᵀ over all mesh edges.
pub fn assemble(mesh: &TrussMesh) -> Result<StiffnessMatrix> {
    assemble_edges(mesh, mesh.edges())
}

/// Assemble over a subset of the mesh edges; the result keeps order 3n.
///
/// Each diagonal block sums its incident bar terms ordered by the neighbor's
/// coordinates, so relabeling vertices permutes the matrix exactly.
pub fn assemble_edges(mesh: &TrussMesh, edges: &[Edge]) -> Result<StiffnessMatrix> {
    let n = mesh.n_vertices();
    let pts = mesh.points();
    let mut incident: Vec<Vec<(usize, Block)>> = vec![Vec::new(); n];
    for &e in edges {
        let k = bar_block(pts[e.0], pts[e.1], mesh.gamma(e)).ok_or(Error::ZeroLengthEdge(e.0, e.1))?;
        incident[e.0].push((e.1, k));
        incident[e.1].push((e.0, k));
    }
    let rows: Vec<Vec<(usize, usize, Block)>> = incident
        .into_par_iter()
        .enumerate()
        .map(|(i, mut nbrs)| {
            nbrs.sort_by(|a, b| pts[a.0].total_cmp(&pts[b.0]));
            let mut out = Vec::with_capacity(nbrs.len() + 1);
            if nbrs.is_empty() {
                return out;
            }
            let mut d = [[0.0; 3]; 3];
            for (j, k) in &nbrs {
                d = block_add(&d, k);
                out.push((i, *j, block_scale(k, -1.0)));
            }
            out.push((i, i, d));
            out
        })
        .collect();
    BlockMatrix::from_entries(n, rows.into_iter().flatten().collect())
}

/// Cross-product matrix: Q_v p = v × p.
pub fn rotation_operator(v: Point3) -> [[f64; 3]; 3] {
    [[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]]
}

/// Six rigid-body motions of a point set: three translations and three
/// infinitesimal rotations about the point with index `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyBasis {
    pub center: usize,
    /// p^x, p^y, p^z, then rotations in the xy, xz and yz planes.
    pub raw: Vec<Vec<f64>>,
    /// Orthonormal basis of the same span.
    pub orthonormal: Vec<Vec<f64>>,
}

pub fn rigid_body_basis(points: &[Point3], center: usize) -> RigidBodyBasis {
    let n = points.len();
    let pc = points[center];
    let mut raw = vec![vec![0.0; 3 * n]; 6];
    for (i, &p) in points.iter().enumerate() {
        let d = p - pc;
        raw[0][3 * i] = 1.0;
        raw[1][3 * i + 1] = 1.0;
        raw[2][3 * i + 2] = 1.0;
        raw[3][3 * i] = -d.y;
        raw[3][3 * i + 1] = d.x;
        raw[4][3 * i] = -d.z;
        raw[4][3 * i + 2] = d.x;
        raw[5][3 * i + 1] = -d.z;
        raw[5][3 * i + 2] = d.y;
    }
    let orthonormal = orthonormalize(&raw, 1e-10);
    RigidBodyBasis { center, raw, orthonormal }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram–Schmidt with one re-orthogonalization pass; vectors whose
/// remainder falls below `drop_tol` times their original norm are dropped.
pub fn orthonormalize(vectors: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = norm(v);
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nw = norm(&w);
        if nw > drop_tol * n0 {
            w.iter_mut().for_each(|a| *a /= nw);
            out.push(w);
        }
    }
    out
}

/// Remove the component of `x` in the span of an orthonormal basis.
pub fn project_out_null(x: &[f64], basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    project_out_in_place(&mut y, basis)?;
    Ok(y)
}

pub fn project_out_in_place(x: &mut [f64], basis: &[Vec<f64>]) -> Result<()> {
    for q in basis {
        if q.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: x.len() });
        }
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
    Ok(())
}

/// Write the lower triangle in Matrix Market coordinate symmetric format.
pub fn write_matrix_market<W: Write>(a: &BlockMatrix, mut w: W) -> Result<()> {
    let entries = a.lower_nonzeros();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.order(), a.order(), entries.len())?;
    for (r, c, v) in entries {
        writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

/// Read a coordinate symmetric Matrix Market file into (order, lower-triangle entries).
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<(usize, Vec<(usize, usize, f64)>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty Matrix Market file".into()))??;
    if !header.starts_with("%%MatrixMarket matrix coordinate real symmetric") {
        return Err(Error::Format(format!("unsupported header `{header}`")));
    }
    let mut size: Option<(usize, usize)> = None;
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let bad = || Error::Format(format!("malformed line `{t}`"));
        match size {
            None => {
                if f.len() != 3 {
                    return Err(bad());
                }
                let m: usize = f[0].parse().map_err(|_| bad())?;
                let nnz: usize = f[2].parse().map_err(|_| bad())?;
                size = Some((m, nnz));
            }
            Some(_) => {
                if f.len() != 3 {
                    return Err(bad());
                }
                let i: usize = f[0].parse().map_err(|_| bad())?;
                let j: usize = f[1].parse().map_err(|_| bad())?;
                let v: f64 = f[2].parse().map_err(|_| bad())?;
                if i == 0 || j == 0 {
                    return Err(bad());
                }
                out.push((i - 1, j - 1, v));
            }
        }
    }
    let (m, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
    if out.len() != nnz {
        return Err(Error::Format(format!("expected {nnz} entries, found {}", out.len())));
    }
    Ok((m, out))
}
