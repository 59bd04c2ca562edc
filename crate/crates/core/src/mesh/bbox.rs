//! Oriented bounding boxes from principal axes.

use serde::Serialize;

use super::Point3;
use crate::error::{Error, Result};

/// Box with orthonormal axes and half-lengths sorted descending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrientedBox {
    pub center: Point3,
    pub axes: [Point3; 3],
    pub half_lengths: [f64; 3],
}

impl OrientedBox {
    /// Coordinates of `p` in the box frame, relative to the center.
    pub fn local(&self, p: Point3) -> [f64; 3] {
        let d = p - self.center;
        [d.dot(self.axes[0]), d.dot(self.axes[1]), d.dot(self.axes[2])]
    }

    pub fn contains(&self, p: Point3, tol: f64) -> bool {
        self.local(p)
            .iter()
            .zip(self.half_lengths)
            .all(|(c, h)| c.abs() <= h + tol)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_lengths.iter().product::<f64>()
    }

    /// Full side length along axis `i`.
    pub fn side(&self, i: usize) -> f64 {
        2.0 * self.half_lengths[i]
    }

    /// sqrt(a² + b² + c²) / c for half-lengths a ≥ b ≥ c.
    pub fn aspect_ratio(&self) -> f64 {
        let [a, b, c] = self.half_lengths;
        (a * a + b * b + c * c).sqrt() / c
    }

    pub fn longest_axis(&self) -> Point3 {
        self.axes[0]
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues descending and the matching eigenvectors.
pub(crate) fn sym3_eigen(m: [[f64; 3]; 3]) -> ([f64; 3], [Point3; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = (0..3).map(|i| a[i][i].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= 1e-12 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() <= 1e-12 * scale {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = order.map(|i| a[i][i]);
    let vecs = order.map(|i| Point3::new(v[0][i], v[1][i], v[2][i]));
    (vals, vecs)
}

/// Principal directions of a point cloud, most spread first.
pub fn principal_axes(points: &[Point3]) -> [Point3; 3] {
    let n = points.len().max(1) as f64;
    let mean = points.iter().fold(Point3::default(), |s, &p| s + p) * (1.0 / n);
    let mut cov = [[0.0; 3]; 3];
    for &p in points {
        let d = (p - mean).to_array();
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let (_, mut axes) = sym3_eigen(cov);
    for a in &mut axes {
        *a = a.normalized();
    }
    axes[2] = axes[0].cross(axes[1]).normalized();
    axes
}

fn extents(points: &[Point3], axes: &[Point3; 3]) -> [(f64, f64); 3] {
    let mut ext = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for &p in points {
        for (k, a) in axes.iter().enumerate() {
            let t = p.dot(*a);
            ext[k].0 = ext[k].0.min(t);
            ext[k].1 = ext[k].1.max(t);
        }
    }
    ext
}

fn box_volume(points: &[Point3], axes: &[Point3; 3]) -> f64 {
    extents(points, axes).iter().map(|(lo, hi)| hi - lo).product()
}

fn rotate_pair(axes: &[Point3; 3], i: usize, j: usize, theta: f64) -> [Point3; 3] {
    let (s, c) = theta.sin_cos();
    let mut out = *axes;
    out[i] = axes[i] * c + axes[j] * s;
    out[j] = axes[j] * c - axes[i] * s;
    out
}

/// Improve the principal frame by sweeping rotations within each axis pair.
/// Principal axes are arbitrary when the covariance has repeated eigenvalues
/// (cubes, square beams); the sweep recovers the tight frame in that case.
fn refine_axes(points: &[Point3], mut axes: [Point3; 3]) -> [Point3; 3] {
    let deg = std::f64::consts::PI / 180.0;
    for _ in 0..2 {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut best_vol = box_volume(points, &axes);
            let mut best_theta = 0.0;
            for k in -45..=45 {
                let theta = k as f64 * deg;
                let vol = box_volume(points, &rotate_pair(&axes, i, j, theta));
                if vol < best_vol * (1.0 - 1e-9) {
                    best_vol = vol;
                    best_theta = theta;
                }
            }
            let coarse = best_theta;
            for k in -20..=20 {
                let theta = coarse + k as f64 * 0.05 * deg;
                let vol = box_volume(points, &rotate_pair(&axes, i, j, theta));
                if vol < best_vol * (1.0 - 1e-9) {
                    best_vol = vol;
                    best_theta = theta;
                }
            }
            if best_theta != 0.0 {
                axes = rotate_pair(&axes, i, j, best_theta);
            }
        }
    }
    axes
}

/// Oriented box around a point set: principal axes, refined by a rotation sweep.
pub fn bounding_box(points: &[Point3]) -> Result<OrientedBox> {
    if points.len() < 4 {
        return Err(Error::DegenerateGeometry(format!(
            "bounding box needs at least 4 points, got {}",
            points.len()
        )));
    }
    let axes = refine_axes(points, principal_axes(points));
    let ext = extents(points, &axes);
    let mut idx = [0usize, 1, 2];
    let len = |k: usize| ext[k].1 - ext[k].0;
    idx.sort_by(|&a, &b| len(b).total_cmp(&len(a)));
    let mut center = Point3::default();
    for k in 0..3 {
        center = center + axes[k] * (0.5 * (ext[k].0 + ext[k].1));
    }
    let half_lengths = idx.map(|k| 0.5 * len(k));
    if !(half_lengths[2] > 1e-12 * half_lengths[0]) {
        return Err(Error::DegenerateGeometry("point set is flat".into()));
    }
    let a0 = axes[idx[0]];
    let a1 = axes[idx[1]];
    let a2 = a0.cross(a1).normalized();
    Ok(OrientedBox {
        center,
        axes: [a0, a1, a2],
        half_lengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_grid_truss;

    fn rotate(p: Point3) -> Point3 {
        // Rotation by 0.3 rad about (1,2,3)/|..| via Rodrigues.
        let k = Point3::new(1.0, 2.0, 3.0).normalized();
        let (s, c) = 0.3f64.sin_cos();
        p * c + k.cross(p) * s + k * (k.dot(p) * (1.0 - c))
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let (vals, vecs) = sym3_eigen(m);
        for k in 0..3 {
            let v = vecs[k].to_array();
            for i in 0..3 {
                let mv: f64 = (0..3).map(|j| m[i][j] * v[j]).sum();
                assert!((mv - vals[k] * v[i]).abs() < 1e-10);
            }
        }
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }

    #[test]
    fn beam_half_lengths() {
        let m = generate_grid_truss(4, 1, 1, 1.0);
        let b = bounding_box(m.points()).unwrap();
        let h = b.half_lengths;
        assert!((h[0] / h[2] - 4.0).abs() < 0.4);
        assert!((h[1] / h[2] - 1.0).abs() < 0.1);
        for &p in m.points() {
            assert!(b.contains(p, 1e-9));
        }
    }

    #[test]
    fn rotated_copy_has_same_half_lengths() {
        let m = generate_grid_truss(4, 1, 1, 1.0);
        let b0 = bounding_box(m.points()).unwrap();
        let rotated: Vec<Point3> = m.points().iter().map(|&p| rotate(p)).collect();
        let b1 = bounding_box(&rotated).unwrap();
        for k in 0..3 {
            assert!((b0.half_lengths[k] - b1.half_lengths[k]).abs() <= 0.1 * b0.half_lengths[k]);
        }
    }

    #[test]
    fn rotated_cube_box_is_tight() {
        let m = generate_grid_truss(3, 3, 3, 1.0);
        let rotated: Vec<Point3> = m.points().iter().map(|&p| rotate(p)).collect();
        let b = bounding_box(&rotated).unwrap();
        for h in b.half_lengths {
            assert!((h - 1.5).abs() < 0.05, "{:?}", b.half_lengths);
        }
    }

    #[test]
    fn single_tet_contained() {
        let p = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.1, 0.0),
            Point3::new(0.2, 1.0, 0.3),
            Point3::new(0.1, 0.3, 1.0),
        ];
        let b = bounding_box(&p).unwrap();
        for q in p {
            assert!(b.contains(q, 1e-12));
        }
        let d = b.axes;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d[i].dot(d[j]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_set_is_degenerate() {
        let p: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(bounding_box(&p).is_err());
    }
}
