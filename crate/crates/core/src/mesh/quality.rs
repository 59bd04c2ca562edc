//! Tetrahedron shape measures and edge-simple validation.

use std::collections::HashMap;

use serde::Serialize;

use super::{Edge, Point3, Tetrahedron, TrussMesh};
use crate::error::{Error, Result};

/// Thresholds for declaring a mesh edge-simple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityLimits {
    pub ar_max: f64,
    pub len_min: f64,
    pub len_max: f64,
    pub g_min: f64,
    pub g_max: f64,
    /// Absolute tolerance for geometric predicates, scaled by the longest edge.
    pub geom_eps: f64,
    /// Tets with |signed volume| at or below this are degenerate.
    pub vol_eps: f64,
}

impl Default for QualityLimits {
    fn default() -> Self {
        QualityLimits {
            ar_max: 8.0,
            len_min: 0.5,
            len_max: 2.0,
            g_min: 0.5,
            g_max: 2.0,
            geom_eps: 1e-9,
            vol_eps: 1e-12,
        }
    }
}

/// Signed volume (b-a)·((c-a)×(d-a)) / 6.
pub fn signed_volume(p: [Point3; 4]) -> f64 {
    (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0])) / 6.0
}

fn circumcenter_triangle(a: Point3, b: Point3, c: Point3) -> Option<Point3> {
    let u = b - a;
    let v = c - a;
    let w = u.cross(v);
    let w2 = w.norm_sq();
    if w2 <= f64::EPSILON * u.norm_sq() * v.norm_sq() {
        return None;
    }
    Some(a + (v.cross(w) * u.norm_sq() + w.cross(u) * v.norm_sq()) * (0.5 / w2))
}

fn circumcenter_tet(p: [Point3; 4]) -> Option<Point3> {
    let u = p[1] - p[0];
    let v = p[2] - p[0];
    let w = p[3] - p[0];
    let det = u.dot(v.cross(w));
    if det.abs() <= f64::EPSILON * u.norm() * v.norm() * w.norm() {
        return None;
    }
    let num = v.cross(w) * u.norm_sq() + w.cross(u) * v.norm_sq() + u.cross(v) * w.norm_sq();
    Some(p[0] + num * (0.5 / det))
}

/// Radius of the smallest ball containing the four points.
pub fn min_enclosing_radius(p: [Point3; 4]) -> f64 {
    let contains = |c: Point3, r: f64| p.iter().all(|q| q.dist(c) <= r * (1.0 + 1e-12) + 1e-300);
    let mut best = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            let c = (p[i] + p[j]) * 0.5;
            let r = p[i].dist(c);
            if r < best && contains(c, r) {
                best = r;
            }
        }
    }
    for skip in 0..4 {
        let idx: Vec<usize> = (0..4).filter(|&k| k != skip).collect();
        if let Some(c) = circumcenter_triangle(p[idx[0]], p[idx[1]], p[idx[2]]) {
            let r = p[idx[0]].dist(c);
            if r < best && contains(c, r) {
                best = r;
            }
        }
    }
    if let Some(c) = circumcenter_tet(p) {
        let r = p[0].dist(c);
        if r < best {
            best = r;
        }
    }
    best
}

/// Inscribed-ball radius: 3·volume / surface area.
pub fn inradius(p: [Point3; 4]) -> f64 {
    let area = |a: Point3, b: Point3, c: Point3| 0.5 * (b - a).cross(c - a).norm();
    let s = area(p[1], p[2], p[3]) + area(p[0], p[2], p[3]) + area(p[0], p[1], p[3]) + area(p[0], p[1], p[2]);
    3.0 * signed_volume(p).abs() / s
}

fn is_degenerate(p: [Point3; 4]) -> bool {
    let scale = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| p[i].dist(p[j]))
        .fold(0.0f64, f64::max);
    scale == 0.0 || signed_volume(p).abs() <= 1e-12 * scale.powi(3)
}

/// Smallest enclosing ball radius divided by inscribed ball radius (3 for a regular tet).
pub fn tet_aspect_ratio(p: [Point3; 4]) -> Result<f64> {
    if is_degenerate(p) {
        return Err(Error::DegenerateTet);
    }
    Ok(min_enclosing_radius(p) / inradius(p))
}

/// Volume divided by the cube of the longest edge.
pub fn volume_diameter_ratio(p: [Point3; 4]) -> f64 {
    let diam = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| p[i].dist(p[j]))
        .fold(0.0f64, f64::max);
    signed_volume(p).abs() / diam.powi(3)
}

fn project(p: &[Point3; 4], axis: Point3) -> (f64, f64) {
    p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
        let t = q.dot(axis);
        (lo.min(t), hi.max(t))
    })
}

fn face_normals(p: &[Point3; 4]) -> [Point3; 4] {
    [
        (p[2] - p[1]).cross(p[3] - p[1]),
        (p[2] - p[0]).cross(p[3] - p[0]),
        (p[1] - p[0]).cross(p[3] - p[0]),
        (p[1] - p[0]).cross(p[2] - p[0]),
    ]
}

fn edge_dirs(p: &[Point3; 4]) -> [Point3; 6] {
    [p[1] - p[0], p[2] - p[0], p[3] - p[0], p[2] - p[1], p[3] - p[1], p[3] - p[2]]
}

/// True when the interiors of two tets overlap by more than `eps` along every
/// separating-axis candidate (face normals and edge-pair cross products).
pub fn tets_penetrate(a: [Point3; 4], b: [Point3; 4], eps: f64) -> bool {
    let mut axes: Vec<Point3> = Vec::with_capacity(44);
    axes.extend(face_normals(&a));
    axes.extend(face_normals(&b));
    for ea in edge_dirs(&a) {
        for eb in edge_dirs(&b) {
            axes.push(ea.cross(eb));
        }
    }
    for axis in axes {
        let len = axis.norm();
        if len <= 1e-12 {
            continue;
        }
        let axis = axis * (1.0 / len);
        let (alo, ahi) = project(&a, axis);
        let (blo, bhi) = project(&b, axis);
        if ahi.min(bhi) - alo.max(blo) <= eps {
            return false;
        }
    }
    true
}

/// Violations found by [`validate_edge_simple`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EdgeSimpleReport {
    pub degenerate_tets: Vec<usize>,
    /// Pairs of tets that interpenetrate, repeat, or over-share a face.
    pub simplicial_violations: Vec<(usize, usize)>,
    pub aspect_violations: Vec<(usize, f64)>,
    pub length_violations: Vec<(Edge, f64)>,
    pub gamma_violations: Vec<(Edge, f64)>,
    pub max_aspect_ratio: f64,
    pub min_edge_length: f64,
    pub max_edge_length: f64,
}

impl EdgeSimpleReport {
    pub fn is_simplicial_complex(&self) -> bool {
        self.degenerate_tets.is_empty() && self.simplicial_violations.is_empty()
    }

    pub fn is_edge_simple(&self) -> bool {
        self.is_simplicial_complex()
            && self.aspect_violations.is_empty()
            && self.length_violations.is_empty()
            && self.gamma_violations.is_empty()
    }
}

fn candidate_pairs(pts: &[Point3], tets: &[Tetrahedron]) -> Vec<(usize, usize)> {
    let boxes: Vec<(Point3, Point3)> = tets
        .iter()
        .map(|t| {
            let p = t.points(pts);
            let lo = p.iter().fold(p[0], |m, q| Point3::new(m.x.min(q.x), m.y.min(q.y), m.z.min(q.z)));
            let hi = p.iter().fold(p[0], |m, q| Point3::new(m.x.max(q.x), m.y.max(q.y), m.z.max(q.z)));
            (lo, hi)
        })
        .collect();
    let cell = boxes
        .iter()
        .map(|(lo, hi)| (hi.x - lo.x).max(hi.y - lo.y).max(hi.z - lo.z))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let key = |p: Point3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (t, (lo, _)) in boxes.iter().enumerate() {
        grid.entry(key(*lo)).or_default().push(t);
    }
    let overlap = |a: usize, b: usize| {
        let (alo, ahi) = boxes[a];
        let (blo, bhi) = boxes[b];
        alo.x <= bhi.x && blo.x <= ahi.x && alo.y <= bhi.y && blo.y <= ahi.y && alo.z <= bhi.z && blo.z <= ahi.z
    };
    let mut pairs = Vec::new();
    for (t, (lo, _)) in boxes.iter().enumerate() {
        let (kx, ky, kz) = key(*lo);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        pairs.extend(list.iter().filter(|&&u| u > t && overlap(t, u)).map(|&u| (t, u)));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Check the simplicial-complex property, aspect ratios, edge lengths and stiffness coefficients.
pub fn validate_edge_simple(mesh: &TrussMesh, limits: &QualityLimits) -> EdgeSimpleReport {
    let pts = mesh.points();
    let tets = mesh.tets();
    let mut report = EdgeSimpleReport {
        min_edge_length: f64::INFINITY,
        ..Default::default()
    };

    for (t, tet) in tets.iter().enumerate() {
        let p = tet.points(pts);
        if signed_volume(p).abs() <= limits.vol_eps || is_degenerate(p) {
            report.degenerate_tets.push(t);
            continue;
        }
        let ar = min_enclosing_radius(p) / inradius(p);
        report.max_aspect_ratio = report.max_aspect_ratio.max(ar);
        if ar > limits.ar_max {
            report.aspect_violations.push((t, ar));
        }
    }

    let mut max_len = 0.0f64;
    for &e in mesh.edges() {
        let len = mesh.edge_length(e);
        max_len = max_len.max(len);
        report.min_edge_length = report.min_edge_length.min(len);
        if !(limits.len_min..=limits.len_max).contains(&len) {
            report.length_violations.push((e, len));
        }
        let g = mesh.gamma(e);
        if !(limits.g_min..=limits.g_max).contains(&g) {
            report.gamma_violations.push((e, g));
        }
    }
    report.max_edge_length = max_len;

    // A triangle may bound at most two tets.
    let mut face_owners: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
    for (t, tet) in tets.iter().enumerate() {
        for f in tet.faces() {
            face_owners.entry(f).or_default().push(t);
        }
    }
    let mut bad = Vec::new();
    for owners in face_owners.values().filter(|o| o.len() > 2) {
        for i in 0..owners.len() {
            for j in i + 1..owners.len() {
                bad.push((owners[i].min(owners[j]), owners[i].max(owners[j])));
            }
        }
    }

    let eps = limits.geom_eps * max_len.max(1.0);
    let degenerate = &report.degenerate_tets;
    for (a, b) in candidate_pairs(pts, tets) {
        if degenerate.binary_search(&a).is_ok() || degenerate.binary_search(&b).is_ok() {
            continue;
        }
        if tets[a].shared_vertices(&tets[b]) == 4
            || tets_penetrate(tets[a].points(pts), tets[b].points(pts), eps)
        {
            bad.push((a, b));
        }
    }
    bad.sort_unstable();
    bad.dedup();
    report.simplicial_violations = bad;
    if mesh.edges().is_empty() {
        report.min_edge_length = 0.0;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_grid_truss;

    fn regular() -> [Point3; 4] {
        let s = 1.0 / 8f64.sqrt();
        [
            Point3::new(s, s, s),
            Point3::new(s, -s, -s),
            Point3::new(-s, s, -s),
            Point3::new(-s, -s, s),
        ]
    }

    #[test]
    fn regular_tet_ratio_is_three() {
        let p = regular();
        assert!((p[0].dist(p[1]) - 1.0).abs() < 1e-12);
        assert!((tet_aspect_ratio(p).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn coplanar_is_error() {
        let p = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        assert!(matches!(tet_aspect_ratio(p), Err(Error::DegenerateTet)));
    }

    // Closed-form circumradius R = sqrt((aA+bB+cC)(aA+bB-cC)(aA-bB+cC)(-aA+bB+cC)) / (24 V)
    // with opposite edge pairs (a,A),(b,B),(c,C); valid when the circumball is the enclosing ball.
    fn closed_form_ratio(p: [Point3; 4]) -> f64 {
        let d = |i: usize, j: usize| p[i].dist(p[j]);
        let (x, y, z) = (d(0, 1) * d(2, 3), d(0, 2) * d(1, 3), d(0, 3) * d(1, 2));
        let v = signed_volume(p).abs();
        let r = ((x + y + z) * (x + y - z) * (x - y + z) * (-x + y + z)).sqrt() / (24.0 * v);
        let area = |a: Point3, b: Point3, c: Point3| 0.5 * (b - a).cross(c - a).norm();
        let s = area(p[1], p[2], p[3]) + area(p[0], p[2], p[3]) + area(p[0], p[1], p[3]) + area(p[0], p[1], p[2]);
        r / (3.0 * v / s)
    }

    #[test]
    fn needle_ratio_grows_monotonically() {
        let mut p = regular();
        let apex = p[0];
        let base = (p[1] + p[2] + p[3]) * (1.0 / 3.0);
        let dir = (apex - base).normalized();
        let mut prev = 0.0;
        for k in 0..12 {
            p[0] = apex + dir * (0.25 * k as f64);
            let ar = tet_aspect_ratio(p).unwrap();
            assert!(ar > prev, "step {k}: {ar} <= {prev}");
            prev = ar;
        }
        // For a small move the circumball still encloses; compare to the closed form.
        p[0] = apex + dir * 0.1;
        assert!((tet_aspect_ratio(p).unwrap() - closed_form_ratio(p)).abs() < 1e-9);
    }

    #[test]
    fn obtuse_tet_uses_smaller_ball_than_circumball() {
        // A flat "sliver" whose circumball is huge but whose enclosing ball is set by two points.
        let p = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(1.0, 0.2, 0.05),
            Point3::new(1.0, -0.2, 0.05),
        ];
        let r = min_enclosing_radius(p);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_at_least_three_on_random_tets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let p: [Point3; 4] = std::array::from_fn(|_| Point3::new(rng.random(), rng.random(), rng.random()));
            if let Ok(ar) = tet_aspect_ratio(p) {
                assert!(ar >= 3.0 - 1e-9);
            }
        }
    }

    #[test]
    fn grid_passes_validation() {
        let m = generate_grid_truss(3, 2, 2, 1.0);
        let r = validate_edge_simple(&m, &QualityLimits::default());
        assert!(r.is_edge_simple(), "{r:?}");
        assert!(r.max_aspect_ratio < 8.0);
    }

    #[test]
    fn interpenetrating_tets_flagged() {
        let p = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.2, 0.2, 0.2),
            Point3::new(1.2, 0.2, 0.2),
            Point3::new(0.2, 1.2, 0.2),
            Point3::new(0.2, 0.2, 1.2),
        ];
        let m = TrussMesh::new(p, vec![Tetrahedron([0, 1, 2, 3]), Tetrahedron([4, 5, 6, 7])], 1.0).unwrap();
        let r = validate_edge_simple(&m, &QualityLimits { len_min: 0.0, ..Default::default() });
        assert_eq!(r.simplicial_violations, vec![(0, 1)]);
    }

    #[test]
    fn zero_gamma_flagged() {
        let m = generate_grid_truss(1, 1, 1, 1.0);
        let e = m.edges()[0];
        let m = m.with_gamma_overrides([(e, 0.0)].into_iter().collect()).unwrap();
        let r = validate_edge_simple(&m, &QualityLimits::default());
        assert_eq!(r.gamma_violations, vec![(e, 0.0)]);
        assert!(r.is_simplicial_complex());
        assert!(!r.is_edge_simple());
    }

    #[test]
    fn face_sharing_tets_do_not_penetrate() {
        let p = regular();
        let mirrored = [p[1], p[2], p[3], p[0] + ((p[1] + p[2] + p[3]) * (1.0 / 3.0) - p[0]) * 2.0];
        assert!(!tets_penetrate(p, mirrored, 1e-9));
        assert!(tets_penetrate(p, p, 1e-9));
    }
}
