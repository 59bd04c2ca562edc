//! Dense O(n³) reference computations: symmetric eigendecomposition,
//! pseudo-inverse solves, Schur complements and generalized condition numbers.
//!
//! Nothing here touches the sparse code paths, so results can be used to
//! cross-check them.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mesh::{Edge, TrussMesh};

/// Largest order accepted by the dense routines.
pub const MAX_ORDER: usize = 3000;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    n: usize,
    data: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(n: usize) -> Self {
        DenseSym { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Symmetrizes the input as (M + Mᵀ)/2.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        let mut m = DenseSym { n, data };
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Add `v` to entries (i,j) and (j,i) (once when i == j).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> DenseSym {
        DenseSym { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Principal submatrix on `idx`, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> DenseSym {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        DenseSym { n: k, data }
    }

    /// Max absolute row sum, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &DenseSym) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Eigenvalues ascending; eigenvector k is `vectors[k*n..(k+1)*n]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    n: usize,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

fn check_order(n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::DimensionMismatch { expected: MAX_ORDER, got: n });
    }
    Ok(())
}

/// Householder tridiagonalization. `w` holds the transposed orthogonal factor
/// (row j of `w` is column j of V), which keeps the inner loops contiguous.
fn tred2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |j: usize, k: usize| j * n + k; // V[k][j]
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
                w[at(i, j)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                w[at(i, j)] = f;
                g = e[j] + w[at(j, j)] * f;
                let col = &w[at(j, 0)..at(j, 0) + i];
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut w[at(j, 0)..at(j, 0) + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        w[at(i, n - 1)] = w[at(i, i)];
        w[at(i, i)] = 1.0;
        let h = d[i + 1];
        if accumulate && h != 0.0 {
            for k in 0..=i {
                d[k] = w[at(i + 1, k)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += w[at(i + 1, k)] * w[at(j, k)];
                }
                for k in 0..=i {
                    w[at(j, k)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            w[at(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
        w[at(j, n - 1)] = 0.0;
    }
    w[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal (d, e); rotations applied to `w` when `vectors`.
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 200 {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        let (lo, hi) = w.split_at_mut((i + 1) * n);
                        let vi = &mut lo[i * n..];
                        let vi1 = &mut hi[..n];
                        for k in 0..n {
                            let h = vi1[k];
                            vi1[k] = s * vi[k] + c * h;
                            vi[k] = c * vi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn eig_impl(m: &DenseSym, vectors: bool) -> Result<Eigen> {
    let n = m.n;
    check_order(n)?;
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: vec![], n });
    }
    // Column j of V starts as column j of the (symmetric) input, i.e. row j.
    let mut w = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut w, &mut d, &mut e, vectors);
    tql2(n, &mut w, &mut d, &mut e, vectors)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vecs = if vectors {
        let mut out = Vec::with_capacity(n * n);
        for &k in &order {
            out.extend_from_slice(&w[k * n..(k + 1) * n]);
        }
        out
    } else {
        Vec::new()
    };
    Ok(Eigen { values, vectors: vecs, n })
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn dense_eig(m: &DenseSym) -> Result<Eigen> {
    eig_impl(m, true)
}

/// Eigenvalues only, ascending.
pub fn dense_eigenvalues(m: &DenseSym) -> Result<Vec<f64>> {
    Ok(eig_impl(m, false)?.values)
}

/// Count of eigenvalues above `rel_tol` times the largest magnitude.
pub fn numerical_rank(m: &DenseSym, rel_tol: f64) -> Result<usize> {
    let vals = dense_eigenvalues(m)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(vals.iter().filter(|v| v.abs() > rel_tol * top).count())
}

/// Minimum-norm least-squares solution through the eigendecomposition;
/// eigenvalues at or below 1e-8·λ_max are treated as zero.
pub fn pinv_solve(m: &DenseSym, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.n {
        return Err(Error::DimensionMismatch { expected: m.n, got: b.len() });
    }
    let eig = dense_eig(m)?;
    let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut x = vec![0.0; m.n];
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam.abs() <= 1e-8 * top {
            continue;
        }
        let v = eig.vector(k);
        let c = v.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() / lam;
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
    }
    Ok(x)
}

/// Lower Cholesky factor (row-major), or None if a pivot is not positive.
fn cholesky(m: &DenseSym) -> Option<Vec<f64>> {
    let n = m.n;
    let mut l = m.data.clone();
    for j in 0..n {
        let (done, rest) = l.split_at_mut(j * n);
        let rj = &mut rest[..n];
        for k in 0..j {
            let rk = &done[k * n..k * n + n];
            let s: f64 = rk[..k].iter().zip(&rj[..k]).map(|(a, b)| a * b).sum();
            rj[k] = (rj[k] - s) / rk[k];
        }
        let s: f64 = rj[..j].iter().map(|v| v * v).sum();
        let d = rj[j] - s;
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        rj[j] = d.sqrt();
        for v in rj[j + 1..].iter_mut() {
            *v = 0.0;
        }
    }
    Some(l)
}

/// Solve L X = B in place for row-major B with `cols` columns.
fn forward_rows(l: &[f64], n: usize, b: &mut [f64], cols: usize) {
    for i in 0..n {
        let (done, rest) = b.split_at_mut(i * cols);
        let bi = &mut rest[..cols];
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                let bk = &done[k * cols..(k + 1) * cols];
                bi.iter_mut().zip(bk).for_each(|(a, b)| *a -= lik * b);
            }
        }
        let d = l[i * n + i];
        bi.iter_mut().for_each(|a| *a /= d);
    }
}

fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Schur complement onto `t`: M_TT − M_TS M_SS⁺ M_ST, with S the complement of `t`.
/// Uses a Cholesky factor when M_SS is positive definite and the pseudo-inverse otherwise.
pub fn dense_schur(m: &DenseSym, t: &[usize]) -> Result<DenseSym> {
    check_order(m.n)?;
    let mut in_t = vec![false; m.n];
    for &i in t {
        in_t[i] = true;
    }
    let s: Vec<usize> = (0..m.n).filter(|&i| !in_t[i]).collect();
    let mtt = m.submatrix(t);
    if s.is_empty() {
        return Ok(mtt);
    }
    let mss = m.submatrix(&s);
    let ns = s.len();
    let nt = t.len();
    // M_ST as row-major ns × nt.
    let mut mst = vec![0.0; ns * nt];
    for (a, &i) in s.iter().enumerate() {
        for (b, &j) in t.iter().enumerate() {
            mst[a * nt + b] = m.get(i, j);
        }
    }
    let mut out = mtt.data.clone();
    if let Some(l) = cholesky(&mss) {
        forward_rows(&l, ns, &mut mst, nt);
        // out -= Yᵀ Y with Y = L⁻¹ M_ST.
        for a in 0..ns {
            let y = &mst[a * nt..(a + 1) * nt];
            for i in 0..nt {
                let yi = y[i];
                if yi != 0.0 {
                    out[i * nt..(i + 1) * nt].iter_mut().zip(y).for_each(|(o, yj)| *o -= yi * yj);
                }
            }
        }
    } else {
        let eig = dense_eig(&mss)?;
        let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam.abs() <= 1e-8 * top {
                continue;
            }
            let v = eig.vector(k);
            let mut y = vec![0.0; nt];
            for a in 0..ns {
                if v[a] != 0.0 {
                    y.iter_mut().zip(&mst[a * nt..(a + 1) * nt]).for_each(|(yb, m)| *yb += v[a] * m);
                }
            }
            for i in 0..nt {
                let yi = y[i] / lam;
                out[i * nt..(i + 1) * nt].iter_mut().zip(&y).for_each(|(o, yj)| *o -= yi * yj);
            }
        }
    }
    DenseSym::from_row_major(nt, out)
}

/// Extreme eigenvalues of the pencil (A, B) on the common range.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PencilSpectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub null_dim: usize,
}

impl PencilSpectrum {
    pub fn kappa(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Generalized condition number of A relative to B, both PSD with the same null space.
///
/// If `shared_null` is None the null space is read off an eigendecomposition
/// of B (eigenvalues ≤ 1e-8·λ_max). With N an orthonormal null basis and
/// L the Cholesky factor of B + σNNᵀ, the eigenvalues of L⁻¹AL⁻ᵀ are the
/// pencil eigenvalues on range(B) plus dim(N) exact zeros, which are dropped.
pub fn generalized_condition(a: &DenseSym, b: &DenseSym, shared_null: Option<&[Vec<f64>]>) -> Result<PencilSpectrum> {
    let n = a.n;
    if b.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n });
    }
    check_order(n)?;
    let null: Vec<Vec<f64>> = match shared_null {
        Some(v) => v.to_vec(),
        None => {
            let eig = dense_eig(b)?;
            let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (0..n).filter(|&k| eig.values[k] <= 1e-8 * top).map(|k| eig.vector(k).to_vec()).collect()
        }
    };
    let null = crate::stiffness::orthonormalize(&null, 1e-10);
    let norm_a = a.norm_inf();
    let norm_b = b.norm_inf();
    for (k, q) in null.iter().enumerate() {
        let ra: f64 = a.matvec(q).iter().map(|v| v * v).sum::<f64>().sqrt();
        let rb: f64 = b.matvec(q).iter().map(|v| v * v).sum::<f64>().sqrt();
        if ra > 1e-8 * norm_a.max(f64::MIN_POSITIVE) || rb > 1e-8 * norm_b.max(f64::MIN_POSITIVE) {
            return Err(Error::NullSpaceMismatch(format!(
                "null vector {k}: |A q| = {ra:.3e}, |B q| = {rb:.3e}"
            )));
        }
    }
    let sigma = norm_b;
    let mut shifted = b.data.clone();
    for q in &null {
        for i in 0..n {
            let qi = sigma * q[i];
            if qi != 0.0 {
                shifted[i * n..(i + 1) * n].iter_mut().zip(q).for_each(|(s, qj)| *s += qi * qj);
            }
        }
    }
    let shifted = DenseSym::from_row_major(n, shifted)?;
    let l = cholesky(&shifted)
        .ok_or_else(|| Error::NullSpaceMismatch("B has null directions beyond the given basis".into()))?;
    let mut x = a.data.clone();
    forward_rows(&l, n, &mut x, n);
    let mut c = transpose(n, &x);
    forward_rows(&l, n, &mut c, n);
    let c = DenseSym::from_row_major(n, c)?;
    let vals = dense_eigenvalues(&c)?;
    let k = null.len();
    if k >= n {
        return Err(Error::NullSpaceMismatch("null space is everything".into()));
    }
    let top = vals[n - 1].abs();
    if vals[k] <= 1e-10 * top {
        return Err(Error::NullSpaceMismatch(format!(
            "A has {} extra null directions relative to B",
            vals[k..].iter().filter(|v| **v <= 1e-10 * top).count()
        )));
    }
    Ok(PencilSpectrum {
        lambda_min: vals[k],
        lambda_max: vals[n - 1],
        null_dim: k,
    })
}

/// Dense stiffness matrix assembled straight from the edge list.
pub fn dense_stiffness(mesh: &TrussMesh) -> DenseSym {
    let all: Vec<usize> = (0..mesh.n_vertices()).collect();
    dense_stiffness_on(mesh, &all, mesh.edges())
}

/// Dense stiffness of `edges` over `vertices` (rows ordered as listed);
/// edges with an endpoint outside `vertices` are skipped.
pub fn dense_stiffness_on(mesh: &TrussMesh, vertices: &[usize], edges: &[Edge]) -> DenseSym {
    let mut pos = vec![usize::MAX; mesh.n_vertices()];
    for (k, &v) in vertices.iter().enumerate() {
        pos[v] = k;
    }
    let n = 3 * vertices.len();
    let mut m = DenseSym::zeros(n);
    let pts = mesh.points();
    for &e in edges {
        let (a, b) = (pos[e.0], pos[e.1]);
        if a == usize::MAX || b == usize::MAX {
            continue;
        }
        let d = pts[e.0] - pts[e.1];
        let len = d.norm();
        let u = [d.x / len, d.y / len, d.z / len];
        let k = mesh.gamma(e) / len;
        let mut bv = [(0usize, 0.0f64); 6];
        for r in 0..3 {
            bv[r] = (3 * a + r, u[r]);
            bv[3 + r] = (3 * b + r, -u[r]);
        }
        for &(i, bi) in &bv {
            for &(j, bj) in &bv {
                m.data[i * n + j] += k * bi * bj;
            }
        }
    }
    m
}

/// Whether `j` is reachable from `i` along nonzero entries of `adj`,
/// with every intermediate index in `eliminated`.
pub fn path_through(adj: &[Vec<usize>], eliminated: &[bool], i: usize, j: usize) -> bool {
    if adj[i].contains(&j) {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    for &k in &adj[i] {
        if eliminated[k] && !seen[k] {
            seen[k] = true;
            queue.push_back(k);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if w == j {
                return true;
            }
            if eliminated[w] && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    false
}

/// Scalar adjacency of a dense matrix: j ∈ adj[i] iff |M_ij| > tol, i ≠ j.
pub fn dense_adjacency(m: &DenseSym, tol: f64) -> Vec<Vec<usize>> {
    (0..m.n)
        .map(|i| (0..m.n).filter(|&j| j != i && m.get(i, j).abs() > tol).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_grid_truss, Point3, Tetrahedron};
    use rand::{Rng, SeedableRng};

    fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DenseSym {
        let g: Vec<f64> = (0..n * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseSym::from_fn(n, |i, j| (0..rank).map(|k| g[i * rank + k] * g[j * rank + k]).sum())
    }

    fn residual(m: &DenseSym, eig: &Eigen) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..m.order() {
            let v = eig.vector(k);
            let mv = m.matvec(v);
            for i in 0..m.order() {
                worst = worst.max((mv[i] - eig.values[k] * v[i]).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_and_diagonal() {
        let e = dense_eig(&DenseSym::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let d = DenseSym::from_fn(3, |i, j| if i == j { (3 - i) as f64 } else { 0.0 });
        let e = dense_eig(&d).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_residuals_and_orthogonality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 7, 40, 120] {
            let m = DenseSym::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let e = dense_eig(&m).unwrap();
            assert!(residual(&m, &e) <= 1e-10 * m.norm_inf().max(1.0));
            for a in 0..n {
                for b in 0..n {
                    let d: f64 = e.vector(a).iter().zip(e.vector(b)).map(|(x, y)| x * y).sum();
                    assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
            let vals = dense_eigenvalues(&m).unwrap();
            for (a, b) in vals.iter().zip(&e.values) {
                assert!((a - b).abs() < 1e-10 * m.norm_inf().max(1.0));
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn single_tet_has_six_zero_modes() {
        let p = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let m = TrussMesh::new(p, vec![Tetrahedron([0, 1, 2, 3])], 1.0).unwrap();
        let a = dense_stiffness(&m);
        let vals = dense_eigenvalues(&a).unwrap();
        let top = vals[11];
        assert_eq!(vals.iter().filter(|v| v.abs() <= 1e-8 * top).count(), 6);
        assert_eq!(numerical_rank(&a, 1e-8).unwrap(), 6);
    }

    #[test]
    fn pinv_cases() {
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(pinv_solve(&DenseSym::identity(3), &b).unwrap(), b);
        let m = DenseSym::from_fn(2, |_, _| 1.0);
        let x = pinv_solve(&m, &[1.0, -1.0]).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-14));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = random_psd(20, 12, &mut rng);
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = pinv_solve(&m, &b).unwrap();
        // Mx equals the projection of b onto range(M).
        let e = dense_eig(&m).unwrap();
        let mut pb = vec![0.0; 20];
        for k in 8..20 {
            let v = e.vector(k);
            let c: f64 = v.iter().zip(&b).map(|(a, c)| a * c).sum();
            pb.iter_mut().zip(v).for_each(|(p, vi)| *p += c * vi);
        }
        let mx = m.matvec(&x);
        let err: f64 = mx.iter().zip(&pb).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * b.iter().map(|v| v * v).sum::<f64>().sqrt());
    }

    #[test]
    fn schur_scalar_and_identity() {
        let m = DenseSym::from_row_major(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let s = dense_schur(&m, &[1]).unwrap();
        assert!((s.get(0, 0) - (3.0 - 4.0 / 4.0)).abs() < 1e-15);
        let all: Vec<usize> = (0..2).collect();
        assert_eq!(dense_schur(&m, &all).unwrap(), m);
    }

    #[test]
    fn schur_with_singular_block_uses_pinv() {
        // S block [[1,1],[1,1]] is singular; entries of M_ST lie in its range.
        let m = DenseSym::from_row_major(3, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0]).unwrap();
        let s = dense_schur(&m, &[2]).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn generalized_condition_basics() {
        let m = generate_grid_truss(2, 1, 1, 1.0);
        let a = dense_stiffness(&m);
        let s = generalized_condition(&a, &a, None).unwrap();
        assert_eq!(s.null_dim, 6);
        assert!((s.kappa() - 1.0).abs() < 1e-8);
        let s2 = generalized_condition(&a.scaled(2.0), &a, None).unwrap();
        assert!((s2.lambda_min - 2.0).abs() < 1e-8 && (s2.lambda_max - 2.0).abs() < 1e-8);
    }

    #[test]
    fn generalized_condition_rejects_mismatch() {
        let a = DenseSym::from_fn(3, |i, j| if i == j && i > 0 { 1.0 } else { 0.0 });
        let b = DenseSym::identity(3);
        assert!(matches!(generalized_condition(&a, &b, None), Err(Error::NullSpaceMismatch(_))));
        assert!(matches!(generalized_condition(&b, &a, None), Err(Error::NullSpaceMismatch(_))));
    }

    #[test]
    fn generalized_matches_direct_on_pd_pencil() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let a = random_psd(10, 10, &mut rng);
        let b = DenseSym::from_fn(10, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let s = generalized_condition(&a, &b, Some(&[])).unwrap();
        // Direct: eigenvalues of D^{-1/2} A D^{-1/2}.
        let c = DenseSym::from_fn(10, |i, j| a.get(i, j) / (((i + 1) * (j + 1)) as f64).sqrt());
        let v = dense_eigenvalues(&c).unwrap();
        assert!((s.lambda_min - v[0]).abs() < 1e-10 * v[9]);
        assert!((s.lambda_max - v[9]).abs() < 1e-10 * v[9]);
    }

    #[test]
    fn path_search() {
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        assert!(path_through(&adj, &[false, true, false], 0, 2));
        assert!(!path_through(&adj, &[false, false, false], 0, 2));
    }
}
