//! Preconditioned conjugate gradient and the full truss solver: hollow the
//! well-shaped chunks, eliminate their interiors, and run PCG on the Schur
//! complement preconditioned by a factorization of the hollowed truss.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissect::{convex_truss_union_nd, nested_dissection, EliminationOrdering, Graph, SeparatorNode, UnionOrdering};
use crate::elim::{eliminate_subset, factor, ElimStats, PartialElimination, SparseFactor};
use crate::error::{Error, Result};
use crate::hollow::{hollow, Hollowing};
use crate::mesh::{bounding_box, OrientedBox, Point3, TrussMesh};
use crate::oracle::{self, DenseSym};
use crate::sparse::{block_add, Block, BlockMatrix};
use crate::stiffness::{assemble, assemble_edges, dot, norm, orthonormalize, project_out_in_place};

/// Geometric tolerance used when hollowing chunks.
const GEOM_EPS: f64 = 1e-9;

/// Largest preconditioner (in vertices) for which the dense pencil is computed.
const ORACLE_MAX_VERTICES: usize = 1000;

/// A projected right-hand side this small relative to the input is roundoff
/// from a load lying in the null space.
const NEGLIGIBLE: f64 = 64.0 * f64::EPSILON;

/// Ritz values are taken from at most this many Lanczos steps.
const LANCZOS_MAX: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative residual target.
    pub eps: f64,
    /// Chunks with aspect ratio at most n_i^{c_alpha} are hollowed.
    pub c_alpha: Option<f64>,
    /// Hollowing parameter r_i = n_i^{c_r}.
    pub c_r: Option<f64>,
    /// Number of top-level separator planes; `None` picks it from the regime.
    pub l: Option<usize>,
    /// Meshes whose chunks all have aspect ratio at most this use the small-aspect-ratio rules.
    pub ar_threshold: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Compute the dense condition number of the preconditioned system when small.
    pub oracle_checks: bool,
    /// Relative pivot threshold of the factorizations.
    pub piv_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 1e-8,
            c_alpha: None,
            c_r: None,
            l: None,
            ar_threshold: 4.0,
            seed: 0,
            max_iters: 2000,
            oracle_checks: false,
            piv_eps: crate::elim::PIV_EPS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        for (name, c) in [("c_alpha", self.c_alpha), ("c_r", self.c_r)] {
            if let Some(c) = c {
                if !(c > 0.0 && c < 1.0) {
                    return bad(format!("{name} must lie in (0, 1), got {c}"));
                }
            }
        }
        if !(self.ar_threshold >= 1.0) {
            return bad(format!("ar_threshold must be at least 1, got {}", self.ar_threshold));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.piv_eps > 0.0 && self.piv_eps < 1.0) {
            return bad(format!("piv_eps must lie in (0, 1), got {}", self.piv_eps));
        }
        Ok(())
    }
}

/// Outcome of a PCG run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
    /// ½xᵀAx − bᵀx after each iteration.
    pub energy_history: Vec<f64>,
    /// λmax/λmin of the Lanczos tridiagonal built from the CG coefficients.
    pub kappa_estimate: Option<f64>,
    pub relative_residual: f64,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Conjugate gradient on A x = Πb preconditioned by `solve_b`.
///
/// Πb is b with its component in span(`null_basis`) removed; iterates and
/// residuals are re-projected every iteration. The recurrence residual is
/// checked every iteration and replaced by the true residual every tenth
/// iteration and before accepting convergence.
pub fn pcg<A, B>(
    mut apply_a: A,
    mut solve_b: B,
    b: &[f64],
    eps: f64,
    null_basis: &[Vec<f64>],
    max_iters: usize,
) -> Result<PcgResult>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    B: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut rhs = b.to_vec();
    project_out_in_place(&mut rhs, null_basis)?;
    let bnorm = norm(&rhs);
    let negligible = bnorm <= NEGLIGIBLE * norm(b);
    let mut out = PcgResult {
        x: vec![0.0; n],
        iterations: 0,
        residual_history: Vec::new(),
        energy_history: Vec::new(),
        kappa_estimate: None,
        relative_residual: 0.0,
    };
    if bnorm == 0.0 || negligible {
        return Ok(out);
    }
    let mut precondition = |r: &[f64]| -> Result<Vec<f64>> {
        let mut z = solve_b(r)?;
        if z.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: z.len() });
        }
        project_out_in_place(&mut z, null_basis)?;
        Ok(z)
    };

    let x = &mut out.x;
    let mut ax = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut rel = 1.0;
    for k in 1..=max_iters {
        let q = apply_a(&p)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !(rz > 0.0) {
            return Err(Error::PcgBreakdown(k));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(alpha, &q, &mut ax);
        axpy(-alpha, &q, &mut r);
        project_out_in_place(x, null_basis)?;
        project_out_in_place(&mut r, null_basis)?;
        alphas.push(alpha);

        rel = norm(&r) / bnorm;
        if k % 10 == 0 || rel <= eps {
            ax = apply_a(x)?;
            r.iter_mut().zip(rhs.iter().zip(&ax)).for_each(|(ri, (bi, ai))| *ri = bi - ai);
            project_out_in_place(&mut r, null_basis)?;
            rel = norm(&r) / bnorm;
        }
        out.energy_history.push(0.5 * dot(x, &ax) - dot(&rhs, x));
        out.residual_history.push(rel);
        out.iterations = k;
        if rel <= eps {
            out.relative_residual = rel;
            out.kappa_estimate = lanczos_kappa(&alphas, &betas);
            return Ok(out);
        }
        z = precondition(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        betas.push(beta);
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::PcgMaxIters {
        iterations: max_iters,
        residual: rel,
    })
}

/// Condition number of the Lanczos tridiagonal from CG step lengths α and
/// direction updates β.
fn lanczos_kappa(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let m = alphas.len().min(LANCZOS_MAX);
    if m == 0 {
        return None;
    }
    let t = DenseSym::from_fn(m, |i, j| {
        if i == j {
            1.0 / alphas[i] + if i > 0 { betas[i - 1] / alphas[i - 1] } else { 0.0 }
        } else if i.abs_diff(j) == 1 {
            let k = i.min(j);
            betas[k].sqrt() / alphas[k]
        } else {
            0.0
        }
    });
    let vals = oracle::dense_eigenvalues(&t).ok()?;
    let (lo, hi) = (vals[0], vals[m - 1]);
    (lo > 0.0).then(|| hi / lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every chunk is well shaped: r_i = n_i^{1/2}, no top-level planes.
    SmallAspect,
    /// Some chunk is elongated: c_α = c_r = 1/3 and l = ⌈n^{1/6}⌉.
    Mixed,
}

/// Per-chunk decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkPlan {
    pub vertices: usize,
    pub tets: usize,
    pub aspect_ratio: f64,
    /// Hollowing parameter when the chunk is in I.
    pub r: Option<f64>,
    /// Why a chunk is kept whole.
    pub kept_whole: Option<String>,
}

/// Resolved solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameters {
    pub regime: Regime,
    pub c_alpha: Option<f64>,
    pub c_r: f64,
    pub l: usize,
    pub chunks: Vec<ChunkPlan>,
}

impl Parameters {
    /// Indices of the chunks to hollow.
    pub fn hollowed(&self) -> Vec<usize> {
        (0..self.chunks.len()).filter(|&i| self.chunks[i].r.is_some()).collect()
    }
}

/// Oriented bounding box of each chunk's vertices.
pub fn chunk_boxes(mesh: &TrussMesh) -> Result<Vec<OrientedBox>> {
    mesh.chunk_list()
        .par_iter()
        .map(|c| {
            let pts: Vec<Point3> = mesh.vertices_of(c).iter().map(|&v| mesh.points()[v]).collect();
            bounding_box(&pts)
        })
        .collect()
}

pub fn choose_parameters(mesh: &TrussMesh, config: &SolverConfig) -> Result<Parameters> {
    Ok(plan_parameters(mesh, &chunk_boxes(mesh)?, config))
}

/// Pick the regime, I, r_i and l from the chunk boxes. Config overrides win.
pub fn plan_parameters(mesh: &TrussMesh, boxes: &[OrientedBox], config: &SolverConfig) -> Parameters {
    let chunks = mesh.chunk_list();
    let alphas: Vec<f64> = boxes.iter().map(OrientedBox::aspect_ratio).collect();
    let regime = if alphas.iter().all(|&a| a <= config.ar_threshold) {
        Regime::SmallAspect
    } else {
        Regime::Mixed
    };
    let (c_alpha, c_r, l_auto) = match regime {
        Regime::SmallAspect => (config.c_alpha, config.c_r.unwrap_or(0.5), 0),
        Regime::Mixed => (
            Some(config.c_alpha.unwrap_or(1.0 / 3.0)),
            config.c_r.unwrap_or(1.0 / 3.0),
            (mesh.n_vertices() as f64).powf(1.0 / 6.0).ceil() as usize,
        ),
    };
    let plans = chunks
        .iter()
        .zip(&alphas)
        .map(|(c, &alpha)| {
            let n_i = mesh.vertices_of(c).len();
            let nf = n_i as f64;
            let r = nf.powf(c_r);
            let kept_whole = match c_alpha {
                Some(ca) if alpha > nf.powf(ca) => Some(format!("aspect ratio {alpha:.3} exceeds n^{ca:.3} = {:.3}", nf.powf(ca))),
                _ if r < 8.0 => Some(format!("r = {r:.3} is below 8")),
                _ => None,
            };
            ChunkPlan {
                vertices: n_i,
                tets: c.len(),
                aspect_ratio: alpha,
                r: kept_whole.is_none().then_some(r),
                kept_whole,
            }
        })
        .collect();
    Parameters {
        regime,
        c_alpha,
        c_r,
        l: config.l.unwrap_or(l_auto),
        chunks: plans,
    }
}

/// Hollow every chunk planned for it. A chunk whose r-division precondition
/// fails is kept whole and its plan updated with the reason.
pub fn hollow_chunks(
    mesh: &TrussMesh,
    boxes: &[OrientedBox],
    params: &Parameters,
) -> Result<(Vec<ChunkPlan>, Vec<Option<Hollowing>>)> {
    let chunks = mesh.chunk_list();
    let attempts: Vec<Result<Option<Hollowing>>> = chunks
        .par_iter()
        .zip(&params.chunks)
        .zip(boxes)
        .map(|((c, plan), b)| match plan.r {
            Some(r) => match hollow(mesh, c, b, r, GEOM_EPS) {
                Ok(h) => Ok(Some(h)),
                Err(Error::RDivision(_)) => Ok(None),
                Err(e) => Err(e),
            },
            None => Ok(None),
        })
        .collect();
    let mut plans = params.chunks.clone();
    let mut hollowings = Vec::with_capacity(chunks.len());
    for (plan, h) in plans.iter_mut().zip(attempts) {
        let h = h?;
        if let (Some(r), None) = (plan.r, &h) {
            plan.kept_whole = Some(format!("r-division precondition fails for r = {r:.3}"));
            plan.r = None;
        }
        hollowings.push(h);
    }
    Ok((plans, hollowings))
}

/// Preconditioner elimination ordering the solver would use, over global vertex ids.
pub fn preconditioner_ordering(mesh: &TrussMesh, config: &SolverConfig) -> Result<(Parameters, UnionOrdering)> {
    config.validate()?;
    let boxes = chunk_boxes(mesh)?;
    let mut params = plan_parameters(mesh, &boxes, config);
    let (plans, hollowings) = hollow_chunks(mesh, &boxes, &params)?;
    params.chunks = plans;
    let union = convex_truss_union_nd(mesh, &boxes, &hollowings, params.l, config.seed)?;
    Ok((params, union))
}

/// Per-chunk outcome of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkReport {
    #[serde(flatten)]
    pub plan: ChunkPlan,
    pub hollow_tets: Option<usize>,
    pub hollow_points: Option<usize>,
    pub interior_vertices: usize,
    pub interior_chunks: usize,
    pub max_chunk_vertices: usize,
    pub max_chunk_contacts: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseFlops {
    pub interior: u64,
    pub factor: u64,
    pub pcg: u64,
    pub substitution: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub setup_ms: f64,
    pub hollow_ms: f64,
    pub interior_ms: f64,
    pub ordering_ms: f64,
    pub factor_ms: f64,
    pub pcg_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub n: usize,
    pub k: usize,
    pub regime: Regime,
    pub l: usize,
    pub iterations: usize,
    /// ‖A x − Π f‖ / ‖Π f‖ of the returned solution.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub kappa_estimate: Option<f64>,
    pub kappa_oracle: Option<f64>,
    pub refinements: usize,
    pub preconditioner_vertices: usize,
    pub interior_vertices: usize,
    /// Vertices shared by two or more chunks.
    pub glue_vertices: usize,
    pub top_separator_sizes: Vec<usize>,
    pub null_dim: usize,
    /// Fill edges of the preconditioner factor.
    pub fill_in: usize,
    pub factor_blocks: usize,
    /// Stored blocks of the Schur complement system.
    pub schur_nnz: usize,
    pub flops: PhaseFlops,
    pub wall: PhaseTimes,
    pub chunks: Vec<ChunkReport>,
    pub config: SolverConfig,
}

/// One interior piece: local matrix on its interior and contact vertices,
/// with the interior eliminated.
struct Piece {
    /// Local index → global vertex; interior first, then contacts.
    local: Vec<usize>,
    elim: PartialElimination,
}

/// Eliminated interiors, Schur complement and preconditioner of a mesh.
pub struct SchurSystem {
    n: usize,
    /// Preconditioner vertices V', sorted; Schur indices follow this order.
    pub vertices: Vec<usize>,
    pieces: Vec<Piece>,
    pub schur: BlockMatrix,
    pub preconditioner: BlockMatrix,
    pub factor: SparseFactor,
    pub ordering: EliminationOrdering,
    pub top_separator_sizes: Vec<usize>,
    pub interior_stats: ElimStats,
}

impl SchurSystem {
    /// g = (Πf)_{V'} − A_{V'S} A_SS⁻¹ f_S.
    pub fn reduce_rhs(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut g = gather(f, &self.vertices);
        let pos = positions(self.n, &self.vertices);
        for piece in &self.pieces {
            let s = piece.elim.interior().len();
            let mut fl = gather(f, &piece.local);
            fl[3 * s..].iter_mut().for_each(|x| *x = 0.0);
            let red = piece.elim.reduce_rhs(&fl)?;
            for (t, &v) in piece.local[s..].iter().enumerate() {
                let p = pos[v];
                for c in 0..3 {
                    g[3 * p + c] += red[3 * t + c];
                }
            }
        }
        Ok(g)
    }

    /// Full solution from the Schur unknowns by interior back substitution.
    pub fn extend(&self, f: &[f64], x_pre: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; 3 * self.n];
        scatter(&mut x, x_pre, &self.vertices);
        let pos = positions(self.n, &self.vertices);
        let parts: Vec<Vec<f64>> = self
            .pieces
            .par_iter()
            .map(|piece| {
                let s = piece.elim.interior().len();
                let mut fl = gather(f, &piece.local);
                fl[3 * s..].iter_mut().for_each(|v| *v = 0.0);
                let xb: Vec<f64> = piece.local[s..]
                    .iter()
                    .flat_map(|&v| x_pre[3 * pos[v]..3 * pos[v] + 3].to_vec())
                    .collect();
                piece.elim.back_substitute(&fl, &xb)
            })
            .collect::<Result<_>>()?;
        for (piece, xl) in self.pieces.iter().zip(parts) {
            let s = piece.elim.interior().len();
            scatter(&mut x, &xl[..3 * s], &piece.local[..s]);
        }
        Ok(x)
    }

    fn substitution_flops(&self) -> u64 {
        self.pieces.iter().map(|p| 18 * p.elim.stats().factor_blocks as u64).sum()
    }
}

fn positions(n: usize, vertices: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in vertices.iter().enumerate() {
        pos[v] = k;
    }
    pos
}

fn gather(x: &[f64], vertices: &[usize]) -> Vec<f64> {
    vertices.iter().flat_map(|&v| [x[3 * v], x[3 * v + 1], x[3 * v + 2]]).collect()
}

fn scatter(x: &mut [f64], local: &[f64], vertices: &[usize]) {
    for (k, &v) in vertices.iter().enumerate() {
        x[3 * v..3 * v + 3].copy_from_slice(&local[3 * k..3 * k + 3]);
    }
}

/// Local matrix of an interior piece: every bar with an interior endpoint,
/// over interior vertices followed by contacts.
fn piece_matrix(a: &BlockMatrix, interior: &[usize], contacts: &[usize]) -> (Vec<usize>, BlockMatrix) {
    let local: Vec<usize> = interior.iter().chain(contacts).copied().collect();
    let mut pos = std::collections::HashMap::with_capacity(local.len());
    for (k, &v) in local.iter().enumerate() {
        pos.insert(v, k);
    }
    let s = interior.len();
    let mut entries: Vec<(usize, usize, Block)> = Vec::new();
    for (i, &v) in interior.iter().enumerate() {
        for (w, blk) in a.row(v) {
            let j = *pos.get(&w).expect("neighbors of interior vertices are local");
            entries.push((i, j, *blk));
            if j >= s {
                entries.push((j, i, crate::sparse::block_transpose(blk)));
                // The contact's diagonal gets this bar's stiffness, which is −A_vw.
                entries.push((j, j, crate::sparse::block_scale(blk, -1.0)));
            }
        }
    }
    let m = BlockMatrix::from_entries(local.len(), entries).expect("local indices");
    (local, m)
}

/// Schur complement onto the preconditioner vertices, plus the preconditioner
/// and its factorization.
pub fn build_schur_system(
    mesh: &TrussMesh,
    a: &BlockMatrix,
    boxes: &[OrientedBox],
    hollowings: &[Option<Hollowing>],
    l: usize,
    config: &SolverConfig,
    times: &mut PhaseTimes,
) -> Result<SchurSystem> {
    let n = mesh.n_vertices();

    let t = Instant::now();
    let interiors: Vec<(Vec<usize>, Vec<usize>)> = hollowings
        .iter()
        .flatten()
        .flat_map(|h| h.interior_chunks.iter().map(|c| (c.vertices.clone(), c.contacts.clone())))
        .collect();
    let pieces: Vec<Piece> = interiors
        .par_iter()
        .map(|(interior, contacts)| {
            let (local, m) = piece_matrix(a, interior, contacts);
            let s = interior.len();
            let pts: Vec<Point3> = local.iter().map(|&v| mesh.points()[v]).collect();
            let g = Graph::from_edges(local.len(), (0..s).flat_map(|i| m.row_cols(i).iter().map(move |&j| (i, j))))?;
            let ord = nested_dissection(&pts, &g, &(0..s).collect::<Vec<_>>());
            let elim = eliminate_subset(&m, ord.order(), config.piv_eps)?;
            Ok(Piece { local, elim })
        })
        .collect::<Result<_>>()?;
    let mut interior_stats = ElimStats::default();
    for p in &pieces {
        let s = p.elim.stats();
        interior_stats.pivots += s.pivots;
        interior_stats.fill_edges += s.fill_edges;
        interior_stats.factor_blocks += s.factor_blocks;
        interior_stats.flops += s.flops;
    }
    times.interior_ms += ms(t);

    let t = Instant::now();
    let union = convex_truss_union_nd(mesh, boxes, hollowings, l, config.seed)?;
    let vertices = union.vertices.clone();
    let pos = positions(n, &vertices);
    let ordering = local_ordering(&union.ordering, &pos)?;
    times.ordering_ms += ms(t);

    // Bars with both ends in V', then each piece's Schur complement.
    let mut in_pre = vec![false; n];
    vertices.iter().for_each(|&v| in_pre[v] = true);
    let mut entries: Vec<(usize, usize, Block)> = Vec::new();
    for (i, &v) in vertices.iter().enumerate() {
        let mut d = a.diag(v);
        for (w, blk) in a.row(v) {
            if w == v {
                continue;
            }
            if in_pre[w] {
                entries.push((i, pos[w], *blk));
            } else {
                d = block_add(&d, blk);
            }
        }
        entries.push((i, i, d));
    }
    for piece in &pieces {
        let sc = piece.elim.schur();
        let s = piece.elim.interior().len();
        for ti in 0..sc.n() {
            let gi = pos[piece.local[s + ti]];
            for (tj, blk) in sc.row(ti) {
                entries.push((gi, pos[piece.local[s + tj]], *blk));
            }
        }
    }
    let schur = BlockMatrix::from_entries(vertices.len(), entries)?;

    let t = Instant::now();
    let edges = mesh.edges_of(&union.tets);
    let preconditioner = assemble_edges(mesh, &edges)?.restrict(&vertices);
    let factor = factor(&preconditioner, &ordering, config.piv_eps)?;
    times.factor_ms += ms(t);

    Ok(SchurSystem {
        n,
        vertices,
        pieces,
        schur,
        preconditioner,
        factor,
        ordering,
        top_separator_sizes: union.layer_sizes,
        interior_stats,
    })
}

/// Re-index an ordering of global vertices by their positions in V'.
fn local_ordering(o: &EliminationOrdering, pos: &[usize]) -> Result<EliminationOrdering> {
    let nodes: Vec<SeparatorNode> = o
        .nodes()
        .iter()
        .map(|nd| SeparatorNode {
            vertices: nd.vertices.iter().map(|&v| pos[v]).collect(),
            level: nd.level,
            kind: nd.kind,
            parent: nd.parent,
        })
        .collect();
    EliminationOrdering::new(nodes)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Solve A x = Π f for the truss stiffness matrix A, where Π projects onto
/// range(A). Returns x ⟂ null(A) with ‖A x − Π f‖ ≤ eps‖Π f‖.
pub fn truss_solver(mesh: &TrussMesh, f: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    config.validate()?;
    let n = mesh.n_vertices();
    if f.len() != 3 * n {
        return Err(Error::DimensionMismatch { expected: 3 * n, got: f.len() });
    }
    let start = Instant::now();
    let mut times = PhaseTimes::default();

    let t = Instant::now();
    let a = assemble(mesh)?;
    let boxes = chunk_boxes(mesh)?;
    let params = plan_parameters(mesh, &boxes, config);
    times.setup_ms = ms(t);

    let t = Instant::now();
    let chunks = mesh.chunk_list();
    let (plans, hollowings) = hollow_chunks(mesh, &boxes, &params)?;
    times.hollow_ms = ms(t);

    let sys = build_schur_system(mesh, &a, &boxes, &hollowings, params.l, config, &mut times)?;

    // Null space of Sc: shared with the preconditioner when both are stiff.
    let null_pre = sys.factor.null_basis().to_vec();
    let scale = sys.schur.max_diag().max(f64::MIN_POSITIVE);
    for q in &null_pre {
        let r = norm(&sys.schur.apply(q)?);
        if r > 1e-6 * scale {
            return Err(Error::NullSpaceMismatch(format!(
                "preconditioner null vector has Schur residual {r:e} (scale {scale:e})"
            )));
        }
    }
    let zero = vec![0.0; 3 * n];
    let extended: Vec<Vec<f64>> = null_pre.iter().map(|q| sys.extend(&zero, q)).collect::<Result<_>>()?;
    let null_a = orthonormalize(&extended, 1e-10);

    let mut pf = f.to_vec();
    project_out_in_place(&mut pf, &null_a)?;
    let pf_norm = norm(&pf);

    let t = Instant::now();
    let mut x = vec![0.0; 3 * n];
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut kappa_estimate = None;
    let mut refinements = 0;
    let mut residual = 0.0;
    if pf_norm > NEGLIGIBLE * norm(f) {
        let mut rhs = pf.clone();
        loop {
            let g = sys.reduce_rhs(&rhs)?;
            let g_norm = norm(&g);
            let target = 0.5 * config.eps * (pf_norm / g_norm.max(f64::MIN_POSITIVE)).min(1.0)
                * if refinements == 0 { 1.0 } else { pf_norm / norm(&rhs) };
            let out = pcg(
                |v| sys.schur.apply(v),
                |r| sys.factor.solve(r),
                &g,
                target.min(0.5),
                &null_pre,
                config.max_iters.saturating_sub(iterations).max(1),
            )?;
            iterations += out.iterations;
            history.extend(out.residual_history.iter().map(|h| h * g_norm / pf_norm));
            kappa_estimate = kappa_estimate.or(out.kappa_estimate);
            let dx = sys.extend(&rhs, &out.x)?;
            axpy(1.0, &dx, &mut x);
            project_out_in_place(&mut x, &null_a)?;
            let ax = a.apply(&x)?;
            rhs = pf.iter().zip(&ax).map(|(p, q)| p - q).collect();
            project_out_in_place(&mut rhs, &null_a)?;
            residual = norm(&rhs) / pf_norm;
            if residual <= config.eps {
                break;
            }
            if refinements == 3 || iterations >= config.max_iters {
                return Err(Error::PcgMaxIters { iterations, residual });
            }
            refinements += 1;
        }
    }
    times.pcg_ms = ms(t);

    let kappa_oracle = if config.oracle_checks && sys.vertices.len() <= ORACLE_MAX_VERTICES {
        let sc = DenseSym::from_row_major(sys.schur.order(), sys.schur.to_dense())?;
        let b = DenseSym::from_row_major(sys.preconditioner.order(), sys.preconditioner.to_dense())?;
        Some(oracle::generalized_condition(&sc, &b, Some(&null_pre))?.kappa())
    } else {
        None
    };
    times.total_ms = ms(start);

    let fs = sys.factor.stats();
    let per_iter = 9 * sys.schur.nnz_blocks() as u64 + 18 * fs.factor_blocks as u64;
    let mut flops = PhaseFlops {
        interior: sys.interior_stats.flops,
        factor: fs.flops,
        pcg: iterations as u64 * per_iter,
        substitution: (refinements as u64 + 1) * sys.substitution_flops(),
        total: 0,
    };
    flops.total = flops.interior + flops.factor + flops.pcg + flops.substitution;

    let mut chunk_count = vec![0u8; n];
    for c in &chunks {
        for v in mesh.vertices_of(c) {
            chunk_count[v] = chunk_count[v].saturating_add(1);
        }
    }
    let chunk_reports = plans
        .into_iter()
        .zip(&hollowings)
        .map(|(plan, h)| match h {
            Some(h) => ChunkReport {
                plan,
                hollow_tets: Some(h.tets.len()),
                hollow_points: Some(h.boundary_vertices.len()),
                interior_vertices: h.interior_chunks.iter().map(|c| c.vertices.len()).sum(),
                interior_chunks: h.interior_chunks.len(),
                max_chunk_vertices: h.interior_chunks.iter().map(|c| c.vertices.len()).max().unwrap_or(0),
                max_chunk_contacts: h.interior_chunks.iter().map(|c| c.contacts.len()).max().unwrap_or(0),
            },
            None => ChunkReport {
                plan,
                hollow_tets: None,
                hollow_points: None,
                interior_vertices: 0,
                interior_chunks: 0,
                max_chunk_vertices: 0,
                max_chunk_contacts: 0,
            },
        })
        .collect();

    let report = SolveReport {
        n,
        k: chunks.len(),
        regime: params.regime,
        l: params.l,
        iterations,
        residual,
        residual_history: history,
        kappa_estimate,
        kappa_oracle,
        refinements,
        preconditioner_vertices: sys.vertices.len(),
        interior_vertices: n - sys.vertices.len(),
        glue_vertices: chunk_count.iter().filter(|&&c| c > 1).count(),
        top_separator_sizes: sys.top_separator_sizes.clone(),
        null_dim: null_a.len(),
        fill_in: fs.fill_edges,
        factor_blocks: fs.factor_blocks,
        schur_nnz: sys.schur.nnz_blocks(),
        flops,
        wall: times,
        chunks: chunk_reports,
        config: config.clone(),
    };
    Ok((x, report))
}

/// Flops of factoring the whole stiffness matrix under plain geometric
/// nested dissection, plus one solve.
pub fn full_nd_flops(mesh: &TrussMesh) -> Result<crate::dissect::FillStats> {
    let g = Graph::from_tets(mesh.n_vertices(), mesh.tets())?;
    let all: Vec<usize> = (0..mesh.n_vertices()).collect();
    let o = nested_dissection(mesh.points(), &g, &all);
    let mut s = crate::dissect::fillin_flop_simulate(&g, &o);
    s.flops += 18 * s.factor_blocks as u64;
    Ok(s)
}
