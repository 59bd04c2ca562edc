mod vectors;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use trussnd::dissect::{nested_dissection, Graph};
use trussnd::hollow::verify_hollowing;
use trussnd::mesh::{
    generate_grid_truss, generate_union, is_stiffly_connected, place_along, read_mesh_json, validate_edge_simple,
    write_mesh_json, EdgeSimpleReport, GlueAxis, QualityLimits,
};
use trussnd::oracle::{dense_eigenvalues, dense_stiffness};
use trussnd::scaling::{random_load, run_suite, Suite, CSV_HEADER};
use trussnd::solve::{chunk_boxes, hollow_chunks, plan_parameters, preconditioner_ordering};
use trussnd::stiffness::{assemble, write_matrix_market};
use trussnd::{truss_solver, Error, SolverConfig, TrussMesh};

use vectors::{read_vector, write_vector, VectorFormat};

/// Largest mesh (in vertices) for which `check` runs the dense spectral section.
const SPECTRAL_MAX_VERTICES: usize = 700;

#[derive(Parser)]
#[command(name = "trussnd", version, about = "Incomplete nested dissection solver for 3-D truss stiffness systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh: `grid NX NY NZ` or `union grid:A,B,C grid:A,B,C ... --glue x`.
    Gen {
        kind: String,
        args: Vec<String>,
        /// Glue axis for unions.
        #[arg(long, default_value = "x")]
        glue: String,
        /// Stiffness coefficient of every bar.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Validate a mesh and, for small meshes, report rank and smallest eigenvalue.
    Check { mesh: PathBuf },
    /// Solve A x = f.
    Solve {
        mesh: PathBuf,
        /// Load vector file.
        #[arg(long, conflicts_with = "random_rhs")]
        rhs: Option<PathBuf>,
        /// Use a random load seeded by --seed.
        #[arg(long)]
        random_rhs: bool,
        /// Solution output file.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Report output file (stdout when absent).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "bin")]
        format: VectorFormat,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Run a benchmark suite (scaling-n, scaling-k, hollow-r) and write CSV.
    Bench {
        suite: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Write the stiffness matrix in Matrix Market format.
    ExportMm {
        mesh: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the preconditioner elimination ordering.
    Order {
        mesh: PathBuf,
        /// Order all vertices by plain geometric nested dissection instead.
        #[arg(long)]
        full: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Hollow each chunk and report sizes, plane probes and (with --oracle) the pencil spectrum.
    HollowStats {
        mesh: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Hollowing exponent: r_i = n_i^cr.
    #[arg(long)]
    cr: Option<f64>,
    /// Aspect-ratio exponent: chunks with ratio above n_i^calpha are kept whole.
    #[arg(long)]
    calpha: Option<f64>,
    /// Top-level separator count; 0 picks it automatically.
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Enable dense cross-checks.
    #[arg(long)]
    oracle: bool,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            eps: self.eps,
            c_alpha: self.calpha,
            c_r: self.cr,
            l: (self.l > 0).then_some(self.l),
            seed: self.seed,
            max_iters: self.max_iters,
            oracle_checks: self.oracle,
            ..SolverConfig::default()
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    NotConverged(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let diverged = matches!(
            e.downcast_ref::<Error>(),
            Some(Error::PcgMaxIters { .. } | Error::PcgBreakdown(_) | Error::NoConvergence)
        );
        if diverged {
            Failure::NotConverged(e)
        } else {
            Failure::Input(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(e)) => {
            eprintln!("not converged: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("TRUSS_THREADS") {
        let n: usize = v.parse().with_context(|| format!("TRUSS_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("TRUSS_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Gen { kind, args, glue, gamma, out } => {
            let mesh = generate(&kind, &args, &glue, gamma)?;
            with_output(out.as_deref(), |w| Ok(write_mesh_json(&mesh, w)?))?;
        }
        Command::Check { mesh } => {
            let mesh = load_mesh(&mesh)?;
            let report = check(&mesh)?;
            with_output(None, |w| write_json(w, &report))?;
        }
        Command::Solve { mesh, rhs, random_rhs, out, report, format, solver } => {
            let mesh = load_mesh(&mesh)?;
            let config = solver.config();
            config.validate()?;
            let n3 = 3 * mesh.n_vertices();
            let f = match (rhs, random_rhs) {
                (Some(p), _) => read_vector(&p, format)?,
                (None, true) => random_load(n3, config.seed),
                (None, false) => return Err(anyhow!("give a load with --rhs FILE or --random-rhs").into()),
            };
            if f.len() != n3 {
                return Err(anyhow!("load has {} entries, mesh needs {n3}", f.len()).into());
            }
            let (x, rep) = truss_solver(&mesh, &f, &config)?;
            if let Some(p) = out {
                write_vector(&p, &x, format)?;
            }
            with_output(report.as_deref(), |w| write_json(w, &rep))?;
            log::info!("converged in {} iterations, residual {:.3e}", rep.iterations, rep.residual);
        }
        Command::Bench { suite, out, solver } => {
            let suite: Suite = suite.parse()?;
            let config = solver.config();
            config.validate()?;
            let res = run_suite(suite, &config)?;
            with_output(out.as_deref(), |w| {
                let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
                csv.write_record(CSV_HEADER)?;
                for row in res.csv_rows() {
                    csv.serialize(row)?;
                }
                csv.flush()?;
                Ok(())
            })?;
        }
        Command::ExportMm { mesh, out } => {
            let a = assemble(&load_mesh(&mesh)?)?;
            with_output(out.as_deref(), |w| Ok(write_matrix_market(&a, w)?))?;
        }
        Command::Order { mesh, full, out, solver } => {
            let mesh = load_mesh(&mesh)?;
            let ordering = if full {
                let g = Graph::from_tets(mesh.n_vertices(), mesh.tets())?;
                let all: Vec<usize> = (0..mesh.n_vertices()).collect();
                nested_dissection(mesh.points(), &g, &all)
            } else {
                preconditioner_ordering(&mesh, &solver.config())?.1.ordering
            };
            with_output(out.as_deref(), |w| Ok(ordering.write_text(w)?))?;
        }
        Command::HollowStats { mesh, solver } => {
            let mesh = load_mesh(&mesh)?;
            let stats = hollow_stats(&mesh, &solver.config())?;
            with_output(None, |w| write_json(w, &stats))?;
        }
    }
    Ok(())
}

fn load_mesh(path: &Path) -> Result<TrussMesh> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_mesh_json(BufReader::new(file)).with_context(|| format!("invalid mesh {}", path.display()))
}

fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("expected three comma-separated cube counts, got {s:?}");
    }
    let mut d = [0; 3];
    for (slot, p) in d.iter_mut().zip(parts) {
        *slot = p.trim().parse().with_context(|| format!("bad cube count {p:?} in {s:?}"))?;
        if *slot == 0 {
            bail!("cube counts must be positive in {s:?}");
        }
    }
    Ok(d)
}

fn generate(kind: &str, args: &[String], glue: &str, gamma: f64) -> Result<TrussMesh> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        bail!("gamma must be positive, got {gamma}");
    }
    match kind {
        "grid" => {
            if args.len() != 3 {
                bail!("usage: gen grid NX NY NZ");
            }
            let d = parse_dims(&args.join(","))?;
            Ok(generate_grid_truss(d[0], d[1], d[2], gamma))
        }
        "union" => {
            if args.is_empty() {
                bail!("usage: gen union grid:A,B,C [grid:A,B,C ...] --glue AXIS");
            }
            let dims = args
                .iter()
                .map(|a| {
                    let body = a.strip_prefix("grid:").ok_or_else(|| anyhow!("chunk {a:?} must look like grid:A,B,C"))?;
                    parse_dims(body)
                })
                .collect::<Result<Vec<_>>>()?;
            let axis: GlueAxis = glue.parse()?;
            Ok(generate_union(&place_along(&dims, axis), gamma)?)
        }
        other => bail!("unknown mesh kind {other:?} (expected grid or union)"),
    }
}

#[derive(Serialize)]
struct CheckReport {
    n: usize,
    tets: usize,
    edges: usize,
    chunks: usize,
    simplicial_complex: bool,
    edge_simple: bool,
    stiffly_connected: bool,
    /// Largest distance between two vertices.
    diameter: f64,
    quality: EdgeSimpleReport,
    spectral: Option<Spectral>,
}

#[derive(Serialize)]
struct Spectral {
    rank: usize,
    expected_rank: usize,
    lambda_min: f64,
    lambda_max: f64,
    /// λ_min · n · Δ⁴.
    lambda_min_scaled: f64,
}

fn check(mesh: &TrussMesh) -> Result<CheckReport> {
    let quality = validate_edge_simple(mesh, &QualityLimits::default());
    let n = mesh.n_vertices();
    let diameter = mesh.diameter();
    let spectral = if n <= SPECTRAL_MAX_VERTICES {
        let vals = dense_eigenvalues(&dense_stiffness(mesh))?;
        let top = vals.last().copied().unwrap_or(0.0);
        let positive: Vec<f64> = vals.iter().copied().filter(|&v| v > 1e-8 * top).collect();
        let lambda_min = positive.first().copied().unwrap_or(0.0);
        Some(Spectral {
            rank: positive.len(),
            expected_rank: (3 * n).saturating_sub(6),
            lambda_min,
            lambda_max: top,
            lambda_min_scaled: lambda_min * n as f64 * diameter.powi(4),
        })
    } else {
        None
    };
    Ok(CheckReport {
        n,
        tets: mesh.n_tets(),
        edges: mesh.edges().len(),
        chunks: mesh.num_chunks(),
        simplicial_complex: quality.is_simplicial_complex(),
        edge_simple: quality.is_edge_simple(),
        stiffly_connected: is_stiffly_connected(mesh),
        diameter,
        quality,
        spectral,
    })
}

#[derive(Serialize)]
struct ChunkHollowStats {
    chunk: usize,
    plan: trussnd::solve::ChunkPlan,
    metrics: Option<trussnd::hollow::HollowMetrics>,
}

fn hollow_stats(mesh: &TrussMesh, config: &SolverConfig) -> Result<Vec<ChunkHollowStats>> {
    config.validate()?;
    let boxes = chunk_boxes(mesh)?;
    let params = plan_parameters(mesh, &boxes, config);
    let (plans, hollowings) = hollow_chunks(mesh, &boxes, &params)?;
    let probes: Vec<f64> = (0..8).map(|i| i as f64 * std::f64::consts::PI / 8.0).collect();
    mesh.chunk_list()
        .iter()
        .zip(plans)
        .zip(&hollowings)
        .enumerate()
        .map(|(i, ((chunk, plan), h))| {
            let metrics = h
                .as_ref()
                .map(|h| verify_hollowing(mesh, chunk, h, &probes, config.oracle_checks))
                .transpose()?;
            Ok(ChunkHollowStats { chunk: i, plan, metrics })
        })
        .collect()
}
