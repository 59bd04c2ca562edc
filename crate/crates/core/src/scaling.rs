//! Benchmark suites: generated instance families, per-instance measurement
//! rows and least-squares log-log exponent fits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{generate_grid_truss, generate_union, place_along, GlueAxis, TrussMesh};
use crate::solve::{full_nd_flops, truss_solver, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Cubic grids with about 1k, 4k and 10k vertices.
    ScalingN,
    /// Unions of 1, 2, 4 and 8 glued cubes.
    ScalingK,
    /// One 12³ grid hollowed with r = 27, 64, 125.
    HollowR,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::ScalingN, Suite::ScalingK, Suite::HollowR];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ScalingN => "scaling-n",
            Suite::ScalingK => "scaling-k",
            Suite::HollowR => "hollow-r",
        }
    }

    /// Column whose log the exponents are fitted against.
    pub fn fit_variable(self) -> &'static str {
        match self {
            Suite::ScalingN => "n",
            Suite::ScalingK => "k",
            Suite::HollowR => "r",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown suite {s:?} (expected scaling-n, scaling-k or hollow-r)")))
    }
}

/// A generated mesh with the solver configuration to run on it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub mesh: TrussMesh,
    pub config: SolverConfig,
}

/// Cube side giving about `n` grid vertices.
fn cube_side(n: usize) -> usize {
    ((n as f64).cbrt().round() as usize).saturating_sub(1).max(1)
}

pub fn suite_instances(suite: Suite, base: &SolverConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    match suite {
        Suite::ScalingN => {
            for n in [1000, 4000, 10_000] {
                let s = cube_side(n);
                out.push(Instance {
                    label: format!("grid-{s}"),
                    mesh: generate_grid_truss(s, s, s, 1.0),
                    config: base.clone(),
                });
            }
        }
        Suite::ScalingK => {
            for k in [1, 2, 4, 8] {
                let shapes = place_along(&vec![[8, 8, 8]; k], GlueAxis::X);
                out.push(Instance {
                    label: format!("union-{k}x8"),
                    mesh: generate_union(&shapes, 1.0)?,
                    config: base.clone(),
                });
            }
        }
        Suite::HollowR => {
            let mesh = generate_grid_truss(12, 12, 12, 1.0);
            let n = mesh.n_vertices() as f64;
            for r in [27.0f64, 64.0, 125.0] {
                out.push(Instance {
                    label: format!("grid-12-r{r}"),
                    mesh: mesh.clone(),
                    config: SolverConfig {
                        c_r: Some(r.ln() / n.ln()),
                        ..base.clone()
                    },
                });
            }
        }
    }
    Ok(out)
}

/// One measured instance. Fit rows carry exponents in `flops` and
/// `baseline_flops` and leave the other counters empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub suite: String,
    pub label: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    /// Largest hollowing parameter used.
    pub r: Option<f64>,
    pub l: Option<usize>,
    pub fill_in: Option<usize>,
    pub schur_nnz: Option<usize>,
    pub flops: f64,
    /// Factorization of the whole matrix under geometric nested dissection.
    pub baseline_flops: f64,
    pub iterations: Option<usize>,
    pub kappa_est: Option<f64>,
    pub residual: Option<f64>,
    pub setup_ms: Option<f64>,
    pub hollow_ms: Option<f64>,
    pub interior_ms: Option<f64>,
    pub ordering_ms: Option<f64>,
    pub factor_ms: Option<f64>,
    pub pcg_ms: Option<f64>,
    pub total_ms: Option<f64>,
}

/// Column names of `BenchRow`, in CSV order.
pub const CSV_HEADER: [&str; 20] = [
    "suite",
    "label",
    "n",
    "k",
    "r",
    "l",
    "fill_in",
    "schur_nnz",
    "flops",
    "baseline_flops",
    "iterations",
    "kappa_est",
    "residual",
    "setup_ms",
    "hollow_ms",
    "interior_ms",
    "ordering_ms",
    "factor_ms",
    "pcg_ms",
    "total_ms",
];

/// Least-squares line through (ln x, ln y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub exponent: f64,
    pub intercept: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateGeometry("log-log fit needs two or more positive points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateGeometry("log-log fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(LogLogFit {
        exponent,
        intercept: my - exponent * mx,
    })
}

/// Random load with entries uniform in [-1, 1).
pub fn random_load(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn run_instance(suite: Suite, inst: &Instance, seed: u64) -> Result<BenchRow> {
    let f = random_load(3 * inst.mesh.n_vertices(), seed);
    let (_, rep) = truss_solver(&inst.mesh, &f, &inst.config)?;
    let base = full_nd_flops(&inst.mesh)?;
    let r = rep.chunks.iter().filter_map(|c| c.plan.r).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(BenchRow {
        suite: suite.name().into(),
        label: inst.label.clone(),
        n: Some(rep.n),
        k: Some(rep.k),
        r,
        l: Some(rep.l),
        fill_in: Some(rep.fill_in),
        schur_nnz: Some(rep.schur_nnz),
        flops: rep.flops.total as f64,
        baseline_flops: base.flops as f64,
        iterations: Some(rep.iterations),
        kappa_est: rep.kappa_estimate,
        residual: Some(rep.residual),
        setup_ms: Some(rep.wall.setup_ms),
        hollow_ms: Some(rep.wall.hollow_ms),
        interior_ms: Some(rep.wall.interior_ms),
        ordering_ms: Some(rep.wall.ordering_ms),
        factor_ms: Some(rep.wall.factor_ms),
        pcg_ms: Some(rep.wall.pcg_ms),
        total_ms: Some(rep.wall.total_ms),
    })
}

/// Measured rows of a suite and the fitted flop exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub rows: Vec<BenchRow>,
    pub pipeline_fit: LogLogFit,
    pub baseline_fit: LogLogFit,
}

impl SuiteResult {
    /// The measured rows followed by one row holding the exponents.
    pub fn csv_rows(&self) -> Vec<BenchRow> {
        let mut rows = self.rows.clone();
        rows.push(BenchRow {
            suite: self.suite.name().into(),
            label: format!("fit-exponent-vs-{}", self.suite.fit_variable()),
            n: None,
            k: None,
            r: None,
            l: None,
            fill_in: None,
            schur_nnz: None,
            flops: self.pipeline_fit.exponent,
            baseline_flops: self.baseline_fit.exponent,
            iterations: None,
            kappa_est: None,
            residual: None,
            setup_ms: None,
            hollow_ms: None,
            interior_ms: None,
            ordering_ms: None,
            factor_ms: None,
            pcg_ms: None,
            total_ms: None,
        });
        rows
    }
}

pub fn run_suite(suite: Suite, base: &SolverConfig) -> Result<SuiteResult> {
    let instances = suite_instances(suite, base)?;
    let rows = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            log::info!("{suite}: running {}", inst.label);
            run_instance(suite, inst, base.seed.wrapping_add(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows
        .iter()
        .map(|row| match suite {
            Suite::ScalingN => row.n.unwrap_or(0) as f64,
            Suite::ScalingK => row.k.unwrap_or(0) as f64,
            Suite::HollowR => row.r.unwrap_or(0.0),
        })
        .collect();
    let pf: Vec<f64> = rows.iter().map(|r| r.flops).collect();
    let bf: Vec<f64> = rows.iter().map(|r| r.baseline_flops).collect();
    Ok(SuiteResult {
        suite,
        pipeline_fit: fit_loglog(&x, &pf)?,
        baseline_fit: fit_loglog(&x, &bf)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let xs = [10.0, 100.0, 1000.0, 5000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.5 * x.powf(1.7)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-12);
        assert!((fit.intercept - 3.5f64.ln()).abs() < 1e-10);
        assert!(fit_loglog(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0, 0.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("scaling".parse::<Suite>().is_err());
    }

    #[test]
    fn instance_sizes() {
        let base = SolverConfig::default();
        let n: Vec<usize> = suite_instances(Suite::ScalingN, &base)
            .unwrap()
            .iter()
            .map(|i| i.mesh.n_vertices())
            .collect();
        assert_eq!(n, vec![1000, 4096, 10648]);
        let k: Vec<usize> = suite_instances(Suite::ScalingK, &base)
            .unwrap()
            .iter()
            .map(|i| i.mesh.num_chunks())
            .collect();
        assert_eq!(k, vec![1, 2, 4, 8]);
        for inst in suite_instances(Suite::HollowR, &base).unwrap() {
            let r = (inst.mesh.n_vertices() as f64).powf(inst.config.c_r.unwrap());
            assert!([27.0, 64.0, 125.0].iter().any(|t| (r - t).abs() < 1e-9));
        }
    }
}
