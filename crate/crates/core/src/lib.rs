//! Incomplete nested dissection for linear systems in 3-D truss stiffness matrices.
//!
//! The pipeline hollows out well-shaped convex pieces of a tetrahedral truss,
//! eliminates the hollowed interiors exactly, and solves the remaining Schur
//! complement system with conjugate gradient preconditioned by a nested
//! dissection factorization of the hollowed truss.
//!
//! Module map:
//!
//! - [`mesh`]: trusses, validation, generators, bounding boxes, rigidity.
//! - [`stiffness`]: stiffness assembly, rigid-body modes, Matrix Market export.
//! - [`oracle`]: dense brute-force references used to check everything else.
//! - [`hollow`]: r-divisions and hollowings of convex chunks.
//! - [`dissect`]: elimination orderings and symbolic fill/flop accounting.
//! - [`elim`]: sparse block Cholesky factorization and partial elimination.
//! - [`solve`]: preconditioned conjugate gradient and the full solver.
//! - [`scaling`]: benchmark suites and log-log fits.

pub mod dissect;
pub mod elim;
pub mod error;
pub mod hollow;
pub mod mesh;
pub mod oracle;
pub mod scaling;
pub mod solve;
pub mod sparse;
pub mod stiffness;

pub use error::{Error, Result};
pub use mesh::{Edge, OrientedBox, Point3, Tetrahedron, TrussMesh};
pub use solve::{truss_solver, SolveReport, SolverConfig};
pub use sparse::{Block, BlockMatrix};
pub use stiffness::StiffnessMatrix;
