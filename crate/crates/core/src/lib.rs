//! Unfitted (cut) finite element solver for the cell-by-cell EMI model in 2D.
//!
//! A structured background mesh is cut by a level-set membrane. The bulk
//! potentials use continuous Q1 elements on the active meshes with ghost-penalty
//! stabilization, either in the single-dimensional primal form or in the
//! multi-dimensional form with the membrane current as a P0 multiplier. The
//! membrane ODEs live in a Q1 trace space with a stabilized surface mass matrix,
//! and the two are coupled by first-order (Godunov) operator splitting.

// Element loops index several local arrays at once; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::only_used_in_recursion)]

pub mod assembly;
pub mod driver;
pub mod error;
pub mod levelset;
pub mod linalg;
pub mod membrane;
pub mod mesh;
pub mod norms;
pub mod point;
pub mod quadrature;
pub mod space;

pub use assembly::{CutDiscretization, EmiParams, SurfaceField, SurfaceStab};
pub use driver::{EmiConfig, EmiSolver, Formulation, PdeSolution, Sources};
pub use error::{Error, Result};
pub use levelset::{CellLocation, CutTopology, LevelSet, Shape};
pub use linalg::{condition_number_2, solve_direct, LuFactorization, SparseMatrix};
pub use membrane::{HHParams, HodgkinHuxley, MembraneModel, MembraneState};
pub use mesh::{build_cartesian_mesh, BackgroundMesh, Bounds, DomainTag};
pub use point::Point;
pub use quadrature::{QuadratureRule, Side};
pub use space::{build_space, FESpace, Family};
