//! Shape optimization of permanent magnet machines against eddy-current
//! losses in the magnets and average torque.
//!
//! The pipeline is: a time-stepped magneto-quasi-static state solve
//! ([`state`]), cost evaluation ([`quantities`]), a backward adjoint sweep
//! ([`adjoint`]) and the discrete shape gradient with respect to node
//! coordinates, descent direction and line search ([`shapeopt`]).

// NaN must fail the positivity checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod assembly;
pub mod error;
pub mod materials;
pub mod mesh;
pub mod model;
pub mod quantities;
pub mod shapeopt;
pub mod state;

pub use adjoint::{solve_adjoint, AdjointTrajectory};
pub use error::{Error, Result};
pub use materials::{DriveSpec, MaterialSpec, MaterialTable, ReluctivityModel};
pub use mesh::{Mesh, Point};
pub use model::Model;
pub use quantities::{CostBreakdown, CostSettings};
pub use shapeopt::{OptimizationHistory, ShapeGradient, ShapeOptSettings};
pub use state::{solve_trajectory, SolverSettings, StateTrajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
