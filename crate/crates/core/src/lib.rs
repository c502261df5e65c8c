pub mod elementary;
pub mod builders;
pub mod error;
pub mod gallery;
pub mod linsolve;
pub mod model;
pub mod powerflow;
pub mod report;
pub mod solver;

pub use elementary::{Argument, BranchSelector, Elementary, Kind, Mode, C64};
pub use error::{Error, Result};
pub use model::{AuxInit, AuxTerm, EvalPoint, FactoredSystem, Recovery, SystemSpec};
pub use solver::{solve, solve_newton, NewtonSpace, SolveOutcome, SolverConfig, Status, Variant};
