//! Mixed-integer second-order cone solver.
//!
//! Branch-and-bound over the binaries of a [`ConicProgram`], with every
//! node relaxation handed to a pluggable [`ConicBackend`]. Clarabel is the
//! bundled backend.

mod backend;
mod bnb;
mod enumerate;
mod params;

pub use backend::{BackendResult, BackendStatus, ClarabelBackend, ConicBackend};
pub use bnb::{IncumbentHeuristic, RoundingHeuristic, Solver};
pub use enumerate::{enumerate_oracle, TooManyBinaries, MAX_ENUMERATED_BINARIES};
pub use params::SolveParams;

use crate::conic::{ConicProgram, Solution};

/// Solves the continuous relaxation (binaries treated as `[0, 1]`).
pub fn solve_relaxation(prog: &ConicProgram, params: &SolveParams) -> Solution {
    Solver::new(params.clone()).relaxation(prog)
}

/// Solves the program to the configured gap with the default backend and
/// rounding heuristic.
pub fn solve_mixed_integer(prog: &ConicProgram, params: &SolveParams) -> Solution {
    Solver::new(params.clone()).mixed_integer(prog)
}
