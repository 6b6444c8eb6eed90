//! Planning models as conic programs.
//!
//! Every model shares the branch-flow (DistFlow) core: per branch `P`, `Q`
//! and squared current `l`, per bus squared voltage `v`, tied by nodal
//! balances, the voltage-drop identity and the rotated cone
//! `v_i * l_ij >= P_ij^2 + Q_ij^2`. Quantities are per-unit on the case
//! base; energy is in p.u.·h.
//!
//! * [`build_vdq`]: loss minimization with upper voltage limits only, so
//!   overloads show up in the solution instead of making it infeasible.
//! * [`build_vcu`]: cable selection on overloaded branches.
//! * [`build_vmbp`], [`build_relaxed_vmbp`]: battery siting and sizing with
//!   hard or penalized ampacity limits.

mod bess;
mod flow;
mod vcu;
mod vdq;

pub use bess::{
    build_relaxed_vmbp, build_vmbp, extract_bess_plan, polish_dispatch,
    BessHeuristic, BessParams, BessPlan, BessUnit, BessVars, VmbpModel, CAPACITY_TOL_KWH,
};
pub use flow::FlowVars;
pub use vcu::{
    build_vcu, extract_upgrade_plan, vcu_candidates, BranchUpgrade, UpgradePlan, VcuCandidate,
    VcuHeuristic, VcuModel, VcuOptions, MENU_MARGIN, SLACK_TOL,
};
pub use vdq::{
    build_vdq, extract_violations, loading_pct, violation_pct, LoadingStats, ReportStatus,
    VdqModel, ViolationReport, ViolationTolerance,
};

use thiserror::Error;

use crate::conic::ConicError;
use crate::ev::EvError;
use crate::grid::{BusId, GridError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Loads(#[from] EvError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("internal model construction error: {0}")]
    Conic(#[from] ConicError),
    #[error("storage models need at least 2 time steps, got {0}")]
    ShortHorizon(usize),
    #[error("no candidate {0}")]
    NoCandidates(&'static str),
    #[error("bus {0} is not a storage candidate")]
    NotCandidate(BusId),
    #[error("no catalog entry for branch ({from}, {to}) reaches the required {required_a:.1} A")]
    EmptyMenu {
        from: BusId,
        to: BusId,
        required_a: f64,
    },
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("solution has {found} values, program has {expected} variables")]
    Mismatch { expected: usize, found: usize },
}

/// Cost terms enter objectives in thousands of dollars so that cable prices,
/// storage prices and penalty weights stay within a few orders of magnitude
/// of the network variables.
pub const COST_UNIT: f64 = 1e3;
