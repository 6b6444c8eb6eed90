//! End-to-end planning workflows: violation checks, cable upgrades,
//! storage sizing, the three-stage decomposition, hosting capacity and
//! strategy comparison.

mod compare;
mod ddcp;
mod hosting;

pub use compare::{compare_strategies, CompareOptions, Strategy, StrategyResult};
pub use ddcp::{
    apply_selected, diagnose_bottlenecks, run_ddcp, run_ddcp_ranked, select_upgrades, Bottleneck,
    BottleneckRanking, DdcpResult, DdcpRow, NRange, SelectedUpgrade, SLACK_TOL,
};
pub use hosting::{hosting_capacity, passes_at, HostingCapacity, HostingOptions, GRID_POINTS};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{SolveStatus, Solution};
use crate::ev::{EvError, LoadMode, LoadSet};
use crate::grid::{BusId, CableCatalog, GridError, NetworkCase};
use crate::models::{
    build_vcu, build_vdq, build_vmbp, extract_bess_plan, extract_upgrade_plan, extract_violations, polish_dispatch,
    vcu_candidates, BessHeuristic, BessParams, BessPlan, ModelError, UpgradePlan, VcuHeuristic, VcuOptions,
    ViolationReport, VmbpModel,
};
use crate::solver::{SolveParams, Solver};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Loads(#[from] EvError),
    #[error("the relaxed storage model is infeasible: voltage limits cannot be met even with unlimited line capacity")]
    RelaxedInfeasible,
    #[error("solver stopped with status {0:?}")]
    Solver(SolveStatus),
    #[error("invalid top-N range {lo}..={hi} for a ranking of {len} branches")]
    BadRange { lo: usize, hi: usize, len: usize },
    #[error("{0}")]
    Usage(String),
}

/// Settings shared by every workflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanningParams {
    pub solver: SolveParams,
    pub bess: BessParams,
    /// Cable slack penalty ($ per squared p.u.); `None` uses the default.
    pub rho: Option<f64>,
    /// Ampacity slack price ($ per squared p.u.) in the diagnostic stage;
    /// `None` minimizes slack before storage cost.
    pub lambda: Option<f64>,
}

impl Default for PlanningParams {
    fn default() -> Self {
        Self {
            solver: SolveParams::default(),
            bess: BessParams::default(),
            rho: None,
            lambda: None,
        }
    }
}

/// Solves the violation-detection model and reports loadings.
pub fn check_violations(
    net: &NetworkCase,
    loads: &LoadSet,
    mode: LoadMode,
    solver: &SolveParams,
) -> Result<ViolationReport, PipelineError> {
    let model = build_vdq(net, loads, mode)?;
    let sol = Solver::new(solver.clone()).relaxation(&model.program);
    debug!("violation check: {:?}, objective {:.6e}", sol.status, sol.objective);
    Ok(extract_violations(net, &model, &sol)?)
}

/// Outcome of a cable-upgrade run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcuOutcome {
    pub status: SolveStatus,
    pub before: ViolationReport,
    pub plan: Option<UpgradePlan>,
    /// Violation check of the upgraded network.
    pub after: Option<ViolationReport>,
}

impl VcuOutcome {
    pub fn feasible(&self) -> bool {
        self.plan.as_ref().is_some_and(|p| p.warnings.is_empty())
            && self.after.as_ref().is_some_and(|r| r.is_clean())
    }
}

/// Detects overloads, then selects replacement cables for every
/// overloaded branch.
pub fn run_vcu(
    net: &NetworkCase,
    loads: &LoadSet,
    catalog: &CableCatalog,
    params: &PlanningParams,
) -> Result<VcuOutcome, PipelineError> {
    let before = check_violations(net, loads, LoadMode::Horizon, &params.solver)?;
    if !before.solved() {
        return Ok(VcuOutcome {
            status: SolveStatus::Infeasible,
            before,
            plan: None,
            after: None,
        });
    }
    let candidates = vcu_candidates(net, &before, catalog)?;
    if candidates.is_empty() {
        let after = Some(before.clone());
        return Ok(VcuOutcome {
            status: SolveStatus::Optimal,
            before,
            plan: Some(UpgradePlan::default()),
            after,
        });
    }
    let model = build_vcu(
        net,
        loads,
        &candidates,
        &VcuOptions {
            rho: params.rho,
            big_m: None,
        },
    )?;
    let sol = Solver::new(params.solver.clone())
        .with_heuristic(VcuHeuristic::new(&model))
        .mixed_integer(&model.program);
    debug!("cable upgrade: {:?}, {} nodes", sol.status, sol.nodes);
    if !sol.has_point() {
        return Ok(VcuOutcome {
            status: sol.status,
            before,
            plan: None,
            after: None,
        });
    }
    let plan = extract_upgrade_plan(net, &model, &sol)?;
    for w in &plan.warnings {
        warn!("{w}");
    }
    let upgraded = plan.apply(net)?;
    let after = check_violations(&upgraded, loads, LoadMode::Horizon, &params.solver)?;
    Ok(VcuOutcome {
        status: sol.status,
        before,
        plan: Some(plan),
        after: Some(after),
    })
}

/// Outcome of a storage-only run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmbpOutcome {
    pub status: SolveStatus,
    pub plan: Option<BessPlan>,
    /// Violation check with the storage schedule applied to the loads.
    pub after: Option<ViolationReport>,
}

impl VmbpOutcome {
    pub fn feasible(&self) -> bool {
        self.plan.is_some() && self.after.as_ref().is_some_and(|r| r.is_clean())
    }
}

/// Storage candidate buses of a network.
pub fn candidate_buses(net: &NetworkCase) -> Vec<BusId> {
    net.buses().iter().filter(|b| b.bess_candidate).map(|b| b.id).collect()
}

/// Solves a storage program, re-dispatches the solution for minimum losses
/// and reads the plan.
pub(crate) fn solve_storage(
    net: &NetworkCase,
    model: &VmbpModel,
    solver: &SolveParams,
) -> Result<(Solution, Option<BessPlan>), PipelineError> {
    let s = Solver::new(solver.clone()).with_heuristic(BessHeuristic::new(model));
    let sol = s.mixed_integer(&model.program);
    debug!("storage model: {:?}, {} nodes, objective {:.6e}", sol.status, sol.nodes, sol.objective);
    if !sol.has_point() {
        return Ok((sol, None));
    }
    let polished = polish_dispatch(net, model, &sol)?;
    let psol = s.relaxation(&polished);
    let use_sol = if psol.status == SolveStatus::Optimal {
        Solution {
            status: sol.status,
            objective: sol.objective,
            bound: sol.bound,
            gap: sol.gap,
            nodes: sol.nodes,
            cone_gaps: psol.cone_gaps,
            values: psol.values,
        }
    } else {
        info!("loss-minimizing re-dispatch failed ({:?}); keeping the raw schedule", psol.status);
        sol
    };
    let plan = extract_bess_plan(model, net, &use_sol)?;
    Ok((use_sol, Some(plan)))
}

/// Sizes storage on the candidate buses under hard limits and checks the
/// scheduled result.
pub fn run_vmbp(
    net: &NetworkCase,
    loads: &LoadSet,
    params: &PlanningParams,
) -> Result<VmbpOutcome, PipelineError> {
    let model = build_vmbp(net, loads, &params.bess, &candidate_buses(net))?;
    let (sol, plan) = solve_storage(net, &model, &params.solver)?;
    let Some(plan) = plan else {
        return Ok(VmbpOutcome {
            status: sol.status,
            plan: None,
            after: None,
        });
    };
    let after = check_violations(net, &plan.apply_to_loads(net, loads)?, LoadMode::Horizon, &params.solver)?;
    Ok(VmbpOutcome {
        status: sol.status,
        plan: Some(plan),
        after: Some(after),
    })
}
