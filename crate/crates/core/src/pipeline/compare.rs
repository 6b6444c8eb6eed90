use log::info;
use serde::{Deserialize, Serialize};

use super::{check_violations, run_ddcp, run_vcu, run_vmbp, NRange, PipelineError, PlanningParams};
use crate::ev::{LoadMode, LoadSet};
use crate::grid::{CableCatalog, NetworkCase};
use crate::models::ViolationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Vcu,
    VmbpOnly,
    Ddcp,
    UprateVcu,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Vcu, Strategy::VmbpOnly, Strategy::Ddcp, Strategy::UprateVcu];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Vcu => "VCU",
            Strategy::VmbpOnly => "VMBP-only",
            Strategy::Ddcp => "DDCP",
            Strategy::UprateVcu => "uprate+VCU",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Target voltage of the uprating strategy, kV.
    pub uprate_kv: f64,
    pub ddcp_range: Option<NRange>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            uprate_kv: 13.8,
            ddcp_range: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub feasible: bool,
    pub cable_cost: f64,
    pub bess_cost: f64,
    pub total_cost: f64,
    pub upgraded_branches: usize,
    pub bess_capacity_kwh: f64,
    /// Overloaded branches plus low-voltage (bus, step) pairs left after
    /// the plan; `None` when no plan was produced.
    pub residual_violations: Option<usize>,
    pub note: String,
}

impl StrategyResult {
    fn infeasible(strategy: Strategy, note: String) -> Self {
        Self {
            strategy,
            feasible: false,
            cable_cost: f64::NAN,
            bess_cost: f64::NAN,
            total_cost: f64::NAN,
            upgraded_branches: 0,
            bess_capacity_kwh: f64::NAN,
            residual_violations: None,
            note,
        }
    }
}

fn residual(report: &ViolationReport) -> Option<usize> {
    report
        .solved()
        .then(|| report.overloaded_branches().len() + report.voltage_violations().len())
}

fn vcu_result(
    strategy: Strategy,
    net: &NetworkCase,
    loads: &LoadSet,
    catalog: &CableCatalog,
    params: &PlanningParams,
) -> Result<StrategyResult, PipelineError> {
    let out = match run_vcu(net, loads, catalog, params) {
        Ok(o) => o,
        Err(PipelineError::Model(e)) => return Ok(StrategyResult::infeasible(strategy, e.to_string())),
        Err(e) => return Err(e),
    };
    let Some(plan) = &out.plan else {
        let note = if out.before.solved() {
            format!("cable selection failed: {:?}", out.status)
        } else {
            "model collapse".to_string()
        };
        return Ok(StrategyResult::infeasible(strategy, note));
    };
    let after = out.after.as_ref().expect("plan implies a check");
    Ok(StrategyResult {
        strategy,
        feasible: out.feasible(),
        cable_cost: plan.total_cost,
        bess_cost: 0.0,
        total_cost: plan.total_cost,
        upgraded_branches: plan.upgrades.len(),
        bess_capacity_kwh: 0.0,
        residual_violations: residual(after),
        note: plan.warnings.join("; "),
    })
}

/// Runs every strategy on the same network and loads. Strategies that
/// cannot produce a violation-free plan are reported as infeasible.
pub fn compare_strategies(
    net: &NetworkCase,
    loads: &LoadSet,
    catalog: &CableCatalog,
    params: &PlanningParams,
    opts: &CompareOptions,
) -> Result<Vec<StrategyResult>, PipelineError> {
    let mut out = Vec::with_capacity(4);
    out.push(vcu_result(Strategy::Vcu, net, loads, catalog, params)?);

    let r = match run_vmbp(net, loads, params) {
        Ok(v) => match (&v.plan, &v.after) {
            (Some(plan), Some(after)) => StrategyResult {
                strategy: Strategy::VmbpOnly,
                feasible: v.feasible(),
                cable_cost: 0.0,
                bess_cost: plan.total_cost,
                total_cost: plan.total_cost,
                upgraded_branches: 0,
                bess_capacity_kwh: plan.total_capacity_kwh,
                residual_violations: residual(after),
                note: plan.warnings.join("; "),
            },
            _ => StrategyResult::infeasible(Strategy::VmbpOnly, format!("storage sizing: {:?}", v.status)),
        },
        Err(PipelineError::Model(e)) => StrategyResult::infeasible(Strategy::VmbpOnly, e.to_string()),
        Err(e) => return Err(e),
    };
    out.push(r);

    let r = match run_ddcp(net, loads, catalog, params, opts.ddcp_range) {
        Ok(d) => match (&d.bess, &d.check, d.total_cost) {
            (Some(plan), Some(check), Some(total)) => StrategyResult {
                strategy: Strategy::Ddcp,
                feasible: check.is_clean(),
                cable_cost: total - plan.total_cost,
                bess_cost: plan.total_cost,
                total_cost: total,
                upgraded_branches: d.upgrades.len(),
                bess_capacity_kwh: plan.total_capacity_kwh,
                residual_violations: residual(check),
                note: format!("N = {}", d.chosen_n.unwrap_or(0)),
            },
            _ => StrategyResult::infeasible(Strategy::Ddcp, "no upgrade count is feasible".into()),
        },
        Err(e @ (PipelineError::Model(_) | PipelineError::RelaxedInfeasible | PipelineError::Solver(_))) => {
            StrategyResult::infeasible(Strategy::Ddcp, e.to_string())
        }
        Err(e) => return Err(e),
    };
    out.push(r);

    let uprated = net.rebase_voltage(opts.uprate_kv)?;
    let mut r = vcu_result(Strategy::UprateVcu, &uprated, loads, catalog, params)?;
    if r.feasible || r.residual_violations.is_some() {
        let before = check_violations(&uprated, loads, LoadMode::Horizon, &params.solver)?;
        r.note = format!(
            "{} kV, {} overloaded branches before cable selection",
            opts.uprate_kv,
            before.overloaded_branches().len()
        );
    }
    out.push(r);
    for s in &out {
        info!("{}: feasible {}, total ${:.2}", s.strategy.label(), s.feasible, s.total_cost);
    }
    Ok(out)
}
