use log::debug;
use serde::{Deserialize, Serialize};

use super::{candidate_buses, check_violations, solve_storage, PipelineError, PlanningParams};
use crate::ev::{scenario_loads, EvConfig, LoadMode};
use crate::grid::NetworkCase;
use crate::models::{build_vmbp, ReportStatus};

/// Penetration is searched on `0, 0.5, ..., 100` percent.
pub const GRID_POINTS: usize = 201;

fn grid_pct(i: usize) -> f64 {
    i as f64 * 100.0 / (GRID_POINTS - 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostingOptions {
    /// Rebase the feeder to this voltage first; `None` keeps the case value.
    pub base_kv: Option<f64>,
    pub charger_kw: f64,
    pub seed: u32,
    pub power_factor: f64,
    /// Allow storage on the candidate buses (feasibility limit) instead of
    /// requiring a violation-free network (violation onset).
    pub with_bess: bool,
}

impl HostingOptions {
    pub fn new(charger_kw: f64, with_bess: bool) -> Self {
        Self {
            base_kv: None,
            charger_kw,
            seed: 42,
            power_factor: 1.0,
            with_bess,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostingCapacity {
    pub base_kv: f64,
    pub charger_kw: f64,
    pub with_bess: bool,
    /// Largest grid penetration that passes, percent. Zero when even the
    /// base case fails.
    pub threshold_pct: f64,
    /// Whether the base case (no chargers) passes.
    pub passes_at_zero: bool,
    /// Every evaluated `(penetration %, pass)` pair, in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
}

/// Tests one penetration level.
pub fn passes_at(
    net: &NetworkCase,
    opts: &HostingOptions,
    penetration: f64,
    params: &PlanningParams,
) -> Result<bool, PipelineError> {
    let cfg = EvConfig {
        penetration,
        charger_kw: opts.charger_kw,
        seed: opts.seed,
        power_factor: opts.power_factor,
    };
    let loads = scenario_loads(net, &cfg, LoadMode::Horizon)?;
    let report = check_violations(net, &loads, LoadMode::Horizon, &params.solver)?;
    if report.is_clean() {
        return Ok(true);
    }
    let buses = candidate_buses(net);
    if !opts.with_bess || buses.is_empty() || report.status == ReportStatus::SolverFailure {
        return Ok(false);
    }
    let model = build_vmbp(net, &loads, &params.bess, &buses)?;
    let (sol, _) = solve_storage(net, &model, &params.solver)?;
    Ok(sol.has_point())
}

/// Bisection for the largest penetration that passes, assuming passing is
/// monotone in penetration (allocations are nested for a fixed seed).
pub fn hosting_capacity(
    net: &NetworkCase,
    opts: &HostingOptions,
    params: &PlanningParams,
) -> Result<HostingCapacity, PipelineError> {
    let net = match opts.base_kv {
        Some(kv) if kv != net.params().base_kv => net.rebase_voltage(kv)?,
        _ => net.clone(),
    };
    let mut evaluations = Vec::new();
    let mut eval = |i: usize| -> Result<bool, PipelineError> {
        let pct = grid_pct(i);
        let ok = passes_at(&net, opts, pct / 100.0, params)?;
        debug!("penetration {pct:.1}%: {}", if ok { "pass" } else { "fail" });
        evaluations.push((pct, ok));
        Ok(ok)
    };
    let last = GRID_POINTS - 1;
    let passes_at_zero = eval(0)?;
    let threshold = if !passes_at_zero {
        0
    } else if eval(last)? {
        last
    } else {
        let (mut lo, mut hi) = (0, last);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(HostingCapacity {
        base_kv: net.params().base_kv,
        charger_kw: opts.charger_kw,
        with_bess: opts.with_bess,
        threshold_pct: grid_pct(threshold),
        passes_at_zero,
        evaluations,
    })
}
