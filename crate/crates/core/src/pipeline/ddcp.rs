use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::{check_violations, candidate_buses, solve_storage, PipelineError, PlanningParams};
use crate::conic::{Relation, Solution, SolveStatus, VarId};
use crate::ev::{LoadMode, LoadSet};
use crate::grid::{BusId, CableCatalog, CableType, NetworkCase};
use crate::models::{
    build_relaxed_vmbp, build_vmbp, extract_bess_plan, BessHeuristic, BessPlan, ModelError,
    ViolationReport, VmbpModel, COST_UNIT,
    MENU_MARGIN,
};
use crate::solver::{SolveParams, Solver};

/// Peak ampacity slack (squared p.u.) above which a branch counts as a
/// bottleneck.
pub const SLACK_TOL: f64 = 1e-6;

/// A branch that storage alone cannot relieve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub branch: usize,
    pub from: BusId,
    pub to: BusId,
    /// Slack summed over the horizon, squared p.u.
    pub slack_sum: f64,
    pub slack_peak: f64,
    /// Peak current in the diagnostic solution, A.
    pub relaxed_peak_a: f64,
    pub ampacity_a: f64,
    /// Hop distance from the substation (0 for branches leaving it).
    pub hops: usize,
}

/// Outcome of the diagnostic stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottleneckRanking {
    /// Most critical first.
    pub ranked: Vec<Bottleneck>,
    /// Objective of the diagnostic solve: storage cost in k$, plus the
    /// slack penalty when a finite penalty was used.
    pub objective: f64,
    /// Slack price; `None` when slack was minimized first.
    pub lambda: Option<f64>,
    /// Storage installed by the diagnostic solution, kWh.
    pub storage_kwh: f64,
}

impl BottleneckRanking {
    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }
}

/// Solves the storage model with ampacity slack and ranks the branches
/// that keep positive slack: larger total slack first, then shallower
/// branches, then by branch key.
///
/// With `params.lambda` set the slack is penalized at that price. Without
/// it the slack is minimized outright and storage cost second, which is
/// the limit of an unbounded penalty and avoids the badly scaled
/// objective a huge penalty produces.
pub fn diagnose_bottlenecks(
    net: &NetworkCase,
    loads: &LoadSet,
    params: &PlanningParams,
) -> Result<BottleneckRanking, PipelineError> {
    let buses = candidate_buses(net);
    let (model, sol, plan) = match params.lambda {
        Some(lambda) => {
            let model = build_relaxed_vmbp(net, loads, &params.bess, &buses, lambda)?;
            let (sol, plan) = solve_storage(net, &model, &params.solver)?;
            (model, sol, plan)
        }
        None => lexicographic(net, loads, &buses, params)?,
    };
    match sol.status {
        _ if sol.has_point() => {}
        SolveStatus::Infeasible => return Err(PipelineError::RelaxedInfeasible),
        s => return Err(PipelineError::Solver(s)),
    }
    let tau = model.tau.as_ref().expect("relaxed model has slack variables");
    let i_base = net.i_base_a();
    let mut ranked = Vec::new();
    for (k, br) in net.branches().iter().enumerate() {
        let slack: Vec<f64> = tau[k].iter().map(|s| sol.values[s.0].max(0.0)).collect();
        let peak = slack.iter().copied().fold(0.0, f64::max);
        if peak <= SLACK_TOL {
            continue;
        }
        let l_peak = (0..model.flow.steps())
            .map(|t| model.flow.current_sq(net, &sol.values, k, t))
            .fold(0.0, f64::max);
        ranked.push(Bottleneck {
            branch: k,
            from: br.from,
            to: br.to,
            slack_sum: slack.iter().fold(0.0, |a, b| a + b),
            slack_peak: peak,
            relaxed_peak_a: l_peak.sqrt() * i_base,
            ampacity_a: br.ampacity_a,
            hops: net.topology().branch_depth(k),
        });
    }
    ranked.sort_by(|a, b| {
        b.slack_sum
            .total_cmp(&a.slack_sum)
            .then(a.hops.cmp(&b.hops))
            .then((a.from, a.to).cmp(&(b.from, b.to)))
    });
    info!("diagnostic stage: {} bottleneck branches", ranked.len());
    Ok(BottleneckRanking {
        ranked,
        objective: sol.objective,
        lambda: params.lambda,
        storage_kwh: plan.map_or(0.0, |p| p.total_capacity_kwh),
    })
}

/// A cable chosen for one bottleneck.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedUpgrade {
    pub branch: usize,
    pub from: BusId,
    pub to: BusId,
    pub old_cable: String,
    pub cable: CableType,
    pub required_a: f64,
    pub cost: f64,
}

/// Cheapest catalog entry for each of the top `n` bottlenecks with
/// ampacity at least `MENU_MARGIN` times the diagnostic peak current.
pub fn select_upgrades(
    net: &NetworkCase,
    ranking: &BottleneckRanking,
    catalog: &CableCatalog,
    n: usize,
) -> Result<Vec<SelectedUpgrade>, PipelineError> {
    if n > ranking.len() {
        return Err(PipelineError::BadRange {
            lo: n,
            hi: n,
            len: ranking.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for b in &ranking.ranked[..n] {
        let br = &net.branches()[b.branch];
        let required_a = MENU_MARGIN * b.relaxed_peak_a;
        let cable = catalog
            .menu(br, required_a)
            .into_iter()
            .next()
            .ok_or(ModelError::EmptyMenu {
                from: b.from,
                to: b.to,
                required_a,
            })?
            .clone();
        out.push(SelectedUpgrade {
            branch: b.branch,
            from: b.from,
            to: b.to,
            old_cable: br.cable_type.clone(),
            cost: cable.cost_for(br),
            cable,
            required_a,
        });
    }
    Ok(out)
}

/// Inclusive range of upgrade counts to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NRange {
    pub lo: usize,
    /// `usize::MAX` stands for the ranking length.
    pub hi: usize,
}

impl NRange {
    /// Every prefix, `0..=len`, whatever the ranking length turns out to be.
    pub fn all() -> Self {
        Self { lo: 0, hi: usize::MAX }
    }

    /// The last six prefixes of the ranking: `max(1, len - 5)..=len`.
    pub fn default_for(len: usize) -> Self {
        if len == 0 {
            Self { lo: 0, hi: 0 }
        } else {
            Self {
                lo: len.saturating_sub(5).max(1),
                hi: len,
            }
        }
    }
}

/// One evaluated upgrade count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdcpRow {
    pub n: usize,
    pub status: SolveStatus,
    pub feasible: bool,
    pub cable_cost: f64,
    pub bess_cost: f64,
    pub bess_capacity_kwh: f64,
    pub total_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdcpResult {
    pub ranking: BottleneckRanking,
    pub range: NRange,
    pub rows: Vec<DdcpRow>,
    /// Upgrade count of the chosen plan, if any count was feasible.
    pub chosen_n: Option<usize>,
    pub upgrades: Vec<SelectedUpgrade>,
    pub bess: Option<BessPlan>,
    /// Violation check of the chosen plan on the upgraded network.
    pub check: Option<ViolationReport>,
    pub total_cost: Option<f64>,
}

impl DdcpResult {
    pub fn feasible(&self) -> bool {
        self.chosen_n.is_some()
    }

    pub fn row(&self, n: usize) -> Option<&DdcpRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Applies selected cables in order.
pub fn apply_selected(net: &NetworkCase, upgrades: &[SelectedUpgrade]) -> Result<NetworkCase, PipelineError> {
    let mut out = net.clone();
    for u in upgrades {
        out = out.apply_upgrade(u.from, u.to, &u.cable)?;
    }
    Ok(out)
}

/// Diagnoses bottlenecks, then for each upgrade count `n` in the range
/// replaces the top `n` cables and sizes storage on the upgraded network.
/// The cheapest feasible count wins; ties go to the smaller count.
pub fn run_ddcp(
    net: &NetworkCase,
    loads: &LoadSet,
    catalog: &CableCatalog,
    params: &PlanningParams,
    range: Option<NRange>,
) -> Result<DdcpResult, PipelineError> {
    let ranking = diagnose_bottlenecks(net, loads, params)?;
    run_ddcp_ranked(net, loads, catalog, params, ranking, range)
}

/// The upgrade and storage stages for an existing ranking.
pub fn run_ddcp_ranked(
    net: &NetworkCase,
    loads: &LoadSet,
    catalog: &CableCatalog,
    params: &PlanningParams,
    ranking: BottleneckRanking,
    range: Option<NRange>,
) -> Result<DdcpResult, PipelineError> {
    let range = match range {
        None => NRange::default_for(ranking.len()),
        Some(r) if r.hi == usize::MAX => NRange { lo: r.lo, hi: ranking.len() },
        Some(r) => r,
    };
    if range.lo > range.hi || range.hi > ranking.len() {
        return Err(PipelineError::BadRange {
            lo: range.lo,
            hi: range.hi,
            len: ranking.len(),
        });
    }
    let all = select_upgrades(net, &ranking, catalog, range.hi)?;
    let buses = candidate_buses(net);
    let eval = |n: usize| -> Result<(DdcpRow, Option<(BessPlan, NetworkCase)>), PipelineError> {
        let chosen = &all[..n];
        let cable_cost = chosen.iter().fold(0.0, |a, u| a + u.cost);
        let upgraded = apply_selected(net, chosen)?;
        let model = build_vmbp(&upgraded, loads, &params.bess, &buses)?;
        let (sol, plan) = solve_storage(&upgraded, &model, &params.solver)?;
        let row = DdcpRow {
            n,
            status: sol.status,
            feasible: plan.is_some(),
            cable_cost,
            bess_cost: plan.as_ref().map_or(f64::NAN, |p| p.total_cost),
            bess_capacity_kwh: plan.as_ref().map_or(f64::NAN, |p| p.total_capacity_kwh),
            total_cost: plan.as_ref().map_or(f64::NAN, |p| cable_cost + p.total_cost),
        };
        debug!(
            "N = {n}: {:?}, cable ${:.0}, storage {:.1} kWh, total ${:.0}",
            row.status, row.cable_cost, row.bess_capacity_kwh, row.total_cost
        );
        Ok((row, plan.map(|p| (p, upgraded))))
    };
    let counts: Vec<usize> = (range.lo..=range.hi).collect();
    // Each count is an independent solve; results are gathered in count
    // order either way, so threading never changes the outcome.
    let results: Vec<_> = if params.solver.deterministic {
        counts.iter().map(|&n| eval(n)).collect()
    } else {
        std::thread::scope(|sc| {
            let handles: Vec<_> = counts.iter().map(|&n| sc.spawn(move || eval(n))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    };
    let mut rows = Vec::new();
    let mut best: Option<(usize, f64, BessPlan, NetworkCase)> = None;
    for res in results {
        let (row, found) = res?;
        if let Some((plan, upgraded)) = found {
            if best.as_ref().is_none_or(|b| row.total_cost < b.1) {
                best = Some((row.n, row.total_cost, plan, upgraded));
            }
        }
        rows.push(row);
    }
    let Some((n, total, plan, upgraded)) = best else {
        info!("no upgrade count in {}..={} is feasible", range.lo, range.hi);
        return Ok(DdcpResult {
            ranking,
            range,
            rows,
            chosen_n: None,
            upgrades: Vec::new(),
            bess: None,
            check: None,
            total_cost: None,
        });
    };
    let scheduled = plan.apply_to_loads(&upgraded, loads)?;
    let check = check_violations(&upgraded, &scheduled, LoadMode::Horizon, &params.solver)?;
    info!("chose N = {n}, total ${total:.0}");
    Ok(DdcpResult {
        ranking,
        range,
        rows,
        chosen_n: Some(n),
        upgrades: all[..n].to_vec(),
        bess: Some(plan),
        check: Some(check),
        total_cost: Some(total),
    })
}

/// Node cap of the storage-cost phase of the diagnosis.
const STAGE_TWO_NODES: usize = 100;

/// Minimizes total slack with storage free, then storage cost with the
/// slack held at its minimum.
fn lexicographic(
    net: &NetworkCase,
    loads: &LoadSet,
    buses: &[BusId],
    params: &PlanningParams,
) -> Result<(VmbpModel, Solution, Option<BessPlan>), PipelineError> {
    // A unit price makes the slack terms read in k$ per squared p.u.
    let mut model = build_relaxed_vmbp(net, loads, &params.bess, buses, COST_UNIT)?;
    let tau: Vec<VarId> = model.tau.iter().flatten().flatten().copied().collect();
    let storage: Vec<(VarId, f64)> = model
        .units
        .iter()
        .map(|u| (u.e_cap, model.program.objective()[u.e_cap.0]))
        .collect();
    let slack: Vec<(VarId, f64)> = tau.iter().map(|&s| (s, 1.0)).collect();

    let mut first = model.clone();
    first.program.set_objective(&slack, 0.0).map_err(ModelError::from)?;
    let sol = Solver::new(params.solver.clone())
        .with_heuristic(BessHeuristic::new(&first))
        .mixed_integer(&first.program);
    if !sol.has_point() {
        return Ok((first, sol, None));
    }
    let least: f64 = tau.iter().map(|s| sol.values[s.0].max(0.0)).sum();
    debug!("least total slack {least:.6e}");
    model.program.set_objective(&storage, 0.0).map_err(ModelError::from)?;
    // The slack, and with it the ranking, is fixed by the budget row; the
    // storage cost only needs to be near its minimum, so a short search
    // is enough.
    let solver = SolveParams {
        node_limit: params.solver.node_limit.min(STAGE_TWO_NODES),
        rel_gap_tol: params.solver.rel_gap_tol.max(1e-3),
        ..params.solver.clone()
    };
    // A budget pinned at the optimum can leave the interior-point method
    // with no usable interior; widen it once before giving up.
    for rel in [1e-6, 1e-3] {
        let mut second = model.clone();
        second
            .program
            .add_linear("slackBudget", &slack, Relation::Le, least * (1.0 + rel) + 1e-9)
            .map_err(ModelError::from)?;
        let (sol2, plan) = solve_storage(net, &second, &solver)?;
        if sol2.has_point() {
            return Ok((second, sol2, plan));
        }
        debug!("storage stage with budget +{rel:e}: {:?}", sol2.status);
    }
    warn!("storage stage failed; keeping the least-slack point with its storage");
    let plan = extract_bess_plan(&first, net, &sol)?;
    let objective = model.program.objective_value(&sol.values);
    Ok((
        first,
        Solution {
            objective,
            bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            ..sol
        },
        Some(plan),
    ))
}
