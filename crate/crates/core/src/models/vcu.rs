use serde::{Deserialize, Serialize};

use super::flow::{
    add_balances, add_flow, branch_label, drop_terms, flow_envelope, line_losses, FlowSpec,
    FlowVars, Terms,
};
use super::{ModelError, ViolationReport, COST_UNIT};
use crate::conic::{ConicProgram, Relation, Solution, VarId};
use crate::ev::LoadSet;
use crate::grid::{BusId, CableCatalog, CableType, NetworkCase};
use crate::solver::IncumbentHeuristic;

/// A branch eligible for replacement and the cables it may take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcuCandidate {
    pub branch: usize,
    /// Peak current observed with limits relaxed, in A.
    pub relaxed_peak_a: f64,
    pub menu: Vec<CableType>,
}

/// Replacement threshold relative to the relaxed peak current.
pub const MENU_MARGIN: f64 = 1.05;

/// Overloaded branches of a VDQ report with their admissible cables
/// (ampacity at least 1.05 times the relaxed peak, cheapest first).
pub fn vcu_candidates(
    net: &NetworkCase,
    report: &ViolationReport,
    catalog: &CableCatalog,
) -> Result<Vec<VcuCandidate>, ModelError> {
    let peaks = report.peak_current_a();
    report
        .overloaded_branches()
        .into_iter()
        .map(|k| {
            let br = &net.branches()[k];
            let required = MENU_MARGIN * peaks[k];
            let menu: Vec<CableType> = catalog.menu(br, required).into_iter().cloned().collect();
            if menu.is_empty() {
                return Err(ModelError::EmptyMenu {
                    from: br.from,
                    to: br.to,
                    required_a: required,
                });
            }
            Ok(VcuCandidate {
                branch: k,
                relaxed_peak_a: peaks[k],
                menu,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VcuOptions {
    /// Slack penalty in $ per squared p.u. current; defaults to 1e6 times
    /// the most expensive candidate cable.
    pub rho: Option<f64>,
    /// One Big-M for every switched constraint instead of per-constraint
    /// values derived from variable bounds.
    pub big_m: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct VcuModel {
    pub program: ConicProgram,
    pub flow: FlowVars,
    pub candidates: Vec<VcuCandidate>,
    /// `[candidate][cable]` selection binaries.
    pub z: Vec<Vec<VarId>>,
    /// `[candidate][step]` current-limit slack.
    pub sigma: Vec<Vec<VarId>>,
    pub p_loss: Vec<Vec<VarId>>,
    pub q_loss: Vec<Vec<VarId>>,
    /// `[candidate][cable]` installation cost in $.
    pub costs: Vec<Vec<f64>>,
    pub rho: f64,
}

/// Per-unit impedance a branch would have with `cable` installed.
pub(crate) fn upgraded_impedance(net: &NetworkCase, k: usize, cable: &CableType) -> (f64, f64) {
    let br = &net.branches()[k];
    if cable.is_breaker {
        (net.r_pu(k), net.x_pu(k))
    } else {
        let km = br.length_m / 1000.0;
        let zb = net.z_base_ohm();
        (cable.r_ohm_per_km * km / zb, cable.x_ohm_per_km * km / zb)
    }
}

/// Cable-upgrade program over the given candidates.
pub fn build_vcu(
    net: &NetworkCase,
    loads: &LoadSet,
    candidates: &[VcuCandidate],
    opts: &VcuOptions,
) -> Result<VcuModel, ModelError> {
    loads.check(net)?;
    if candidates.is_empty() {
        return Err(ModelError::NoCandidates("branches"));
    }
    let m = net.branches().len();
    let steps = loads.steps();
    let mut is_cand = vec![None; m];
    for (c, cand) in candidates.iter().enumerate() {
        if cand.branch >= m || is_cand[cand.branch].is_some() {
            return Err(ModelError::Params(format!(
                "bad or repeated candidate branch {}",
                cand.branch
            )));
        }
        if cand.menu.is_empty() {
            let br = &net.branches()[cand.branch];
            return Err(ModelError::EmptyMenu {
                from: br.from,
                to: br.to,
                required_a: MENU_MARGIN * cand.relaxed_peak_a,
            });
        }
        is_cand[cand.branch] = Some(c);
    }
    let par = net.params();
    let v_lo = par.v_min * par.v_min;
    let v_hi = par.v_max * par.v_max;
    let i_base = net.i_base_a();
    let (s_bar, l_bar) = flow_envelope(net, loads, &vec![0.0; net.buses().len()]);

    let mut spec = FlowSpec::new(net, steps);
    spec.v_min_sq = Some(v_lo);
    for k in 0..m {
        for t in 0..steps {
            spec.pq_bound[k][t] = s_bar[k][t];
            spec.l_ub[k][t] = if is_cand[k].is_some() {
                l_bar[k][t]
            } else {
                let a = net.ampacity_pu(k);
                a * a
            };
        }
        spec.replaced[k] = is_cand[k].is_some();
    }
    let mut prog = ConicProgram::new();
    let fv = add_flow(&mut prog, net, loads, &spec)?;

    let costs: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| {
            c.menu
                .iter()
                .map(|cab| cab.cost_for(&net.branches()[c.branch]))
                .collect()
        })
        .collect();
    let max_cost = costs.iter().flatten().copied().fold(0.0, f64::max);
    let rho = opts.rho.unwrap_or(1e6 * max_cost.max(1.0));

    let (mut z_all, mut sig_all, mut pl_all, mut ql_all) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let fv = &fv;
    for (c, cand) in candidates.iter().enumerate() {
        let k = cand.branch;
        let lab = branch_label(net, k);
        let (i, j) = net.topology().ends(k);
        let imp: Vec<(f64, f64)> = cand
            .menu
            .iter()
            .map(|cab| upgraded_impedance(net, k, cab))
            .collect();
        let r_max = imp.iter().map(|z| z.0).fold(0.0, f64::max);
        let x_max = imp.iter().map(|z| z.1).fold(0.0, f64::max);
        let z: Vec<VarId> = cand
            .menu
            .iter()
            .map(|cab| {
                prog.binary(format!(
                    "z_{lab}_{}",
                    cab.name.replace(|ch: char| !ch.is_ascii_alphanumeric(), "")
                ))
            })
            .collect::<Result<_, _>>()?;
        let one: Vec<(VarId, f64)> = z.iter().map(|&v| (v, 1.0)).collect();
        prog.add_linear(format!("pick_{lab}"), &one, Relation::Eq, 1.0)?;
        let mut sig = Vec::with_capacity(steps);
        let mut pl = Vec::with_capacity(steps);
        let mut ql = Vec::with_capacity(steps);
        for t in 0..steps {
            let lb = l_bar[k][t];
            let s = prog.continuous(format!("sigma_{lab}_{t}"), 0.0, lb)?;
            let pls = prog.continuous(format!("Ploss_{lab}_{t}"), 0.0, r_max * lb)?;
            let qls = prog.continuous(format!("Qloss_{lab}_{t}"), 0.0, x_max * lb)?;
            // l <= sum_c I_c^2 z_c + sigma
            let mut lim: Terms = vec![(fv.l[k][t], 1.0), (s, -1.0)];
            for (cab, &zc) in cand.menu.iter().zip(&z) {
                let a = cab.ampacity_a / i_base;
                lim.push((zc, -a * a));
            }
            prog.add_linear(format!("amp_{lab}_{t}"), &lim, Relation::Le, 0.0)?;
            for (ci, (&zc, &(r, x))) in z.iter().zip(&imp).enumerate() {
                let m_drop = opts
                    .big_m
                    .unwrap_or((v_hi - v_lo) + 2.0 * (r + x) * s_bar[k][t] + (r * r + x * x) * lb);
                let m_p = opts.big_m.unwrap_or(r_max * lb);
                let m_q = opts.big_m.unwrap_or(x_max * lb);
                // expr <= M (1 - z)  and  -expr <= M (1 - z)
                let mut drop = drop_terms(fv, k, (i, j), t, r, x);
                drop.push((zc, m_drop));
                prog.add_linear(format!("dropU_{lab}_{ci}_{t}"), &drop, Relation::Le, m_drop)?;
                for term in drop.iter_mut().take(5) {
                    term.1 = -term.1;
                }
                prog.add_linear(format!("dropL_{lab}_{ci}_{t}"), &drop, Relation::Le, m_drop)?;
                for (sign, tag) in [(1.0, "U"), (-1.0, "L")] {
                    prog.add_linear(
                        format!("ploss{tag}_{lab}_{ci}_{t}"),
                        &[(pls, sign), (fv.l[k][t], -sign * r), (zc, m_p)],
                        Relation::Le,
                        m_p,
                    )?;
                    prog.add_linear(
                        format!("qloss{tag}_{lab}_{ci}_{t}"),
                        &[(qls, sign), (fv.l[k][t], -sign * x), (zc, m_q)],
                        Relation::Le,
                        m_q,
                    )?;
                }
            }
            sig.push(s);
            pl.push(pls);
            ql.push(qls);
        }
        for (&zc, &cost) in z.iter().zip(&costs[c]) {
            prog.add_objective_term(zc, cost / COST_UNIT)?;
        }
        for &s in &sig {
            prog.add_objective_term(s, rho / COST_UNIT)?;
        }
        z_all.push(z);
        sig_all.push(sig);
        pl_all.push(pl);
        ql_all.push(ql);
    }
    let cand_of = is_cand;
    let (pl, ql) = (&pl_all, &ql_all);
    add_balances(
        &mut prog,
        net,
        loads,
        fv,
        &|k, t| match cand_of[k] {
            Some(c) => (vec![(pl[c][t], -1.0)], vec![(ql[c][t], -1.0)]),
            None => line_losses(net, fv, k, t),
        },
        &|_, _| (Vec::new(), Vec::new()),
    )?;
    Ok(VcuModel {
        program: prog,
        flow: fv.clone(),
        candidates: candidates.to_vec(),
        z: z_all,
        sigma: sig_all,
        p_loss: pl_all,
        q_loss: ql_all,
        costs,
        rho,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchUpgrade {
    pub from: BusId,
    pub to: BusId,
    pub old_cable: String,
    pub cable: CableType,
    pub relaxed_peak_a: f64,
    pub cost: f64,
    /// Largest current-limit slack over the steps (squared p.u.).
    pub max_slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpgradePlan {
    pub upgrades: Vec<BranchUpgrade>,
    pub total_cost: f64,
    pub warnings: Vec<String>,
}

impl UpgradePlan {
    /// The network with every selected cable installed.
    pub fn apply(&self, net: &NetworkCase) -> Result<NetworkCase, ModelError> {
        let mut out = net.clone();
        for u in &self.upgrades {
            out = out.apply_upgrade(u.from, u.to, &u.cable)?;
        }
        Ok(out)
    }
}

/// Slack above this (squared p.u.) is reported as a residual violation.
pub const SLACK_TOL: f64 = 1e-6;

/// Reads the selected cable of every candidate from a VCU solution.
pub fn extract_upgrade_plan(
    net: &NetworkCase,
    model: &VcuModel,
    sol: &Solution,
) -> Result<UpgradePlan, ModelError> {
    if !sol.has_point() {
        return Err(ModelError::Params(format!(
            "no VCU solution to extract (status {:?})",
            sol.status
        )));
    }
    if sol.values.len() != model.program.num_vars() {
        return Err(ModelError::Mismatch {
            expected: model.program.num_vars(),
            found: sol.values.len(),
        });
    }
    let x = &sol.values;
    let mut plan = UpgradePlan::default();
    for (c, cand) in model.candidates.iter().enumerate() {
        let pick = model.z[c]
            .iter()
            .enumerate()
            .max_by(|a, b| x[a.1 .0].total_cmp(&x[b.1 .0]).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty menu");
        let br = &net.branches()[cand.branch];
        let max_slack = model.sigma[c].iter().map(|s| x[s.0]).fold(0.0, f64::max);
        if max_slack > SLACK_TOL {
            plan.warnings.push(format!(
                "branch ({}, {}) keeps a residual overload (slack {max_slack:.3e})",
                br.from, br.to
            ));
        }
        let cost = model.costs[c][pick];
        plan.total_cost += cost;
        plan.upgrades.push(BranchUpgrade {
            from: br.from,
            to: br.to,
            old_cable: br.cable_type.clone(),
            cable: cand.menu[pick].clone(),
            relaxed_peak_a: cand.relaxed_peak_a,
            cost,
            max_slack,
        });
    }
    Ok(plan)
}

/// Picks the largest selection weight per candidate branch.
pub struct VcuHeuristic {
    z: Vec<Vec<VarId>>,
}

impl VcuHeuristic {
    pub fn new(model: &VcuModel) -> Self {
        Self { z: model.z.clone() }
    }
}

impl IncumbentHeuristic for VcuHeuristic {
    fn propose(&self, _prog: &ConicProgram, x: &[f64]) -> Option<Vec<(VarId, f64)>> {
        let mut out = Vec::new();
        for zs in &self.z {
            let best = zs
                .iter()
                .enumerate()
                .max_by(|a, b| x[a.1 .0].total_cmp(&x[b.1 .0]).then(b.0.cmp(&a.0)))?
                .0;
            out.extend(
                zs.iter()
                    .enumerate()
                    .map(|(i, &v)| (v, if i == best { 1.0 } else { 0.0 })),
            );
        }
        Some(out)
    }
}
