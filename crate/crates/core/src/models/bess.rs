use serde::{Deserialize, Serialize};

use super::flow::{add_balances, add_flow, branch_label, line_losses, FlowSpec, FlowVars, Terms};
use super::{ModelError, COST_UNIT};
use crate::conic::{ConicProgram, Integrality, Relation, Solution, VarId};
use crate::ev::LoadSet;
use crate::grid::{BusId, NetworkCase};
use crate::solver::IncumbentHeuristic;

/// Battery technology and cost data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BessParams {
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Capital cost in $/kWh.
    pub c_cap: f64,
    /// Power limits per unit of capacity, 1/h.
    pub c_rate_ch: f64,
    pub c_rate_dis: f64,
    /// Inverter rating per unit of discharge power rating.
    pub k_inv: f64,
    /// Step length in h.
    pub dt_h: f64,
}

impl Default for BessParams {
    fn default() -> Self {
        Self {
            e_min_kwh: 50.0,
            e_max_kwh: 10_000.0,
            soc_min: 0.1,
            soc_max: 0.9,
            eta_ch: 0.95,
            eta_dis: 0.95,
            c_cap: 250.0,
            c_rate_ch: 0.5,
            c_rate_dis: 0.5,
            k_inv: 1.0,
            dt_h: 1.0,
        }
    }
}

impl BessParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Params(m.to_string()));
        let all = [
            self.e_min_kwh,
            self.e_max_kwh,
            self.soc_min,
            self.soc_max,
            self.eta_ch,
            self.eta_dis,
            self.c_cap,
            self.c_rate_ch,
            self.c_rate_dis,
            self.k_inv,
            self.dt_h,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("storage parameters must be finite");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return bad("need 0 <= soc_min < soc_max <= 1");
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0 && self.eta_dis > 0.0 && self.eta_dis <= 1.0) {
            return bad("efficiencies must lie in (0, 1]");
        }
        if !(self.c_cap > 0.0) {
            return bad("capacity cost must be positive");
        }
        if !(0.0 <= self.e_min_kwh && self.e_min_kwh <= self.e_max_kwh && self.e_max_kwh > 0.0) {
            return bad("need 0 <= e_min_kwh <= e_max_kwh, e_max_kwh > 0");
        }
        if !(self.c_rate_ch > 0.0 && self.c_rate_dis > 0.0 && self.k_inv > 0.0 && self.dt_h > 0.0) {
            return bad("C-rates, inverter factor and step length must be positive");
        }
        Ok(())
    }
}

/// Variables of one candidate battery. Per-step vectors have one entry per
/// step; `energy` has `steps + 1` boundary points with `energy[0]` the state
/// before the first step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BessVars {
    pub bus: usize,
    pub z: VarId,
    pub e_cap: VarId,
    pub s_inv: VarId,
    pub y_ch: Vec<VarId>,
    pub y_dis: Vec<VarId>,
    pub y_inj: Vec<VarId>,
    pub y_abs: Vec<VarId>,
    pub p_ch: Vec<VarId>,
    pub p_dis: Vec<VarId>,
    /// Reactive power delivered to the grid.
    pub q_inj: Vec<VarId>,
    /// Reactive power drawn from the grid.
    pub q_abs: Vec<VarId>,
    pub energy: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct VmbpModel {
    pub program: ConicProgram,
    pub flow: FlowVars,
    pub units: Vec<BessVars>,
    /// `[branch][step]` ampacity slack of the relaxed model.
    pub tau: Option<Vec<Vec<VarId>>>,
    pub lambda: Option<f64>,
    pub params: BessParams,
    pub s_base_kw: f64,
    pub hours: Vec<usize>,
}

/// Battery siting and sizing with hard voltage and ampacity limits.
pub fn build_vmbp(
    net: &NetworkCase,
    loads: &LoadSet,
    params: &BessParams,
    candidate_buses: &[BusId],
) -> Result<VmbpModel, ModelError> {
    build(net, loads, params, candidate_buses, None)
}

/// As [`build_vmbp`] with ampacity limits softened by slack `tau >= 0`
/// penalized at `lambda` $ per squared p.u.
pub fn build_relaxed_vmbp(
    net: &NetworkCase,
    loads: &LoadSet,
    params: &BessParams,
    candidate_buses: &[BusId],
    lambda: f64,
) -> Result<VmbpModel, ModelError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ModelError::Params(format!(
            "slack penalty must be positive, got {lambda}"
        )));
    }
    build(net, loads, params, candidate_buses, Some(lambda))
}

fn build(
    net: &NetworkCase,
    loads: &LoadSet,
    bp: &BessParams,
    candidate_buses: &[BusId],
    lambda: Option<f64>,
) -> Result<VmbpModel, ModelError> {
    loads.check(net)?;
    bp.validate()?;
    let steps = loads.steps();
    if steps < 2 {
        return Err(ModelError::ShortHorizon(steps));
    }
    if candidate_buses.is_empty() {
        return Err(ModelError::NoCandidates("storage buses"));
    }
    let mut buses = Vec::with_capacity(candidate_buses.len());
    for &id in candidate_buses {
        let i = net.bus_index(id).ok_or(ModelError::NotCandidate(id))?;
        if !net.buses()[i].bess_candidate || i == net.substation() || buses.contains(&i) {
            return Err(ModelError::NotCandidate(id));
        }
        buses.push(i);
    }
    let par = net.params();
    let base = net.s_base_kw();
    let m = net.branches().len();

    let mut spec = FlowSpec::new(net, steps);
    spec.v_min_sq = Some(par.v_min * par.v_min);
    if lambda.is_none() {
        for k in 0..m {
            let a = net.ampacity_pu(k);
            spec.l_ub[k] = vec![a * a; steps];
        }
    }
    let mut prog = ConicProgram::new();
    let fv = add_flow(&mut prog, net, loads, &spec)?;

    let e_min = bp.e_min_kwh / base;
    let e_max = bp.e_max_kwh / base;
    let dt = bp.dt_h;
    let m_ch = bp.c_rate_ch * e_max;
    let m_dis = bp.c_rate_dis * e_max;
    let m_q = bp.k_inv * bp.c_rate_dis * e_max;

    let mut units = Vec::with_capacity(buses.len());
    for &i in &buses {
        let id = net.buses()[i].id;
        let n = |what: &str| format!("{what}_{id}");
        let nt = |what: &str, t: usize| format!("{what}_{id}_{t}");
        let z = prog.binary(n("zb"))?;
        let e_cap = prog.continuous(n("Ecap"), 0.0, e_max)?;
        let s_inv = prog.continuous(n("Sinv"), 0.0, m_q)?;
        let mut u = BessVars {
            bus: i,
            z,
            e_cap,
            s_inv,
            y_ch: Vec::new(),
            y_dis: Vec::new(),
            y_inj: Vec::new(),
            y_abs: Vec::new(),
            p_ch: Vec::new(),
            p_dis: Vec::new(),
            q_inj: Vec::new(),
            q_abs: Vec::new(),
            energy: Vec::new(),
        };
        // z E_min <= E_cap <= z E_max
        prog.add_linear(n("capLo"), &[(e_cap, 1.0), (z, -e_min)], Relation::Ge, 0.0)?;
        prog.add_linear(n("capHi"), &[(e_cap, 1.0), (z, -e_max)], Relation::Le, 0.0)?;
        prog.add_linear(
            n("inv"),
            &[(s_inv, 1.0), (e_cap, -bp.k_inv * bp.c_rate_dis)],
            Relation::Eq,
            0.0,
        )?;
        for t in 0..=steps {
            u.energy
                .push(prog.continuous(nt("E", t), 0.0, bp.soc_max * e_max)?);
        }
        prog.add_linear(
            n("cyclic"),
            &[(u.energy[0], 1.0), (u.energy[steps], -1.0)],
            Relation::Eq,
            0.0,
        )?;
        for t in 0..steps {
            let y_ch = prog.binary(nt("ych", t))?;
            let y_dis = prog.binary(nt("ydis", t))?;
            let y_inj = prog.binary(nt("yinj", t))?;
            let y_abs = prog.binary(nt("yabs", t))?;
            let p_ch = prog.continuous(nt("Pch", t), 0.0, m_ch)?;
            let p_dis = prog.continuous(nt("Pdis", t), 0.0, m_dis)?;
            let q_inj = prog.continuous(nt("Qinj", t), 0.0, m_q)?;
            let q_abs = prog.continuous(nt("Qabs", t), 0.0, m_q)?;
            let a = prog.continuous(nt("Pinv", t), 0.0, m_ch + m_dis)?;
            let b = prog.continuous(nt("Qinv", t), 0.0, 2.0 * m_q)?;
            prog.add_linear(
                nt("exQ", t),
                &[(y_inj, 1.0), (y_abs, 1.0)],
                Relation::Le,
                1.0,
            )?;
            prog.add_linear(
                nt("exP", t),
                &[(y_ch, 1.0), (y_dis, 1.0)],
                Relation::Le,
                1.0,
            )?;
            let e1 = u.energy[t + 1];
            let e0 = u.energy[t];
            prog.add_linear(
                nt("socLo", t),
                &[(e1, 1.0), (e_cap, -bp.soc_min)],
                Relation::Ge,
                0.0,
            )?;
            prog.add_linear(
                nt("socHi", t),
                &[(e1, 1.0), (e_cap, -bp.soc_max)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("dyn", t),
                &[
                    (e1, 1.0),
                    (e0, -1.0),
                    (p_ch, -bp.eta_ch * dt),
                    (p_dis, dt / bp.eta_dis),
                ],
                Relation::Eq,
                0.0,
            )?;
            prog.add_linear(
                nt("rateCh", t),
                &[(p_ch, 1.0), (e_cap, -bp.c_rate_ch)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("onCh", t),
                &[(p_ch, 1.0), (y_ch, -m_ch)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("rateDis", t),
                &[(p_dis, 1.0), (e_cap, -bp.c_rate_dis)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("onDis", t),
                &[(p_dis, 1.0), (y_dis, -m_dis)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("onInj", t),
                &[(q_inj, 1.0), (y_inj, -m_q)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("onAbs", t),
                &[(q_abs, 1.0), (y_abs, -m_q)],
                Relation::Le,
                0.0,
            )?;
            prog.add_linear(
                nt("sumP", t),
                &[(a, 1.0), (p_ch, -1.0), (p_dis, -1.0)],
                Relation::Eq,
                0.0,
            )?;
            prog.add_linear(
                nt("sumQ", t),
                &[(b, 1.0), (q_abs, -1.0), (q_inj, -1.0)],
                Relation::Eq,
                0.0,
            )?;
            prog.add_soc(nt("inverter", t), s_inv, &[a, b])?;
            u.y_ch.push(y_ch);
            u.y_dis.push(y_dis);
            u.y_inj.push(y_inj);
            u.y_abs.push(y_abs);
            u.p_ch.push(p_ch);
            u.p_dis.push(p_dis);
            u.q_inj.push(q_inj);
            u.q_abs.push(q_abs);
        }
        prog.add_objective_term(e_cap, bp.c_cap * base / COST_UNIT)?;
        units.push(u);
    }

    let mut tau = None;
    if let Some(lam) = lambda {
        let mut all = Vec::with_capacity(m);
        for k in 0..m {
            let lab = branch_label(net, k);
            let a = net.ampacity_pu(k);
            let mut row = Vec::with_capacity(steps);
            for t in 0..steps {
                let s = prog.continuous(format!("tau_{lab}_{t}"), 0.0, f64::INFINITY)?;
                prog.add_linear(
                    format!("amp_{lab}_{t}"),
                    &[(fv.l[k][t], 1.0), (s, -1.0)],
                    Relation::Le,
                    a * a,
                )?;
                prog.add_objective_term(s, lam / COST_UNIT)?;
                row.push(s);
            }
            all.push(row);
        }
        tau = Some(all);
    }

    let mut at_bus: Vec<Option<usize>> = vec![None; net.buses().len()];
    for (n, u) in units.iter().enumerate() {
        at_bus[u.bus] = Some(n);
    }
    add_balances(
        &mut prog,
        net,
        loads,
        &fv,
        &|k, t| line_losses(net, &fv, k, t),
        &|i, t| match at_bus[i] {
            Some(n) => {
                let u = &units[n];
                let p: Terms = vec![(u.p_ch[t], -1.0), (u.p_dis[t], 1.0)];
                let q: Terms = vec![(u.q_abs[t], -1.0), (u.q_inj[t], 1.0)];
                (p, q)
            }
            None => (Vec::new(), Vec::new()),
        },
    )?;
    Ok(VmbpModel {
        program: prog,
        flow: fv,
        units,
        tau,
        lambda,
        params: bp.clone(),
        s_base_kw: base,
        hours: loads.hours.clone(),
    })
}

/// Fixes all binaries and installed capacities of `sol` and re-dispatches
/// for minimum losses. The returned point uses the same program layout.
/// Ampacity slack (relaxed model) is capped at its value in `sol`.
pub fn polish_dispatch(
    net: &NetworkCase,
    model: &VmbpModel,
    sol: &Solution,
) -> Result<ConicProgram, ModelError> {
    if sol.values.len() != model.program.num_vars() {
        return Err(ModelError::Mismatch {
            expected: model.program.num_vars(),
            found: sol.values.len(),
        });
    }
    let x = &sol.values;
    let mut prog = model.program.clone();
    for (j, var) in model.program.variables().iter().enumerate() {
        if var.kind == Integrality::Binary {
            let val = x[j].round().clamp(0.0, 1.0);
            prog.set_bounds(VarId(j), val, val)?;
        }
    }
    for u in &model.units {
        let (lb, ub) = model.program.bounds()[u.e_cap.0];
        let e = x[u.e_cap.0].clamp(lb, ub);
        prog.set_bounds(u.e_cap, e, (e * (1.0 + 1e-7) + 1e-12).min(ub).max(e))?;
    }
    let mut obj: Terms = Vec::new();
    if let Some(tau) = &model.tau {
        for &s in tau.iter().flatten() {
            let t = x[s.0].max(0.0);
            prog.set_bounds(s, 0.0, t * (1.0 + 1e-7) + 1e-12)?;
        }
    }
    for (k, row) in model.flow.l.iter().enumerate() {
        let r = net.r_pu(k);
        obj.extend(row.iter().map(|&l| (l, r)));
    }
    prog.set_objective(&obj, 0.0)?;
    Ok(prog)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BessUnit {
    pub bus: BusId,
    pub capacity_kwh: f64,
    pub inverter_kva: f64,
    /// Per-step schedules in kW / kvar.
    pub p_ch_kw: Vec<f64>,
    pub p_dis_kw: Vec<f64>,
    pub q_inj_kvar: Vec<f64>,
    pub q_abs_kvar: Vec<f64>,
    /// Stored energy at the `steps + 1` boundary points, kWh.
    pub energy_kwh: Vec<f64>,
    pub soc: Vec<f64>,
    pub cost: f64,
    /// `|E_first - E_last|` in kWh.
    pub cyclic_residual_kwh: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BessPlan {
    pub units: Vec<BessUnit>,
    pub total_capacity_kwh: f64,
    pub total_cost: f64,
    pub hours: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Capacity below this (kWh) counts as not installed.
pub const CAPACITY_TOL_KWH: f64 = 1e-6;

impl BessPlan {
    /// Demand seen by the network with the batteries operating on their
    /// schedule: charging adds load, discharging and injection remove it.
    pub fn apply_to_loads(
        &self,
        net: &NetworkCase,
        loads: &LoadSet,
    ) -> Result<LoadSet, ModelError> {
        loads.check(net)?;
        let mut out = loads.clone();
        for u in &self.units {
            let i = net
                .bus_index(u.bus)
                .ok_or(ModelError::NotCandidate(u.bus))?;
            if u.p_ch_kw.len() != loads.steps() {
                return Err(ModelError::Params(
                    "storage schedule does not match the load horizon".into(),
                ));
            }
            for t in 0..loads.steps() {
                out.p_kw[i][t] += u.p_ch_kw[t] - u.p_dis_kw[t];
                out.q_kvar[i][t] += u.q_abs_kvar[t] - u.q_inj_kvar[t];
            }
        }
        Ok(out)
    }
}

/// Reads installed batteries and their schedules from a VMBP-family
/// solution.
pub fn extract_bess_plan(
    model: &VmbpModel,
    net: &NetworkCase,
    sol: &Solution,
) -> Result<BessPlan, ModelError> {
    if !sol.has_point() {
        return Err(ModelError::Params(format!(
            "no storage solution to extract (status {:?})",
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
    let base = model.s_base_kw;
    let kw = |v: &VarId| x[v.0].max(0.0) * base;
    let mut plan = BessPlan {
        hours: model.hours.clone(),
        ..BessPlan::default()
    };
    for u in &model.units {
        let cap = kw(&u.e_cap);
        if cap <= CAPACITY_TOL_KWH {
            continue;
        }
        let energy: Vec<f64> = u.energy.iter().map(kw).collect();
        let residual = (energy[0] - energy[energy.len() - 1]).abs();
        let id = net.buses()[u.bus].id;
        if residual > 1e-6 * cap {
            plan.warnings.push(format!(
                "bus {id}: stored energy does not return to its start (residual {residual:.3e} kWh)"
            ));
        }
        let cost = model.params.c_cap * cap;
        plan.total_capacity_kwh += cap;
        plan.total_cost += cost;
        plan.units.push(BessUnit {
            bus: id,
            capacity_kwh: cap,
            inverter_kva: kw(&u.s_inv),
            p_ch_kw: u.p_ch.iter().map(kw).collect(),
            p_dis_kw: u.p_dis.iter().map(kw).collect(),
            q_inj_kvar: u.q_inj.iter().map(kw).collect(),
            q_abs_kvar: u.q_abs.iter().map(kw).collect(),
            soc: energy.iter().map(|e| e / cap).collect(),
            energy_kwh: energy,
            cost,
            cyclic_residual_kwh: residual,
        });
    }
    Ok(plan)
}

/// Installs a battery wherever the relaxation assigns capacity and sets
/// each mode pair by the sign of the net flow.
pub struct BessHeuristic {
    units: Vec<BessVars>,
    /// Capacity (p.u.·h) below which a relaxed unit is treated as unused.
    on_tol: f64,
}

impl BessHeuristic {
    pub fn new(model: &VmbpModel) -> Self {
        let e_min = model.params.e_min_kwh / model.s_base_kw;
        let e_max = model.params.e_max_kwh / model.s_base_kw;
        Self {
            units: model.units.clone(),
            // Interior-point values of unused units sit near 1e-9, far
            // below any real installation.
            on_tol: 1e-3 * e_min.max(1e-4 * e_max),
        }
    }
}

impl IncumbentHeuristic for BessHeuristic {
    fn propose(&self, _prog: &ConicProgram, x: &[f64]) -> Option<Vec<(VarId, f64)>> {
        let mut out = Vec::new();
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        for u in &self.units {
            let on = x[u.e_cap.0] > self.on_tol;
            out.push((u.z, flag(on)));
            for t in 0..u.p_ch.len() {
                let p = x[u.p_ch[t].0] - x[u.p_dis[t].0];
                let q = x[u.q_inj[t].0] - x[u.q_abs[t].0];
                out.push((u.y_ch[t], flag(on && p > 0.0)));
                out.push((u.y_dis[t], flag(on && p < 0.0)));
                out.push((u.y_inj[t], flag(on && q > 0.0)));
                out.push((u.y_abs[t], flag(on && q < 0.0)));
            }
        }
        Some(out)
    }
}
