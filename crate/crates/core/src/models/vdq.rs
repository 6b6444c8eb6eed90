use serde::{Deserialize, Serialize};

use super::flow::{add_balances, add_flow, line_losses, FlowSpec, FlowVars};
use super::ModelError;
use crate::conic::{ConicProgram, Solution, SolveStatus};
use crate::ev::{LoadMode, LoadSet};
use crate::grid::{BusId, NetworkCase};

/// Loss-minimizing power flow with only the upper voltage limit, so line
/// overloads and low voltages stay observable.
#[derive(Clone, Debug)]
pub struct VdqModel {
    pub program: ConicProgram,
    pub flow: FlowVars,
    /// Source hour of each modeled step.
    pub hours: Vec<usize>,
}

/// Builds the violation-detection program. Snapshot mode keeps only the
/// step with the largest total active demand.
pub fn build_vdq(
    net: &NetworkCase,
    loads: &LoadSet,
    mode: LoadMode,
) -> Result<VdqModel, ModelError> {
    loads.check(net)?;
    let loads = match mode {
        LoadMode::Snapshot if loads.steps() > 1 => {
            let mut peak = 0;
            for t in 1..loads.steps() {
                if loads.total_p_kw(t) > loads.total_p_kw(peak) {
                    peak = t;
                }
            }
            loads.at_step(peak)
        }
        _ => loads.clone(),
    };
    let mut prog = ConicProgram::new();
    let spec = FlowSpec::new(net, loads.steps());
    let fv = add_flow(&mut prog, net, &loads, &spec)?;
    add_balances(
        &mut prog,
        net,
        &loads,
        &fv,
        &|k, t| line_losses(net, &fv, k, t),
        &|_, _| (Vec::new(), Vec::new()),
    )?;
    for (k, row) in fv.l.iter().enumerate() {
        let r = net.r_pu(k);
        for &l in row {
            prog.add_objective_term(l, r)?;
        }
    }
    Ok(VdqModel {
        program: prog,
        flow: fv,
        hours: loads.hours.clone(),
    })
}

/// Line loading in percent of the rating.
pub fn loading_pct(i_actual: f64, i_rated: f64) -> f64 {
    i_actual / i_rated * 100.0
}

/// Excess of loading over 100 %, zero when within the rating.
pub fn violation_pct(loading: f64) -> f64 {
    (loading - 100.0).max(0.0)
}

/// Thresholds below which a limit excess is treated as solver noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationTolerance {
    /// Violation percentage points.
    pub loading_pct: f64,
    /// Voltage magnitude in p.u.
    pub voltage_pu: f64,
}

impl Default for ViolationTolerance {
    fn default() -> Self {
        Self {
            loading_pct: 1e-4,
            voltage_pu: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Solved,
    /// The power flow itself has no solution (demand beyond what the
    /// feeder can deliver).
    ModelCollapse,
    SolverFailure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadingStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl LoadingStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            count: values.len(),
            min,
            max,
            avg: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub status: ReportStatus,
    pub hours: Vec<usize>,
    /// `(from, to)` of every branch, network order.
    pub branches: Vec<(BusId, BusId)>,
    pub bus_ids: Vec<BusId>,
    /// `[branch][step]`, percent of ampacity.
    pub loading_pct: Vec<Vec<f64>>,
    pub violation_pct: Vec<Vec<f64>>,
    /// Branch current in A, `[branch][step]`.
    pub current_a: Vec<Vec<f64>>,
    /// `[bus][step]`, p.u. magnitude.
    pub voltage_pu: Vec<Vec<f64>>,
    pub v_min: f64,
    /// Objective: total losses in p.u. summed over steps.
    pub losses_pu: f64,
    /// Largest relative cone gap `(v l - P^2 - Q^2) / max(1, P^2 + Q^2)`.
    pub max_cone_gap: f64,
    pub tolerance: ViolationTolerance,
}

impl ViolationReport {
    fn empty(net: &NetworkCase, status: ReportStatus, hours: Vec<usize>) -> Self {
        Self {
            status,
            hours,
            branches: net.branches().iter().map(|b| (b.from, b.to)).collect(),
            bus_ids: net.buses().iter().map(|b| b.id).collect(),
            loading_pct: Vec::new(),
            violation_pct: Vec::new(),
            current_a: Vec::new(),
            voltage_pu: Vec::new(),
            v_min: net.params().v_min,
            losses_pu: f64::NAN,
            max_cone_gap: f64::NAN,
            tolerance: ViolationTolerance::default(),
        }
    }

    pub fn solved(&self) -> bool {
        self.status == ReportStatus::Solved
    }

    /// Largest loading of each branch over the modeled steps.
    pub fn peak_loading(&self) -> Vec<f64> {
        self.loading_pct
            .iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// Largest current of each branch over the modeled steps, in A.
    pub fn peak_current_a(&self) -> Vec<f64> {
        self.current_a
            .iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// Statistics of per-branch peak loading.
    pub fn loading_stats(&self) -> LoadingStats {
        LoadingStats::of(&self.peak_loading())
    }

    /// Branch indices whose peak violation exceeds the tolerance.
    pub fn overloaded_branches(&self) -> Vec<usize> {
        self.peak_loading()
            .iter()
            .enumerate()
            .filter(|(_, &ld)| violation_pct(ld) > self.tolerance.loading_pct)
            .map(|(k, _)| k)
            .collect()
    }

    /// Statistics of the peak violation percentage over overloaded branches.
    pub fn violation_stats(&self) -> LoadingStats {
        let peak = self.peak_loading();
        let v: Vec<f64> = self
            .overloaded_branches()
            .iter()
            .map(|&k| violation_pct(peak[k]))
            .collect();
        LoadingStats::of(&v)
    }

    /// `(bus, step)` pairs below the lower voltage limit.
    pub fn voltage_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.voltage_pu.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                if v < self.v_min - self.tolerance.voltage_pu {
                    out.push((i, t));
                }
            }
        }
        out
    }

    pub fn min_voltage(&self) -> f64 {
        self.voltage_pu
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Solved with no line or voltage violation.
    pub fn is_clean(&self) -> bool {
        self.solved()
            && self.overloaded_branches().is_empty()
            && self.voltage_violations().is_empty()
    }
}

/// Turns a VDQ solution into loadings, violations and voltages.
pub fn extract_violations(
    net: &NetworkCase,
    model: &VdqModel,
    sol: &Solution,
) -> Result<ViolationReport, ModelError> {
    match sol.status {
        SolveStatus::Optimal | SolveStatus::GapLimit => {}
        SolveStatus::Infeasible => {
            return Ok(ViolationReport::empty(
                net,
                ReportStatus::ModelCollapse,
                model.hours.clone(),
            ))
        }
        _ => {
            return Ok(ViolationReport::empty(
                net,
                ReportStatus::SolverFailure,
                model.hours.clone(),
            ))
        }
    }
    if sol.values.len() != model.program.num_vars() {
        return Err(ModelError::Mismatch {
            expected: model.program.num_vars(),
            found: sol.values.len(),
        });
    }
    let fv = &model.flow;
    let x = &sol.values;
    let i_base = net.i_base_a();
    let mut rep = ViolationReport::empty(net, ReportStatus::Solved, model.hours.clone());
    let mut gap = 0.0f64;
    for (k, br) in net.branches().iter().enumerate() {
        let (i, _) = net.topology().ends(k);
        let mut ld = Vec::with_capacity(fv.steps());
        let mut vi = Vec::with_capacity(fv.steps());
        let mut cur = Vec::with_capacity(fv.steps());
        let lossless = net.r_pu(k) == 0.0;
        for t in 0..fv.steps() {
            let (p, q, v) = (x[fv.p[k][t].0], x[fv.q[k][t].0], x[fv.v[i][t].0]);
            let s2 = p * p + q * q;
            let l = fv.current_sq(net, x, k, t);
            let amps = l.sqrt() * i_base;
            let pct = loading_pct(amps, br.ampacity_a);
            cur.push(amps);
            ld.push(pct);
            vi.push(violation_pct(pct));
            if !lossless {
                gap = gap.max((v * l - s2) / s2.max(1.0));
            }
        }
        rep.loading_pct.push(ld);
        rep.violation_pct.push(vi);
        rep.current_a.push(cur);
    }
    rep.voltage_pu =
        fv.v.iter()
            .map(|row| row.iter().map(|v| x[v.0].max(0.0).sqrt()).collect())
            .collect();
    rep.losses_pu = model.program.objective_value(x);
    rep.max_cone_gap = gap;
    Ok(rep)
}
