use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::conic::{ConicProgram, Relation, VarId};
use crate::ev::LoadSet;
use crate::grid::NetworkCase;

/// Branch-flow variables. Branch vectors are indexed `[branch][step]` in
/// network branch order, bus vectors `[bus][step]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowVars {
    pub p: Vec<Vec<VarId>>,
    pub q: Vec<Vec<VarId>>,
    pub l: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    pub p_s: Vec<VarId>,
    pub q_s: Vec<VarId>,
}

impl FlowVars {
    pub fn steps(&self) -> usize {
        self.p_s.len()
    }

    /// Squared branch current at a solution point. Loss terms do not price
    /// the current of a lossless branch (a breaker), so its cone need not
    /// be tight; its current is read from the flows instead.
    pub fn current_sq(&self, net: &NetworkCase, x: &[f64], k: usize, t: usize) -> f64 {
        if net.r_pu(k) == 0.0 {
            let (i, _) = net.topology().ends(k);
            let (p, q) = (x[self.p[k][t].0], x[self.q[k][t].0]);
            (p * p + q * q) / x[self.v[i][t].0].max(f64::MIN_POSITIVE)
        } else {
            x[self.l[k][t].0].max(0.0)
        }
    }
}

/// Which parts of the core a model keeps.
pub(crate) struct FlowSpec {
    /// Hard lower voltage limit (squared p.u.).
    pub v_min_sq: Option<f64>,
    /// Upper bound on `l` per branch and step.
    pub l_ub: Vec<Vec<f64>>,
    /// Symmetric bound on `P` and `Q` per branch and step.
    pub pq_bound: Vec<Vec<f64>>,
    /// Branches whose voltage drop and losses the model writes itself.
    pub replaced: Vec<bool>,
}

impl FlowSpec {
    pub fn new(net: &NetworkCase, steps: usize) -> Self {
        let m = net.branches().len();
        Self {
            v_min_sq: None,
            l_ub: vec![vec![f64::INFINITY; steps]; m],
            pq_bound: vec![vec![f64::INFINITY; steps]; m],
            replaced: vec![false; m],
        }
    }
}

fn label(net: &NetworkCase, k: usize) -> String {
    let b = &net.branches()[k];
    format!("{}_{}", b.from, b.to)
}

pub(crate) fn branch_label(net: &NetworkCase, k: usize) -> String {
    label(net, k)
}

/// Adds variables, substation voltage, cones and the voltage-drop identity
/// of every branch not in `spec.replaced`. Balances are added separately by
/// [`add_balances`].
pub(crate) fn add_flow(
    prog: &mut ConicProgram,
    net: &NetworkCase,
    loads: &LoadSet,
    spec: &FlowSpec,
) -> Result<FlowVars, ModelError> {
    loads.check(net)?;
    let steps = loads.steps();
    let par = net.params();
    let v_hi = par.v_max * par.v_max;
    let v_lo = spec.v_min_sq.unwrap_or(0.0);
    let root = net.substation();
    let m = net.branches().len();
    let mut fv = FlowVars {
        p: Vec::with_capacity(m),
        q: Vec::with_capacity(m),
        l: Vec::with_capacity(m),
        v: Vec::with_capacity(net.buses().len()),
        p_s: Vec::with_capacity(steps),
        q_s: Vec::with_capacity(steps),
    };
    for (i, bus) in net.buses().iter().enumerate() {
        let mut row = Vec::with_capacity(steps);
        for t in 0..steps {
            let name = format!("v_{}_{t}", bus.id);
            let id = if i == root {
                let vs = net.substation_v(loads.hours[t]);
                prog.continuous(name, vs * vs, vs * vs)?
            } else {
                prog.continuous(name, v_lo, v_hi)?
            };
            row.push(id);
        }
        fv.v.push(row);
    }
    for k in 0..m {
        let lab = label(net, k);
        let mut p = Vec::with_capacity(steps);
        let mut q = Vec::with_capacity(steps);
        let mut l = Vec::with_capacity(steps);
        for t in 0..steps {
            let s = spec.pq_bound[k][t];
            p.push(prog.continuous(format!("P_{lab}_{t}"), -s, s)?);
            q.push(prog.continuous(format!("Q_{lab}_{t}"), -s, s)?);
            l.push(prog.continuous(format!("l_{lab}_{t}"), 0.0, spec.l_ub[k][t])?);
        }
        fv.p.push(p);
        fv.q.push(q);
        fv.l.push(l);
    }
    for t in 0..steps {
        fv.p_s
            .push(prog.continuous(format!("Ps_{t}"), f64::NEG_INFINITY, f64::INFINITY)?);
        fv.q_s
            .push(prog.continuous(format!("Qs_{t}"), f64::NEG_INFINITY, f64::INFINITY)?);
    }
    let topo = net.topology();
    for k in 0..m {
        let (i, j) = topo.ends(k);
        let lab = label(net, k);
        let (r, x) = (net.r_pu(k), net.x_pu(k));
        for t in 0..steps {
            prog.add_rotated_cone(
                format!("cone_{lab}_{t}"),
                fv.v[i][t],
                fv.l[k][t],
                &[fv.p[k][t], fv.q[k][t]],
            )?;
            if !spec.replaced[k] {
                let terms = drop_terms(&fv, k, (i, j), t, r, x);
                prog.add_linear(format!("drop_{lab}_{t}"), &terms, Relation::Eq, 0.0)?;
            }
        }
    }
    Ok(fv)
}

/// Terms of `v_i - v_j - 2(r P + x Q) + (r^2 + x^2) l`.
pub(crate) fn drop_terms(
    fv: &FlowVars,
    k: usize,
    (i, j): (usize, usize),
    t: usize,
    r: f64,
    x: f64,
) -> Terms {
    vec![
        (fv.v[i][t], 1.0),
        (fv.v[j][t], -1.0),
        (fv.p[k][t], -2.0 * r),
        (fv.q[k][t], -2.0 * x),
        (fv.l[k][t], r * r + x * x),
    ]
}

/// Extra terms of one nodal balance, moved to the left-hand side.
pub(crate) type Terms = Vec<(VarId, f64)>;

/// Nodal balances
/// `sum_up (P_ki - loss_ki) - sum_down P_ij - extra = P_load` (same for Q),
/// with `P_s` entering at the substation. `loss(k, t)` gives the (P, Q)
/// loss terms of branch `k` as left-hand-side terms; `extra(bus, t)` gives
/// additional device terms at a bus.
pub(crate) fn add_balances(
    prog: &mut ConicProgram,
    net: &NetworkCase,
    loads: &LoadSet,
    fv: &FlowVars,
    loss: &dyn Fn(usize, usize) -> (Terms, Terms),
    extra: &dyn Fn(usize, usize) -> (Terms, Terms),
) -> Result<(), ModelError> {
    let topo = net.topology();
    let base = net.s_base_kw();
    for (i, bus) in net.buses().iter().enumerate() {
        for t in 0..loads.steps() {
            let mut tp: Terms = Vec::new();
            let mut tq: Terms = Vec::new();
            if let Some(k) = topo.parent_branch(i) {
                tp.push((fv.p[k][t], 1.0));
                tq.push((fv.q[k][t], 1.0));
                let (lp, lq) = loss(k, t);
                tp.extend(lp);
                tq.extend(lq);
            } else {
                tp.push((fv.p_s[t], 1.0));
                tq.push((fv.q_s[t], 1.0));
            }
            for &k in topo.child_branches(i) {
                tp.push((fv.p[k][t], -1.0));
                tq.push((fv.q[k][t], -1.0));
            }
            let (ep, eq) = extra(i, t);
            tp.extend(ep);
            tq.extend(eq);
            prog.add_linear(
                format!("balP_{}_{t}", bus.id),
                &tp,
                Relation::Eq,
                loads.p_kw[i][t] / base,
            )?;
            prog.add_linear(
                format!("balQ_{}_{t}", bus.id),
                &tq,
                Relation::Eq,
                loads.q_kvar[i][t] / base,
            )?;
        }
    }
    Ok(())
}

/// Standard losses `r * l` and `x * l` as balance terms.
pub(crate) fn line_losses(net: &NetworkCase, fv: &FlowVars, k: usize, t: usize) -> (Terms, Terms) {
    let l = fv.l[k][t];
    (vec![(l, -net.r_pu(k))], vec![(l, -net.x_pu(k))])
}

/// Valid bounds on branch flows: twice the apparent power of all demand
/// and device capability (`device_kva[bus]`) below the branch, so that
/// losses up to the delivered power itself are still representable.
/// Returns `(S_bar, l_bar)` per branch and step in p.u.
pub(crate) fn flow_envelope(
    net: &NetworkCase,
    loads: &LoadSet,
    device_kva: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let topo = net.topology();
    let base = net.s_base_kw();
    let v_min = net.params().v_min.max(0.5);
    let mut s = vec![vec![0.0; loads.steps()]; net.branches().len()];
    let mut l = s.clone();
    for k in 0..net.branches().len() {
        let (_, j) = topo.ends(k);
        let below = topo.subtree(j);
        for t in 0..loads.steps() {
            let demand: f64 = below
                .iter()
                .map(|&b| loads.p_kw[b][t].hypot(loads.q_kvar[b][t]) + device_kva[b])
                .sum();
            let sb = 2.0 * demand / base + 1e-4;
            s[k][t] = sb;
            l[k][t] = sb * sb / (v_min * v_min);
        }
    }
    (s, l)
}
