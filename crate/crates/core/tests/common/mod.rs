//! Shared test oracles and fixture generators.
#![allow(dead_code)]

use ddcp_core::ev::LoadSet;
use ddcp_core::grid::{BranchSpec, BusKind, BusSpec, CableType, CaseParams, NetworkCase};
use ddcp_core::models::{build_vcu, build_vmbp, BessParams, VcuCandidate, VcuModel, VcuOptions, VmbpModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exact radial power flow by backward/forward sweep on the branch-flow
/// equations, written independently of the library's topology code.
pub struct Sweep {
    /// Squared voltage per bus and step.
    pub v: Vec<Vec<f64>>,
    /// Squared current per branch and step (branch order of the network).
    pub l: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Sum of r * l over branches and steps, p.u.
    pub losses: f64,
    pub iterations: usize,
}

pub fn sweep(net: &NetworkCase, loads: &LoadSet) -> Option<Sweep> {
    let n = net.buses().len();
    let m = net.branches().len();
    let idx = |id| net.buses().iter().position(|b| b.id == id).unwrap();
    let root = net
        .buses()
        .iter()
        .position(|b| b.kind == BusKind::Substation)
        .unwrap();
    // Orient edges away from the root by breadth-first search.
    let mut adj = vec![Vec::new(); n];
    for (k, b) in net.branches().iter().enumerate() {
        let (a, c) = (idx(b.from), idx(b.to));
        adj[a].push((c, k));
        adj[c].push((a, k));
    }
    let mut parent = vec![None; n];
    let mut order = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut h = 0;
    while h < order.len() {
        let a = order[h];
        h += 1;
        for &(c, k) in &adj[a] {
            if !seen[c] {
                seen[c] = true;
                parent[c] = Some((a, k));
                order.push(c);
            }
        }
    }
    let base = net.s_base_kw();
    let zb = net.z_base_ohm();
    let steps = loads.steps();
    let mut out = Sweep {
        v: vec![vec![0.0; steps]; n],
        l: vec![vec![0.0; steps]; m],
        p: vec![vec![0.0; steps]; m],
        q: vec![vec![0.0; steps]; m],
        losses: 0.0,
        iterations: 0,
    };
    for t in 0..steps {
        let vs = net.params().substation_v[if net.params().substation_v.len() == 1 { 0 } else { loads.hours[t] }];
        let mut v = vec![vs * vs; n];
        let mut l = vec![0.0; m];
        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        let mut converged = false;
        for it in 0..10_000 {
            // Backward: branch sending-end flows from downstream demand and losses.
            let mut sp = vec![0.0; n];
            let mut sq = vec![0.0; n];
            for &b in order.iter().rev() {
                sp[b] += loads.p_kw[b][t] / base;
                sq[b] += loads.q_kvar[b][t] / base;
                if let Some((a, k)) = parent[b] {
                    let br = &net.branches()[k];
                    let (r, x) = (br.r_ohm / zb, br.x_ohm / zb);
                    p[k] = sp[b] + r * l[k];
                    q[k] = sq[b] + x * l[k];
                    sp[a] += p[k];
                    sq[a] += q[k];
                }
            }
            // Forward: voltages and currents.
            let mut delta: f64 = 0.0;
            for &b in order.iter().skip(1) {
                let (a, k) = parent[b].unwrap();
                let br = &net.branches()[k];
                let (r, x) = (br.r_ohm / zb, br.x_ohm / zb);
                let lk = (p[k] * p[k] + q[k] * q[k]) / v[a];
                let vb = v[a] - 2.0 * (r * p[k] + x * q[k]) + (r * r + x * x) * lk;
                if !(vb > 0.0) || !vb.is_finite() {
                    return None;
                }
                delta = delta.max((lk - l[k]).abs()).max((vb - v[b]).abs());
                l[k] = lk;
                v[b] = vb;
            }
            out.iterations = out.iterations.max(it + 1);
            if delta < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        for i in 0..n {
            out.v[i][t] = v[i];
        }
        for k in 0..m {
            out.l[k][t] = l[k];
            out.p[k][t] = p[k];
            out.q[k][t] = q[k];
            let br = &net.branches()[k];
            out.losses += br.r_ohm / zb * l[k];
        }
    }
    Some(out)
}

pub fn bus(id: u32, kind: BusKind, customers: u32, p: Vec<f64>, q: Vec<f64>, bess: bool) -> BusSpec {
    BusSpec {
        id,
        kind,
        customers,
        load_p_kw: p,
        load_q_kvar: q,
        bess_candidate: bess,
    }
}

pub fn line(from: u32, to: u32, r_ohm: f64, x_ohm: f64, amp: f64, length_m: f64) -> BranchSpec {
    BranchSpec {
        from,
        to,
        r_ohm,
        x_ohm,
        ampacity_a: amp,
        length_m,
        is_breaker: false,
        cable_type: "120mm2".into(),
    }
}

/// Random radial feeder with `n` buses (ids 1..=n, substation 1) and
/// `steps` load steps. Lines use 120 mm2 data on 50-400 m lengths.
pub fn random_feeder(rng: &mut ChaCha8Rng, n: usize, steps: usize, base_kv: f64, load_scale_kw: f64) -> NetworkCase {
    let mut buses = vec![bus(1, BusKind::Substation, 0, vec![0.0; steps], vec![0.0; steps], false)];
    let mut branches = Vec::new();
    for i in 2..=n as u32 {
        let parent = rng.gen_range(1..i);
        let len = rng.gen_range(50.0..400.0);
        let km = len / 1000.0;
        branches.push(line(parent, i, 0.253 * km, 0.112 * km, 335.0, len));
        let p: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.2..1.0) * load_scale_kw).collect();
        let q: Vec<f64> = p.iter().map(|x| x * rng.gen_range(0.1..0.5)).collect();
        buses.push(bus(i, BusKind::Load, rng.gen_range(1..5), p, q, rng.gen_bool(0.4)));
    }
    let mut params = CaseParams::new(base_kv);
    params.base_mva = 1.0;
    NetworkCase::new(buses, branches, params).unwrap()
}

/// Peak current (A) of every branch from the sweep oracle.
pub fn sweep_peak_amps(net: &NetworkCase, loads: &LoadSet) -> Vec<f64> {
    let s = sweep(net, loads).expect("sweep converges");
    let ib = net.i_base_a();
    s.l.iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max).sqrt() * ib)
        .collect()
}

/// Small cable-selection program: one to three candidate branches with
/// random menus, at most `max_binaries` binaries in total.
pub fn vcu_instance(rng: &mut ChaCha8Rng, max_binaries: usize) -> VcuModel {
    loop {
        let n = rng.gen_range(3..=5);
        let steps = rng.gen_range(1..=2);
        let net = random_feeder(rng, n, steps, 0.4, 25.0);
        let loads = LoadSet::base(&net);
        let peaks = sweep_peak_amps(&net, &loads);
        let m = net.branches().len();
        let n_cand = rng.gen_range(1..=m.min(3));
        let mut cands = Vec::new();
        let mut used = 0;
        for k in 0..n_cand {
            let size = rng.gen_range(2..=5).min(max_binaries - used);
            if size == 0 {
                break;
            }
            used += size;
            let menu = (0..size)
                .map(|c| {
                    CableType::conductor(
                        &format!("c{c}"),
                        peaks[k] * rng.gen_range(0.8..2.0) + 1.0,
                        rng.gen_range(0.03..0.3),
                        rng.gen_range(0.05..0.12),
                        rng.gen_range(50.0..500.0),
                    )
                })
                .collect();
            cands.push(VcuCandidate {
                branch: k,
                relaxed_peak_a: peaks[k],
                menu,
            });
        }
        if let Ok(model) = build_vcu(&net, &loads, &cands, &VcuOptions::default()) {
            return model;
        }
    }
}

/// Small storage program: one candidate leaf whose feeding branch is
/// overloaded at the peak of a two-step horizon.
pub fn vmbp_instance(rng: &mut ChaCha8Rng) -> VmbpModel {
    let n = rng.gen_range(3..=5);
    let mut net = random_feeder(rng, n, 2, 0.4, 25.0);
    let mut buses = net.buses().to_vec();
    for b in buses.iter_mut().skip(1) {
        b.load_p_kw[0] *= 0.3;
        b.load_q_kvar[0] *= 0.3;
        b.bess_candidate = false;
    }
    let leaf = net.branches().last().unwrap().to;
    let li = net.bus_index(leaf).unwrap();
    buses[li].bess_candidate = true;
    buses[li].load_p_kw[1] += 30.0;
    net = net.with_buses(buses).unwrap();
    let loads = LoadSet::base(&net);
    let peaks = sweep_peak_amps(&net, &loads);
    let mut branches = net.branches().to_vec();
    let k = net.topology().parent_branch(li).unwrap();
    branches[k].ampacity_a = peaks[k] * rng.gen_range(0.8..1.05);
    let net = net.with_branches(branches).unwrap();
    let params = BessParams {
        e_min_kwh: rng.gen_range(1.0..20.0),
        e_max_kwh: 200.0,
        c_rate_ch: 1.0,
        c_rate_dis: 1.0,
        ..BessParams::default()
    };
    build_vmbp(&net, &loads, &params, &[leaf]).unwrap()
}
