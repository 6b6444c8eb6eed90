mod common;

use ddcp_core::conic::SolveStatus;
use ddcp_core::ev::{LoadMode, LoadSet};
use ddcp_core::models::{build_vdq, extract_violations, ReportStatus};
use ddcp_core::solver::{solve_relaxation, SolveParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn vdq_matches_sweep_on_random_feeders() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..10 {
        let n = 3 + case % 13;
        let net = common::random_feeder(&mut rng, n, 2, 0.4, 20.0);
        let loads = LoadSet::base(&net);
        let oracle = common::sweep(&net, &loads).expect("sweep converges");
        let model = build_vdq(&net, &loads, LoadMode::Horizon).unwrap();
        let sol = solve_relaxation(&model.program, &SolveParams::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let rep = extract_violations(&net, &model, &sol).unwrap();
        for i in 0..n {
            for t in 0..2 {
                let dv = (rep.voltage_pu[i][t] - oracle.v[i][t].sqrt()).abs();
                assert!(dv <= 1e-6, "case {case} bus {i} step {t}: |dv| = {dv:.3e}");
            }
        }
        let dloss = (rep.losses_pu - oracle.losses).abs();
        assert!(dloss <= 1e-8, "case {case}: |dloss| = {dloss:.3e}");
        assert!(rep.max_cone_gap <= 1e-6, "case {case}: cone gap {:.3e}", rep.max_cone_gap);
    }
}

#[test]
fn snapshot_keeps_the_peak_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = common::random_feeder(&mut rng, 6, 4, 0.4, 20.0);
    let loads = LoadSet::base(&net);
    let peak = (0..4)
        .max_by(|&a, &b| loads.total_p_kw(a).total_cmp(&loads.total_p_kw(b)))
        .unwrap();
    let model = build_vdq(&net, &loads, LoadMode::Snapshot).unwrap();
    assert_eq!(model.hours, vec![peak]);
    let full = build_vdq(&net, &loads, LoadMode::Horizon).unwrap();
    let p = SolveParams::default();
    let snap = extract_violations(&net, &model, &solve_relaxation(&model.program, &p)).unwrap();
    let all = extract_violations(&net, &full, &solve_relaxation(&full.program, &p)).unwrap();
    for i in 0..6 {
        assert!((snap.voltage_pu[i][0] - all.voltage_pu[i][peak]).abs() < 1e-6);
    }
}

#[test]
fn zero_load_gives_flat_voltage_and_no_current() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = common::random_feeder(&mut rng, 5, 1, 0.4, 0.0);
    let loads = LoadSet::base(&net);
    let model = build_vdq(&net, &loads, LoadMode::Horizon).unwrap();
    let rep = extract_violations(&net, &model, &solve_relaxation(&model.program, &SolveParams::default())).unwrap();
    assert!(rep.is_clean());
    for row in &rep.voltage_pu {
        assert!((row[0] - 1.0).abs() < 1e-6);
    }
    // The square root amplifies solver tolerance on `l` (1e-9 -> 3e-5 p.u.).
    assert!(rep.peak_loading().iter().all(|&pct| pct < 0.1));
}

#[test]
fn impossible_demand_is_model_collapse() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = common::random_feeder(&mut rng, 4, 1, 0.4, 0.0);
    let mut loads = LoadSet::base(&net);
    // Far beyond the maximum transferable power of an LV feeder.
    let last = loads.p_kw.len() - 1;
    loads.p_kw[last][0] = 5.0e5;
    let model = build_vdq(&net, &loads, LoadMode::Horizon).unwrap();
    let rep = extract_violations(&net, &model, &solve_relaxation(&model.program, &SolveParams::default())).unwrap();
    assert_eq!(rep.status, ReportStatus::ModelCollapse);
    assert!(!rep.is_clean());
}
