use approx::assert_abs_diff_eq;
use ddcp_core::conic::{ConicProgram, Relation, SolveStatus};
use ddcp_core::solver::{enumerate_oracle, solve_mixed_integer, solve_relaxation, SolveParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_program_is_trivially_optimal() {
    let p = ConicProgram::new();
    let s = solve_mixed_integer(&p, &SolveParams::default());
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_eq!(s.objective, 0.0);
}

#[test]
fn lp_relaxation_matches_vertex() {
    // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6  ->  x = 1.6, y = 1.2
    let mut p = ConicProgram::new();
    let x = p.continuous("x", 0.0, f64::INFINITY).unwrap();
    let y = p.continuous("y", 0.0, f64::INFINITY).unwrap();
    p.add_linear("a", &[(x, 1.0), (y, 2.0)], Relation::Le, 4.0)
        .unwrap();
    p.add_linear("b", &[(x, 3.0), (y, 1.0)], Relation::Le, 6.0)
        .unwrap();
    p.set_objective(&[(x, -1.0), (y, -1.0)], 0.0).unwrap();
    let s = solve_relaxation(&p, &SolveParams::default());
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_abs_diff_eq!(s.value(x), 1.6, epsilon = 1e-6);
    assert_abs_diff_eq!(s.value(y), 1.2, epsilon = 1e-6);
}

#[test]
fn rotated_cone_optimum() {
    // min u + w  s.t. u*w >= 4  ->  u = w = 2
    let mut p = ConicProgram::new();
    let u = p.continuous("u", 0.0, f64::INFINITY).unwrap();
    let w = p.continuous("w", 0.0, f64::INFINITY).unwrap();
    let y = p.continuous("y", 2.0, 2.0).unwrap();
    p.add_rotated_cone("c", u, w, &[y]).unwrap();
    p.set_objective(&[(u, 1.0), (w, 1.0)], 0.0).unwrap();
    let s = solve_relaxation(&p, &SolveParams::default());
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_abs_diff_eq!(s.objective, 4.0, epsilon = 1e-6);
    assert!(s.cone_gaps[0] > -1e-7);
}

#[test]
fn standard_cone_optimum() {
    // min t  s.t. ||(x - 3, x + 1)|| <= t  ->  x = 1, t = 2*sqrt(2)
    let mut p = ConicProgram::new();
    let x = p.continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
    let t = p.continuous("t", 0.0, f64::INFINITY).unwrap();
    let a = p.continuous("a", f64::NEG_INFINITY, f64::INFINITY).unwrap();
    let b = p.continuous("b", f64::NEG_INFINITY, f64::INFINITY).unwrap();
    p.add_linear("ea", &[(a, 1.0), (x, -1.0)], Relation::Eq, -3.0)
        .unwrap();
    p.add_linear("eb", &[(b, 1.0), (x, -1.0)], Relation::Eq, 1.0)
        .unwrap();
    p.add_soc("c", t, &[a, b]).unwrap();
    p.set_objective(&[(t, 1.0)], 0.0).unwrap();
    let s = solve_relaxation(&p, &SolveParams::default());
    assert_abs_diff_eq!(s.objective, 8f64.sqrt(), epsilon = 1e-6);
    assert_abs_diff_eq!(s.value(x), 1.0, epsilon = 1e-5);
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    let mut p = ConicProgram::new();
    let x = p.continuous("x", 0.0, 1.0).unwrap();
    p.add_linear("r", &[(x, 1.0)], Relation::Ge, 2.0).unwrap();
    assert_eq!(
        solve_relaxation(&p, &SolveParams::default()).status,
        SolveStatus::Infeasible
    );
    assert_eq!(
        solve_mixed_integer(&p, &SolveParams::default()).status,
        SolveStatus::Infeasible
    );

    let mut p = ConicProgram::new();
    let x = p.continuous("x", f64::NEG_INFINITY, 0.0).unwrap();
    p.set_objective(&[(x, 1.0)], 0.0).unwrap();
    assert_eq!(
        solve_relaxation(&p, &SolveParams::default()).status,
        SolveStatus::Unbounded
    );
}

#[test]
fn integer_infeasible_but_relaxation_feasible() {
    // z1 + z2 = 1.5 has no binary solution.
    let mut p = ConicProgram::new();
    let a = p.binary("a").unwrap();
    let b = p.binary("b").unwrap();
    p.add_linear("r", &[(a, 1.0), (b, 1.0)], Relation::Eq, 1.5)
        .unwrap();
    assert_eq!(
        solve_relaxation(&p, &SolveParams::default()).status,
        SolveStatus::Optimal
    );
    assert_eq!(
        solve_mixed_integer(&p, &SolveParams::default()).status,
        SolveStatus::Infeasible
    );
}

#[test]
fn small_knapsack_known_optimum() {
    // values 10, 13, 7, 8; weights 3, 4, 2, 3; capacity 7
    let vals = [10.0, 13.0, 7.0, 8.0];
    let wts = [3.0, 4.0, 2.0, 3.0];
    let mut p = ConicProgram::new();
    let z: Vec<_> = (0..4).map(|i| p.binary(format!("z{i}")).unwrap()).collect();
    let terms: Vec<_> = z.iter().zip(wts).map(|(&v, w)| (v, w)).collect();
    p.add_linear("cap", &terms, Relation::Le, 7.0).unwrap();
    let obj: Vec<_> = z.iter().zip(vals).map(|(&v, c)| (v, -c)).collect();
    p.set_objective(&obj, 0.0).unwrap();
    let s = solve_mixed_integer(&p, &SolveParams::exact());
    assert_eq!(s.status, SolveStatus::Optimal);
    // Feasible pairs: {0,1}=23, {1,3}=21, {1,2}=20, {0,3}=18, {0,2}=17, {2,3}=15;
    // {0,2,3} weighs 8. No triple fits, so items 0 and 1 win.
    assert_abs_diff_eq!(s.objective, -23.0, epsilon = 1e-6);
    let e = enumerate_oracle(&p, &SolveParams::exact()).unwrap();
    assert_abs_diff_eq!(e.objective, -23.0, epsilon = 1e-6);
}

/// Random mixed-integer SOCPs with facility-location flavour: each binary
/// opens capacity, and a conic term penalizes the continuous flow.
fn random_misocp(rng: &mut ChaCha8Rng, nbin: usize) -> ConicProgram {
    let mut p = ConicProgram::new();
    let z: Vec<_> = (0..nbin)
        .map(|i| p.binary(format!("z{i}")).unwrap())
        .collect();
    let f: Vec<_> = (0..nbin)
        .map(|i| p.continuous(format!("f{i}"), 0.0, f64::INFINITY).unwrap())
        .collect();
    let s: Vec<_> = (0..nbin)
        .map(|i| p.continuous(format!("s{i}"), 0.0, f64::INFINITY).unwrap())
        .collect();
    let half = p.continuous("half", 0.5, 0.5).unwrap();
    let demand = rng.gen_range(1.0..(nbin as f64));
    let terms: Vec<_> = f.iter().map(|&v| (v, 1.0)).collect();
    p.add_linear("demand", &terms, Relation::Ge, demand)
        .unwrap();
    let mut obj = Vec::new();
    for i in 0..nbin {
        let cap = rng.gen_range(0.5..2.5);
        p.add_linear(
            format!("cap{i}"),
            &[(f[i], 1.0), (z[i], -cap)],
            Relation::Le,
            0.0,
        )
        .unwrap();
        // s_i >= f_i^2 via 2 * s_i * 0.5 >= f_i^2
        p.add_rotated_cone(format!("q{i}"), s[i], half, &[f[i]])
            .unwrap();
        obj.push((z[i], rng.gen_range(1.0..5.0)));
        obj.push((s[i], rng.gen_range(0.5..2.0)));
        obj.push((f[i], rng.gen_range(0.0..1.0)));
    }
    p.set_objective(&obj, 0.0).unwrap();
    p
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..12 {
        let nbin = 2 + case % 6;
        let p = random_misocp(&mut rng, nbin);
        let params = SolveParams::exact();
        let b = solve_mixed_integer(&p, &params);
        let e = enumerate_oracle(&p, &params).unwrap();
        assert_eq!(b.status, e.status, "case {case}");
        if e.status == SolveStatus::Optimal {
            let tol = 1e-6 * e.objective.abs().max(1.0);
            assert!(
                (b.objective - e.objective).abs() <= tol,
                "case {case}: {} vs {}",
                b.objective,
                e.objective
            );
            assert!(b.cone_gaps.iter().all(|&g| g >= -1e-7));
        }
    }
}

#[test]
fn enumeration_guard() {
    let mut p = ConicProgram::new();
    for i in 0..21 {
        p.binary(format!("z{i}")).unwrap();
    }
    assert!(enumerate_oracle(&p, &SolveParams::default()).is_err());
}

#[test]
fn fixed_binaries_need_no_branching() {
    let mut p = ConicProgram::new();
    let z = p
        .add_variable("z", 1.0, 1.0, ddcp_core::conic::Integrality::Binary)
        .unwrap();
    let x = p.continuous("x", 0.0, 10.0).unwrap();
    p.add_linear("r", &[(x, 1.0), (z, -3.0)], Relation::Ge, 0.0)
        .unwrap();
    p.set_objective(&[(x, 1.0)], 1.0).unwrap();
    let s = solve_mixed_integer(&p, &SolveParams::default());
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_abs_diff_eq!(s.objective, 4.0, epsilon = 1e-6);
    assert_eq!(s.nodes, 1);
}
