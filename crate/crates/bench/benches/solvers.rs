use criterion::{criterion_group, criterion_main, Criterion};
use ddcp_bench::case;
use ddcp_core::ev::LoadMode;
use ddcp_core::models::{build_vmbp, BessHeuristic, BessParams};
use ddcp_core::pipeline::{candidate_buses, check_violations, run_ddcp, run_vcu, NRange, PlanningParams};
use ddcp_core::solver::{SolveParams, Solver};
use ddcp_core::CableCatalog;

fn vdq(c: &mut Criterion) {
    let (net, loads) = case("feeder6.csv", 1.0, 10.0);
    let p = SolveParams::default();
    c.bench_function("vdq feeder6", |b| {
        b.iter(|| check_violations(&net, &loads, LoadMode::Horizon, &p).unwrap())
    });
}

fn vcu(c: &mut Criterion) {
    let (net, loads) = case("bottleneck.csv", 0.5, 10.0);
    let cat = CableCatalog::bundled();
    let params = PlanningParams::default();
    c.bench_function("vcu bottleneck", |b| {
        b.iter(|| run_vcu(&net, &loads, &cat, &params).unwrap())
    });
}

fn vmbp(c: &mut Criterion) {
    let (net, loads) = case("feeder6.csv", 0.82, 10.0);
    let model = build_vmbp(&net, &loads, &BessParams::default(), &candidate_buses(&net)).unwrap();
    c.bench_function("vmbp feeder6", |b| {
        b.iter(|| {
            Solver::new(SolveParams::default())
                .with_heuristic(BessHeuristic::new(&model))
                .mixed_integer(&model.program)
        })
    });
}

fn ddcp(c: &mut Criterion) {
    let (net, loads) = case("bottleneck.csv", 0.5, 10.0);
    let cat = CableCatalog::bundled();
    let params = PlanningParams::default();
    c.bench_function("ddcp bottleneck", |b| {
        b.iter(|| run_ddcp(&net, &loads, &cat, &params, Some(NRange::all())).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = vdq, vcu, vmbp, ddcp
}
criterion_main!(benches);
