use criterion::{black_box, criterion_group, criterion_main, Criterion};

use mulchtherm::fem::{assemble, effective_system, SimulationConfig, Simulator};
use mulchtherm::physics::{BoundaryEnvironment, MulchBalance, MULCH_MAX_ITER, MULCH_TOL};
use mulchtherm::weather::synthesize_clear_day;
use mulchtherm::{ClearDay, ConvectionModel, Mesh1D, MulchOptics, SoilProperties};

fn assembly(c: &mut Criterion) {
    let mesh = Mesh1D::uniform(1.0, 50).unwrap();
    let soil = SoilProperties::default();
    c.bench_function("assemble_and_factor_50", |b| {
        b.iter(|| {
            let (cap, k) = assemble(black_box(&mesh), &soil).unwrap();
            effective_system(&cap, &k, 300.0).cholesky().unwrap()
        })
    });
}

fn mulch_solve(c: &mut Criterion) {
    let balance = MulchBalance::new(
        &MulchOptics::ldpe(),
        &SoilProperties::default(),
        &ConvectionModel::default(),
    )
    .unwrap();
    let env = BoundaryEnvironment::new(800.0, 290.0, 1.5).unwrap();
    c.bench_function("mulch_balance_solve", |b| {
        b.iter(|| {
            balance
                .solve(&env, black_box(305.0), 295.0, MULCH_TOL, MULCH_MAX_ITER)
                .unwrap()
        })
    });
}

fn clear_day(c: &mut Criterion) {
    let weather = synthesize_clear_day(&ClearDay::default()).unwrap();
    let mesh = Mesh1D::uniform(1.0, 50).unwrap();
    let config = SimulationConfig::for_weather(mesh, 300.0, &weather);
    let sim = Simulator::new(
        config,
        SoilProperties::default(),
        MulchOptics::ldpe(),
        ConvectionModel::default(),
    )
    .unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("clear_day_50_elements", |b| b.iter(|| sim.run(black_box(&weather)).unwrap()));
    group.finish();
}

criterion_group!(benches, assembly, mulch_solve, clear_day);
criterion_main!(benches);
