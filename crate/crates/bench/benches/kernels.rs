use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use slipflow_core::expr::FieldSpec;
use slipflow_core::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use slipflow_core::stokes_basis::solve_eigen;
use slipflow_core::{Grid, Law, PPotential, SymTensor};

fn stress(c: &mut Criterion) {
    let pp = PPotential::new(Law::PowerLawB, 2.5, 1.0, 1.0).unwrap();
    let b = SymTensor::from_fn(3, |i, j| 0.3 * (i + 2 * j) as f64 - 0.5);
    c.bench_function("stress_3d", |bch| bch.iter(|| pp.stress(black_box(&b))));
    c.bench_function("stress_hessian_3d", |bch| bch.iter(|| pp.stress_hessian(black_box(&b)).unwrap()));
}

fn eigen(c: &mut Criterion) {
    let grid = Grid::new(2, 1.0, 8, true).unwrap();
    let mut g = c.benchmark_group("eigen");
    g.sample_size(10);
    g.bench_function("solve_eigen_2d_k8_m16", |bch| bch.iter(|| solve_eigen(black_box(&grid), 16).unwrap()));
    g.finish();
}

fn steps(c: &mut Criterion) {
    let grid = Grid::new(2, 1.0, 8, true).unwrap();
    let basis = solve_eigen(&grid, 16).unwrap();
    let pp = PPotential::new(Law::PowerLawB, 2.5, 1.0, 1.0).unwrap();
    let f = FieldSpec::new(["sin(pi*x1)", "cos(pi*x1)*x2"]).compile(2).unwrap();
    let sys = GalerkinSystem::new(&basis, pp, Some(&f), None, false).unwrap();
    let u0 = FieldSpec::new(["x2*(1-x1^2)", "0"]).compile(2).unwrap().sample(&grid, 0.0).unwrap();
    let (c0, _) = project_initial(&sys, &u0).unwrap();
    let mut g = c.benchmark_group("galerkin");
    g.sample_size(20);
    g.bench_function("ten_implicit_euler_steps_m16", |bch| {
        bch.iter(|| simulate_from(&sys, c0.clone(), 1e-2, 10, NewtonSettings::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, stress, eigen, steps);
criterion_main!(benches);
