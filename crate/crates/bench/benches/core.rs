use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rabi_core::dynamics::{pure_state, DensityMatrix};
use rabi_core::{
    diagonalize, dressed_operators, enumerate_paths, field_quadrature, find_anticrossing,
    joint_absorption, lindblad_rhs, pauli, static_hamiltonian, BareLabel, EvolveOptions, PauliKind,
    SystemConfig, C64,
};

fn diagonalization(c: &mut Criterion) {
    let mut group = c.benchmark_group("diagonalize");
    for n_fock in [10, 20, 40] {
        let h = static_hamiltonian(&SystemConfig::reference(2).with_n_fock(n_fock)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(h.dim()), &h, |b, h| {
            b.iter(|| diagonalize(black_box(h)).unwrap())
        });
    }
    group.finish();
}

fn anticrossing(c: &mut Criterion) {
    let config = SystemConfig::reference(2);
    let a = BareLabel::all_ground(2, 1);
    let e = BareLabel::all_excited(2, 0);
    c.bench_function("find_anticrossing", |b| {
        b.iter(|| find_anticrossing(black_box(&config), &a, &e, (1.9, 2.1)).unwrap())
    });
}

fn path_enumeration(c: &mut Criterion) {
    let config = SystemConfig::reference(2).with_mu(0.0);
    let a = BareLabel::all_ground(2, 1);
    let e = BareLabel::all_excited(2, 0);
    c.bench_function("enumerate_paths order 3", |b| {
        b.iter(|| enumerate_paths(black_box(&config), &a, &e, 3).unwrap())
    });
}

fn master_equation(c: &mut Criterion) {
    let config = SystemConfig::reference(2).with_losses(3e-5, 3e-5);
    let shape = config.shape().unwrap();
    let h = static_hamiltonian(&config).unwrap();
    let spec = diagonalize(&h).unwrap();
    let x_plus = dressed_operators(&spec, &field_quadrature(shape))
        .unwrap()
        .plus;
    let c_plus: Vec<_> = (0..2)
        .map(|q| {
            let sx = pauli(shape, q, PauliKind::X).unwrap();
            dressed_operators(&spec, &sx).unwrap().plus
        })
        .collect();
    let rho: DensityMatrix = pure_state(
        shape,
        &[
            (BareLabel::all_ground(2, 1), C64::new(0.6, 0.0)),
            (BareLabel::all_excited(2, 0), C64::new(0.0, 0.8)),
        ],
    )
    .unwrap();
    c.bench_function(&format!("lindblad_rhs dim {}", shape.dim()), |b| {
        b.iter(|| lindblad_rhs(black_box(&rho), &h, &x_plus, &c_plus, 3e-5, 3e-5).unwrap())
    });

    let mut group = c.benchmark_group("evolve");
    group.sample_size(10);
    group.bench_function("lossy joint absorption, 0.1 pi", |b| {
        b.iter(|| {
            joint_absorption(black_box(&config), None, 0.1, 11, &EvolveOptions::default()).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    diagonalization,
    anticrossing,
    path_enumeration,
    master_equation
);
criterion_main!(benches);
