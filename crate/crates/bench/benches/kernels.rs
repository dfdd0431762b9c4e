use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tada_core::hamiltonian::{build_a, build_static_operators};
use tada_core::{build_piecewise_hamiltonian, commutator, prepare_initial, HamiltonianSpec, TrotterEngine};

fn strong_field(l: usize) -> HamiltonianSpec {
    HamiltonianSpec::driven_ising(l, 1.0, 3.0, 0.5, 0.8, 30.0)
}

fn magnus(c: &mut Criterion) {
    let mut group = c.benchmark_group("magnus");
    for l in [8, 12, 16] {
        let spec = strong_field(l);
        let ops = build_static_operators(&spec).unwrap();
        let a1 = build_a(&spec, &ops, 0.3, 0.2, 1).unwrap();
        let a2 = build_a(&spec, &ops, 0.3, 0.2, 2).unwrap();
        let inner = commutator(&a1, &a2).unwrap();
        group.bench_with_input(BenchmarkId::new("nested_commutator", l), &l, |b, _| {
            b.iter(|| commutator(black_box(&a1), black_box(&inner)).unwrap())
        });
        for k in [1, 3, 5] {
            group.bench_with_input(BenchmarkId::new(format!("build_h{k}"), l), &l, |b, _| {
                b.iter(|| build_piecewise_hamiltonian(&spec, &ops, black_box(0.3), black_box(0.2), k).unwrap())
            });
        }
    }
    group.finish();
}

fn statevector(c: &mut Criterion) {
    let mut group = c.benchmark_group("statevector");
    group.sample_size(20);
    for l in [8, 10, 12, 14] {
        let spec = strong_field(l);
        let engine = TrotterEngine::new(&spec).unwrap();
        let psi = prepare_initial(l, 2.0).unwrap();
        let h5 = build_piecewise_hamiltonian(&spec, engine.static_operators(), 0.3, 0.2, 5).unwrap();
        group.bench_with_input(BenchmarkId::new("trotter_step", l), &l, |b, _| {
            b.iter(|| engine.apply_trotter_step(black_box(&psi), 0.3, 0.2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("apply_h5", l), &l, |b, _| {
            b.iter(|| h5.operator.apply(black_box(psi.amplitudes())))
        });
    }
    group.finish();
}

criterion_group!(benches, magnus, statevector);
criterion_main!(benches);
