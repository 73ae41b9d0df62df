//! Sequential vs rayon execution for the two data-parallel kernels:
//! replica-parallel Gillespie sampling and row-parallel generator assembly.

use std::hint::black_box;
use std::sync::Arc;

use consips::exact::assemble_with;
use consips::rates::ChainModel;
use consips::sim::{final_state_histogram, SimHorizon, SimPlan};
use consips::{phi, CoordinateVector, Exec, Sector};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn gillespie(c: &mut Criterion) {
    let spec = ChainModel::unit(5, 2.0, 1.0, 1.0).unwrap().dual_spec().unwrap();
    let xi = phi(spec.lattice(), &CoordinateVector(vec![2, 4])).unwrap();
    let mut group = c.benchmark_group("absorption_histogram");
    group.sample_size(10);
    for (name, exec) in MODES {
        let plan = SimPlan::new(7, 20_000, SimHorizon::Absorption).with_exec(exec);
        group.bench_function(BenchmarkId::new(name, "sip2_n5_20k"), |b| {
            b.iter(|| final_state_histogram(black_box(&spec), &xi, &plan).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let spec = ChainModel::unit(6, 1.0, 0.0, 0.0).unwrap().dual_spec().unwrap();
    let sector = Arc::new(Sector::enumerate(spec.lattice().clone(), 6, spec.cap()).unwrap());
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, format!("sip1_n6_{}", sector.len())), |b| {
            b.iter(|| assemble_with(black_box(&spec), sector.clone(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gillespie, assembly);
criterion_main!(benches);
