use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use tri_ising::dynamics::{self, RingSchedule};
use tri_ising::events::{EventScratch, EventSpec};
use tri_ising::harness::seeding::ReplicaRng;
use tri_ising::ising::{IsingModel, Sampler, SamplerMethod};
use tri_ising::lattice::{Region, ORIGIN};
use tri_ising::{beta_c, BoundaryCondition, ModelParams};

fn model(n: u32, beta: f64) -> Arc<IsingModel> {
    Arc::new(IsingModel::for_region(Region::rhombus(ORIGIN, n), BoundaryCondition::Free, ModelParams::new(beta).unwrap()).unwrap())
}

fn simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for n in [16u32, 64] {
        let m = model(n, 0.8 * beta_c());
        let mut rng = ReplicaRng::seed_from_u64(1);
        let mut spins = vec![1i8; m.geometry().len()];
        let mut sched = RingSchedule::empty(m.geometry().clone(), 0.0).unwrap();
        g.bench_with_input(BenchmarkId::new("t=1", n), &n, |b, _| {
            b.iter(|| {
                sched.regenerate(1.0, &mut rng).unwrap();
                dynamics::evolve(&m, &mut spins, sched.rings());
                black_box(spins[0])
            })
        });
    }
    g.finish();
}

fn wolff(c: &mut Criterion) {
    let mut g = c.benchmark_group("wolff");
    g.sample_size(20);
    for n in [32u32, 128] {
        let m = model(n, 0.8 * beta_c());
        let mut s = Sampler::new(m.clone(), SamplerMethod::default()).unwrap();
        let mut rng = ReplicaRng::seed_from_u64(2);
        let mut spins = vec![1i8; m.geometry().len()];
        g.bench_with_input(BenchmarkId::new("sample", n), &n, |b, _| {
            b.iter(|| {
                s.sample_into(&mut rng, &mut spins);
                black_box(spins[0])
            })
        });
    }
    g.finish();
}

fn events(c: &mut Criterion) {
    let mut g = c.benchmark_group("events");
    for n in [16u32, 64] {
        let m = model(2 * n, 0.8 * beta_c());
        let mut s = Sampler::new(m.clone(), SamplerMethod::default()).unwrap();
        let mut rng = ReplicaRng::seed_from_u64(3);
        let spins = s.sample(&mut rng);
        let mut scratch = EventScratch::default();
        let cross = EventSpec::cross(n).compile(m.geometry()).unwrap();
        let arm = EventSpec::arm4(1, n).compile(m.geometry()).unwrap();
        g.bench_with_input(BenchmarkId::new("crossing", n), &n, |b, _| b.iter(|| black_box(cross.eval(spins.spins(), &mut scratch))));
        g.bench_with_input(BenchmarkId::new("four_arm", n), &n, |b, _| b.iter(|| black_box(arm.eval(spins.spins(), &mut scratch))));
    }
    g.finish();
}

criterion_group!(benches, simulate, wolff, events);
criterion_main!(benches);
