use std::hint::black_box;

use ara_bench::{fams, fams_small, instance, tsg};
use ara_core::{
    comb_sample, fams_column_generation, fams_dbr, sample_pure, solve_marginal, to_pe0, CgOptions,
    FamsFixer, TsgFixer,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn marginal_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("marginal_lp");
    group.sample_size(10);
    for flights in [50, 100, 200] {
        let game = instance(fams(flights)).game().unwrap();
        group.bench_with_input(BenchmarkId::new("fams", flights), &game, |b, g| {
            b.iter(|| solve_marginal(black_box(g)).unwrap())
        });
    }
    for flights in [2, 6] {
        let game = instance(tsg(flights)).game().unwrap();
        group.bench_with_input(BenchmarkId::new("tsg", flights), &game, |b, g| {
            b.iter(|| solve_marginal(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling");

    let inst = fams(100);
    let game = instance(inst.clone()).game().unwrap();
    let ms = solve_marginal(&game).unwrap();
    let pe0 = to_pe0(&game).unwrap();
    let fixer = FamsFixer::new(&inst);
    let x_aug = pe0.lift(&ms.x_m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    group.bench_function("comb_sample/fams_100", |b| {
        b.iter(|| {
            for s in pe0.equality_partition() {
                black_box(comb_sample(&x_aug, s, &mut rng).unwrap());
            }
        })
    });
    group.bench_function("sample_pure/fams_100", |b| {
        b.iter(|| sample_pure(&ms, &pe0, &fixer, &mut rng, 100).unwrap())
    });

    let inst = tsg(6);
    let game = instance(inst.clone()).game().unwrap();
    let ms = solve_marginal(&game).unwrap();
    let pe0 = to_pe0(&game).unwrap();
    let fixer = TsgFixer::new(&inst);
    group.bench_function("sample_pure/tsg_6", |b| {
        b.iter(|| sample_pure(&ms, &pe0, &fixer, &mut rng, 100).unwrap())
    });
    group.finish();
}

fn best_response(c: &mut Criterion) {
    let mut group = c.benchmark_group("fams_exact");
    group.sample_size(10);
    let inst = fams(50);
    let d = Array2::from_shape_fn((inst.marshals, inst.schedules.len()), |(i, j)| {
        1.0 + ((i * 31 + j * 17) % 13) as f64
    });
    group.bench_function("dbr/50", |b| {
        b.iter(|| fams_dbr(black_box(&inst), &d, 10_000_000).unwrap())
    });
    for flights in [40, 80] {
        let inst = fams_small(flights);
        group.bench_with_input(BenchmarkId::new("cg", flights), &inst, |b, i| {
            b.iter(|| fams_column_generation(i, &CgOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, marginal_lp, sampling, best_response);
criterion_main!(benches);
