use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use osp_sdp::dense::DenseLdl;
use osp_sdp::{build_instance, solve, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_blocks");
    g.sample_size(10);
    for (k, n) in [(4, 12), (6, 10)] {
        let inst = build_instance(k, n).unwrap();
        for parallel in [true, false] {
            let cfg = SolverConfig {
                parallel,
                ..SolverConfig::default()
            };
            let mode = if parallel { "parallel" } else { "sequential" };
            g.bench_with_input(
                BenchmarkId::new(mode, format!("S({k},{n})")),
                &inst,
                |b, inst| b.iter(|| black_box(solve(inst, &cfg).unwrap().margin)),
            );
        }
    }
    g.finish();
}

fn dense_factor(c: &mut Criterion) {
    let n = 600;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    let mut g = c.benchmark_group("dense_ldl");
    g.sample_size(10);
    for parallel in [true, false] {
        let mode = if parallel { "parallel" } else { "sequential" };
        g.bench_function(BenchmarkId::new(mode, n), |b| {
            b.iter(|| {
                black_box(
                    DenseLdl::factor(a.clone(), n, parallel)
                        .unwrap()
                        .perturbed(),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(benches, solver, dense_factor);
criterion_main!(benches);
