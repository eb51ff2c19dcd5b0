use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rsp_bench::uniform_instance;
use rsp_core::decision::{decide_only, EdgeRule};
use rsp_core::model::sorted_candidates;
use rsp_core::pipelines::{solve, Algorithm, SolveParams};
use std::hint::black_box;

fn bench_decision(c: &mut Criterion) {
    let mut group = c.benchmark_group("decide_bfs");
    group.sample_size(20);
    for n in [1024usize, 4096] {
        let inst = uniform_instance(n, 1);
        let cands = sorted_candidates(&inst);
        let mid = cands[cands.len() / 2].sq;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(decide_only(&inst, mid, EdgeRule::Inclusive)));
        });
    }
    group.finish();
}

fn bench_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in [512usize, 2048] {
        for algo in [Algorithm::DistselBinary, Algorithm::Generic, Algorithm::Fast] {
            let inst = uniform_instance(n, 2);
            group.bench_with_input(
                BenchmarkId::new(algo.name(), n),
                &n,
                |b, _| {
                    b.iter(|| {
                        let rep =
                            solve(&inst, algo, &SolveParams::default()).expect("solver runs");
                        black_box(rep.r_star_sq)
                    });
                },
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_decision, bench_solvers);
criterion_main!(benches);
