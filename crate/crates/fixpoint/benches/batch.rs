use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fixpoint::datadep::{run_batch_seq, standard_batch_cases};

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("data_dependence_batch");
    for seeds in [17u64, 64] {
        let cases = standard_batch_cases(seeds);
        group.bench_with_input(BenchmarkId::new("sequential", seeds), &cases, |b, cases| {
            b.iter(|| run_batch_seq(cases).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", seeds), &cases, |b, cases| {
            b.iter(|| fixpoint::datadep::run_batch(cases).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
