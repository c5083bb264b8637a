use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fingering::eval_measures::{match_rates, recombination_match_rate, RecombinationConfig};
use fingering_bench::sequences;

fn recombination(c: &mut Criterion) {
    let cfg = RecombinationConfig::default();
    let mut group = c.benchmark_group("recombination");
    for refs in [2, 6, 12] {
        let (est, gts) = sequences(refs as u64, refs, 1000);
        group.bench_with_input(BenchmarkId::new("references", refs), &(est, gts), |b, (est, gts)| {
            b.iter(|| recombination_match_rate(est, gts, &cfg).unwrap())
        });
    }
    group.finish();
}

fn all_rates(c: &mut Criterion) {
    let cfg = RecombinationConfig::default();
    let (est, gts) = sequences(7, 6, 1000);
    c.bench_function("match_rates", |b| b.iter(|| match_rates(&est, &gts, &cfg).unwrap()));
}

criterion_group!(benches, recombination, all_rates);
criterion_main!(benches);
