use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fingering::pig_io::Hand;
use fingering::{ChordHmmModel, ChordHmmParams, NoteHmmConfig, NoteHmmModel};
use fingering_bench::{corpus, piece};

fn viterbi(c: &mut Criterion) {
    let train = corpus(1, 20, 300);
    let part = piece(99, 500).hand_part(Hand::Right).notes;
    let mut group = c.benchmark_group("viterbi");
    for order in 1..=3 {
        let model = NoteHmmModel::train(&train, NoteHmmConfig::tuned(order)).unwrap();
        group.bench_with_input(BenchmarkId::new("note-hmm", order), &part, |b, notes| {
            b.iter(|| model.decode(Hand::Right, notes).unwrap())
        });
    }
    let chord = ChordHmmModel::train(&train, ChordHmmParams::default()).unwrap();
    group.bench_with_input(BenchmarkId::new("chord-hmm", 1), &part, |b, notes| {
        b.iter(|| chord.decode(Hand::Right, notes).unwrap())
    });
    group.finish();
}

fn training(c: &mut Criterion) {
    let train = corpus(2, 40, 300);
    let mut group = c.benchmark_group("training");
    group.sample_size(20);
    for order in 1..=3 {
        group.bench_with_input(BenchmarkId::new("note-hmm", order), &train, |b, pieces| {
            b.iter(|| NoteHmmModel::train(pieces, NoteHmmConfig::tuned(order)).unwrap())
        });
    }
    group.bench_function("chord-hmm", |b| {
        b.iter(|| ChordHmmModel::train(&train, ChordHmmParams::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, viterbi, training);
criterion_main!(benches);
