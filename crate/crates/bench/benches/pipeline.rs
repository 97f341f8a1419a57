use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use factcheck_bench::{synthetic_judgements, synthetic_text};
use factcheck_core::decomposition::split_sentences;
use factcheck_core::evaluation::metrics::{ngram_distance, normalized_edit_distance, word_overlap};
use factcheck_core::retrieval::{chunk_passages, rerank};
use factcheck_core::verification::{aggregate_verdict, VerificationOptions};

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [20usize, 200] {
        let a = synthetic_text(n, 1);
        let b = synthetic_text(n, 2);
        group.bench_with_input(BenchmarkId::new("normalized_edit_distance", n), &n, |bench, _| {
            bench.iter(|| normalized_edit_distance(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("word_overlap", n), &n, |bench, _| {
            bench.iter(|| word_overlap(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("ngram_distance", n), &n, |bench, _| {
            bench.iter(|| ngram_distance(black_box(&a), black_box(&b), 2))
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let doc = synthetic_text(5_000, 7);
    let claim = "the oldest justice served on the supreme court until retirement";
    c.bench_function("chunk_passages/5000", |b| b.iter(|| chunk_passages("u", black_box(&doc), 100, 50)));
    let passages: Vec<_> = chunk_passages("u", &doc, 100, 50).into_iter().map(|p| (p, "q".to_string())).collect();
    c.bench_function("rerank_lexical/99", |b| {
        b.iter(|| rerank(black_box(claim), passages.clone(), None, 1.0, 5))
    });
}

fn aggregation(c: &mut Criterion) {
    let opts = VerificationOptions::default();
    let judgements = synthetic_judgements(50, 3);
    c.bench_function("aggregate_verdict/50", |b| b.iter(|| aggregate_verdict(black_box(&judgements), &opts)));
}

fn splitting(c: &mut Criterion) {
    let text = "In 1980, the oldest justice was Justice William O. Douglas. He served from 1939 until 1975. ".repeat(50);
    c.bench_function("split_sentences/100", |b| b.iter(|| split_sentences(black_box(&text))));
}

criterion_group!(benches, metrics, retrieval, aggregation, splitting);
criterion_main!(benches);
