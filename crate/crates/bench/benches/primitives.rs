use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use notikb_bench::corpus_of_size;
use notikb_core::aggregator::aggregate_word_hashes;
use notikb_core::discovery::{
    cluster_token_seqs, lcs_pair, mine_lcs_template, relative_edit_distance, ClusterConfig,
};
use notikb_core::kb::{extract_all, KnowledgeBase, DEFAULT_MAX_SLOT_TOKENS};
use notikb_core::pipeline::{discover_stage, filter_stage, hash_uploads, PipelineParams};
use notikb_core::ingest::GeneratorBank;
use notikb_core::{tokenize, Token, TokenSeq};

fn random_seqs(n: usize, max_len: usize, seed: u64) -> Vec<TokenSeq> {
    let vocab = [
        "your", "order", "has", "been", "shipped", "delivered", "friend", "flight", "near",
        "sale", "new", "today", "!", ",", ".", "the", "is", "for", "now", "see",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(4..=max_len);
            TokenSeq::new(
                (0..len)
                    .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                    .collect::<Vec<Token>>(),
            )
        })
        .collect()
}

fn bench_distance(c: &mut Criterion) {
    let seqs = random_seqs(2, 12, 1);
    c.bench_function("relative_edit_distance/len12", |b| {
        b.iter(|| relative_edit_distance(black_box(&seqs[0]), black_box(&seqs[1])).unwrap())
    });
}

fn bench_dbscan(c: &mut Criterion) {
    let seqs = random_seqs(120, 10, 2);
    let refs: Vec<&TokenSeq> = seqs.iter().collect();
    let config = ClusterConfig::default();
    c.bench_function("dbscan/n120", |b| {
        b.iter(|| cluster_token_seqs(black_box(&refs), &config).unwrap())
    });
}

fn bench_lcs(c: &mut Criterion) {
    let a = tokenize("Dear Alice , your order iPhone X has been shipped to you today !");
    let b2 = tokenize("Dear Alice , your order milk powder has been delivered to you !");
    c.bench_function("lcs_pair/len14", |b| {
        b.iter(|| lcs_pair(black_box(a.as_slice()), black_box(b2.as_slice())))
    });

    let cluster: Vec<TokenSeq> = (0..6)
        .map(|i| tokenize(&format!("Your order item{i} has been shipped to you today !")))
        .collect();
    let refs: Vec<&TokenSeq> = cluster.iter().collect();
    c.bench_function("mine_lcs_template/cluster6", |b| {
        b.iter(|| mine_lcs_template(&"shop".into(), black_box(&refs)).unwrap())
    });
}

fn bench_discovery_and_extraction(c: &mut Criterion) {
    let (corpus, _, bank) = corpus_of_size(1000, 3);
    let params = PipelineParams::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("discovery/1k_notifications", |b| {
        b.iter(|| {
            let (filtered, _) =
                filter_stage(&corpus, &GeneratorBank::filter_config(), params.salt()).unwrap();
            let freq =
                aggregate_word_hashes(&hash_uploads(&filtered, params.salt()), params.salt())
                    .unwrap();
            discover_stage(
                &filtered,
                &freq,
                &params.cluster_config(),
                &params.refine_config(),
                params.salt(),
            )
            .unwrap()
        })
    });

    let truth_bank = bank.to_template_bank(4);
    let rules: BTreeMap<_, _> = bank
        .labeled_templates()
        .into_iter()
        .map(|l| (l.rule.template_id, l.rule))
        .collect();
    group.bench_function("extraction/1k_notifications", |b| {
        b.iter(|| {
            let mut kb = KnowledgeBase::in_memory();
            extract_all(
                black_box(&corpus),
                &truth_bank,
                &rules,
                &mut kb,
                DEFAULT_MAX_SLOT_TOKENS,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_distance,
    bench_dbscan,
    bench_lcs,
    bench_discovery_and_extraction
);
criterion_main!(benches);
