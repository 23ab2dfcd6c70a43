mod common;

use std::collections::{BTreeMap, HashMap};

use cqr::corpus::{Corpus, IngestOptions, QaRecord, TermId};
use cqr::index::{Bm25Params, Field, InvertedIndex};
use cqr::relevance::{
    features_f1_f4, score_lm, score_t2lm, score_t2lm_plus, score_tlm, term_weights, MixtureWeights,
    TermWeightVector,
};
use cqr::topics::{infer_query_topics, train_lda, InferenceConfig, LdaConfig, QueryTopicPosterior};
use cqr::translation::{corpus_log_likelihood, Ibm1Trainer, ParallelPair, TranslationTable};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn scorers_match_brute_force() {
    let fx = common::tiny();
    let ctx = fx.ctx();
    let o = &fx.oracle;
    let index = InvertedIndex::build(&fx.corpus, Field::QuestionAndAnswer);
    let mu = MixtureWeights::new(0.4, 0.3, 0.2, 0.1).unwrap();
    let theta = [0.7, 0.3];
    let bm = Bm25Params::default();
    for query in &fx.queries {
        let ids = fx.ids(query);
        let post = QueryTopicPosterior { theta: theta.to_vec(), all_oov: false };
        let lib_w = term_weights(&fx.topics, &post, &ids, false).unwrap();
        let w = o.term_weights(query, &theta);
        for (word, id) in query.iter().zip(&ids) {
            assert!(close(lib_w.get(*id), w[word], 1e-12), "W({word})");
        }
        for (d, pair) in fx.corpus.pairs.iter().enumerate() {
            let tag = format!("{query:?} vs {}", pair.id);
            assert!(close(score_lm(&ids, &pair.question_tokens, ctx.stats), o.lm(query, d), 1e-9), "lm {tag}");
            assert!(close(score_tlm(&ids, &pair.question_tokens, ctx.table, ctx.stats), o.tlm(query, d), 1e-9), "tlm {tag}");
            assert!(close(score_t2lm(&ids, pair, mu, &ctx), o.t2lm(query, d, mu, 2), 1e-9), "t2lm {tag}");
            assert!(
                close(score_t2lm_plus(&ids, pair, mu, &ctx, &theta, &lib_w), o.t2lm_plus(query, d, mu, &theta, &w), 1e-9),
                "t2lm+ {tag}"
            );
            let f = features_f1_f4(&ids, pair, &ctx, &theta, &lib_w).to_array();
            let g = o.features(query, d, &theta, &w);
            for i in 0..4 {
                assert!(close(f[i], g[i], 1e-9), "F{} {tag}: {} vs {}", i + 1, f[i], g[i]);
            }
            assert!(close(index.bm25_score(&ids, d as u32, bm), o.bm25(query, d, 1.2, 0.75), 1e-9), "bm25 {tag}");
            assert!(close(index.vsm_score(&ids, d as u32), o.vsm(query, d), 1e-9), "vsm {tag}");
        }
    }
}

#[test]
fn reductions_hold_exactly() {
    let fx = common::tiny();
    let ctx = fx.ctx();
    let ident = TranslationTable::identity(fx.corpus.vocab.iter().map(|(id, _)| id));
    let ident_ctx = cqr::relevance::ScoringContext { table: &ident, ..ctx };
    let mu = MixtureWeights::default();
    let lm_only = MixtureWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
    for query in &fx.queries {
        let ids = fx.ids(query);
        for pair in &fx.corpus.pairs {
            let ones = TermWeightVector::ones(&ids);
            let plus = score_t2lm_plus(&ids, pair, mu, &ctx, &[1.0, 1.0], &ones);
            assert!((plus - score_t2lm(&ids, pair, mu, &ctx)).abs() <= 1e-12);
            let lm = score_lm(&ids, &pair.question_tokens, ctx.stats);
            assert!((score_t2lm(&ids, pair, lm_only, &ctx) - lm).abs() <= 1e-12);
            assert!((score_tlm(&ids, &pair.question_tokens, &ident, ctx.stats) - lm).abs() <= 1e-12);
            // F2 under the identity table is F1 with unit weights
            let f = features_f1_f4(&ids, pair, &ident_ctx, &[0.5, 0.5], &ones);
            assert!((f.f1 - f.f2).abs() <= 1e-12);
        }
    }
}

#[test]
fn hand_worked_feature_example() {
    // query [a], q = [a b], P(a|C) = 0.4, λ = 1/3
    let rec = |id: &str, q: &str, a: &str| QaRecord {
        id: id.into(),
        question: q.into(),
        answer: a.into(),
        ..QaRecord::default()
    };
    let corpus = Corpus::from_records(
        vec![rec("1", "a b", "c"), rec("2", "a d", "")],
        vec![],
        &IngestOptions::default(),
    )
    .unwrap();
    let a = corpus.vocab.get("a").unwrap();
    let table = TranslationTable::default();
    let topics = cqr::topics::TopicModel::from_counts(&[vec![1; corpus.vocab.len()]], 50.0, 0.01, 0, 0);
    let ctx = cqr::relevance::ScoringContext {
        stats: &corpus.stats,
        table: &table,
        topics: &topics,
        smoothing: cqr::relevance::Smoothing::Collection,
    };
    let f = features_f1_f4(&[a], &corpus.pairs[0], &ctx, &[1.0], &TermWeightVector::ones(&[a]));
    let expected = (2.0f64 / 3.0 * 0.5 + 0.4 / 3.0).ln();
    assert!((f.f1 - expected).abs() < 1e-12);
    assert!((f.f1 - 0.4667f64.ln()).abs() < 1e-4);
    // empty answer: λ_a = 1, only the background remains
    let g = features_f1_f4(&[a], &corpus.pairs[1], &ctx, &[1.0], &TermWeightVector::ones(&[a]));
    assert!((g.f4 - 0.4f64.ln()).abs() < 1e-12);
}

/// IBM Model 1 EM over strings, written independently.
fn string_em(pairs: &[(Vec<&str>, Vec<&str>)], iterations: usize) -> Vec<HashMap<(String, String), f64>> {
    let mut cooc: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (src, tgt) in pairs {
        for t in src {
            cooc.entry(t).or_default().extend(tgt.iter().copied());
        }
    }
    let mut p: HashMap<(String, String), f64> = HashMap::new();
    for (t, mut ws) in cooc {
        ws.sort();
        ws.dedup();
        for w in &ws {
            p.insert((w.to_string(), t.to_string()), 1.0 / ws.len() as f64);
        }
    }
    let mut history = vec![p.clone()];
    for _ in 0..iterations {
        let mut c: HashMap<(String, String), f64> = HashMap::new();
        for (src, tgt) in pairs {
            for w in tgt {
                let z: f64 = src.iter().map(|t| p[&(w.to_string(), t.to_string())]).sum();
                for t in src {
                    let k = (w.to_string(), t.to_string());
                    *c.entry(k.clone()).or_default() += p[&k] / z;
                }
            }
        }
        let mut totals: HashMap<String, f64> = HashMap::new();
        for ((_, t), v) in &c {
            *totals.entry(t.clone()).or_default() += v;
        }
        p = c.into_iter().map(|((w, t), v)| {
            let z = totals[&t];
            ((w, t), v / z)
        }).collect();
        history.push(p.clone());
    }
    history
}

#[test]
fn em_matches_hand_rolled_and_learns_alignment() {
    let raw: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["a", "b"], vec!["x", "y"]),
        (vec!["a", "c"], vec!["x", "z"]),
        (vec!["a", "d"], vec!["x", "w"]),
    ];
    let id = |s: &str| TermId(s.as_bytes()[0] as u32);
    let pairs: Vec<ParallelPair> = raw
        .iter()
        .map(|(s, t)| ParallelPair {
            source: s.iter().map(|w| id(w)).collect(),
            target: t.iter().map(|w| id(w)).collect(),
        })
        .collect();
    let history = string_em(&raw, 20);
    let mut trainer = Ibm1Trainer::new(&pairs).unwrap();
    for step in 0..=20 {
        if step > 0 {
            trainer.step();
        }
        let table = trainer.table();
        for ((w, t), p) in &history[step] {
            assert!((table.prob(id(w), id(t)) - p).abs() < 1e-12, "iteration {step}: P({w}|{t})");
        }
    }
    let p_xa = trainer.table().prob(id("x"), id("a"));
    assert!(p_xa > 0.9, "P(x|a) = {p_xa}");
}

#[test]
fn log_likelihood_equals_alignment_enumeration() {
    let pairs = vec![
        ParallelPair { source: vec![TermId(0), TermId(1)], target: vec![TermId(2), TermId(3), TermId(2)] },
        ParallelPair { source: vec![TermId(1)], target: vec![TermId(3), TermId(4)] },
    ];
    let mut trainer = Ibm1Trainer::new(&pairs).unwrap();
    trainer.step();
    trainer.step();
    let table = trainer.table();
    let mut expected = 0.0;
    for pair in &pairs {
        let (l, m) = (pair.source.len(), pair.target.len());
        let mut total = 0.0;
        for code in 0..l.pow(m as u32) {
            let mut c = code;
            let mut prod = 1.0;
            for &w in &pair.target {
                prod *= table.prob(w, pair.source[c % l]);
                c /= l;
            }
            total += prod;
        }
        expected += f64::ln(total);
    }
    assert!((corpus_log_likelihood(&table, &pairs) - expected).abs() < 1e-12);
}

#[test]
fn lda_separates_disjoint_vocabularies() {
    // words 0..5 only co-occur with each other, likewise 5..10
    let mut docs = Vec::new();
    for d in 0..40u32 {
        let base = if d % 2 == 0 { 0 } else { 5 };
        docs.push((0..12).map(|i| TermId(base + (d * 7 + i * 3) % 5)).collect::<Vec<_>>());
    }
    let cfg = LdaConfig { alpha: 0.1, beta: 0.01, iterations: 200, seed: 11, ..LdaConfig::with_topics(2) };
    let model = train_lda(&docs, 10, cfg).unwrap();
    let mass_a: Vec<f64> = (0..2).map(|z| model.row(z)[..5].iter().sum()).collect();
    let a_topic = if mass_a[0] > mass_a[1] { 0 } else { 1 };
    assert!(mass_a[a_topic] > 0.9, "{mass_a:?}");
    assert!(1.0 - mass_a[1 - a_topic] > 0.9, "{mass_a:?}");

    let query = [TermId(0), TermId(1), TermId(3)];
    let post = infer_query_topics(&model, &query, InferenceConfig { seed: 5, ..InferenceConfig::default() }).unwrap();
    assert!(post.theta[a_topic] > 0.8, "{:?}", post.theta);
}

#[test]
fn two_word_query_weights() {
    // V = 3, counts per topic: z0 = [8, 1, 1], z1 = [1, 1, 8], β = 1
    let model = cqr::topics::TopicModel::from_counts(&[vec![8, 1, 1], vec![1, 1, 8]], 1.0, 1.0, 0, 0);
    let post = QueryTopicPosterior { theta: vec![0.75, 0.25], all_oov: false };
    let q = [TermId(0), TermId(1)];
    let w = term_weights(&model, &post, &q, false).unwrap();
    // phi(z0) = [9, 2, 2]/13, phi(z1) = [2, 2, 9]/13
    let h = |p0: f64, p1: f64| -(0.75 * p0 * p0.ln() + 0.25 * p1 * p1.ln());
    let h0 = h(9.0 / 13.0, 2.0 / 13.0);
    let h1 = h(2.0 / 13.0, 2.0 / 13.0);
    assert!((w.get(TermId(0)) - h0 / (h0 + h1)).abs() < 1e-12);
    assert!((w.get(TermId(1)) - h1 / (h0 + h1)).abs() < 1e-12);
    assert!((w.total() - 1.0).abs() < 1e-12);
    let scaled = term_weights(&model, &post, &q, true).unwrap();
    assert!((scaled.total() - 2.0).abs() < 1e-12);
}

#[test]
fn ingestion_is_order_insensitive() {
    let data = cqr::synth::generate(cqr::synth::SynthSpec { size: 60, topics: 3, seed: 9 }).unwrap();
    let mut shuffled = data.records.clone();
    shuffled.reverse();
    shuffled.rotate_left(17);
    let a = Corpus::from_records(data.records.clone(), data.users.clone(), &IngestOptions::default()).unwrap();
    let b = Corpus::from_records(shuffled, data.users.clone(), &IngestOptions::default()).unwrap();
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.vocab, b.vocab);
}

#[test]
fn features_finite_on_synthetic_queries() {
    let data = cqr::synth::generate(cqr::synth::SynthSpec { size: 80, topics: 2, seed: 4 }).unwrap();
    let corpus = Corpus::from_records(data.records, data.users, &IngestOptions::default()).unwrap();
    let pairs = cqr::translation::make_parallel_pairs(&corpus, Default::default());
    let table = cqr::translation::train_ibm1(&pairs, 5, Some(1e-6)).unwrap();
    let topics = train_lda(&cqr::topics::topic_documents(&corpus), corpus.vocab.len(), LdaConfig { iterations: 30, ..LdaConfig::with_topics(4) }).unwrap();
    let ctx = cqr::relevance::ScoringContext {
        stats: &corpus.stats,
        table: &table,
        topics: &topics,
        smoothing: cqr::relevance::Smoothing::Collection,
    };
    let mut lines = data.queries.clone();
    lines.push(cqr::corpus::QueryLine { id: "oov".into(), query: "zzz unknownword".into(), tokens: None });
    let qs = cqr::corpus::QuerySet::from_lines(&lines, &corpus.vocab, &IngestOptions::default()).unwrap();
    for q in &qs.queries {
        let post = infer_query_topics(&topics, &q.tokens, InferenceConfig::default()).unwrap();
        let w = term_weights(&topics, &post, &q.tokens, false).unwrap();
        for pair in &corpus.pairs {
            let f = features_f1_f4(&q.tokens, pair, &ctx, &post.theta, &w);
            assert!(f.to_array().iter().all(|v| v.is_finite()), "{} {}", q.id, pair.id);
        }
    }
}
