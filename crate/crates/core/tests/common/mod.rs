//! Brute-force reference scorers over plain strings, written straight from
//! the formulas and sharing no code with the library's scorers.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use cqr::corpus::{Corpus, IngestOptions, QaRecord, TermId, UserRecord};
use cqr::relevance::{MixtureWeights, ScoringContext, Smoothing};
use cqr::topics::TopicModel;
use cqr::translation::TranslationTable;

pub struct Fixture {
    pub corpus: Corpus,
    pub table: TranslationTable,
    pub topics: TopicModel,
    pub queries: Vec<Vec<String>>,
    pub oracle: Oracle,
}

impl Fixture {
    pub fn ctx(&self) -> ScoringContext<'_> {
        ScoringContext {
            stats: &self.corpus.stats,
            table: &self.table,
            topics: &self.topics,
            smoothing: Smoothing::Collection,
        }
    }

    /// Query ids on the corpus vocabulary; unknown words get ids from V up.
    pub fn ids(&self, query: &[String]) -> Vec<TermId> {
        let mut oov: BTreeMap<&str, TermId> = BTreeMap::new();
        let v = self.corpus.vocab.len() as u32;
        query
            .iter()
            .map(|w| {
                self.corpus.vocab.get(w).unwrap_or_else(|| {
                    let next = TermId(v + oov.len() as u32);
                    *oov.entry(w.as_str()).or_insert(next)
                })
            })
            .collect()
    }
}

pub struct Oracle {
    /// (question, answer) tokens per pair, in corpus order.
    pub docs: Vec<(Vec<String>, Vec<String>)>,
    /// P_tr(w|t) keyed by (w, t).
    pub tr: HashMap<(String, String), f64>,
    /// Raw topic-word counts keyed by word, one map per topic.
    pub counts: Vec<HashMap<String, u64>>,
    pub vocab_size: usize,
    pub beta: f64,
}

fn count(doc: &[String], w: &str) -> usize {
    doc.iter().filter(|x| *x == w).count()
}

impl Oracle {
    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|(q, a)| q.len() + a.len()).sum()
    }

    pub fn p_c(&self, w: &str) -> f64 {
        let c: usize = self.docs.iter().map(|(q, a)| count(q, w) + count(a, w)).sum();
        let n = self.total_tokens() as f64;
        if c == 0 {
            1.0 / (10.0 * n)
        } else {
            c as f64 / n
        }
    }

    pub fn p_ml(&self, w: &str, doc: &[String]) -> f64 {
        if doc.is_empty() {
            0.0
        } else {
            count(doc, w) as f64 / doc.len() as f64
        }
    }

    pub fn p_tr(&self, w: &str, t: &str) -> f64 {
        self.tr.get(&(w.to_owned(), t.to_owned())).copied().unwrap_or(0.0)
    }

    pub fn phi(&self, z: usize, w: &str) -> f64 {
        let nz: u64 = self.counts[z].values().sum();
        let n = self.counts[z].get(w).copied().unwrap_or(0);
        (n as f64 + self.beta) / (nz as f64 + self.vocab_size as f64 * self.beta)
    }

    fn distinct(doc: &[String]) -> Vec<&String> {
        let mut d: Vec<&String> = doc.iter().collect();
        d.sort();
        d.dedup();
        d
    }

    fn tr_sum(&self, w: &str, q: &[String]) -> f64 {
        Self::distinct(q).into_iter().map(|t| self.p_tr(w, t) * self.p_ml(t, q)).sum()
    }

    fn topic_sum(&self, w: &str, q: &[String], theta: &[f64]) -> f64 {
        Self::distinct(q)
            .into_iter()
            .map(|t| {
                let s: f64 = (0..theta.len()).map(|z| theta[z] * self.phi(z, w) * self.phi(z, t)).sum();
                s * self.p_ml(t, q)
            })
            .sum()
    }

    fn lambda(doc: &[String]) -> f64 {
        1.0 / (doc.len() as f64 + 1.0)
    }

    /// Product over query words, returned as a log.
    fn smoothed(&self, query: &[String], doc: &[String], mut inner: impl FnMut(&str) -> f64) -> f64 {
        let l = Self::lambda(doc);
        let mut prod = 1.0;
        for w in query {
            prod *= (1.0 - l) * inner(w) + l * self.p_c(w);
        }
        prod.ln()
    }

    pub fn lm(&self, query: &[String], d: usize) -> f64 {
        let q = &self.docs[d].0;
        self.smoothed(query, q, |w| self.p_ml(w, q))
    }

    pub fn tlm(&self, query: &[String], d: usize) -> f64 {
        let q = &self.docs[d].0;
        self.smoothed(query, q, |w| self.tr_sum(w, q))
    }

    pub fn t2lm_plus(
        &self,
        query: &[String],
        d: usize,
        mu: MixtureWeights,
        theta: &[f64],
        weight: &HashMap<String, f64>,
    ) -> f64 {
        let (q, a) = &self.docs[d];
        self.smoothed(query, q, |w| {
            mu.mu1 * weight[w] * self.p_ml(w, q)
                + mu.mu2 * self.tr_sum(w, q)
                + mu.mu3 * self.topic_sum(w, q, theta)
                + mu.mu4 * weight[w] * self.p_ml(w, a)
        })
    }

    pub fn t2lm(&self, query: &[String], d: usize, mu: MixtureWeights, topics: usize) -> f64 {
        let ones: HashMap<String, f64> = query.iter().map(|w| (w.clone(), 1.0)).collect();
        self.t2lm_plus(query, d, mu, &vec![1.0; topics], &ones)
    }

    pub fn features(&self, query: &[String], d: usize, theta: &[f64], weight: &HashMap<String, f64>) -> [f64; 4] {
        let (q, a) = &self.docs[d];
        [
            self.smoothed(query, q, |w| weight[w] * self.p_ml(w, q)),
            self.smoothed(query, q, |w| self.tr_sum(w, q)),
            self.smoothed(query, q, |w| self.topic_sum(w, q, theta)),
            self.smoothed(query, a, |w| weight[w] * self.p_ml(w, a)),
        ]
    }

    /// Term weights: entropy of each word under θ over the summed
    /// entropies of all query occurrences.
    pub fn term_weights(&self, query: &[String], theta: &[f64]) -> HashMap<String, f64> {
        let h = |w: &str| -> f64 {
            -(0..theta.len())
                .map(|z| {
                    let p = self.phi(z, w);
                    theta[z] * p * p.ln()
                })
                .sum::<f64>()
        };
        let denom: f64 = query.iter().map(|w| h(w)).sum();
        query.iter().map(|w| (w.clone(), h(w) / denom)).collect()
    }

    fn field(&self, d: usize) -> Vec<String> {
        let (q, a) = &self.docs[d];
        q.iter().chain(a).cloned().collect()
    }

    fn df(&self, w: &str) -> usize {
        (0..self.docs.len()).filter(|&d| count(&self.field(d), w) > 0).count()
    }

    pub fn bm25(&self, query: &[String], d: usize, k1: f64, b: f64) -> f64 {
        let n = self.docs.len() as f64;
        let avg = (0..self.docs.len()).map(|i| self.field(i).len() as f64).sum::<f64>() / n;
        let doc = self.field(d);
        let dl = doc.len() as f64;
        query
            .iter()
            .map(|w| {
                let tf = count(&doc, w) as f64;
                let df = self.df(w) as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg))
            })
            .sum()
    }

    pub fn vsm(&self, query: &[String], d: usize) -> f64 {
        let n = self.docs.len() as f64;
        let doc = self.field(d);
        let mut words: Vec<&String> = query.iter().chain(&doc).collect();
        words.sort();
        words.dedup();
        let (mut dot, mut qq, mut dd) = (0.0, 0.0, 0.0);
        for w in words {
            let df = self.df(w);
            if df == 0 {
                continue;
            }
            let idf = (n / df as f64).ln();
            let qw = count(query, w) as f64 * idf;
            let dw = count(&doc, w) as f64 * idf;
            dot += qw * dw;
            qq += qw * qw;
            dd += dw * dw;
        }
        if dot == 0.0 {
            0.0
        } else {
            dot / (qq.sqrt() * dd.sqrt())
        }
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// Five pairs, three queries (one with an unseen word), a hand-written
/// translation table and a two-topic model from fixed counts.
pub fn tiny() -> Fixture {
    let raw = [
        ("p1", "how fix bike chain", "oil the chain and adjust gear", "u1", "u2"),
        ("p2", "bike gear slips", "adjust derailleur gear cable", "u2", "u3"),
        ("p3", "bake bread at home", "knead dough and bake in oven", "u3", "u1"),
        ("p4", "bread dough too sticky", "add flour to dough", "u1", "u3"),
        ("p5", "repair chain", "", "u2", "u1"),
    ];
    let records: Vec<QaRecord> = raw
        .iter()
        .map(|&(id, q, a, asker, answerer)| QaRecord {
            id: id.into(),
            question: q.into(),
            answer: a.into(),
            asker: asker.into(),
            answerer: answerer.into(),
            ..QaRecord::default()
        })
        .collect();
    let users = vec![
        UserRecord { user_id: "u1".into(), best_answer_count: 4 },
        UserRecord { user_id: "u2".into(), best_answer_count: 100 },
        UserRecord { user_id: "u3".into(), best_answer_count: 900 },
    ];
    let corpus = Corpus::from_records(records, users, &IngestOptions::default()).unwrap();

    let tr_entries: &[(&str, &[(&str, f64)])] = &[
        ("chain", &[("chain", 0.5), ("oil", 0.25), ("gear", 0.25)]),
        ("bike", &[("bike", 0.4), ("gear", 0.3), ("chain", 0.2), ("derailleur", 0.1)]),
        ("fix", &[("repair", 0.5), ("adjust", 0.5)]),
        ("bread", &[("dough", 0.6), ("bread", 0.4)]),
        ("bake", &[("oven", 0.5), ("bake", 0.5)]),
        ("repair", &[("fix", 0.7), ("repair", 0.3)]),
    ];
    let mut tr = HashMap::new();
    let mut rows: BTreeMap<TermId, Vec<(TermId, f64)>> = BTreeMap::new();
    for (t, row) in tr_entries {
        for (w, p) in row.iter() {
            tr.insert(((*w).to_owned(), (*t).to_owned()), *p);
            rows.entry(corpus.vocab.get(t).unwrap())
                .or_default()
                .push((corpus.vocab.get(w).unwrap(), *p));
        }
    }
    let table = TranslationTable::from_rows(rows);

    // topic 0 is cycling, topic 1 is baking; counts follow word membership
    let cycling = ["bike", "chain", "gear", "oil", "adjust", "derailleur", "cable", "slips", "repair", "fix"];
    let baking = ["bread", "bake", "dough", "knead", "oven", "flour", "sticky", "home"];
    let v = corpus.vocab.len();
    let mut dense = vec![vec![0u64; v]; 2];
    let mut counts = vec![HashMap::new(), HashMap::new()];
    for (id, tok) in corpus.vocab.iter() {
        let (c0, c1) = if cycling.contains(&tok) {
            (3 + (id.0 as u64 % 3), 0)
        } else if baking.contains(&tok) {
            (0, 2 + (id.0 as u64 % 4))
        } else {
            (1, 1)
        };
        dense[0][id.index()] = c0;
        dense[1][id.index()] = c1;
        counts[0].insert(tok.to_owned(), c0);
        counts[1].insert(tok.to_owned(), c1);
    }
    let beta = 0.01;
    let topics = TopicModel::from_counts(&dense, 25.0, beta, 0, 0);

    let docs = raw.iter().map(|&(_, q, a, _, _)| (words(q), words(a))).collect();
    Fixture {
        corpus,
        table,
        topics,
        queries: vec![words("fix bike chain"), words("sticky bread dough"), words("repair my chain")],
        oracle: Oracle {
            docs,
            tr,
            counts,
            vocab_size: v,
            beta,
        },
    }
}
