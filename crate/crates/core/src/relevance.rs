//! Question-relevance scoring: query-likelihood LM, translation LM, the
//! topic-translation mixture and its query-aware variant, entropy-based
//! query term weights, and the four per-component relevance features.
//!
//! Everything is computed in the log domain. Each query token occurrence
//! contributes one log term.

use std::collections::BTreeMap;

use crate::corpus::{collection_prob, CollectionStats, QAPair, TermId};
use crate::error::{Error, Result};
use crate::index::ScoredCandidate;
use crate::topics::{QueryTopicPosterior, TopicModel};
use crate::translation::TranslationTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureWeights {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

impl MixtureWeights {
    pub fn new(mu1: f64, mu2: f64, mu3: f64, mu4: f64) -> Result<Self> {
        let mu = [mu1, mu2, mu3, mu4];
        if mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InvalidArgument(format!("mixture weights must lie in [0,1]: {mu:?}")));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {sum}, not 1")));
        }
        Ok(MixtureWeights { mu1, mu2, mu3, mu4 })
    }
}

impl Default for MixtureWeights {
    fn default() -> Self {
        MixtureWeights {
            mu1: 0.3,
            mu2: 0.3,
            mu3: 0.2,
            mu4: 0.2,
        }
    }
}

/// Per-query-term weights W(query, w).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermWeightVector {
    weights: BTreeMap<TermId, f64>,
}

impl TermWeightVector {
    /// Every query term weighted 1. Turns the weighted scorers back into
    /// their unweighted forms.
    pub fn ones(query: &[TermId]) -> Self {
        TermWeightVector {
            weights: query.iter().map(|&w| (w, 1.0)).collect(),
        }
    }

    pub fn get(&self, w: TermId) -> f64 {
        self.weights.get(&w).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, f64)> + '_ {
        self.weights.iter().map(|(&w, &x)| (w, x))
    }

    /// Sum over distinct query terms.
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Expected information content of `w` under the query's topic mixture:
/// −Σ_i θ_i P(w|z_i) ln P(w|z_i).
fn topic_entropy_term(model: &TopicModel, theta: &[f64], w: TermId) -> f64 {
    let mut h = 0.0;
    for (z, &th) in theta.iter().enumerate() {
        let p = model.phi(z, w);
        h -= th * p * p.ln();
    }
    h
}

/// W(query, w) = H(w) / Σ_{t∈query} H(t), where each occurrence of t adds to
/// the denominator. With `rescale`, every weight is multiplied by |query| so
/// the weights average one instead of summing to one.
pub fn term_weights(
    model: &TopicModel,
    posterior: &QueryTopicPosterior,
    query: &[TermId],
    rescale: bool,
) -> Result<TermWeightVector> {
    if query.is_empty() {
        return Err(Error::InvalidArgument("empty query".into()));
    }
    if posterior.theta.len() != model.topics {
        return Err(Error::InvalidArgument(format!(
            "posterior has {} topics, model has {}",
            posterior.theta.len(),
            model.topics
        )));
    }
    let theta = &posterior.theta;
    let mut numerators: BTreeMap<TermId, f64> = BTreeMap::new();
    let mut denom = 0.0;
    for &t in query {
        let h = *numerators
            .entry(t)
            .or_insert_with(|| topic_entropy_term(model, theta, t));
        denom += h;
    }
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateTopicModel);
    }
    let scale = if rescale { query.len() as f64 } else { 1.0 };
    Ok(TermWeightVector {
        weights: numerators
            .into_iter()
            .map(|(w, h)| (w, h / denom * scale))
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Smoothing {
    /// Blend each per-term probability with λ·P(w|C), λ = 1/(|doc|+1).
    #[default]
    Collection,
    /// Use the raw mixture; may produce −∞.
    None,
}

/// Models shared by the topic-aware scorers.
#[derive(Clone, Copy, Debug)]
pub struct ScoringContext<'a> {
    pub stats: &'a CollectionStats,
    pub table: &'a TranslationTable,
    pub topics: &'a TopicModel,
    pub smoothing: Smoothing,
}

/// λ = 1/(|doc| + 1)
#[inline]
pub fn smoothing_lambda(doc_len: usize) -> f64 {
    1.0 / (doc_len as f64 + 1.0)
}

/// Distinct terms of a document with their maximum-likelihood probability.
fn ml_distribution(doc: &[TermId]) -> Vec<(TermId, f64)> {
    let mut counts: BTreeMap<TermId, usize> = BTreeMap::new();
    for &t in doc {
        *counts.entry(t).or_default() += 1;
    }
    let n = doc.len() as f64;
    counts.into_iter().map(|(t, c)| (t, c as f64 / n)).collect()
}

fn ml_of(dist: &[(TermId, f64)], w: TermId) -> f64 {
    dist.binary_search_by_key(&w, |e| e.0).map_or(0.0, |i| dist[i].1)
}

/// Σ_{t∈q} P_tr(w|t) P_ml(t|q)
fn translation_part(table: &TranslationTable, w: TermId, q: &[(TermId, f64)]) -> f64 {
    q.iter().map(|&(t, p)| table.prob(w, t) * p).sum()
}

/// Σ_{t∈q} [Σ_i θ_i P(w|z_i) P(t|z_i)] P_ml(t|q)
fn topic_part(model: &TopicModel, theta: &[f64], w: TermId, q: &[(TermId, f64)]) -> f64 {
    q.iter()
        .map(|&(t, p)| {
            let mut sim = 0.0;
            for (z, &th) in theta.iter().enumerate() {
                sim += th * model.phi(z, w) * model.phi(z, t);
            }
            sim * p
        })
        .sum()
}

#[inline]
fn smoothed_log(p: f64, lambda: f64, background: f64) -> f64 {
    ((1.0 - lambda) * p + lambda * background).ln()
}

/// Query-likelihood LM with λ_q = 1/(|q|+1) collection smoothing.
pub fn score_lm(query: &[TermId], q: &[TermId], stats: &CollectionStats) -> f64 {
    let dist = ml_distribution(q);
    let lambda = smoothing_lambda(q.len());
    query
        .iter()
        .map(|&w| smoothed_log(ml_of(&dist, w), lambda, collection_prob(w, stats)))
        .sum()
}

/// Translation LM: the in-question probability is replaced by
/// Σ_t P_tr(w|t) P_ml(t|q).
pub fn score_tlm(
    query: &[TermId],
    q: &[TermId],
    table: &TranslationTable,
    stats: &CollectionStats,
) -> f64 {
    let dist = ml_distribution(q);
    let lambda = smoothing_lambda(q.len());
    query
        .iter()
        .map(|&w| smoothed_log(translation_part(table, w, &dist), lambda, collection_prob(w, stats)))
        .sum()
}

/// Topic-translation LM with all topics weighted equally.
pub fn score_t2lm(query: &[TermId], pair: &QAPair, mu: MixtureWeights, ctx: &ScoringContext) -> f64 {
    let ones = vec![1.0; ctx.topics.topics];
    score_t2lm_plus(query, pair, mu, ctx, &ones, &TermWeightVector::ones(query))
}

/// Query-aware topic-translation LM: topic similarities are weighted by the
/// query posterior `theta` and the exact-match parts by `weights`.
pub fn score_t2lm_plus(
    query: &[TermId],
    pair: &QAPair,
    mu: MixtureWeights,
    ctx: &ScoringContext,
    theta: &[f64],
    weights: &TermWeightVector,
) -> f64 {
    let q = ml_distribution(&pair.question_tokens);
    let a = ml_distribution(&pair.answer_tokens);
    let lambda = smoothing_lambda(pair.question_tokens.len());
    query
        .iter()
        .map(|&w| {
            let wt = weights.get(w);
            let mix = mu.mu1 * wt * ml_of(&q, w)
                + mu.mu2 * translation_part(ctx.table, w, &q)
                + mu.mu3 * topic_part(ctx.topics, theta, w, &q)
                + mu.mu4 * wt * ml_of(&a, w);
            match ctx.smoothing {
                Smoothing::Collection => smoothed_log(mix, lambda, collection_prob(w, ctx.stats)),
                Smoothing::None => mix.ln(),
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelevanceFeatures {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl RelevanceFeatures {
    pub fn to_array(self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

/// The four mixture components of the query-aware model, each smoothed on
/// its own: weighted question LM, question translation, query-weighted
/// topic similarity, weighted answer LM. An empty answer gives λ_a = 1.
pub fn features_f1_f4(
    query: &[TermId],
    pair: &QAPair,
    ctx: &ScoringContext,
    theta: &[f64],
    weights: &TermWeightVector,
) -> RelevanceFeatures {
    let q = ml_distribution(&pair.question_tokens);
    let a = ml_distribution(&pair.answer_tokens);
    let lq = smoothing_lambda(pair.question_tokens.len());
    let la = smoothing_lambda(pair.answer_tokens.len());
    let mut f = RelevanceFeatures::default();
    for &w in query {
        let bg = collection_prob(w, ctx.stats);
        let wt = weights.get(w);
        f.f1 += smoothed_log(wt * ml_of(&q, w), lq, bg);
        f.f2 += smoothed_log(translation_part(ctx.table, w, &q), lq, bg);
        f.f3 += smoothed_log(topic_part(ctx.topics, theta, w, &q), lq, bg);
        f.f4 += smoothed_log(wt * ml_of(&a, w), la, bg);
    }
    f
}

/// Re-sorts candidates by `score` (descending), ties by ascending qa id,
/// and renumbers ranks from 1.
pub fn rank_candidates<F>(candidates: &[ScoredCandidate], mut score: F) -> Vec<ScoredCandidate>
where
    F: FnMut(&ScoredCandidate) -> f64,
{
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| ScoredCandidate {
            score: score(c),
            ..c.clone()
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.qa_id.cmp(&b.qa_id)));
    for (i, c) in scored.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    scored
}

/// Retrieval methods that can produce a ranked run on their own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Vsm,
    Bm25,
    Lm,
    Tlm,
    T2lm,
    T2lmPlus,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Vsm,
        Method::Bm25,
        Method::Lm,
        Method::Tlm,
        Method::T2lm,
        Method::T2lmPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vsm => "vsm",
            Method::Bm25 => "bm25",
            Method::Lm => "lm",
            Method::Tlm => "tlm",
            Method::T2lm => "t2lm",
            Method::T2lmPlus => "t2lm+",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
