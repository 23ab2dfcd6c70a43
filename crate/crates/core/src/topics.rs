//! LDA topic model trained by collapsed Gibbs sampling, plus fold-in
//! inference of a query's topic mixture with the topic-word
//! distributions frozen.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, TermId};
use crate::error::{Error, Result};

pub const DEFAULT_TOPICS: usize = 50;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_GIBBS_ITERATIONS: usize = 500;
pub const DEFAULT_BURN_IN: usize = 50;
pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// Griffiths–Steyvers defaults: alpha = 50/K, beta = 0.01.
    pub fn with_topics(topics: usize) -> Self {
        LdaConfig {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_GIBBS_ITERATIONS,
            seed: 0,
        }
    }
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self::with_topics(DEFAULT_TOPICS)
    }
}

/// Question and answer tokens concatenated, one document per pair.
pub fn topic_documents(corpus: &Corpus) -> Vec<Vec<TermId>> {
    corpus
        .pairs
        .iter()
        .map(|p| {
            p.question_tokens
                .iter()
                .chain(&p.answer_tokens)
                .copied()
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicModel {
    pub topics: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// n_z: tokens assigned to each topic in the final sweep.
    topic_totals: Vec<u64>,
    /// Row-major K×V matrix of P(w|z).
    phi: Vec<f64>,
}

impl TopicModel {
    /// Builds a model from raw topic-word counts with beta smoothing.
    pub fn from_counts(
        counts: &[Vec<u64>],
        alpha: f64,
        beta: f64,
        seed: u64,
        iterations: usize,
    ) -> Self {
        let topics = counts.len();
        let vocab_size = counts.first().map_or(0, Vec::len);
        let topic_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let mut phi = Vec::with_capacity(topics * vocab_size);
        for (row, &nz) in counts.iter().zip(&topic_totals) {
            let denom = nz as f64 + vocab_size as f64 * beta;
            phi.extend(row.iter().map(|&n| (n as f64 + beta) / denom));
        }
        TopicModel {
            topics,
            vocab_size,
            alpha,
            beta,
            seed,
            iterations,
            topic_totals,
            phi,
        }
    }

    #[inline]
    pub fn phi(&self, z: usize, w: TermId) -> f64 {
        if w.index() < self.vocab_size {
            self.phi[z * self.vocab_size + w.index()]
        } else {
            self.oov_floor(z)
        }
    }

    /// β/(n_z + Vβ): probability of an out-of-vocabulary word under topic z.
    pub fn oov_floor(&self, z: usize) -> f64 {
        self.beta / (self.topic_totals[z] as f64 + self.vocab_size as f64 * self.beta)
    }

    pub fn row(&self, z: usize) -> &[f64] {
        &self.phi[z * self.vocab_size..(z + 1) * self.vocab_size]
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "lda v1 {} {} {} {} {} {}",
            self.topics, self.vocab_size, self.alpha, self.beta, self.seed, self.iterations
        )
        .unwrap();
        let totals: Vec<String> = self.topic_totals.iter().map(u64::to_string).collect();
        writeln!(out, "totals {}", totals.join(" ")).unwrap();
        for z in 0..self.topics {
            let row: Vec<String> = self.row(z).iter().map(f64::to_string).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        crate::io::write_atomic(path, out.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = crate::io::read_to_string(path)?;
        let mut lines = text.lines();
        let err = |line: usize, m: &str| Error::parse(name.clone(), line, m);

        let header: Vec<&str> = lines.next().unwrap_or("").split(' ').collect();
        if header.len() != 8 || header[0] != "lda" || header[1] != "v1" {
            return Err(err(1, "expected `lda v1 K V alpha beta seed iterations`"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(1, "bad number in header"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(1, "bad integer in header"));
        let topics = int(header[2])? as usize;
        let vocab_size = int(header[3])? as usize;
        let (alpha, beta) = (num(header[4])?, num(header[5])?);
        let (seed, iterations) = (int(header[6])?, int(header[7])? as usize);

        let totals_line = lines.next().unwrap_or("");
        let topic_totals = totals_line
            .strip_prefix("totals ")
            .ok_or_else(|| err(2, "expected `totals ...`"))?
            .split(' ')
            .map(|s| s.parse::<u64>().map_err(|_| err(2, "bad topic total")))
            .collect::<Result<Vec<_>>>()?;
        if topic_totals.len() != topics {
            return Err(err(2, "topic total count does not match K"));
        }
        let mut phi = Vec::with_capacity(topics * vocab_size);
        for z in 0..topics {
            let line_no = z + 3;
            let row = lines.next().ok_or_else(|| err(line_no, "missing phi row"))?;
            let before = phi.len();
            for v in row.split(' ').filter(|s| !s.is_empty()) {
                phi.push(v.parse::<f64>().map_err(|_| err(line_no, "bad probability"))?);
            }
            if phi.len() - before != vocab_size {
                return Err(err(line_no, "phi row length does not match V"));
            }
        }
        Ok(TopicModel {
            topics,
            vocab_size,
            alpha,
            beta,
            seed,
            iterations,
            topic_totals,
            phi,
        })
    }
}

pub fn topic_word_prob(model: &TopicModel, w: TermId, z: usize) -> Result<f64> {
    if z >= model.topics {
        return Err(Error::InvalidArgument(format!(
            "topic {z} out of range for K={}",
            model.topics
        )));
    }
    Ok(model.phi(z, w))
}

/// Collapsed Gibbs sampler state.
pub struct LdaSampler<'a> {
    docs: &'a [Vec<TermId>],
    config: LdaConfig,
    vocab_size: usize,
    assignments: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u64>>,
    topic_totals: Vec<u64>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    sweeps: usize,
}

impl<'a> LdaSampler<'a> {
    pub fn new(docs: &'a [Vec<TermId>], vocab_size: usize, config: LdaConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if config.topics == 0 || config.iterations == 0 {
            return Err(Error::InvalidArgument("LDA needs K >= 1 and iterations >= 1".into()));
        }
        if !(config.alpha > 0.0 && config.beta > 0.0) {
            return Err(Error::InvalidArgument("LDA needs alpha > 0 and beta > 0".into()));
        }
        let tokens: usize = docs.iter().map(Vec::len).sum();
        if config.topics > tokens {
            return Err(Error::DegenerateTopicCount {
                topics: config.topics,
                tokens,
            });
        }
        if let Some(w) = docs.iter().flatten().find(|w| w.index() >= vocab_size) {
            return Err(Error::InvalidArgument(format!(
                "term id {} outside training vocabulary of size {vocab_size}",
                w.0
            )));
        }

        let k = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut topic_word = vec![vec![0u64; vocab_size]; k];
        let mut topic_totals = vec![0u64; k];
        let mut doc_topic = Vec::with_capacity(docs.len());
        let mut assignments = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut counts = vec![0u32; k];
            let z_doc: Vec<u32> = doc
                .iter()
                .map(|w| {
                    let z = rng.random_range(0..k);
                    counts[z] += 1;
                    topic_word[z][w.index()] += 1;
                    topic_totals[z] += 1;
                    z as u32
                })
                .collect();
            doc_topic.push(counts);
            assignments.push(z_doc);
        }
        Ok(LdaSampler {
            docs,
            config,
            vocab_size,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            probs: vec![0.0; k],
            sweeps: 0,
        })
    }

    /// Resamples every token's topic once.
    pub fn sweep(&mut self) {
        let k = self.config.topics;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let vbeta = self.vocab_size as f64 * beta;
        for (d, doc) in self.docs.iter().enumerate() {
            for (i, w) in doc.iter().enumerate() {
                let w = w.index();
                let old = self.assignments[d][i] as usize;
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for z in 0..k {
                    let p = (self.doc_topic[d][z] as f64 + alpha)
                        * (self.topic_word[z][w] as f64 + beta)
                        / (self.topic_totals[z] as f64 + vbeta);
                    total += p;
                    self.probs[z] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[d][i] = new as u32;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_totals[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn topic_word_counts(&self) -> &[Vec<u64>] {
        &self.topic_word
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    pub fn model(&self) -> TopicModel {
        TopicModel::from_counts(
            &self.topic_word,
            self.config.alpha,
            self.config.beta,
            self.config.seed,
            self.sweeps,
        )
    }
}

pub fn train_lda(docs: &[Vec<TermId>], vocab_size: usize, config: LdaConfig) -> Result<TopicModel> {
    let mut sampler = LdaSampler::new(docs, vocab_size, config)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.model())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferenceConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            burn_in: DEFAULT_BURN_IN,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// P(z|query) for each topic.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryTopicPosterior {
    pub theta: Vec<f64>,
    /// Set when no query token was in the training vocabulary and the
    /// posterior fell back to uniform.
    pub all_oov: bool,
}

/// Fold-in Gibbs sampling with phi frozen. theta[z] = (n_z + α)/(n + Kα),
/// averaged over the post-burn-in sweeps, where n counts in-vocabulary
/// query tokens.
pub fn infer_query_topics(
    model: &TopicModel,
    query: &[TermId],
    config: InferenceConfig,
) -> Result<QueryTopicPosterior> {
    if query.is_empty() {
        return Err(Error::InvalidArgument("empty query".into()));
    }
    let k = model.topics;
    let words: Vec<TermId> = query
        .iter()
        .copied()
        .filter(|w| w.index() < model.vocab_size)
        .collect();
    if words.is_empty() {
        return Ok(QueryTopicPosterior {
            theta: vec![1.0 / k as f64; k],
            all_oov: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts = vec![0u32; k];
    let mut z_of: Vec<usize> = words
        .iter()
        .map(|_| {
            let z = rng.random_range(0..k);
            counts[z] += 1;
            z
        })
        .collect();

    let alpha = model.alpha;
    let n = words.len() as f64;
    let mut cumulative = vec![0.0; k];
    let mut theta = vec![0.0; k];
    let sweeps = config.burn_in + config.samples.max(1);
    for sweep in 0..sweeps {
        for (i, &w) in words.iter().enumerate() {
            counts[z_of[i]] -= 1;
            let mut total = 0.0;
            for (z, c) in cumulative.iter_mut().enumerate() {
                total += model.phi(z, w) * (counts[z] as f64 + alpha);
                *c = total;
            }
            let u = rng.random::<f64>() * total;
            let z = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
            z_of[i] = z;
            counts[z] += 1;
        }
        if sweep >= config.burn_in {
            for (t, &c) in theta.iter_mut().zip(&counts) {
                *t += (c as f64 + alpha) / (n + k as f64 * alpha);
            }
        }
    }
    let z: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= z);
    Ok(QueryTopicPosterior {
        theta,
        all_oov: false,
    })
}
