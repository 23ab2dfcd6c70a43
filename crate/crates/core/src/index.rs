//! Inverted index over the Q&A archive: VSM and BM25 scoring plus top-k
//! candidate generation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QAPair, TermId};
use crate::error::{Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    Question,
    #[default]
    QuestionAndAnswer,
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "question" => Ok(Field::Question),
            "question_and_answer" | "qa" => Ok(Field::QuestionAndAnswer),
            other => Err(Error::InvalidArgument(format!("unknown index field `{other}`"))),
        }
    }
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Question => "question",
            Field::QuestionAndAnswer => "question_and_answer",
        }
    }

    fn tokens<'a>(self, pair: &'a QAPair) -> impl Iterator<Item = TermId> + 'a {
        let answer: &[TermId] = match self {
            Field::Question => &[],
            Field::QuestionAndAnswer => &pair.answer_tokens,
        };
        pair.question_tokens.iter().chain(answer).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub field: Field,
    /// Postings per term id, sorted by doc.
    postings: BTreeMap<TermId, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    /// Euclidean norm of each document's tf-idf vector.
    doc_norms: Vec<f64>,
    avg_doc_len: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub qa_id: String,
    pub doc: u32,
    pub score: f64,
    pub rank: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidArgument(format!(
                "bm25 needs k1 > 0 and 0 <= b <= 1, got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, field: Field) -> Self {
        let mut postings: BTreeMap<TermId, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.pairs.len());
        for (doc, pair) in corpus.pairs.iter().enumerate() {
            let mut tf: BTreeMap<TermId, u32> = BTreeMap::new();
            for t in field.tokens(pair) {
                *tf.entry(t).or_default() += 1;
            }
            doc_lengths.push(tf.values().sum());
            for (t, n) in tf {
                postings.entry(t).or_default().push(Posting {
                    doc: doc as u32,
                    tf: n,
                });
            }
        }
        let avg_doc_len = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64
        };
        let n = doc_lengths.len() as f64;
        let mut sq = vec![0.0f64; doc_lengths.len()];
        for list in postings.values() {
            let idf = (n / list.len() as f64).ln();
            for p in list {
                let w = p.tf as f64 * idf;
                sq[p.doc as usize] += w * w;
            }
        }
        InvertedIndex {
            field,
            postings,
            doc_lengths,
            doc_ids: corpus.pairs.iter().map(|p| p.id.clone()).collect(),
            doc_norms: sq.into_iter().map(f64::sqrt).collect(),
            avg_doc_len,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn postings(&self, term: TermId) -> &[Posting] {
        self.postings.get(&term).map_or(&[], Vec::as_slice)
    }

    pub fn df(&self, term: TermId) -> usize {
        self.postings(term).len()
    }

    pub fn tf(&self, term: TermId, doc: u32) -> u32 {
        let p = self.postings(term);
        p.binary_search_by_key(&doc, |x| x.doc).map_or(0, |i| p[i].tf)
    }

    /// ln((N − df + 0.5)/(df + 0.5) + 1)
    pub fn bm25_idf(&self, term: TermId) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.df(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// ln(N / df), zero for unindexed terms.
    pub fn vsm_idf(&self, term: TermId) -> f64 {
        match self.df(term) {
            0 => 0.0,
            df => (self.doc_count() as f64 / df as f64).ln(),
        }
    }

    /// Okapi BM25. Each query token occurrence contributes one term.
    pub fn bm25_score(&self, query: &[TermId], doc: u32, params: Bm25Params) -> f64 {
        let dl = self.doc_len(doc) as f64;
        let norm = params.k1 * (1.0 - params.b + params.b * dl / self.avg_doc_len);
        query
            .iter()
            .map(|&t| {
                let tf = self.tf(t, doc) as f64;
                if tf == 0.0 {
                    0.0
                } else {
                    self.bm25_idf(t) * tf * (params.k1 + 1.0) / (tf + norm)
                }
            })
            .sum()
    }

    /// Cosine similarity between raw-tf × ln(N/df) vectors.
    pub fn vsm_score(&self, query: &[TermId], doc: u32) -> f64 {
        let mut qtf: BTreeMap<TermId, f64> = BTreeMap::new();
        for &t in query {
            *qtf.entry(t).or_default() += 1.0;
        }
        let mut dot = 0.0;
        let mut q_norm = 0.0;
        for (&t, &tf) in &qtf {
            let idf = self.vsm_idf(t);
            let qw = tf * idf;
            q_norm += qw * qw;
            dot += qw * self.tf(t, doc) as f64 * idf;
        }
        let d_norm = self.doc_norm(doc);
        if dot == 0.0 || q_norm == 0.0 || d_norm == 0.0 {
            return 0.0;
        }
        (dot / (q_norm.sqrt() * d_norm)).min(1.0)
    }

    fn doc_norm(&self, doc: u32) -> f64 {
        self.doc_norms[doc as usize]
    }

    /// Top-k documents by BM25, ties broken by ascending qa id. Documents
    /// sharing no term with the query are never returned.
    pub fn retrieve_candidates(
        &self,
        query: &[TermId],
        k: usize,
        params: Bm25Params,
    ) -> Vec<ScoredCandidate> {
        let mut touched: Vec<u32> = query
            .iter()
            .flat_map(|&t| self.postings(t).iter().map(|p| p.doc))
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let scored: Vec<(u32, f64)> = touched
            .into_iter()
            .map(|d| (d, self.bm25_score(query, d, params)))
            .collect();
        rank_by_score(scored, |d| self.doc_id(d))
            .into_iter()
            .take(k)
            .collect()
    }
}

/// Sorts `(doc, score)` pairs by descending score then ascending qa id and
/// assigns 1-based ranks.
pub(crate) fn rank_by_score<'a, F>(mut scored: Vec<(u32, f64)>, id_of: F) -> Vec<ScoredCandidate>
where
    F: Fn(u32) -> &'a str,
{
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| id_of(a.0).cmp(id_of(b.0)))
    });
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (doc, score))| ScoredCandidate {
            qa_id: id_of(doc).to_owned(),
            doc,
            score,
            rank: i + 1,
        })
        .collect()
}
