//! Seeded synthetic Q&A archives with planted relevance.
//!
//! Each topic owns a set of core words, a paraphrase for every core word,
//! and some general words. Answers tend to use the paraphrases of the
//! question's words, which gives the translation model something to learn.
//! Every query has a cluster of three planted pairs:
//!
//! - a duplicate question in the query's original wording, answered by an
//!   expert (grade 2);
//! - a paraphrased question answered by an expert (grade 2);
//! - the same paraphrased question answered by a novice (grade 1).
//!
//! Remaining pairs are topical filler and stay unjudged.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_qa_records, write_query_lines, write_users, QaRecord, QueryLine, UserRecord};
use crate::error::{Error, Result};
use crate::eval::Qrels;

const CORE_WORDS: usize = 20;
const GENERAL_WORDS: usize = 10;
const COMMON_WORDS: usize = 8;
const INTENT_WORDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthSpec {
    /// Number of Q&A pairs.
    pub size: usize,
    pub topics: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub records: Vec<QaRecord>,
    pub users: Vec<UserRecord>,
    pub queries: Vec<QueryLine>,
    pub qrels: Qrels,
    /// Per-topic vocabularies, for inspection.
    pub topic_vocab: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthPaths {
    pub corpus: PathBuf,
    pub users: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SynthPaths {
            corpus: dir.join("corpus.jsonl"),
            users: dir.join("users.jsonl"),
            queries: dir.join("queries.jsonl"),
            qrels: dir.join("qrels.txt"),
        }
    }
}

fn core(topic: usize, j: usize) -> String {
    format!("t{topic}w{j}")
}

fn paraphrase(topic: usize, j: usize) -> String {
    format!("t{topic}p{j}")
}

fn general(topic: usize, j: usize) -> String {
    format!("t{topic}g{j}")
}

fn common(j: usize) -> String {
    format!("c{j}")
}

/// A core concept of a topic, written in either of its two forms.
#[derive(Clone, Copy)]
struct Concept {
    topic: usize,
    index: usize,
    paraphrased: bool,
}

impl Concept {
    fn word(self) -> String {
        if self.paraphrased {
            paraphrase(self.topic, self.index)
        } else {
            core(self.topic, self.index)
        }
    }

    fn counterpart(self) -> String {
        Concept {
            paraphrased: !self.paraphrased,
            ..self
        }
        .word()
    }
}

struct Generator {
    rng: ChaCha8Rng,
    experts: Vec<String>,
    novices: Vec<String>,
}

impl Generator {
    fn pick<'a>(&mut self, from: &'a [String]) -> &'a String {
        &from[self.rng.random_range(0..from.len())]
    }

    fn common_word(&mut self, avoid: &[String]) -> String {
        loop {
            let w = common(self.rng.random_range(0..COMMON_WORDS));
            if !avoid.contains(&w) {
                return w;
            }
        }
    }

    fn answer(&mut self, concepts: &[Concept]) -> String {
        let topic = concepts[0].topic;
        let mut words = Vec::new();
        for &c in concepts {
            if self.rng.random_bool(0.7) {
                words.push(c.counterpart());
            }
            if self.rng.random_bool(0.2) {
                words.push(c.word());
            }
        }
        for _ in 0..self.rng.random_range(3..=5) {
            words.push(general(topic, self.rng.random_range(0..GENERAL_WORDS)));
        }
        for _ in 0..2 {
            words.push(common(self.rng.random_range(0..COMMON_WORDS)));
        }
        words.shuffle(&mut self.rng);
        words.join(" ")
    }

    fn question(&mut self, concepts: &[Concept]) -> String {
        let mut words: Vec<String> = concepts.iter().map(|c| c.word()).collect();
        let extra = self.common_word(&words);
        words.push(extra);
        words.shuffle(&mut self.rng);
        words.join(" ")
    }

    fn random_concepts(&mut self, topic: usize, n: usize, p_para: f64, exclude: &[usize]) -> Vec<Concept> {
        let mut pool: Vec<usize> = (0..CORE_WORDS).filter(|j| !exclude.contains(j)).collect();
        pool.shuffle(&mut self.rng);
        pool.into_iter()
            .take(n)
            .map(|index| Concept {
                topic,
                index,
                paraphrased: self.rng.random_bool(p_para),
            })
            .collect()
    }
}

pub fn generate(spec: SynthSpec) -> Result<SyntheticData> {
    if spec.size < 10 || spec.topics < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic corpus needs size >= 10 and topics >= 2, got size={} topics={}",
            spec.size, spec.topics
        )));
    }
    let n_users = (spec.size / 4).max(20);
    let n_experts = n_users.div_ceil(10);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut users = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let best = if u < n_experts {
            rng.random_range(150..=1500)
        } else {
            rng.random_range(0..=15)
        };
        users.push(UserRecord {
            user_id: format!("u{u:04}"),
            best_answer_count: best,
        });
    }
    let names: Vec<String> = users.iter().map(|u| u.user_id.clone()).collect();
    let mut g = Generator {
        rng,
        experts: names[..n_experts].to_vec(),
        novices: names[n_experts..].to_vec(),
    };

    // (question, answer, answerer, Some((query index, grade)))
    let mut raw: Vec<(String, String, String, Option<(usize, u8)>)> = Vec::with_capacity(spec.size);
    let n_queries = (spec.size / 8).max(2);
    let mut queries = Vec::with_capacity(n_queries);
    for qi in 0..n_queries {
        let topic = qi % spec.topics;
        let intent = g.random_concepts(topic, INTENT_WORDS, 0.0, &[]);
        let used: Vec<usize> = intent.iter().map(|c| c.index).collect();

        let mut dup = intent.clone();
        dup.extend(g.random_concepts(topic, 1, 0.0, &used));
        let dup_q = g.question(&dup);
        let dup_a = g.answer(&dup);
        let expert = g.pick(&g.experts.clone()).clone();
        raw.push((dup_q, dup_a, expert, Some((qi, 2))));

        let mut para: Vec<Concept> = intent
            .iter()
            .map(|&c| Concept {
                paraphrased: g.rng.random_bool(0.6),
                ..c
            })
            .collect();
        if para.iter().all(|c| !c.paraphrased) {
            para[0].paraphrased = true;
        }
        para.extend(g.random_concepts(topic, 1, 0.5, &used));
        let para_q = g.question(&para);
        let expert = g.pick(&g.experts.clone()).clone();
        let novice = g.pick(&g.novices.clone()).clone();
        let a_expert = g.answer(&para);
        let a_novice = g.answer(&para);
        raw.push((para_q.clone(), a_expert, expert, Some((qi, 2))));
        raw.push((para_q, a_novice, novice, Some((qi, 1))));

        let mut qwords: Vec<String> = intent
            .iter()
            .map(|&c| {
                Concept {
                    paraphrased: g.rng.random_bool(0.5),
                    ..c
                }
                .word()
            })
            .collect();
        let extra = g.common_word(&qwords);
        qwords.push(extra);
        queries.push(QueryLine {
            id: format!("q{qi:03}"),
            query: qwords.join(" "),
            tokens: None,
        });
    }
    while raw.len() < spec.size {
        let topic = g.rng.random_range(0..spec.topics);
        let concepts = g.random_concepts(topic, 4, 0.3, &[]);
        let q = g.question(&concepts);
        let a = g.answer(&concepts);
        let answerer = if g.rng.random_bool(0.3) {
            g.pick(&g.experts.clone()).clone()
        } else {
            g.pick(&g.novices.clone()).clone()
        };
        raw.push((q, a, answerer, None));
    }
    raw.shuffle(&mut g.rng);

    let mut records = Vec::with_capacity(raw.len());
    let mut qrels = Qrels::default();
    for (i, (question, answer, answerer, planted)) in raw.into_iter().enumerate() {
        let id = format!("qa{i:05}");
        let asker = g.pick(&names).clone();
        if let Some((qi, grade)) = planted {
            qrels.insert(&queries[qi].id, &id, grade)?;
        }
        records.push(QaRecord {
            id,
            question,
            answer,
            asker,
            answerer,
            question_tokens: None,
            answer_tokens: None,
        });
    }

    let topic_vocab = (0..spec.topics)
        .map(|t| {
            (0..CORE_WORDS)
                .flat_map(|j| [core(t, j), paraphrase(t, j)])
                .chain((0..GENERAL_WORDS).map(|j| general(t, j)))
                .collect()
        })
        .collect();

    Ok(SyntheticData {
        records,
        users,
        queries,
        qrels,
        topic_vocab,
    })
}

impl SyntheticData {
    pub fn write(&self, paths: &SynthPaths) -> Result<()> {
        write_qa_records(&self.records, &paths.corpus)?;
        write_users(&self.users, &paths.users)?;
        write_query_lines(&self.queries, &paths.queries)?;
        self.qrels.write(&paths.qrels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec { size: 100, topics: 2, seed: 5 }
    }

    #[test]
    fn rejects_tiny_specs() {
        assert!(generate(SynthSpec { size: 9, topics: 2, seed: 0 }).is_err());
        assert!(generate(SynthSpec { size: 50, topics: 1, seed: 0 }).is_err());
    }

    #[test]
    fn topic_vocabularies_partition_topical_words() {
        let d = generate(spec()).unwrap();
        assert_eq!(d.records.len(), 100);
        let owner = |w: &str| d.topic_vocab.iter().position(|v| v.iter().any(|x| x == w));
        for r in &d.records {
            let topics: std::collections::BTreeSet<usize> = r
                .question
                .split(' ')
                .chain(r.answer.split(' '))
                .filter_map(owner)
                .collect();
            assert_eq!(topics.len(), 1, "pair {} mixes topics", r.id);
        }
    }

    #[test]
    fn planted_duplicate_is_grade_two() {
        let d = generate(spec()).unwrap();
        for q in &d.queries {
            let judged = d.qrels.for_query(&q.id).unwrap();
            assert_eq!(judged.values().filter(|&&g| g == 2).count(), 2);
            assert_eq!(judged.values().filter(|&&g| g == 1).count(), 1);
            // the duplicate carries every intent word in its original form
            let originals: Vec<String> = q
                .query
                .split(' ')
                .filter(|w| !w.starts_with('c'))
                .map(|w| w.replace('p', "w"))
                .collect();
            let dup = judged.keys().find(|id| {
                let r = d.records.iter().find(|r| &r.id == *id).unwrap();
                originals.iter().all(|w| r.question.split(' ').any(|x| x == w))
            });
            assert!(dup.is_some_and(|id| judged[id] == 2));
        }
    }

    #[test]
    fn same_seed_same_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        generate(spec()).unwrap().write(&SynthPaths::in_dir(&a)).unwrap();
        generate(spec()).unwrap().write(&SynthPaths::in_dir(&b)).unwrap();
        for f in ["corpus.jsonl", "users.jsonl", "queries.jsonl", "qrels.txt"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        }
        let other = generate(SynthSpec { seed: 6, ..spec() }).unwrap();
        assert_ne!(other.records, generate(spec()).unwrap().records);
    }
}
