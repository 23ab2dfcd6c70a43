//! Q&A archive ingestion, vocabulary interning and collection statistics.
//!
//! Term ids are assigned in lexicographic token order after all records are
//! read, so the same archive yields the same ids no matter how its lines are
//! ordered. Query words that never occur in the archive get ids at or above
//! [`Vocabulary::len`]; every model treats such ids as out-of-vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl TermId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TokenizeMode {
    /// Split on any Unicode whitespace and lowercase.
    #[default]
    Whitespace,
    /// Split on single spaces and keep tokens verbatim.
    Pretokenized,
}

impl std::str::FromStr for TokenizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(TokenizeMode::Whitespace),
            "pretokenized" => Ok(TokenizeMode::Pretokenized),
            other => Err(Error::InvalidArgument(format!("unknown tokenize mode `{other}`"))),
        }
    }
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::Whitespace => text.split_whitespace().map(str::to_lowercase).collect(),
        TokenizeMode::Pretokenized => text
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl Vocabulary {
    /// Builds a vocabulary whose ids follow the sorted order of `tokens`.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let tokens: Vec<String> = sorted.into_iter().collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TermId(i as u32)))
            .collect();
        Vocabulary { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<TermId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TermId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (TermId(i as u32), t.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QAPair {
    pub id: String,
    pub question_tokens: Vec<TermId>,
    pub answer_tokens: Vec<TermId>,
    pub asker_id: String,
    pub answerer_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub id: String,
    pub tokens: Vec<TermId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub best_answer_count: u64,
}

/// Background language model pooled over question and answer tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectionStats {
    frequencies: Vec<u64>,
    total: u64,
}

impl CollectionStats {
    pub fn from_counts(frequencies: Vec<u64>) -> Self {
        let total = frequencies.iter().sum();
        CollectionStats { frequencies, total }
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn frequency(&self, w: TermId) -> u64 {
        self.frequencies.get(w.index()).copied().unwrap_or(0)
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    /// Probability assigned to words never seen in the collection: 1/(10·N).
    pub fn unseen_floor(&self) -> f64 {
        1.0 / (10.0 * self.total as f64)
    }
}

/// P_ml(w|C), with the unseen-word floor for zero counts.
pub fn collection_prob(w: TermId, stats: &CollectionStats) -> f64 {
    match stats.frequency(w) {
        0 => stats.unseen_floor(),
        f => f as f64 / stats.total as f64,
    }
}

/// Maximum-likelihood P(w|doc) = count(w, doc) / |doc|.
pub fn ml_prob(w: TermId, doc: &[TermId]) -> Result<f64> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(ml_prob_unchecked(w, doc))
}

#[inline]
pub(crate) fn ml_prob_unchecked(w: TermId, doc: &[TermId]) -> f64 {
    let count = doc.iter().filter(|&&t| t == w).count();
    count as f64 / doc.len() as f64
}

/// One line of the Q&A JSONL archive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub answer: String,
    #[serde(default)]
    pub asker: String,
    #[serde(default)]
    pub answerer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_tokens: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
struct UserLine {
    user: String,
    best_answers: u64,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    pub mode: TokenizeMode,
    /// Tokens dropped after tokenization. Empty by default.
    pub stopwords: HashSet<String>,
}

impl IngestOptions {
    fn tokens(&self, text: &str, explicit: Option<&Vec<String>>) -> Vec<String> {
        let raw = match explicit {
            Some(tokens) => tokens.clone(),
            None => tokenize(text, self.mode),
        };
        if self.stopwords.is_empty() {
            raw
        } else {
            raw.into_iter().filter(|t| !self.stopwords.contains(t)).collect()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub pairs: Vec<QAPair>,
    pub vocab: Vocabulary,
    pub stats: CollectionStats,
    pub users: BTreeMap<String, UserRecord>,
    pub mode: TokenizeMode,
}

impl Corpus {
    pub fn from_records(
        records: Vec<QaRecord>,
        user_records: Vec<UserRecord>,
        options: &IngestOptions,
    ) -> Result<Self> {
        Self::build(
            records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect(),
            user_records,
            options,
            "<memory>",
        )
    }

    fn build(
        records: Vec<(usize, QaRecord)>,
        user_records: Vec<UserRecord>,
        options: &IngestOptions,
        source: &str,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        let mut tokenized = Vec::with_capacity(records.len());
        for (line, rec) in records {
            if !seen.insert(rec.id.clone()) {
                return Err(Error::DuplicateId(rec.id));
            }
            let q = options.tokens(&rec.question, rec.question_tokens.as_ref());
            if q.is_empty() {
                return Err(Error::parse(source, line, "question has no tokens"));
            }
            let a = options.tokens(&rec.answer, rec.answer_tokens.as_ref());
            tokenized.push((rec, q, a));
        }

        let vocab = Vocabulary::from_tokens(
            tokenized
                .iter()
                .flat_map(|(_, q, a)| q.iter().chain(a.iter()).cloned()),
        );
        let mut frequencies = vec![0u64; vocab.len()];
        let intern = |tokens: &[String], freq: &mut [u64]| -> Vec<TermId> {
            tokens
                .iter()
                .map(|t| {
                    let id = vocab.get(t).expect("token interned above");
                    freq[id.index()] += 1;
                    id
                })
                .collect()
        };

        let mut users: BTreeMap<String, UserRecord> = BTreeMap::new();
        for u in user_records {
            if users.contains_key(&u.user_id) {
                return Err(Error::DuplicateId(u.user_id));
            }
            users.insert(u.user_id.clone(), u);
        }

        let mut pairs = Vec::with_capacity(tokenized.len());
        for (rec, q, a) in &tokenized {
            let question_tokens = intern(q, &mut frequencies);
            let answer_tokens = intern(a, &mut frequencies);
            for user in [&rec.asker, &rec.answerer] {
                if !user.is_empty() {
                    users.entry(user.clone()).or_insert_with(|| UserRecord {
                        user_id: user.clone(),
                        best_answer_count: 0,
                    });
                }
            }
            pairs.push(QAPair {
                id: rec.id.clone(),
                question_tokens,
                answer_tokens,
                asker_id: rec.asker.clone(),
                answerer_id: rec.answerer.clone(),
            });
        }

        Ok(Corpus {
            pairs,
            vocab,
            stats: CollectionStats::from_counts(frequencies),
            users,
            mode: options.mode,
        })
    }

    pub fn pair(&self, id: &str) -> Option<&QAPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn best_answer_count(&self, user: &str) -> u64 {
        self.users.get(user).map_or(0, |u| u.best_answer_count)
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let name = path.display().to_string();
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line)
                .map(|v| (n, v))
                .map_err(|e| Error::parse(name.clone(), n, e.to_string()))
        })
        .collect()
}

pub fn read_users(path: &Path) -> Result<Vec<UserRecord>> {
    Ok(parse_jsonl::<UserLine>(path)?
        .into_iter()
        .map(|(_, u)| UserRecord {
            user_id: u.user,
            best_answer_count: u.best_answers,
        })
        .collect())
}

pub fn write_users(users: &[UserRecord], path: &Path) -> Result<()> {
    let lines: Vec<String> = users
        .iter()
        .map(|u| {
            serde_json::to_string(&UserLine {
                user: u.user_id.clone(),
                best_answers: u.best_answer_count,
            })
            .expect("plain struct serializes")
        })
        .collect();
    crate::io::write_lines(path, &lines)
}

pub fn write_qa_records(records: &[QaRecord], path: &Path) -> Result<()> {
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("plain struct serializes"))
        .collect();
    crate::io::write_lines(path, &lines)
}

pub fn ingest_corpus(
    qa_path: &Path,
    users_path: Option<&Path>,
    options: &IngestOptions,
) -> Result<Corpus> {
    let records = parse_jsonl::<QaRecord>(qa_path)?;
    let users = match users_path {
        Some(p) => read_users(p)?,
        None => Vec::new(),
    };
    Corpus::build(records, users, options, &qa_path.display().to_string())
}

/// One line of the queries JSONL file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLine {
    pub id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

/// Queries mapped onto a corpus vocabulary, with their own ids for
/// out-of-vocabulary words.
#[derive(Clone, Debug, Default)]
pub struct QuerySet {
    pub queries: Vec<QueryRecord>,
    oov: HashMap<String, TermId>,
}

impl QuerySet {
    pub fn from_lines(lines: &[QueryLine], vocab: &Vocabulary, options: &IngestOptions) -> Result<Self> {
        let mut set = QuerySet::default();
        let mut seen = HashSet::new();
        for (i, line) in lines.iter().enumerate() {
            if !seen.insert(line.id.clone()) {
                return Err(Error::DuplicateId(line.id.clone()));
            }
            let tokens = options.tokens(&line.query, line.tokens.as_ref());
            if tokens.is_empty() {
                return Err(Error::parse("<queries>", i + 1, "query has no tokens"));
            }
            let ids = tokens.iter().map(|t| set.term_id(t, vocab)).collect();
            set.queries.push(QueryRecord {
                id: line.id.clone(),
                tokens: ids,
            });
        }
        Ok(set)
    }

    pub fn term_id(&mut self, token: &str, vocab: &Vocabulary) -> TermId {
        if let Some(id) = vocab.get(token) {
            return id;
        }
        let next = TermId((vocab.len() + self.oov.len()) as u32);
        *self.oov.entry(token.to_owned()).or_insert(next)
    }

    pub fn get(&self, id: &str) -> Option<&QueryRecord> {
        self.queries.iter().find(|q| q.id == id)
    }
}

pub fn read_query_lines(path: &Path) -> Result<Vec<QueryLine>> {
    Ok(parse_jsonl::<QueryLine>(path)?.into_iter().map(|(_, q)| q).collect())
}

pub fn write_query_lines(lines: &[QueryLine], path: &Path) -> Result<()> {
    let out: Vec<String> = lines
        .iter()
        .map(|q| serde_json::to_string(q).expect("plain struct serializes"))
        .collect();
    crate::io::write_lines(path, &out)
}

pub fn read_queries(path: &Path, vocab: &Vocabulary, options: &IngestOptions) -> Result<QuerySet> {
    let name = path.display().to_string();
    QuerySet::from_lines(&read_query_lines(path)?, vocab, options).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(name, line, message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, q: &str, a: &str, asker: &str, answerer: &str) -> QaRecord {
        QaRecord {
            id: id.into(),
            question: q.into(),
            answer: a.into(),
            asker: asker.into(),
            answerer: answerer.into(),
            ..Default::default()
        }
    }

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(tokenize("How Much", TokenizeMode::Whitespace), vec!["how", "much"]);
        assert!(tokenize("", TokenizeMode::Whitespace).is_empty());
        assert!(tokenize("", TokenizeMode::Pretokenized).is_empty());
        assert_eq!(tokenize("a  b\tc", TokenizeMode::Whitespace), vec!["a", "b", "c"]);
        assert_eq!(tokenize("A b", TokenizeMode::Pretokenized), vec!["A", "b"]);
    }

    #[test]
    fn pretokenized_is_idempotent() {
        let once = tokenize("x y zz", TokenizeMode::Pretokenized).join(" ");
        assert_eq!(tokenize(&once, TokenizeMode::Pretokenized).join(" "), once);
    }

    #[test]
    fn two_pair_corpus_counts() {
        let c = Corpus::from_records(
            vec![rec("1", "a b", "c", "u1", "u2"), rec("2", "a", "b", "u2", "u3")],
            vec![],
            &IngestOptions::default(),
        )
        .unwrap();
        // a b | c | a | b
        assert_eq!(c.vocab.len(), 3);
        assert_eq!(c.stats.total_tokens(), 5);
        assert_eq!(c.stats.frequency(c.vocab.get("a").unwrap()), 2);
    }

    #[test]
    fn empty_and_duplicate_corpus_rejected() {
        let empty = Corpus::from_records(vec![], vec![], &IngestOptions::default());
        assert!(matches!(empty, Err(Error::EmptyCorpus)));
        assert_eq!(empty.unwrap_err().to_string(), "empty corpus");
        let dup = Corpus::from_records(
            vec![rec("1", "a", "", "", ""), rec("1", "b", "", "", "")],
            vec![],
            &IngestOptions::default(),
        );
        assert!(matches!(dup, Err(Error::DuplicateId(_))));
    }

    #[test]
    fn unknown_answerer_defaults_to_zero() {
        let c = Corpus::from_records(
            vec![rec("1", "a", "b", "asker", "ghost")],
            vec![UserRecord {
                user_id: "asker".into(),
                best_answer_count: 7,
            }],
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(c.users["ghost"].best_answer_count, 0);
        assert_eq!(c.best_answer_count("asker"), 7);
    }

    #[test]
    fn ml_prob_counts() {
        let (a, b, z) = (TermId(0), TermId(1), TermId(9));
        assert!((ml_prob(a, &[a, b, a]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ml_prob(z, &[a, b]).unwrap(), 0.0);
        assert_eq!(ml_prob(a, &[a]).unwrap(), 1.0);
        assert!(matches!(ml_prob(a, &[]), Err(Error::EmptyDocument)));
    }

    #[test]
    fn collection_prob_and_floor() {
        let stats = CollectionStats::from_counts(vec![2, 1]);
        assert!((collection_prob(TermId(0), &stats) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(collection_prob(TermId(5), &stats), 1.0 / 30.0);
        let total: f64 = (0..2).map(|i| collection_prob(TermId(i), &stats)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("qa.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"1\",\"question\":\"a\",\"answer\":\"b\",\"asker\":\"x\",\"answerer\":\"y\"}\n{oops\n",
        )
        .unwrap();
        let err = ingest_corpus(&p, None, &IngestOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_tokens_override_text() {
        let mut r = rec("1", "ignored text", "", "", "");
        r.question_tokens = Some(vec!["中华".into(), "烟".into()]);
        let c = Corpus::from_records(vec![r], vec![], &IngestOptions::default()).unwrap();
        assert_eq!(c.vocab.len(), 2);
        assert!(c.vocab.get("中华").is_some());
    }

    #[test]
    fn query_oov_ids_sit_above_vocabulary() {
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        let lines = vec![
            QueryLine { id: "q1".into(), query: "a zz".into(), tokens: None },
            QueryLine { id: "q2".into(), query: "zz yy".into(), tokens: None },
        ];
        let set = QuerySet::from_lines(&lines, &vocab, &IngestOptions::default()).unwrap();
        assert_eq!(set.queries[0].tokens, vec![TermId(0), TermId(2)]);
        assert_eq!(set.queries[1].tokens, vec![TermId(2), TermId(3)]);
    }
}
