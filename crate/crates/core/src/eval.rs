//! Graded judgments, MAP@k / NDCG@k, TREC-style run and qrels files, and
//! system comparison reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::ScoredCandidate;

pub const DEFAULT_DEPTH: usize = 10;
/// Grades at or above this count as relevant for MAP.
pub const DEFAULT_RELEVANCE_THRESHOLD: u8 = 1;

/// 2^grade − 1
#[inline]
pub fn gain(grade: u8) -> f64 {
    (1u64 << grade) as f64 - 1.0
}

/// 1 / log2(1 + rank), rank 1-based.
#[inline]
pub fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// DCG@k of grades listed in ranked order.
pub fn dcg(grades: impl IntoIterator<Item = u8>, k: usize) -> f64 {
    grades
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| gain(g) * discount(i + 1))
        .sum()
}

pub fn ideal_dcg(grades: &[u8], k: usize) -> f64 {
    let mut sorted = grades.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    dcg(sorted, k)
}

/// NDCG@k of documents ordered by descending score (ties by position).
/// Returns 0 when every grade is 0.
pub fn ndcg_of_scores(scores: &[f64], grades: &[u8], k: usize) -> f64 {
    let ideal = ideal_dcg(grades, k);
    if ideal == 0.0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    dcg(order.into_iter().map(|i| grades[i]), k) / ideal
}

/// A per-query metric value. `degenerate` marks queries with no relevant
/// (AP) or no positively graded (NDCG) judgments, which score 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QueryMetric {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn insert(&mut self, query: &str, doc: &str, grade: u8) -> Result<()> {
        if grade > 2 {
            return Err(Error::InvalidArgument(format!("grade {grade} outside 0..=2")));
        }
        let q = self.judgments.entry(query.to_owned()).or_default();
        if q.insert(doc.to_owned(), grade).is_some() {
            return Err(Error::DuplicateId(format!("{query}/{doc}")));
        }
        Ok(())
    }

    /// Unjudged pairs are grade 0.
    pub fn grade(&self, query: &str, doc: &str) -> u8 {
        self.judgments
            .get(query)
            .and_then(|q| q.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn has_query(&self, query: &str) -> bool {
        self.judgments.contains_key(query)
    }

    pub fn for_query(&self, query: &str) -> Option<&BTreeMap<String, u8>> {
        self.judgments.get(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u8)> {
        self.judgments
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.iter().map(|(q, d, g)| format!("{q} 0 {d} {g}")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_lines(path, &self.to_lines())
    }
}

pub fn parse_qrels(text: &str, source: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let err = |m: String| Error::parse(source, i + 1, m);
        let [q, _, d, g] = parts.as_slice() else {
            return Err(err("expected `<qid> 0 <docid> <grade>`".into()));
        };
        let grade: u8 = g.parse().map_err(|_| err(format!("bad grade `{g}`")))?;
        qrels.insert(q, d, grade).map_err(|e| err(e.to_string()))?;
    }
    Ok(qrels)
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    let text = crate::io::read_to_string(path)?;
    parse_qrels(&text, &path.display().to_string())
}

/// AP@k with relevance = grade ≥ `threshold`, normalized by min(R, k)
/// where R counts relevant judged documents for the query.
pub fn average_precision_at_k(
    ranked: &[&str],
    judged: Option<&BTreeMap<String, u8>>,
    k: usize,
    threshold: u8,
) -> QueryMetric {
    let grade = |d: &str| judged.and_then(|j| j.get(d)).copied().unwrap_or(0);
    let r = judged.map_or(0, |j| j.values().filter(|&&g| g >= threshold).count());
    if r == 0 {
        return QueryMetric {
            value: 0.0,
            degenerate: true,
        };
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().take(k).enumerate() {
        if grade(d) >= threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    QueryMetric {
        value: sum / r.min(k) as f64,
        degenerate: false,
    }
}

/// NDCG@k with gain 2^g − 1; the ideal ordering uses every judged grade.
pub fn ndcg_at_k(ranked: &[&str], judged: Option<&BTreeMap<String, u8>>, k: usize) -> QueryMetric {
    let all: Vec<u8> = judged.map_or_else(Vec::new, |j| j.values().copied().collect());
    let ideal = ideal_dcg(&all, k);
    if ideal == 0.0 {
        return QueryMetric {
            value: 0.0,
            degenerate: true,
        };
    }
    let grade = |d: &str| judged.and_then(|j| j.get(d)).copied().unwrap_or(0);
    QueryMetric {
        value: dcg(ranked.iter().map(|d| grade(d)), k) / ideal,
        degenerate: false,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
}

/// Ranked document lists per query, each in rank order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankedRun {
    pub tag: String,
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl RankedRun {
    pub fn new(tag: impl Into<String>) -> Self {
        RankedRun {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Adds a query's ranking; `ranked` must already be in rank order.
    pub fn insert(&mut self, query: &str, ranked: &[ScoredCandidate]) -> Result<()> {
        let entries = ranked
            .iter()
            .map(|c| RunEntry {
                doc_id: c.qa_id.clone(),
                score: c.score,
            })
            .collect();
        self.insert_entries(query, entries)
    }

    pub fn insert_entries(&mut self, query: &str, entries: Vec<RunEntry>) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::DuplicateId(format!("{query}/{}", e.doc_id)));
            }
        }
        if self.queries.insert(query.to_owned(), entries).is_some() {
            return Err(Error::DuplicateId(query.to_owned()));
        }
        Ok(())
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.queries.iter().map(|(q, e)| (q.as_str(), e.as_slice()))
    }

    pub fn get(&self, query: &str) -> Option<&[RunEntry]> {
        self.queries.get(query).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for (q, entries) in &self.queries {
            for (i, e) in entries.iter().enumerate() {
                lines.push(format!("{q} Q0 {} {} {} {}", e.doc_id, i + 1, e.score, self.tag));
            }
        }
        lines
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_lines(path, &self.to_lines())
    }
}

pub fn write_run(run: &RankedRun, path: &Path) -> Result<()> {
    run.write(path)
}

pub fn parse_run(text: &str, source: &str) -> Result<RankedRun> {
    let mut rows: BTreeMap<String, Vec<(usize, RunEntry)>> = BTreeMap::new();
    let mut tag: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(source, i + 1, m);
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [q, _, d, r, s, t] = parts.as_slice() else {
            return Err(err("expected `<qid> Q0 <docid> <rank> <score> <tag>`".into()));
        };
        let rank: usize = r.parse().map_err(|_| err(format!("bad rank `{r}`")))?;
        let score: f64 = s.parse().map_err(|_| err(format!("bad score `{s}`")))?;
        tag.get_or_insert_with(|| (*t).to_owned());
        rows.entry((*q).to_owned()).or_default().push((
            rank,
            RunEntry {
                doc_id: (*d).to_owned(),
                score,
            },
        ));
    }
    let mut run = RankedRun::new(tag.unwrap_or_default());
    for (q, mut entries) in rows {
        entries.sort_by_key(|e| e.0);
        run.insert_entries(&q, entries.into_iter().map(|e| e.1).collect())
            .map_err(|e| Error::parse(source, 0, e.to_string()))?;
    }
    Ok(run)
}

pub fn read_run(path: &Path) -> Result<RankedRun> {
    let text = crate::io::read_to_string(path)?;
    parse_run(&text, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryEval {
    pub query: String,
    pub ap: f64,
    pub ndcg: f64,
    pub ap_degenerate: bool,
    pub ndcg_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemReport {
    pub system: String,
    pub depth: usize,
    pub map: f64,
    pub ndcg: f64,
    pub per_query: Vec<QueryEval>,
}

/// MAP@k and mean NDCG@k of `run` over its queries, in query-id order.
pub fn evaluate_run(run: &RankedRun, qrels: &Qrels, k: usize, threshold: u8) -> Result<SystemReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("evaluation depth must be >= 1".into()));
    }
    let mut per_query = Vec::with_capacity(run.len());
    for (q, entries) in run.queries() {
        if !qrels.has_query(q) {
            return Err(Error::UnknownQuery(q.to_owned()));
        }
        let docs: Vec<&str> = entries.iter().map(|e| e.doc_id.as_str()).collect();
        let judged = qrels.for_query(q);
        let ap = average_precision_at_k(&docs, judged, k, threshold);
        let nd = ndcg_at_k(&docs, judged, k);
        per_query.push(QueryEval {
            query: q.to_owned(),
            ap: ap.value,
            ndcg: nd.value,
            ap_degenerate: ap.degenerate,
            ndcg_degenerate: nd.degenerate,
        });
    }
    let n = per_query.len().max(1) as f64;
    Ok(SystemReport {
        system: run.tag.clone(),
        depth: k,
        map: per_query.iter().map(|q| q.ap).sum::<f64>() / n,
        ndcg: per_query.iter().map(|q| q.ndcg).sum::<f64>() / n,
        per_query,
    })
}

/// Several systems evaluated on the same queries.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub systems: Vec<SystemReport>,
}

impl MetricReport {
    pub fn map_of(&self, system: &str) -> Option<f64> {
        self.systems.iter().find(|s| s.system == system).map(|s| s.map)
    }

    /// Aligned plain-text summary followed by the pairwise MAP table.
    pub fn render_text(&self) -> String {
        let depth = self.systems.first().map_or(DEFAULT_DEPTH, |s| s.depth);
        let width = self.systems.iter().map(|s| s.system.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>7}", "system", format!("MAP@{depth}"), format!("NDCG@{depth}"), "queries").unwrap();
        for s in &self.systems {
            writeln!(out, "{:<width$}  {:>8.4}  {:>8.4}  {:>7}", s.system, s.map, s.ndcg, s.per_query.len()).unwrap();
        }
        out.push('\n');
        let maps: Vec<(String, f64)> = self.systems.iter().map(|s| (s.system.clone(), s.map)).collect();
        out.push_str(&render_map_comparison(&maps));
        out
    }

    /// One JSON object per system, then one per (system, query).
    pub fn json_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for s in &self.systems {
            lines.push(
                serde_json::json!({
                    "type": "system",
                    "system": s.system,
                    "depth": s.depth,
                    "map": s.map,
                    "ndcg": s.ndcg,
                    "queries": s.per_query.len(),
                    "degenerate": s.per_query.iter().filter(|q| q.ap_degenerate).count(),
                })
                .to_string(),
            );
        }
        for s in &self.systems {
            for q in &s.per_query {
                lines.push(
                    serde_json::json!({
                        "type": "query",
                        "system": s.system,
                        "query": q.query,
                        "ap": q.ap,
                        "ndcg": q.ndcg,
                        "ap_degenerate": q.ap_degenerate,
                        "ndcg_degenerate": q.ndcg_degenerate,
                    })
                    .to_string(),
                );
            }
        }
        lines
    }
}

/// Upper-triangular table of MAP differences in percentage points: the
/// cell at (row i, column j) is (MAP_j − MAP_i)·100 for j after i, `N/A`
/// otherwise.
pub fn render_map_comparison(systems: &[(String, f64)]) -> String {
    let width = systems.iter().map(|s| s.0.len()).max().unwrap_or(4).max(7);
    let mut out = String::new();
    write!(out, "{:<width$}", "").unwrap();
    for (name, _) in systems {
        write!(out, "  {name:>width$}").unwrap();
    }
    out.push('\n');
    write!(out, "{:<width$}", "MAP").unwrap();
    for (_, map) in systems {
        write!(out, "  {map:>width$.4}").unwrap();
    }
    out.push('\n');
    for (i, (row, base)) in systems.iter().enumerate().take(systems.len().saturating_sub(1)) {
        write!(out, "{row:<width$}").unwrap();
        for (j, (_, map)) in systems.iter().enumerate() {
            let cell = if j > i {
                format!("{:+.2}", (map - base) * 100.0)
            } else {
                "N/A".to_owned()
            };
            write!(out, "  {cell:>width$}").unwrap();
        }
        out.push('\n');
    }
    out
}
