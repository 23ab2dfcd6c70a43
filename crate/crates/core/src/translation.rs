//! Word-to-word translation probabilities P(w|t) learned with IBM Model 1
//! EM over question/answer pairs treated as a monolingual parallel corpus.
//!
//! No NULL source word is used. Expected counts are accumulated in a fixed
//! order (pairs in input order, source rows by term id, targets by term id),
//! so training is bit-for-bit reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Corpus, TermId, Vocabulary};
use crate::error::{Error, Result};

pub const DEFAULT_EM_ITERATIONS: usize = 10;
pub const DEFAULT_PRUNE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPair {
    /// t-side
    pub source: Vec<TermId>,
    /// w-side
    pub target: Vec<TermId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Direction {
    /// question words translate into answer words
    QToA,
    AToQ,
    #[default]
    PooledBoth,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q_to_a" => Ok(Direction::QToA),
            "a_to_q" => Ok(Direction::AToQ),
            "pooled_both" => Ok(Direction::PooledBoth),
            other => Err(Error::InvalidArgument(format!("unknown direction `{other}`"))),
        }
    }
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::QToA => "q_to_a",
            Direction::AToQ => "a_to_q",
            Direction::PooledBoth => "pooled_both",
        }
    }
}

pub fn make_parallel_pairs(corpus: &Corpus, direction: Direction) -> Vec<ParallelPair> {
    let mut out = Vec::new();
    for p in &corpus.pairs {
        if p.question_tokens.is_empty() || p.answer_tokens.is_empty() {
            continue;
        }
        let q_to_a = || ParallelPair {
            source: p.question_tokens.clone(),
            target: p.answer_tokens.clone(),
        };
        let a_to_q = || ParallelPair {
            source: p.answer_tokens.clone(),
            target: p.question_tokens.clone(),
        };
        match direction {
            Direction::QToA => out.push(q_to_a()),
            Direction::AToQ => out.push(a_to_q()),
            Direction::PooledBoth => {
                out.push(q_to_a());
                out.push(a_to_q());
            }
        }
    }
    out
}

/// Sparse P(w|t). Rows are keyed by source term, entries sorted by target.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TranslationTable {
    rows: BTreeMap<TermId, Vec<(TermId, f64)>>,
}

impl TranslationTable {
    pub fn from_rows(rows: BTreeMap<TermId, Vec<(TermId, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|(t, mut r)| {
                r.sort_by_key(|e| e.0);
                (t, r)
            })
            .collect();
        TranslationTable { rows }
    }

    /// P(w|t) = 1 iff w = t, for every term in `terms`.
    pub fn identity(terms: impl IntoIterator<Item = TermId>) -> Self {
        TranslationTable {
            rows: terms.into_iter().map(|t| (t, vec![(t, 1.0)])).collect(),
        }
    }

    pub fn prob(&self, w: TermId, t: TermId) -> f64 {
        self.rows.get(&t).map_or(0.0, |row| {
            row.binary_search_by_key(&w, |e| e.0)
                .map_or(0.0, |i| row[i].1)
        })
    }

    pub fn row(&self, t: TermId) -> &[(TermId, f64)] {
        self.rows.get(&t).map_or(&[], Vec::as_slice)
    }

    pub fn sources(&self) -> impl Iterator<Item = TermId> + '_ {
        self.rows.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Drops entries below `threshold` and renormalizes the surviving rows.
    pub fn prune(&mut self, threshold: f64) {
        for row in self.rows.values_mut() {
            if row.iter().all(|e| e.1 < threshold) {
                continue;
            }
            row.retain(|e| e.1 >= threshold);
            let z: f64 = row.iter().map(|e| e.1).sum();
            for e in row.iter_mut() {
                e.1 /= z;
            }
        }
    }

    pub fn write(&self, vocab: &Vocabulary, path: &Path) -> Result<()> {
        let mut lines = Vec::with_capacity(self.len());
        for (&t, row) in &self.rows {
            let ts = token_of(vocab, t)?;
            for &(w, p) in row {
                lines.push(format!("{ts} {} {p}", token_of(vocab, w)?));
            }
        }
        crate::io::write_lines(path, &lines)
    }

    pub fn read(vocab: &Vocabulary, path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = crate::io::read_to_string(path)?;
        let mut rows: BTreeMap<TermId, Vec<(TermId, f64)>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| Error::parse(name.clone(), i + 1, m);
            let mut parts = line.split(' ');
            let (Some(t), Some(w), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected `t w p`"));
            };
            let t = vocab.get(t).ok_or_else(|| err("source token not in vocabulary"))?;
            let w = vocab.get(w).ok_or_else(|| err("target token not in vocabulary"))?;
            let p: f64 = p.parse().map_err(|_| err("bad probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(err("probability outside [0,1]"));
            }
            rows.entry(t).or_default().push((w, p));
        }
        Ok(TranslationTable::from_rows(rows))
    }
}

fn token_of(vocab: &Vocabulary, id: TermId) -> Result<&str> {
    vocab
        .token(id)
        .ok_or_else(|| Error::InvalidArgument(format!("term id {} outside vocabulary", id.0)))
}

pub fn translate_prob(table: &TranslationTable, w: TermId, t: TermId) -> f64 {
    table.prob(w, t)
}

/// IBM Model 1 EM state. Parameters live in a CSR layout over each source
/// word's co-occurring targets.
pub struct Ibm1Trainer<'a> {
    pairs: &'a [ParallelPair],
    sources: Vec<TermId>,
    row_of: BTreeMap<TermId, usize>,
    offsets: Vec<usize>,
    targets: Vec<TermId>,
    probs: Vec<f64>,
    iterations: usize,
}

impl<'a> Ibm1Trainer<'a> {
    /// Uniform initialization: P(w|t) = 1 / |targets co-occurring with t|.
    pub fn new(pairs: &'a [ParallelPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no parallel pairs to train on".into()));
        }
        let mut cooc: BTreeMap<TermId, Vec<TermId>> = BTreeMap::new();
        for pair in pairs {
            if pair.source.is_empty() || pair.target.is_empty() {
                return Err(Error::InvalidArgument("parallel pair with an empty side".into()));
            }
            for &t in &pair.source {
                cooc.entry(t).or_default().extend_from_slice(&pair.target);
            }
        }
        let mut sources = Vec::with_capacity(cooc.len());
        let mut row_of = BTreeMap::new();
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        for (t, mut ws) in cooc {
            ws.sort_unstable();
            ws.dedup();
            let p = 1.0 / ws.len() as f64;
            row_of.insert(t, sources.len());
            sources.push(t);
            probs.extend(std::iter::repeat_n(p, ws.len()));
            targets.extend(ws);
            offsets.push(targets.len());
        }
        Ok(Ibm1Trainer {
            pairs,
            sources,
            row_of,
            offsets,
            targets,
            probs,
            iterations: 0,
        })
    }

    fn slot(&self, row: usize, w: TermId) -> usize {
        let lo = self.offsets[row];
        let hi = self.offsets[row + 1];
        lo + self.targets[lo..hi]
            .binary_search(&w)
            .expect("co-occurring target present in row")
    }

    /// One E-step plus M-step.
    pub fn step(&mut self) {
        let mut counts = vec![0.0f64; self.probs.len()];
        let mut slots: Vec<usize> = Vec::new();
        for pair in self.pairs {
            let rows: Vec<usize> = pair.source.iter().map(|t| self.row_of[t]).collect();
            for &w in &pair.target {
                slots.clear();
                slots.extend(rows.iter().map(|&r| self.slot(r, w)));
                let denom: f64 = slots.iter().map(|&s| self.probs[s]).sum();
                if denom > 0.0 {
                    for &s in &slots {
                        counts[s] += self.probs[s] / denom;
                    }
                }
            }
        }
        for row in 0..self.sources.len() {
            let range = self.offsets[row]..self.offsets[row + 1];
            let z: f64 = counts[range.clone()].iter().sum();
            if z > 0.0 {
                for s in range {
                    self.probs[s] = counts[s] / z;
                }
            }
        }
        self.iterations += 1;
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn table(&self) -> TranslationTable {
        let rows = self
            .sources
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                let range = self.offsets[r]..self.offsets[r + 1];
                let row = self.targets[range.clone()]
                    .iter()
                    .copied()
                    .zip(self.probs[range].iter().copied())
                    .collect();
                (t, row)
            })
            .collect();
        TranslationTable { rows }
    }
}

/// Trains for `iterations` EM rounds, then prunes entries below `prune`
/// (when given) and renormalizes.
pub fn train_ibm1(
    pairs: &[ParallelPair],
    iterations: usize,
    prune: Option<f64>,
) -> Result<TranslationTable> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("EM needs at least one iteration".into()));
    }
    let mut trainer = Ibm1Trainer::new(pairs)?;
    for _ in 0..iterations {
        trainer.step();
    }
    let mut table = trainer.table();
    if let Some(threshold) = prune {
        table.prune(threshold);
    }
    Ok(table)
}

/// Σ over pairs and target words of ln Σ_t P(w|t). Alignment-length
/// constants are omitted. A target word with no translation mass yields
/// negative infinity.
pub fn corpus_log_likelihood(table: &TranslationTable, pairs: &[ParallelPair]) -> f64 {
    let mut ll = 0.0;
    for pair in pairs {
        for &w in &pair.target {
            let p: f64 = pair.source.iter().map(|&t| table.prob(w, t)).sum();
            ll += p.ln();
        }
    }
    ll
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IngestOptions, QaRecord};

    fn pp(src: &[u32], tgt: &[u32]) -> ParallelPair {
        ParallelPair {
            source: src.iter().map(|&i| TermId(i)).collect(),
            target: tgt.iter().map(|&i| TermId(i)).collect(),
        }
    }

    const A: TermId = TermId(0);
    const B: TermId = TermId(1);
    const X: TermId = TermId(10);
    const Y: TermId = TermId(11);

    #[test]
    fn parallel_pair_directions() {
        let recs = vec![
            QaRecord { id: "1".into(), question: "a b".into(), answer: "c".into(), ..Default::default() },
            QaRecord { id: "2".into(), question: "a".into(), answer: "".into(), ..Default::default() },
            QaRecord { id: "3".into(), question: "d".into(), answer: "e f".into(), ..Default::default() },
            QaRecord { id: "4".into(), question: "g".into(), answer: "h".into(), ..Default::default() },
        ];
        let c = Corpus::from_records(recs, vec![], &IngestOptions::default()).unwrap();
        assert_eq!(make_parallel_pairs(&c, Direction::QToA).len(), 3);
        let pooled = make_parallel_pairs(&c, Direction::PooledBoth);
        assert_eq!(pooled.len(), 6);
        assert_eq!(pooled[0].source, pooled[1].target);
    }

    #[test]
    fn single_pair_forces_mass() {
        let pairs = [pp(&[0], &[10])];
        let t = train_ibm1(&pairs, 1, None).unwrap();
        assert_eq!(t.prob(X, A), 1.0);
        assert_eq!(corpus_log_likelihood(&t, &pairs), 0.0);
    }

    #[test]
    fn uniform_initialization() {
        let pairs = [pp(&[0, 1], &[10, 11]), pp(&[0], &[10, 12])];
        let t = Ibm1Trainer::new(&pairs).unwrap().table();
        assert_eq!(t.prob(X, A), 1.0 / 3.0);
        assert_eq!(t.prob(TermId(12), A), 1.0 / 3.0);
        assert_eq!(t.prob(X, B), 0.5);
        assert_eq!(t.prob(TermId(12), B), 0.0);
    }

    #[test]
    fn never_cooccurring_is_zero() {
        let t = train_ibm1(&[pp(&[0], &[10]), pp(&[1], &[11])], 3, None).unwrap();
        assert_eq!(translate_prob(&t, Y, A), 0.0);
        assert_eq!(translate_prob(&t, X, A), 1.0);
    }

    #[test]
    fn zero_mass_target_is_neg_infinity() {
        let t = train_ibm1(&[pp(&[0], &[10])], 1, None).unwrap();
        let ll = corpus_log_likelihood(&t, &[pp(&[0], &[11])]);
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(train_ibm1(&[], 5, None).is_err());
        assert!(train_ibm1(&[pp(&[0], &[10])], 0, None).is_err());
    }

    #[test]
    fn prune_keeps_rows_normalized() {
        let mut rows = BTreeMap::new();
        rows.insert(A, vec![(X, 0.9999995), (Y, 0.0000005)]);
        let mut t = TranslationTable::from_rows(rows);
        t.prune(1e-6);
        assert_eq!(t.row(A), &[(X, 1.0)]);
    }

    #[test]
    fn table_file_round_trip() {
        let vocab = Vocabulary::from_tokens(["a", "b", "x"]);
        let pairs = [pp(&[0, 1], &[2]), pp(&[0], &[2, 1])];
        let t = train_ibm1(&pairs, 4, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tm.txt");
        t.write(&vocab, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().starts_with("a "));
        assert_eq!(TranslationTable::read(&vocab, &path).unwrap(), t);
    }
}
