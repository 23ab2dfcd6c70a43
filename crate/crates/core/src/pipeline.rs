//! End-to-end retrieval pipeline: ingest, candidate retrieval, translation
//! and topic models, features, ranker training, runs and evaluation.
//!
//! Every stage writes its artifacts atomically into the output directory
//! and records a manifest under `manifests/` with the hashes of its inputs,
//! its parameters and the hashes of its outputs. A stage whose manifest
//! still matches is skipped and its outputs are read back from disk.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ingest_corpus, read_queries, Corpus, IngestOptions, QAPair, QueryRecord, QuerySet, TokenizeMode};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, read_qrels, read_run, MetricReport, Qrels, RankedRun, DEFAULT_DEPTH, DEFAULT_RELEVANCE_THRESHOLD};
use crate::index::{Bm25Params, Field, InvertedIndex, ScoredCandidate, DEFAULT_TOP_K};
use crate::io::{sha256_bytes, sha256_file, write_atomic, write_lines};
use crate::ltr::{predict, read_letor, train, write_letor, LambdaMartModel, RankingInstance, TrainConfig};
use crate::quality::quality_feature;
use crate::relevance::{
    features_f1_f4, rank_candidates, score_lm, score_t2lm, score_t2lm_plus, score_tlm, term_weights, Method,
    MixtureWeights, ScoringContext, Smoothing, TermWeightVector,
};
use crate::topics::{
    infer_query_topics, topic_documents, train_lda, InferenceConfig, LdaConfig, TopicModel, DEFAULT_BETA,
    DEFAULT_BURN_IN, DEFAULT_GIBBS_ITERATIONS, DEFAULT_SAMPLES, DEFAULT_TOPICS,
};
use crate::translation::{make_parallel_pairs, train_ibm1, Direction, TranslationTable, DEFAULT_EM_ITERATIONS, DEFAULT_PRUNE};

/// Tag of the learned-ranker run.
pub const FUSED: &str = "fused";

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub users: Option<PathBuf>,
    pub queries: PathBuf,
    pub qrels: Option<PathBuf>,
    /// A trained ranker. When set, no ranker is trained and every query is
    /// ranked with this model.
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub tokenize: TokenizeMode,
    pub stopwords: Vec<String>,
    pub field: Field,
    pub bm25: Bm25Params,
    pub top_k: usize,
    /// Pad candidate lists shorter than this with random unretrieved pairs.
    pub pad_candidates: Option<usize>,
    pub em_iterations: usize,
    pub direction: Direction,
    pub prune: Option<f64>,
    pub topics: usize,
    /// Dirichlet prior on document topics; `None` means 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gibbs_iterations: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub mu: MixtureWeights,
    pub rescale_weights: bool,
    pub combine_quality: bool,
    pub ranker: TrainConfig,
    pub train_fraction: f64,
    pub depth: usize,
    pub relevance_threshold: u8,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(corpus: PathBuf, queries: PathBuf, output_dir: PathBuf) -> Self {
        PipelineConfig {
            corpus,
            users: None,
            queries,
            qrels: None,
            model: None,
            output_dir,
            tokenize: TokenizeMode::default(),
            stopwords: Vec::new(),
            field: Field::default(),
            bm25: Bm25Params::default(),
            top_k: DEFAULT_TOP_K,
            pad_candidates: None,
            em_iterations: DEFAULT_EM_ITERATIONS,
            direction: Direction::default(),
            prune: Some(DEFAULT_PRUNE),
            topics: DEFAULT_TOPICS,
            alpha: None,
            beta: DEFAULT_BETA,
            gibbs_iterations: DEFAULT_GIBBS_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            samples: DEFAULT_SAMPLES,
            mu: MixtureWeights::default(),
            rescale_weights: false,
            combine_quality: false,
            ranker: TrainConfig::default(),
            train_fraction: 0.5,
            depth: DEFAULT_DEPTH,
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            seed: 0,
        }
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            mode: self.tokenize,
            stopwords: self.stopwords.iter().cloned().collect(),
        }
    }

    pub fn lda_config(&self) -> LdaConfig {
        let mut c = LdaConfig::with_topics(self.topics);
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        c.beta = self.beta;
        c.iterations = self.gibbs_iterations;
        c.seed = self.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.bm25.validate()?;
        self.ranker.validate()?;
        if self.top_k == 0 || self.depth == 0 {
            return Err(Error::InvalidArgument("top-k and depth must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.model.is_none() && self.qrels.is_none() {
            return Err(Error::NoPreferenceSource);
        }
        let optional = [&self.users, &self.qrels, &self.model];
        let inputs = [&self.corpus, &self.queries]
            .into_iter()
            .chain(optional.into_iter().flatten());
        for path in inputs {
            if !path.is_file() {
                return Err(Error::InvalidArgument(format!(
                    "input file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    fn files(&self) -> Artifacts {
        Artifacts::in_dir(&self.output_dir)
    }
}

/// Paths of every pipeline artifact inside an output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub summary: PathBuf,
    pub candidates: PathBuf,
    pub translation: PathBuf,
    pub topics: PathBuf,
    pub features: PathBuf,
    pub split: PathBuf,
    pub model: PathBuf,
    pub runs: PathBuf,
    pub report_text: PathBuf,
    pub report_json: PathBuf,
    pub manifests: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            summary: dir.join("corpus.summary.json"),
            candidates: dir.join("candidates.run"),
            translation: dir.join("translation.txt"),
            topics: dir.join("lda.txt"),
            features: dir.join("features.letor"),
            split: dir.join("split.txt"),
            model: dir.join("ranker.model"),
            runs: dir.join("runs"),
            report_text: dir.join("report.txt"),
            report_json: dir.join("report.jsonl"),
            manifests: dir.join("manifests"),
        }
    }

    pub fn run(&self, system: &str) -> PathBuf {
        self.runs.join(format!("{system}.run"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageStatus {
    pub stage: &'static str,
    pub skipped: bool,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub stages: Vec<StageStatus>,
    pub artifacts: Artifacts,
    /// Systems in report order, each with its run file.
    pub runs: Vec<(String, PathBuf)>,
    pub report: Option<MetricReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    stage: String,
    inputs: BTreeMap<String, String>,
    params: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

struct StageRunner {
    manifests: PathBuf,
    statuses: Vec<StageStatus>,
}

impl StageRunner {
    /// Runs `compute` unless the stage's manifest matches the current
    /// inputs, parameters and outputs. On failure the stage's outputs and
    /// manifest are removed.
    fn run(
        &mut self,
        stage: &'static str,
        inputs: &[&Path],
        params: BTreeMap<String, String>,
        outputs: &[PathBuf],
        compute: impl FnOnce() -> Result<()>,
    ) -> Result<()> {
        let wrap = |e: Error| Error::Stage {
            stage,
            source: Box::new(e),
        };
        let manifest_path = self.manifests.join(format!("{stage}.json"));
        let mut input_hashes = BTreeMap::new();
        for p in inputs {
            input_hashes.insert(p.display().to_string(), sha256_file(p).map_err(wrap)?);
        }
        if let Some(old) = read_manifest(&manifest_path) {
            let fresh = old.stage == stage
                && old.inputs == input_hashes
                && old.params == params
                && outputs.iter().all(|o| {
                    old.outputs
                        .get(&o.display().to_string())
                        .is_some_and(|h| sha256_file(o).ok().as_ref() == Some(h))
                });
            if fresh {
                self.statuses.push(StageStatus { stage, skipped: true });
                return Ok(());
            }
        }

        let result = compute().and_then(|()| {
            let mut out_hashes = BTreeMap::new();
            for o in outputs {
                out_hashes.insert(o.display().to_string(), sha256_file(o)?);
            }
            let m = Manifest {
                stage: stage.to_owned(),
                inputs: input_hashes,
                params,
                outputs: out_hashes,
            };
            let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
            write_atomic(&manifest_path, text.as_bytes())
        });
        if let Err(e) = result {
            for o in outputs {
                let _ = std::fs::remove_file(o);
            }
            let _ = std::fs::remove_file(&manifest_path);
            return Err(wrap(e));
        }
        self.statuses.push(StageStatus { stage, skipped: false });
        Ok(())
    }
}

fn read_manifest(path: &Path) -> Option<Manifest> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = BTreeMap::new();
        $( m.insert($k.to_string(), format!("{:?}", $v)); )*
        m
    }};
}

/// Deterministic per-query seed: FNV-1a of the query id mixed with `seed`.
pub fn query_seed(seed: u64, query_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in query_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Topic posterior and term weights of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryAnalysis {
    pub theta: Vec<f64>,
    pub weights: TermWeightVector,
    pub all_oov: bool,
}

pub fn analyze_query(
    topics: &TopicModel,
    query: &QueryRecord,
    burn_in: usize,
    samples: usize,
    seed: u64,
    rescale: bool,
) -> Result<QueryAnalysis> {
    let cfg = InferenceConfig {
        burn_in,
        samples,
        seed: query_seed(seed, &query.id),
    };
    let post = infer_query_topics(topics, &query.tokens, cfg)?;
    let weights = term_weights(topics, &post, &query.tokens, rescale)?;
    Ok(QueryAnalysis {
        theta: post.theta,
        weights,
        all_oov: post.all_oov,
    })
}

/// F1..F4 followed by the asker and answerer authority scores, or by their
/// mean when `combine_quality` is set.
pub fn feature_vector(
    query: &[crate::corpus::TermId],
    pair: &QAPair,
    corpus: &Corpus,
    ctx: &ScoringContext,
    analysis: &QueryAnalysis,
    combine_quality: bool,
) -> Vec<f64> {
    let f = features_f1_f4(query, pair, ctx, &analysis.theta, &analysis.weights);
    let q = quality_feature(pair, corpus);
    let mut v = f.to_array().to_vec();
    if combine_quality {
        v.push(q.mean());
    } else {
        v.extend([q.s_asker, q.s_answerer]);
    }
    v
}

/// Reorders `candidates` with one of the unsupervised methods.
#[allow(clippy::too_many_arguments)]
pub fn rank_with_method(
    method: Method,
    query: &[crate::corpus::TermId],
    candidates: &[ScoredCandidate],
    corpus: &Corpus,
    index: &InvertedIndex,
    ctx: &ScoringContext,
    mu: MixtureWeights,
    analysis: &QueryAnalysis,
) -> Vec<ScoredCandidate> {
    let pair = |c: &ScoredCandidate| &corpus.pairs[c.doc as usize];
    rank_candidates(candidates, |c| match method {
        Method::Vsm => index.vsm_score(query, c.doc),
        Method::Bm25 => c.score,
        Method::Lm => score_lm(query, &pair(c).question_tokens, ctx.stats),
        Method::Tlm => score_tlm(query, &pair(c).question_tokens, ctx.table, ctx.stats),
        Method::T2lm => score_t2lm(query, pair(c), mu, ctx),
        Method::T2lmPlus => score_t2lm_plus(query, pair(c), mu, ctx, &analysis.theta, &analysis.weights),
    })
}

/// Loads a run of candidates and maps its qa ids back to corpus positions.
fn candidates_from_run(run: &RankedRun, corpus: &Corpus) -> Result<BTreeMap<String, Vec<ScoredCandidate>>> {
    let pos: HashMap<&str, u32> = corpus
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i as u32))
        .collect();
    let mut out = BTreeMap::new();
    for (q, entries) in run.queries() {
        let mut list = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let doc = *pos
                .get(e.doc_id.as_str())
                .ok_or_else(|| Error::InvalidArgument(format!("candidate `{}` is not in the corpus", e.doc_id)))?;
            list.push(ScoredCandidate {
                qa_id: e.doc_id.clone(),
                doc,
                score: e.score,
                rank: i + 1,
            });
        }
        out.insert(q.to_owned(), list);
    }
    Ok(out)
}

fn retrieve(cfg: &PipelineConfig, corpus: &Corpus, index: &InvertedIndex, queries: &QuerySet) -> Result<RankedRun> {
    let mut run = RankedRun::new("bm25");
    for q in &queries.queries {
        let mut cands = index.retrieve_candidates(&q.tokens, cfg.top_k, cfg.bm25);
        if let Some(min) = cfg.pad_candidates {
            pad(&mut cands, min.min(corpus.pairs.len()), corpus, query_seed(cfg.seed, &q.id));
        }
        run.insert(&q.id, &cands)?;
    }
    Ok(run)
}

/// Appends randomly drawn unretrieved pairs, scored zero, until `cands`
/// holds `min` entries.
fn pad(cands: &mut Vec<ScoredCandidate>, min: usize, corpus: &Corpus, seed: u64) {
    if cands.len() >= min {
        return;
    }
    let taken: std::collections::HashSet<u32> = cands.iter().map(|c| c.doc).collect();
    let mut pool: Vec<u32> = (0..corpus.pairs.len() as u32).filter(|d| !taken.contains(d)).collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut extra: Vec<u32> = pool.into_iter().take(min - cands.len()).collect();
    extra.sort_by(|&a, &b| corpus.pairs[a as usize].id.cmp(&corpus.pairs[b as usize].id));
    for d in extra {
        cands.push(ScoredCandidate {
            qa_id: corpus.pairs[d as usize].id.clone(),
            doc: d,
            score: 0.0,
            rank: cands.len() + 1,
        });
    }
}

/// Splits judged queries into train and test halves with a seeded shuffle.
/// Every unjudged query goes to the test side.
pub fn split_queries(queries: &QuerySet, qrels: Option<&Qrels>, fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let Some(qrels) = qrels else {
        return (Vec::new(), queries.queries.iter().map(|q| q.id.clone()).collect());
    };
    let mut judged: Vec<String> = queries
        .queries
        .iter()
        .filter(|q| qrels.has_query(&q.id))
        .map(|q| q.id.clone())
        .collect();
    judged.sort();
    judged.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed));
    let n_train = ((judged.len() as f64 * fraction).round() as usize).clamp(1.min(judged.len()), judged.len());
    let test_judged = judged.split_off(n_train);
    let mut train = judged;
    train.sort();
    let mut test: Vec<String> = test_judged;
    test.extend(
        queries
            .queries
            .iter()
            .filter(|q| !qrels.has_query(&q.id))
            .map(|q| q.id.clone()),
    );
    test.sort();
    (train, test)
}

fn write_split(path: &Path, train: &[String], test: &[String]) -> Result<()> {
    let lines: Vec<String> = train
        .iter()
        .map(|q| format!("train {q}"))
        .chain(test.iter().map(|q| format!("test {q}")))
        .collect();
    write_lines(path, &lines)
}

fn read_split(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let text = crate::io::read_to_string(path)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        match line.split_once(' ') {
            Some(("train", q)) => train.push(q.to_owned()),
            Some(("test", q)) => test.push(q.to_owned()),
            _ => return Err(Error::parse(path.display().to_string(), i + 1, "expected `train|test <query>`")),
        }
    }
    Ok((train, test))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let files = cfg.files();
    let mut runner = StageRunner {
        manifests: files.manifests.clone(),
        statuses: Vec::new(),
    };
    let opts = cfg.ingest_options();

    let mut raw_inputs: Vec<&Path> = vec![&cfg.corpus, &cfg.queries];
    raw_inputs.extend(cfg.users.as_deref());
    raw_inputs.extend(cfg.qrels.as_deref());

    let stage_err = |stage: &'static str| move |e: Error| Error::Stage { stage, source: Box::new(e) };

    let corpus = ingest_corpus(&cfg.corpus, cfg.users.as_deref(), &opts).map_err(stage_err("ingest"))?;
    let queries = read_queries(&cfg.queries, &corpus.vocab, &opts).map_err(stage_err("ingest"))?;
    let qrels = cfg
        .qrels
        .as_deref()
        .map(read_qrels)
        .transpose()
        .map_err(stage_err("ingest"))?;
    runner.run(
        "ingest",
        &raw_inputs,
        params!("tokenize" => cfg.tokenize, "stopwords" => cfg.stopwords),
        &[files.summary.clone()],
        || {
            let summary = serde_json::json!({
                "pairs": corpus.pairs.len(),
                "vocabulary": corpus.vocab.len(),
                "tokens": corpus.stats.total_tokens(),
                "users": corpus.users.len(),
                "queries": queries.queries.len(),
            });
            write_atomic(&files.summary, summary.to_string().as_bytes())
        },
    )?;

    let index = InvertedIndex::build(&corpus, cfg.field);
    runner.run(
        "retrieve",
        &[&files.summary, &cfg.corpus, &cfg.queries],
        params!("field" => cfg.field, "bm25" => cfg.bm25, "top_k" => cfg.top_k, "pad" => cfg.pad_candidates, "seed" => cfg.seed),
        &[files.candidates.clone()],
        || retrieve(cfg, &corpus, &index, &queries)?.write(&files.candidates),
    )?;
    let candidates = read_run(&files.candidates)
        .and_then(|r| candidates_from_run(&r, &corpus))
        .map_err(stage_err("retrieve"))?;

    runner.run(
        "translation",
        &[&files.summary, &cfg.corpus],
        params!("iterations" => cfg.em_iterations, "direction" => cfg.direction, "prune" => cfg.prune),
        &[files.translation.clone()],
        || {
            let pairs = make_parallel_pairs(&corpus, cfg.direction);
            train_ibm1(&pairs, cfg.em_iterations, cfg.prune)?.write(&corpus.vocab, &files.translation)
        },
    )?;
    let table = TranslationTable::read(&corpus.vocab, &files.translation).map_err(stage_err("translation"))?;

    let lda = cfg.lda_config();
    runner.run(
        "topics",
        &[&files.summary, &cfg.corpus],
        params!("topics" => lda.topics, "alpha" => lda.alpha, "beta" => lda.beta, "iterations" => lda.iterations, "seed" => lda.seed),
        &[files.topics.clone()],
        || train_lda(&topic_documents(&corpus), corpus.vocab.len(), lda)?.write(&files.topics),
    )?;
    let topics = TopicModel::read(&files.topics).map_err(stage_err("topics"))?;

    let ctx = ScoringContext {
        stats: &corpus.stats,
        table: &table,
        topics: &topics,
        smoothing: Smoothing::Collection,
    };
    let analyses: Vec<QueryAnalysis> = queries
        .queries
        .par_iter()
        .map(|q| analyze_query(&topics, q, cfg.burn_in, cfg.samples, cfg.seed, cfg.rescale_weights))
        .collect::<Result<_>>()
        .map_err(stage_err("features"))?;
    let analysis_of: HashMap<&str, &QueryAnalysis> =
        queries.queries.iter().map(|q| q.id.as_str()).zip(&analyses).collect();

    let training = cfg.model.is_none();
    runner.run(
        "features",
        &[&files.candidates, &files.translation, &files.topics, &cfg.corpus, &cfg.queries]
            .map(PathBuf::as_path)
            .into_iter()
            .chain(cfg.users.as_deref())
            .chain(cfg.qrels.as_deref())
            .collect::<Vec<_>>(),
        params!(
            "burn_in" => cfg.burn_in, "samples" => cfg.samples, "seed" => cfg.seed,
            "rescale_weights" => cfg.rescale_weights, "combine_quality" => cfg.combine_quality,
            "train_fraction" => cfg.train_fraction, "training" => training,
        ),
        &[files.features.clone(), files.split.clone()],
        || {
            let (train_q, test_q) = if training {
                split_queries(&queries, qrels.as_ref(), cfg.train_fraction, cfg.seed)
            } else {
                split_queries(&queries, None, cfg.train_fraction, cfg.seed)
            };
            let per_query: Vec<Vec<RankingInstance>> = queries
                .queries
                .par_iter()
                .map(|q| {
                    let a = analysis_of[q.id.as_str()];
                    candidates
                        .get(&q.id)
                        .map(|cands| {
                            cands
                                .iter()
                                .map(|c| RankingInstance {
                                    query_id: q.id.clone(),
                                    doc_id: c.qa_id.clone(),
                                    features: feature_vector(
                                        &q.tokens,
                                        &corpus.pairs[c.doc as usize],
                                        &corpus,
                                        &ctx,
                                        a,
                                        cfg.combine_quality,
                                    ),
                                    label: qrels.as_ref().map_or(0, |r| r.grade(&q.id, &c.qa_id)),
                                })
                                .collect()
                        })
                        .unwrap_or_default()
                })
                .collect();
            write_letor(&per_query.concat(), &files.features)?;
            write_split(&files.split, &train_q, &test_q)
        },
    )?;
    let instances = read_letor(&files.features).map_err(stage_err("features"))?;
    let (train_q, test_q) = read_split(&files.split).map_err(stage_err("features"))?;

    let model_path = match &cfg.model {
        Some(p) => p.clone(),
        None => {
            runner.run(
                "train-ranker",
                &[&files.features, &files.split],
                params!("config" => cfg.ranker, "seed" => cfg.seed),
                &[files.model.clone()],
                || {
                    let keep: std::collections::HashSet<&str> = train_q.iter().map(String::as_str).collect();
                    let data: Vec<RankingInstance> = instances
                        .iter()
                        .filter(|i| keep.contains(i.query_id.as_str()))
                        .cloned()
                        .collect();
                    train(&data, cfg.ranker, cfg.seed)?.write(&files.model)
                },
            )?;
            files.model.clone()
        }
    };
    let model = LambdaMartModel::read(&model_path).map_err(stage_err("rank"))?;

    let systems: Vec<String> = Method::ALL
        .iter()
        .map(|m| m.as_str().to_owned())
        .chain([FUSED.to_owned()])
        .collect();
    let run_paths: Vec<(String, PathBuf)> = systems.iter().map(|s| (s.clone(), files.run(s))).collect();
    let outputs: Vec<PathBuf> = run_paths.iter().map(|(_, p)| p.clone()).collect();
    runner.run(
        "rank",
        &[&files.features, &files.split, &model_path, &files.translation, &files.topics, &cfg.corpus, &cfg.queries],
        params!("mu" => cfg.mu, "field" => cfg.field),
        &outputs,
        || {
            let feats: HashMap<(&str, &str), &[f64]> = instances
                .iter()
                .map(|i| ((i.query_id.as_str(), i.doc_id.as_str()), i.features.as_slice()))
                .collect();
            let mut runs: Vec<RankedRun> = systems.iter().map(|s| RankedRun::new(s.clone())).collect();
            for qid in &test_q {
                let q = queries
                    .get(qid)
                    .ok_or_else(|| Error::UnknownQuery(qid.clone()))?;
                let cands = candidates.get(qid).map(Vec::as_slice).unwrap_or_default();
                let a = analysis_of[qid.as_str()];
                for (m, run) in Method::ALL.iter().zip(runs.iter_mut()) {
                    let ranked = rank_with_method(*m, &q.tokens, cands, &corpus, &index, &ctx, cfg.mu, a);
                    run.insert(qid, &ranked)?;
                }
                let mut fused_scores = Vec::with_capacity(cands.len());
                for c in cands {
                    let x = feats
                        .get(&(qid.as_str(), c.qa_id.as_str()))
                        .ok_or_else(|| Error::InvalidArgument(format!("no features for {qid}/{}", c.qa_id)))?;
                    fused_scores.push(predict(&model, x)?);
                }
                let mut it = fused_scores.into_iter();
                let ranked = rank_candidates(cands, |_| it.next().expect("one score per candidate"));
                runs.last_mut().expect("fused run").insert(qid, &ranked)?;
            }
            for (run, (_, path)) in runs.iter().zip(&run_paths) {
                run.write(path)?;
            }
            Ok(())
        },
    )?;

    let report = match &qrels {
        None => None,
        Some(qrels) => {
            let mut report = MetricReport::default();
            let mut inputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            inputs.extend(cfg.qrels.as_deref());
            let mut compute = || -> Result<()> {
                for (system, path) in &run_paths {
                    let run = read_run(path)?;
                    let mut judged = RankedRun::new(system.clone());
                    for (q, entries) in run.queries() {
                        if qrels.has_query(q) {
                            judged.insert_entries(q, entries.to_vec())?;
                        }
                    }
                    report.systems.push(evaluate_run(&judged, qrels, cfg.depth, cfg.relevance_threshold)?);
                }
                Ok(())
            };
            compute().map_err(stage_err("evaluate"))?;
            runner.run(
                "evaluate",
                &inputs,
                params!("depth" => cfg.depth, "threshold" => cfg.relevance_threshold),
                &[files.report_text.clone(), files.report_json.clone()],
                || {
                    write_atomic(&files.report_text, report.render_text().as_bytes())?;
                    write_lines(&files.report_json, &report.json_lines())
                },
            )?;
            Some(report)
        }
    };

    Ok(PipelineOutcome {
        stages: runner.statuses,
        artifacts: files,
        runs: run_paths,
        report,
    })
}

/// Hash of every file a pipeline run leaves in `dir`, keyed by relative path.
pub fn artifact_hashes(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, at: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let entries = std::fs::read_dir(at).map_err(|e| Error::io(at, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(at, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap_or(&path).display().to_string();
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                out.insert(rel, sha256_bytes(&bytes));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}
