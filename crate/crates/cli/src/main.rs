use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cqr::config::KeyValueConfig;
use cqr::corpus::{ingest_corpus, read_queries, Corpus, IngestOptions, TokenizeMode};
use cqr::eval::{evaluate_run, read_qrels, read_run, MetricReport, RankedRun};
use cqr::index::{Bm25Params, Field, InvertedIndex};
use cqr::ltr::{predict, read_letor, train, write_letor, LambdaMartModel, RankingInstance, TrainConfig};
use cqr::pipeline::{analyze_query, feature_vector, rank_with_method, run_pipeline, PipelineConfig};
use cqr::relevance::{rank_candidates, Method, MixtureWeights, ScoringContext, Smoothing};
use cqr::synth::{generate, SynthPaths, SynthSpec};
use cqr::topics::{topic_documents, train_lda, TopicModel};
use cqr::translation::{make_parallel_pairs, train_ibm1, Direction, TranslationTable};

#[derive(Parser)]
#[command(name = "cqr", version, about = "Question retrieval over community Q&A archives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a Q&A archive and print corpus statistics.
    Ingest(IngestArgs),
    /// Retrieve BM25 candidates for each query and write them as a run.
    BuildIndex(BuildIndexArgs),
    /// Train the IBM Model 1 word translation table.
    TrainTm(TrainTmArgs),
    /// Train the LDA topic model.
    TrainLda(TrainLdaArgs),
    /// Compute ranking features for candidate pairs as LETOR.
    Features(FeaturesArgs),
    /// Train a LambdaMART ranker on LETOR features.
    TrainRanker(TrainRankerArgs),
    /// Rank candidates with one method, or with a trained ranker.
    Rank(RankArgs),
    /// Score runs against qrels.
    Evaluate(EvaluateArgs),
    /// Run every stage end to end.
    Pipeline(Box<PipelineArgs>),
    /// Write a synthetic archive with planted relevance judgments.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Q&A archive, one JSON object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// User best-answer counts, one JSON object per line.
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long)]
    tokenize: Option<TokenizeMode>,
    /// File with one stopword per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl CorpusArgs {
    fn options(&self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            mode: self.tokenize.unwrap_or_default(),
            stopwords: read_stopwords(self.stopwords.as_deref())?.into_iter().collect(),
        })
    }

    fn load(&self) -> Result<(Corpus, IngestOptions)> {
        let opts = self.options()?;
        let corpus = ingest_corpus(&self.corpus, self.users.as_deref(), &opts)?;
        Ok((corpus, opts))
    }
}

fn read_stopwords(path: Option<&Path>) -> Result<Vec<String>> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    queries: Option<PathBuf>,
}

#[derive(Args)]
struct BuildIndexArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value = "question_and_answer")]
    field: Field,
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    #[arg(long, default_value_t = 500)]
    top_k: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainTmArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = 10)]
    em_iters: usize,
    #[arg(long, default_value = "pooled_both")]
    direction: Direction,
    /// Drop entries below this probability; 0 keeps everything.
    #[arg(long, default_value_t = 1e-6)]
    prune: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainLdaArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = 50)]
    topics: usize,
    /// Defaults to 50/topics.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    gibbs_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct ModelFiles {
    #[arg(long)]
    translation: PathBuf,
    #[arg(long)]
    lda: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Scale term weights so they average one instead of summing to one.
    #[arg(long)]
    rescale_weights: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    queries: PathBuf,
    /// Candidate run written by `build-index`.
    #[arg(long)]
    candidates: PathBuf,
    #[command(flatten)]
    models: ModelFiles,
    /// Labels come from here; without it every label is 0.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Use the mean of the asker and answerer scores as one feature.
    #[arg(long)]
    combine_quality: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Clone, Default)]
struct RankerFlags {
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    leaves: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    ndcg_cutoff: Option<usize>,
}

impl RankerFlags {
    fn resolve(&self, file: &KeyValueConfig) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        Ok(TrainConfig {
            trees: pick(self.trees, file, "trees", d.trees)?,
            leaves: pick(self.leaves, file, "leaves", d.leaves)?,
            learning_rate: pick(self.learning_rate, file, "learning-rate", d.learning_rate)?,
            min_leaf_instances: pick(self.min_leaf, file, "min-leaf", d.min_leaf_instances)?,
            ndcg_truncation: pick(self.ndcg_cutoff, file, "ndcg-cutoff", d.ndcg_truncation)?,
        })
    }
}

#[derive(Args)]
struct TrainRankerArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    ranker: RankerFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Clone, Default)]
struct MuFlags {
    #[arg(long)]
    mu1: Option<f64>,
    #[arg(long)]
    mu2: Option<f64>,
    #[arg(long)]
    mu3: Option<f64>,
    #[arg(long)]
    mu4: Option<f64>,
}

impl MuFlags {
    fn resolve(&self, file: &KeyValueConfig) -> Result<MixtureWeights> {
        let d = MixtureWeights::default();
        Ok(MixtureWeights::new(
            pick(self.mu1, file, "mu1", d.mu1)?,
            pick(self.mu2, file, "mu2", d.mu2)?,
            pick(self.mu3, file, "mu3", d.mu3)?,
            pick(self.mu4, file, "mu4", d.mu4)?,
        )?)
    }
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    /// One of vsm, bm25, lm, tlm, t2lm, t2lm+. Ignored with --model.
    #[arg(long, default_value = "t2lm+")]
    method: Method,
    #[arg(long, default_value = "question_and_answer")]
    field: Field,
    #[command(flatten)]
    models: ModelFiles,
    #[command(flatten)]
    mu: MuFlags,
    /// Trained ranker; ranks with it instead of --method.
    #[arg(long, requires = "features")]
    model: Option<PathBuf>,
    /// LETOR features of the candidates, used with --model.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    qrels: PathBuf,
    /// Run files; each is reported under its tag.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    depth: usize,
    /// Lowest grade counted as relevant by MAP.
    #[arg(long, default_value_t = 1)]
    threshold: u8,
    /// Print JSON lines instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Apply this trained ranker instead of training one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, env = "CQR_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    tokenize: Option<TokenizeMode>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    field: Option<Field>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Pad short candidate lists to this length with random pairs.
    #[arg(long)]
    pad_candidates: Option<usize>,
    #[arg(long)]
    em_iters: Option<usize>,
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long)]
    prune: Option<f64>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gibbs_iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    mu: MuFlags,
    #[arg(long)]
    rescale_weights: bool,
    #[arg(long)]
    combine_quality: bool,
    #[command(flatten)]
    ranker: RankerFlags,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    size: usize,
    #[arg(long, default_value_t = 4)]
    topics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Flag if given, else config file entry, else default.
fn pick<T: FromStr>(flag: Option<T>, file: &KeyValueConfig, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(file.get(key)?.unwrap_or(default))
}

fn pick_opt<T: FromStr>(flag: Option<T>, file: &KeyValueConfig, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => Ok(file.get(key)?),
    }
}

fn pick_flag(flag: bool, file: &KeyValueConfig, key: &str) -> Result<bool> {
    Ok(flag || file.get(key)?.unwrap_or(false))
}

const PIPELINE_KEYS: &[&str] = &[
    "corpus", "users", "queries", "qrels", "model", "output-dir", "tokenize", "stopwords", "field", "k1", "b",
    "top-k", "pad-candidates", "em-iters", "direction", "prune", "topics", "alpha", "beta", "gibbs-iters",
    "burn-in", "samples", "mu1", "mu2", "mu3", "mu4", "rescale-weights", "combine-quality", "trees", "leaves",
    "learning-rate", "min-leaf", "ndcg-cutoff", "train-fraction", "depth", "threshold", "seed",
];

fn pipeline_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    let file = match &a.config {
        Some(p) => KeyValueConfig::load(p)?,
        None => KeyValueConfig::default(),
    };
    if let Some(k) = file.keys().find(|k| !PIPELINE_KEYS.contains(k)) {
        bail!("unknown config key `{k}`");
    }
    let required = |flag: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
        pick_opt(flag.clone(), &file, key)?.with_context(|| format!("--{key} is required"))
    };
    let mut cfg = PipelineConfig::new(
        required(&a.corpus, "corpus")?,
        required(&a.queries, "queries")?,
        pick(a.output_dir.clone(), &file, "output-dir", PathBuf::from("cqr-out"))?,
    );
    cfg.users = pick_opt(a.users.clone(), &file, "users")?;
    cfg.qrels = pick_opt(a.qrels.clone(), &file, "qrels")?;
    cfg.model = pick_opt(a.model.clone(), &file, "model")?;
    cfg.tokenize = pick(a.tokenize, &file, "tokenize", cfg.tokenize)?;
    cfg.stopwords = read_stopwords(pick_opt(a.stopwords.clone(), &file, "stopwords")?.as_deref())?;
    cfg.field = pick(a.field, &file, "field", cfg.field)?;
    cfg.bm25 = Bm25Params {
        k1: pick(a.k1, &file, "k1", cfg.bm25.k1)?,
        b: pick(a.b, &file, "b", cfg.bm25.b)?,
    };
    cfg.top_k = pick(a.top_k, &file, "top-k", cfg.top_k)?;
    cfg.pad_candidates = pick_opt(a.pad_candidates, &file, "pad-candidates")?;
    cfg.em_iterations = pick(a.em_iters, &file, "em-iters", cfg.em_iterations)?;
    cfg.direction = pick(a.direction, &file, "direction", cfg.direction)?;
    let prune = pick(a.prune, &file, "prune", cfg.prune.unwrap_or(0.0))?;
    cfg.prune = (prune > 0.0).then_some(prune);
    cfg.topics = pick(a.topics, &file, "topics", cfg.topics)?;
    cfg.alpha = pick_opt(a.alpha, &file, "alpha")?;
    cfg.beta = pick(a.beta, &file, "beta", cfg.beta)?;
    cfg.gibbs_iterations = pick(a.gibbs_iters, &file, "gibbs-iters", cfg.gibbs_iterations)?;
    cfg.burn_in = pick(a.burn_in, &file, "burn-in", cfg.burn_in)?;
    cfg.samples = pick(a.samples, &file, "samples", cfg.samples)?;
    cfg.mu = a.mu.resolve(&file)?;
    cfg.rescale_weights = pick_flag(a.rescale_weights, &file, "rescale-weights")?;
    cfg.combine_quality = pick_flag(a.combine_quality, &file, "combine-quality")?;
    cfg.ranker = a.ranker.resolve(&file)?;
    cfg.train_fraction = pick(a.train_fraction, &file, "train-fraction", cfg.train_fraction)?;
    cfg.depth = pick(a.depth, &file, "depth", cfg.depth)?;
    cfg.relevance_threshold = pick(a.threshold, &file, "threshold", cfg.relevance_threshold)?;
    cfg.seed = pick(a.seed, &file, "seed", cfg.seed)?;
    Ok(cfg)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let (corpus, opts) = a.corpus.load()?;
    let mut summary = format!(
        "pairs {}\nvocabulary {}\ntokens {}\nusers {}\n",
        corpus.pairs.len(),
        corpus.vocab.len(),
        corpus.stats.total_tokens(),
        corpus.users.len()
    );
    if let Some(q) = &a.queries {
        let qs = read_queries(q, &corpus.vocab, &opts)?;
        summary.push_str(&format!("queries {}\n", qs.queries.len()));
    }
    print!("{summary}");
    Ok(())
}

fn cmd_build_index(a: &BuildIndexArgs) -> Result<()> {
    let (corpus, opts) = a.corpus.load()?;
    let queries = read_queries(&a.queries, &corpus.vocab, &opts)?;
    let params = Bm25Params { k1: a.k1, b: a.b };
    params.validate()?;
    let index = InvertedIndex::build(&corpus, a.field);
    let mut run = RankedRun::new("bm25");
    for q in &queries.queries {
        run.insert(&q.id, &index.retrieve_candidates(&q.tokens, a.top_k, params))?;
    }
    run.write(&a.output)?;
    Ok(())
}

fn cmd_train_tm(a: &TrainTmArgs) -> Result<()> {
    let (corpus, _) = a.corpus.load()?;
    let pairs = make_parallel_pairs(&corpus, a.direction);
    let table = train_ibm1(&pairs, a.em_iters, (a.prune > 0.0).then_some(a.prune))?;
    table.write(&corpus.vocab, &a.output)?;
    Ok(())
}

fn cmd_train_lda(a: &TrainLdaArgs) -> Result<()> {
    let (corpus, _) = a.corpus.load()?;
    let mut cfg = cqr::topics::LdaConfig::with_topics(a.topics);
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    cfg.beta = a.beta;
    cfg.iterations = a.gibbs_iters;
    cfg.seed = a.seed;
    train_lda(&topic_documents(&corpus), corpus.vocab.len(), cfg)?.write(&a.output)?;
    Ok(())
}

/// Candidate lists keyed by query, mapped onto corpus positions.
fn load_candidates(path: &Path, corpus: &Corpus) -> Result<HashMap<String, Vec<cqr::index::ScoredCandidate>>> {
    let pos: HashMap<&str, u32> = corpus
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i as u32))
        .collect();
    let run = read_run(path)?;
    let mut out = HashMap::new();
    for (q, entries) in run.queries() {
        let mut list = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let doc = *pos
                .get(e.doc_id.as_str())
                .with_context(|| format!("candidate `{}` is not in the corpus", e.doc_id))?;
            list.push(cqr::index::ScoredCandidate {
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

fn cmd_features(a: &FeaturesArgs) -> Result<()> {
    let (corpus, opts) = a.corpus.load()?;
    let queries = read_queries(&a.queries, &corpus.vocab, &opts)?;
    let candidates = load_candidates(&a.candidates, &corpus)?;
    let table = TranslationTable::read(&corpus.vocab, &a.models.translation)?;
    let topics = TopicModel::read(&a.models.lda)?;
    let qrels = a.qrels.as_deref().map(read_qrels).transpose()?;
    let ctx = ScoringContext {
        stats: &corpus.stats,
        table: &table,
        topics: &topics,
        smoothing: Smoothing::Collection,
    };
    let mut data = Vec::new();
    for q in &queries.queries {
        let Some(cands) = candidates.get(&q.id) else { continue };
        let m = &a.models;
        let analysis = analyze_query(&topics, q, m.burn_in, m.samples, m.seed, m.rescale_weights)?;
        for c in cands {
            data.push(RankingInstance {
                query_id: q.id.clone(),
                doc_id: c.qa_id.clone(),
                features: feature_vector(&q.tokens, &corpus.pairs[c.doc as usize], &corpus, &ctx, &analysis, a.combine_quality),
                label: qrels.as_ref().map_or(0, |r| r.grade(&q.id, &c.qa_id)),
            });
        }
    }
    write_letor(&data, &a.output)?;
    Ok(())
}

fn cmd_train_ranker(a: &TrainRankerArgs) -> Result<()> {
    let data = read_letor(&a.features)?;
    let cfg = a.ranker.resolve(&KeyValueConfig::default())?;
    train(&data, cfg, a.seed)?.write(&a.output)?;
    Ok(())
}

fn cmd_rank(a: &RankArgs) -> Result<()> {
    let (corpus, opts) = a.corpus.load()?;
    let queries = read_queries(&a.queries, &corpus.vocab, &opts)?;
    let candidates = load_candidates(&a.candidates, &corpus)?;

    if let (Some(model), Some(features)) = (&a.model, &a.features) {
        let model = LambdaMartModel::read(model)?;
        let feats: HashMap<(String, String), Vec<f64>> = read_letor(features)?
            .into_iter()
            .map(|i| ((i.query_id, i.doc_id), i.features))
            .collect();
        let mut run = RankedRun::new("fused");
        for q in &queries.queries {
            let Some(cands) = candidates.get(&q.id) else { continue };
            let mut scores = Vec::with_capacity(cands.len());
            for c in cands {
                let x = feats
                    .get(&(q.id.clone(), c.qa_id.clone()))
                    .with_context(|| format!("no features for {}/{}", q.id, c.qa_id))?;
                scores.push(predict(&model, x)?);
            }
            let mut it = scores.into_iter();
            run.insert(&q.id, &rank_candidates(cands, |_| it.next().unwrap_or(f64::NEG_INFINITY)))?;
        }
        run.write(&a.output)?;
        return Ok(());
    }

    let table = TranslationTable::read(&corpus.vocab, &a.models.translation)?;
    let topics = TopicModel::read(&a.models.lda)?;
    let ctx = ScoringContext {
        stats: &corpus.stats,
        table: &table,
        topics: &topics,
        smoothing: Smoothing::Collection,
    };
    let mu = a.mu.resolve(&KeyValueConfig::default())?;
    let index = InvertedIndex::build(&corpus, a.field);
    let mut run = RankedRun::new(a.method.as_str());
    for q in &queries.queries {
        let Some(cands) = candidates.get(&q.id) else { continue };
        let m = &a.models;
        let analysis = analyze_query(&topics, q, m.burn_in, m.samples, m.seed, m.rescale_weights)?;
        let ranked = rank_with_method(a.method, &q.tokens, cands, &corpus, &index, &ctx, mu, &analysis);
        run.insert(&q.id, &ranked)?;
    }
    run.write(&a.output)?;
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let qrels = read_qrels(&a.qrels)?;
    let mut report = MetricReport::default();
    for path in &a.runs {
        let run = read_run(path)?;
        report.systems.push(evaluate_run(&run, &qrels, a.depth, a.threshold)?);
    }
    if a.json {
        for line in report.json_lines() {
            println!("{line}");
        }
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = pipeline_config(a)?;
    let outcome = run_pipeline(&cfg)?;
    for s in &outcome.stages {
        eprintln!("{:<13} {}", s.stage, if s.skipped { "up to date" } else { "done" });
    }
    if let Some(report) = &outcome.report {
        print!("{}", report.render_text());
    }
    eprintln!("artifacts in {}", outcome.artifacts.dir.display());
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let data = generate(SynthSpec {
        size: a.size,
        topics: a.topics,
        seed: a.seed,
    })?;
    data.write(&SynthPaths::in_dir(&a.out))?;
    eprintln!(
        "wrote {} pairs, {} users, {} queries to {}",
        data.records.len(),
        data.users.len(),
        data.queries.len(),
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::BuildIndex(a) => cmd_build_index(a),
        Command::TrainTm(a) => cmd_train_tm(a),
        Command::TrainLda(a) => cmd_train_lda(a),
        Command::Features(a) => cmd_features(a),
        Command::TrainRanker(a) => cmd_train_ranker(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

