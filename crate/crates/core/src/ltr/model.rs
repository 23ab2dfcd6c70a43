use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{compute_lambdas, fit_tree, group_by_query, RankingInstance, RegressionTree, TrainConfig, MAX_LABEL};
use crate::error::{Error, Result};
use crate::eval::ndcg_of_scores;

const MODEL_MAGIC: &str = "lambdamart v1";

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaMartModel {
    pub trees: Vec<RegressionTree>,
    pub feature_count: usize,
    pub config: TrainConfig,
    pub seed: u64,
}

impl LambdaMartModel {
    pub fn empty(feature_count: usize, config: TrainConfig) -> Self {
        LambdaMartModel {
            trees: Vec::new(),
            feature_count,
            config,
            seed: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        writeln!(out, "{MODEL_MAGIC}").unwrap();
        writeln!(out, "features {}", self.feature_count).unwrap();
        writeln!(
            out,
            "config trees={} leaves={} learning_rate={} min_leaf={} ndcg_cutoff={} seed={}",
            c.trees, c.leaves, c.learning_rate, c.min_leaf_instances, c.ndcg_truncation, self.seed
        )
        .unwrap();
        for (i, tree) in self.trees.iter().enumerate() {
            writeln!(out, "tree {i}").unwrap();
            tree.write_preorder(&mut out);
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::from_text(&text).map_err(|(line, m)| Error::parse(path.display().to_string(), line, m))
    }

    fn from_text(text: &str) -> std::result::Result<Self, (usize, String)> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&MODEL_MAGIC) {
            return Err((1, format!("expected `{MODEL_MAGIC}`")));
        }
        let feature_count = lines
            .get(1)
            .and_then(|l| l.strip_prefix("features "))
            .and_then(|n| n.parse().ok())
            .ok_or((2, "expected `features <n>`".to_string()))?;
        let mut config = TrainConfig::default();
        let mut seed = 0;
        let cfg = lines
            .get(2)
            .and_then(|l| l.strip_prefix("config "))
            .ok_or((3, "expected `config ...`".to_string()))?;
        for kv in cfg.split(' ') {
            let (k, v) = kv.split_once('=').ok_or((3, format!("bad config entry `{kv}`")))?;
            let bad = || (3, format!("bad value for `{k}`"));
            match k {
                "trees" => config.trees = v.parse().map_err(|_| bad())?,
                "leaves" => config.leaves = v.parse().map_err(|_| bad())?,
                "learning_rate" => config.learning_rate = v.parse().map_err(|_| bad())?,
                "min_leaf" => config.min_leaf_instances = v.parse().map_err(|_| bad())?,
                "ndcg_cutoff" => config.ndcg_truncation = v.parse().map_err(|_| bad())?,
                "seed" => seed = v.parse().map_err(|_| bad())?,
                _ => return Err((3, format!("unknown config key `{k}`"))),
            }
        }

        let mut trees = Vec::new();
        let mut at = 3;
        while at < lines.len() {
            if lines[at].trim().is_empty() {
                at += 1;
                continue;
            }
            if !lines[at].starts_with("tree ") {
                return Err((at + 1, "expected `tree <i>`".into()));
            }
            let start = at + 1;
            let mut body = lines[start..].iter().copied();
            let before = body.len();
            let tree = RegressionTree::read_preorder(&mut body).map_err(|m| (start + 1, m))?;
            at = start + (before - body.len());
            trees.push(tree);
        }
        Ok(LambdaMartModel {
            trees,
            feature_count,
            config,
            seed,
        })
    }
}

/// Σ over trees of learning_rate · leaf value.
pub fn predict(model: &LambdaMartModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.feature_count {
        return Err(Error::FeatureLength {
            expected: model.feature_count,
            found: features.len(),
        });
    }
    Ok(predict_unchecked(model, features))
}

fn predict_unchecked(model: &LambdaMartModel, features: &[f64]) -> f64 {
    let lr = model.learning_rate();
    let mut s = 0.0;
    for t in &model.trees {
        s += lr * t.predict(features);
    }
    s
}

fn validate(data: &[RankingInstance]) -> Result<usize> {
    let Some(first) = data.first() else {
        return Err(Error::NoPreferenceSignal);
    };
    let dims = first.features.len();
    for inst in data {
        if inst.features.len() != dims {
            return Err(Error::FeatureLength {
                expected: dims,
                found: inst.features.len(),
            });
        }
        if inst.label > MAX_LABEL {
            return Err(Error::InvalidArgument(format!("label {} outside 0..=2", inst.label)));
        }
    }
    Ok(dims)
}

/// Mean training NDCG@k over queries for the given scores.
fn mean_ndcg(groups: &[(String, Vec<usize>)], labels: &[u8], scores: &[f64], k: usize) -> f64 {
    let total: f64 = groups
        .iter()
        .map(|(_, rows)| {
            let s: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
            let l: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
            ndcg_of_scores(&s, &l, k)
        })
        .sum();
    total / groups.len() as f64
}

pub fn train(data: &[RankingInstance], config: TrainConfig, seed: u64) -> Result<LambdaMartModel> {
    train_with_history(data, config, seed).map(|(m, _)| m)
}

/// Trains and also returns the mean training NDCG@k after each round.
pub fn train_with_history(
    data: &[RankingInstance],
    config: TrainConfig,
    seed: u64,
) -> Result<(LambdaMartModel, Vec<f64>)> {
    config.validate()?;
    let dims = validate(data)?;
    let groups = group_by_query(data);
    let labels: Vec<u8> = data.iter().map(|d| d.label).collect();
    let has_signal = groups.iter().any(|(_, rows)| {
        let first = labels[rows[0]];
        rows.iter().any(|&r| labels[r] != first)
    });
    if !has_signal {
        return Err(Error::NoPreferenceSignal);
    }

    let features: Vec<Vec<f64>> = data.iter().map(|d| d.features.clone()).collect();
    let mut scores = vec![0.0; data.len()];
    let mut model = LambdaMartModel {
        trees: Vec::with_capacity(config.trees),
        feature_count: dims,
        config,
        seed,
    };
    let mut history = Vec::with_capacity(config.trees);
    let mut lambdas = vec![0.0; data.len()];
    let mut hessians = vec![0.0; data.len()];

    for _ in 0..config.trees {
        let per_query: Vec<(Vec<f64>, Vec<f64>)> = groups
            .par_iter()
            .map(|(_, rows)| {
                let s: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
                let l: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
                compute_lambdas(&s, &l, config.ndcg_truncation)
            })
            .collect();
        for ((_, rows), (l, h)) in groups.iter().zip(per_query) {
            for (i, &r) in rows.iter().enumerate() {
                lambdas[r] = l[i];
                hessians[r] = h[i];
            }
        }

        let tree = fit_tree(&features, &lambdas, &hessians, config.leaves, config.min_leaf_instances);
        for (s, x) in scores.iter_mut().zip(&features) {
            *s += config.learning_rate * tree.predict(x);
        }
        model.trees.push(tree);
        history.push(mean_ndcg(&groups, &labels, &scores, config.ndcg_truncation));
    }
    Ok((model, history))
}
