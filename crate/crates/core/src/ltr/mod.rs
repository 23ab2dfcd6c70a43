//! LambdaMART: boosted regression trees fit to ΔNDCG-weighted pairwise
//! lambda gradients.

mod lambda;
mod letor;
mod model;
mod tree;

pub use lambda::compute_lambdas;
pub use letor::{parse_letor, read_letor, write_letor};
pub use model::{predict, train, train_with_history, LambdaMartModel};
pub use tree::{fit_tree, Node, RegressionTree};

use crate::error::{Error, Result};

pub const MAX_LABEL: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct RankingInstance {
    pub query_id: String,
    pub doc_id: String,
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub trees: usize,
    pub leaves: usize,
    pub learning_rate: f64,
    pub min_leaf_instances: usize,
    pub ndcg_truncation: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            trees: 50,
            leaves: 4,
            learning_rate: 0.2,
            min_leaf_instances: 30,
            ndcg_truncation: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0
            || self.leaves == 0
            || !(self.learning_rate > 0.0)
            || self.min_leaf_instances == 0
            || self.ndcg_truncation == 0
        {
            return Err(Error::InvalidArgument(format!(
                "ranker settings must all be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Instance indices grouped by query id, in order of first appearance.
pub fn group_by_query(data: &[RankingInstance]) -> Vec<(String, Vec<usize>)> {
    let mut order: Vec<(String, Vec<usize>)> = Vec::new();
    let mut slot: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, inst) in data.iter().enumerate() {
        let s = *slot.entry(inst.query_id.as_str()).or_insert_with(|| {
            order.push((inst.query_id.clone(), Vec::new()));
            order.len() - 1
        });
        order[s].1.push(i);
    }
    order
}
