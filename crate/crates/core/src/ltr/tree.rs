use std::fmt::Write as _;

/// Added to the hessian sum in Newton leaf values.
const RIDGE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    /// nodes[0] is the root.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Renumbers nodes so that `nodes` is in preorder, the layout the model
    /// file reader produces.
    fn into_preorder(self) -> Self {
        fn visit(src: &[Node], at: usize, out: &mut Vec<Node>) -> usize {
            let idx = out.len();
            out.push(src[at].clone());
            if let Node::Split { feature, threshold, left, right } = src[at] {
                let l = visit(src, left, out);
                let r = visit(src, right, out);
                out[idx] = Node::Split { feature, threshold, left: l, right: r };
            }
            idx
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        visit(&self.nodes, 0, &mut nodes);
        RegressionTree { nodes }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Preorder, one node per line: `S <feature> <threshold>` or `L <value>`.
    pub fn write_preorder(&self, out: &mut String) {
        self.write_node(0, out);
    }

    fn write_node(&self, at: usize, out: &mut String) {
        match self.nodes[at] {
            Node::Leaf { value } => writeln!(out, "L {value}").unwrap(),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                writeln!(out, "S {feature} {threshold}").unwrap();
                self.write_node(left, out);
                self.write_node(right, out);
            }
        }
    }

    /// Parses a preorder listing produced by [`write_preorder`]. Consumes
    /// exactly the lines of one tree from `lines`.
    pub(crate) fn read_preorder<'a, I>(lines: &mut I) -> Result<Self, String>
    where
        I: Iterator<Item = &'a str>,
    {
        let mut nodes = Vec::new();
        Self::read_node(lines, &mut nodes)?;
        Ok(RegressionTree { nodes })
    }

    fn read_node<'a, I>(lines: &mut I, nodes: &mut Vec<Node>) -> Result<usize, String>
    where
        I: Iterator<Item = &'a str>,
    {
        let line = lines.next().ok_or("tree ended early")?;
        let parts: Vec<&str> = line.split(' ').collect();
        let at = nodes.len();
        match parts.as_slice() {
            ["L", v] => {
                let value = v.parse().map_err(|_| format!("bad leaf value `{v}`"))?;
                nodes.push(Node::Leaf { value });
            }
            ["S", f, t] => {
                let feature = f.parse().map_err(|_| format!("bad feature `{f}`"))?;
                let threshold = t.parse().map_err(|_| format!("bad threshold `{t}`"))?;
                nodes.push(Node::Leaf { value: 0.0 });
                let left = Self::read_node(lines, nodes)?;
                let right = Self::read_node(lines, nodes)?;
                nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
            _ => return Err(format!("bad tree line `{line}`")),
        }
        Ok(at)
    }
}

#[derive(Clone, Copy, Debug)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Region {
    node: usize,
    rows: Vec<usize>,
    split: Option<Split>,
}

fn leaf_value(rows: &[usize], lambdas: &[f64], hessians: &[f64]) -> f64 {
    let num: f64 = rows.iter().map(|&r| lambdas[r]).sum();
    let den: f64 = rows.iter().map(|&r| hessians[r]).sum();
    num / (den + RIDGE)
}

/// Best variance-reducing split of `rows`. Candidate thresholds are
/// midpoints between consecutive distinct feature values; both sides must
/// keep at least `min_leaf` rows. Ties keep the lowest feature, then the
/// lowest threshold.
fn best_split(features: &[Vec<f64>], lambdas: &[f64], rows: &[usize], min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| lambdas[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| lambdas[r] * lambdas[r]).sum();
    let base = total * total / n as f64;
    let min_gain = 1e-10 * total_sq;
    let dims = features[rows[0]].len();

    let mut best: Option<Split> = None;
    let mut sorted = rows.to_vec();
    for f in 0..dims {
        sorted.sort_by(|&a, &b| features[a][f].total_cmp(&features[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += lambdas[sorted[i]];
            let nl = i + 1;
            let nr = n - nl;
            let (v, next) = (features[sorted[i]][f], features[sorted[i + 1]][f]);
            if nl < min_leaf || nr < min_leaf || v == next {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - base;
            if gain > min_gain && best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    gain,
                    feature: f,
                    threshold: v + (next - v) / 2.0,
                });
            }
        }
    }
    best
}

/// Grows a tree best-first on the lambda targets: the leaf whose best split
/// reduces squared error most is split next, until `max_leaves` is reached
/// or no admissible split remains. Leaves hold the Newton step
/// Σλ / (Σh + ridge).
pub fn fit_tree(
    features: &[Vec<f64>],
    lambdas: &[f64],
    hessians: &[f64],
    max_leaves: usize,
    min_leaf: usize,
) -> RegressionTree {
    let all: Vec<usize> = (0..features.len()).collect();
    if features.len() < min_leaf.max(1) || max_leaves <= 1 {
        return RegressionTree::leaf(leaf_value(&all, lambdas, hessians));
    }

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut regions = vec![Region {
        node: 0,
        split: best_split(features, lambdas, &all, min_leaf),
        rows: all,
    }];

    while regions.len() < max_leaves {
        let pick = regions
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.split.map(|s| (i, s.gain)))
            .fold(None::<(usize, f64)>, |acc, (i, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((i, g)),
            });
        let Some((idx, _)) = pick else { break };
        let region = regions.swap_remove(idx);
        let split = region.split.expect("picked region has a split");
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = region
            .rows
            .iter()
            .partition(|&&r| features[r][split.feature] <= split.threshold);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[region.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        for (node, rows) in [(left, l_rows), (right, r_rows)] {
            let split = best_split(features, lambdas, &rows, min_leaf);
            regions.push(Region { node, rows, split });
        }
        // keep creation order so gain ties go to the older region
        regions.sort_by_key(|r| r.node);
    }

    for r in &regions {
        nodes[r.node] = Node::Leaf {
            value: leaf_value(&r.rows, lambdas, hessians),
        };
    }
    RegressionTree { nodes }.into_preorder()
}
