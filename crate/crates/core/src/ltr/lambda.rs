use crate::eval::{discount, gain, ideal_dcg};

/// Lambda gradients and second-order weights for one query's documents.
///
/// For every pair with `labels[i] > labels[j]`, ρ = 1/(1 + e^(s_i − s_j))
/// and the pair's |ΔNDCG@k| (from swapping the two documents in the
/// current score order) push `i` up and `j` down by |ΔNDCG|·ρ. The
/// returned lambdas point in the direction scores should move.
pub fn compute_lambdas(scores: &[f64], labels: &[u8], k: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n = scores.len();
    let mut lambdas = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let idcg = ideal_dcg(labels, k);
    if idcg == 0.0 {
        return (lambdas, hessians);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (pos, &doc) in order.iter().enumerate() {
        rank[doc] = pos + 1;
    }
    let disc = |r: usize| if r <= k { discount(r) } else { 0.0 };

    for i in 0..n {
        for j in 0..n {
            if labels[i] <= labels[j] {
                continue;
            }
            let delta = ((gain(labels[i]) - gain(labels[j])) * (disc(rank[i]) - disc(rank[j])) / idcg).abs();
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (scores[i] - scores[j]).exp());
            let l = delta * rho;
            let h = delta * rho * (1.0 - rho);
            lambdas[i] += l;
            lambdas[j] -= l;
            hessians[i] += h;
            hessians[j] += h;
        }
    }
    (lambdas, hessians)
}
