//! Binary edge sampler: independent Bernoulli edges.

use ndarray::Array2;
use rand::Rng;

use super::{LikelihoodResult, MatrixLikelihood, LOG_PROB_FLAG_THRESHOLD};
use crate::error::Result;
use crate::graph::{BinaryAdjacency, GraphDistribution, ScoreMatrix};
use crate::numeric::{log_sigmoid, sigmoid};
use crate::rng::RngStream;

/// Draw a graph with each off-diagonal edge independently present with
/// probability `sigmoid(phi_ij)`.
pub fn bes_sample(phi: &ScoreMatrix, rng: RngStream) -> Result<BinaryAdjacency> {
    GraphDistribution::Bes.validate(phi)?;
    let n = phi.n_nodes();
    let mut gen = rng.rng();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        for j in 0..n {
            if j == i {
                continue;
            }
            let u: f64 = gen.gen();
            if u < sigmoid(phi.get(i, j)) {
                row.push(j);
            }
        }
        rows.push(row);
    }
    Ok(BinaryAdjacency::from_rows(n, rows).expect("sampled rows are valid"))
}

/// Bernoulli log-mass of one row; gradient entry is `a_ij - sigmoid(phi_ij)`.
pub fn bes_row_log_likelihood(phi: &ScoreMatrix, a: &BinaryAdjacency, row: usize) -> LikelihoodResult {
    let n = phi.n_nodes();
    let mut log_prob = 0.0;
    let mut grad_row = vec![0.0; phi.n_cols()];
    for j in 0..n {
        if j == row {
            continue;
        }
        let score = phi.get(row, j);
        let edge = a.has_edge(row, j);
        log_prob += if edge { log_sigmoid(score) } else { log_sigmoid(-score) };
        grad_row[j] = if edge { 1.0 } else { 0.0 } - sigmoid(score);
    }
    LikelihoodResult {
        log_prob,
        grad_row,
        unstable: log_prob < LOG_PROB_FLAG_THRESHOLD,
    }
}

/// Binary cross-entropy between the sample and the distribution parameters,
/// summed over all off-diagonal entries.
pub fn bes_log_likelihood(phi: &ScoreMatrix, a: &BinaryAdjacency) -> MatrixLikelihood {
    let n = phi.n_nodes();
    let mut grad = Array2::zeros((n, phi.n_cols()));
    let mut log_prob = 0.0;
    for i in 0..n {
        let row = bes_row_log_likelihood(phi, a, i);
        log_prob += row.log_prob;
        for (j, g) in row.grad_row.iter().enumerate() {
            grad[(i, j)] = *g;
        }
    }
    MatrixLikelihood { log_prob, grad, unstable_rows: 0 }
}

/// Sum over edges of `KL(Bernoulli(sigmoid(phi_ij)) || Bernoulli(prior_p))`
/// and its gradient w.r.t. the scores. Used as an optional sparsity prior.
pub fn bes_kl_regularizer(phi: &ScoreMatrix, prior_p: f64) -> Result<(f64, Array2<f64>)> {
    if !(prior_p > 0.0 && prior_p < 1.0) {
        return Err(crate::error::Error::Config(format!(
            "prior probability must lie in (0, 1), got {prior_p}"
        )));
    }
    let n = phi.n_nodes();
    let prior_logit = (prior_p / (1.0 - prior_p)).ln();
    let mut total = 0.0;
    let mut grad = Array2::zeros((n, phi.n_cols()));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let score = phi.get(i, j);
            let s = sigmoid(score);
            total += s * (log_sigmoid(score) - prior_p.ln())
                + (1.0 - s) * (log_sigmoid(-score) - (1.0 - prior_p).ln());
            grad[(i, j)] = s * (1.0 - s) * (score - prior_logit);
        }
    }
    Ok((total, grad))
}
