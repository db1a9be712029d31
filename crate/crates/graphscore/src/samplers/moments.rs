//! Expected adjacency and Frechet-mean graphs.
//!
//! The Frechet mean (the support element closest in expected squared
//! Hamming distance) has simple closed forms: BES thresholds scores at
//! zero, SNS takes the per-row top-K scores. Inclusion probabilities are
//! monotone in the scores, so the top-K sets of the mean matrix and of the
//! score matrix coincide and the mean never has to be evaluated to find
//! the baseline graph.
//!
//! The expected adjacency itself is exact for BES (`sigmoid(phi)`). For
//! SNS the per-candidate inclusion probability is computed from the same
//! Gumbel integral as the subset likelihood: conditioning on candidate i's
//! perturbed value, i lands in the top K iff fewer than K competitors
//! exceed it, a Poisson-binomial tail evaluated under the quadrature rule.

use ndarray::Array2;

use super::DEFAULT_QUAD_POINTS;
use crate::error::{Error, Result};
use crate::graph::{BinaryAdjacency, GraphDistribution, RowSubset, ScoreMatrix};
use crate::numeric::{sigmoid, TanhSinh};

/// Expected adjacency matrix, `mu[i][j] = P(edge j -> i)`, diagonal zero.
///
/// For SNS the probability is computed over the extended candidate set
/// (dummies included, scores divided by the temperature) and the dummy
/// columns are dropped afterwards, which does not change the real-edge
/// marginals.
pub fn distribution_mean(phi: &ScoreMatrix, dist: &GraphDistribution) -> Result<Array2<f64>> {
    dist.validate(phi)?;
    let n = phi.n_nodes();
    let mut mu = Array2::zeros((n, n));
    match *dist {
        GraphDistribution::Bes => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        mu[(i, j)] = sigmoid(phi.get(i, j));
                    }
                }
            }
        }
        GraphDistribution::Sns { k_neighbors, temperature, .. } => {
            for i in 0..n {
                let candidates: Vec<usize> = phi.candidates(i).collect();
                let scores: Vec<f64> =
                    candidates.iter().map(|&j| phi.get(i, j) / temperature).collect();
                let row_mu = sns_row_mean(&scores, k_neighbors, DEFAULT_QUAD_POINTS);
                for (c, &j) in candidates.iter().enumerate() {
                    if j < n {
                        mu[(i, j)] = row_mu[c];
                    }
                }
            }
        }
    }
    Ok(mu)
}

/// Inclusion probabilities of each candidate in a Gumbel-top-k draw.
///
/// `scores` are the temperature-scaled candidate scores of one row. The
/// returned vector sums to `k`.
pub fn sns_row_mean(scores: &[f64], k: usize, quad_points: usize) -> Vec<f64> {
    let c = scores.len();
    assert!(k >= 1 && k <= c, "k = {k} out of range for {c} candidates");
    if k == c {
        return vec![1.0; c];
    }
    let rule = TanhSinh::cached(quad_points);
    let mut mu = vec![0.0; c];
    let mut tail = vec![0.0; k];
    for (i, &s_i) in scores.iter().enumerate() {
        // mu_i = ∫ P(at most k-1 competitors exceed G_i | F_i(G_i) = u) du.
        let mut acc = 0.0;
        for (&ln_u, &ln_w) in rule.ln_nodes.iter().zip(&rule.ln_weights) {
            tail.fill(0.0);
            tail[0] = 1.0;
            for (j, &s_j) in scores.iter().enumerate() {
                if j == i {
                    continue;
                }
                // P(G_j > G_i | u) = 1 - u^{exp(s_j - s_i)}.
                let q = -(((s_j - s_i).min(700.0).exp()) * ln_u).exp_m1();
                for m in (1..k).rev() {
                    tail[m] = tail[m] * (1.0 - q) + tail[m - 1] * q;
                }
                tail[0] *= 1.0 - q;
            }
            acc += ln_w.exp() * tail.iter().sum::<f64>();
        }
        mu[i] = acc.clamp(0.0, 1.0);
    }
    mu
}

/// Frechet-mean graph: BES keeps edges with strictly positive score, SNS
/// keeps the per-row top-K extended candidates (ties to the smallest
/// index) and then drops dummy members.
pub fn frechet_mean(phi: &ScoreMatrix, dist: &GraphDistribution) -> Result<BinaryAdjacency> {
    dist.validate(phi)?;
    let n = phi.n_nodes();
    match *dist {
        GraphDistribution::Bes => {
            let rows = (0..n)
                .map(|i| (0..n).filter(|&j| j != i && phi.get(i, j) > 0.0).collect())
                .collect();
            Ok(BinaryAdjacency::from_rows(n, rows).expect("threshold rows are valid"))
        }
        GraphDistribution::Sns { .. } => {
            let subsets = frechet_subsets(phi, dist)?;
            Ok(super::adjacency_from_subsets(n, &subsets))
        }
    }
}

/// Pre-dummy-removal top-K subsets backing the SNS Frechet mean; these are
/// what the baseline likelihood is evaluated on.
pub fn frechet_subsets(phi: &ScoreMatrix, dist: &GraphDistribution) -> Result<Vec<RowSubset>> {
    dist.validate(phi)?;
    let k = match *dist {
        GraphDistribution::Sns { k_neighbors, .. } => k_neighbors,
        GraphDistribution::Bes => {
            return Err(Error::Config("frechet_subsets is specific to the subset sampler".into()))
        }
    };
    let n = phi.n_nodes();
    let mut subsets = Vec::with_capacity(n);
    for i in 0..n {
        let mut scored: Vec<(usize, f64)> =
            phi.candidates(i).map(|j| (j, phi.get(i, j))).collect();
        scored.sort_by(|(ja, ga), (jb, gb)| gb.total_cmp(ga).then(ja.cmp(jb)));
        let members = scored.iter().take(k).map(|&(j, _)| j).collect();
        subsets.push(RowSubset::new(i, members));
    }
    Ok(subsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bes_mean_is_sigmoid() {
        let phi = ScoreMatrix::zeros(3, 0);
        let mu = distribution_mean(&phi, &GraphDistribution::Bes).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert_abs_diff_eq!(mu[(i, j)], expected);
            }
        }
    }

    #[test]
    fn sns_k1_mean_is_softmax() {
        let (a, b) = (0.7, -0.4);
        let mu = sns_row_mean(&[a, b], 1, 128);
        assert_abs_diff_eq!(mu[0], sigmoid(a - b), epsilon = 1e-10);
        assert_abs_diff_eq!(mu[1], sigmoid(b - a), epsilon = 1e-10);
    }

    #[test]
    fn sns_row_mean_sums_to_k() {
        let scores = [0.2, -1.3, 0.9, 2.1, -0.5];
        for k in 1..=5 {
            let mu = sns_row_mean(&scores, k, 128);
            let total: f64 = mu.iter().sum();
            assert_abs_diff_eq!(total, k as f64, epsilon = 1e-8);
        }
    }

    #[test]
    fn sns_mean_is_monotone_in_scores() {
        let scores = [0.3, -0.8, 1.7, 0.31, -2.0, 0.0];
        let mu = sns_row_mean(&scores, 3, 256);
        for a in 0..scores.len() {
            for b in 0..scores.len() {
                if scores[a] > scores[b] {
                    assert!(mu[a] > mu[b], "mu ordering violated at ({a}, {b}): {mu:?}");
                }
            }
        }
    }

    #[test]
    fn bes_frechet_thresholds_at_zero() {
        let mut phi = ScoreMatrix::zeros(2, 0);
        phi.set(0, 1, 1.0);
        phi.set(1, 0, -1.0);
        let a0 = frechet_mean(&phi, &GraphDistribution::Bes).unwrap();
        assert_eq!(a0.edges(), vec![(0, 1)]);
        // Exactly zero maps to edge absent (strict threshold).
        let phi = ScoreMatrix::zeros(2, 0);
        let a0 = frechet_mean(&phi, &GraphDistribution::Bes).unwrap();
        assert_eq!(a0.n_edges(), 0);
    }

    #[test]
    fn sns_frechet_takes_top_k() {
        let mut phi = ScoreMatrix::zeros(4, 0);
        // Row 0 candidates 1,2,3 scored 3,1,2 -> top-2 = {1, 3}.
        phi.set(0, 1, 3.0);
        phi.set(0, 2, 1.0);
        phi.set(0, 3, 2.0);
        let a0 = frechet_mean(&phi, &GraphDistribution::sns(2, 0)).unwrap();
        assert_eq!(a0.row(0), &[1, 3]);
    }

    #[test]
    fn dummy_members_are_dropped() {
        let mut phi = ScoreMatrix::zeros(3, 2);
        // Row 0: dummies (cols 3, 4) dominate; only one real candidate survives.
        phi.set(0, 1, 1.0);
        phi.set(0, 2, -1.0);
        phi.set(0, 3, 5.0);
        phi.set(0, 4, 4.0);
        let dist = GraphDistribution::sns(2, 2);
        let subsets = frechet_subsets(&phi, &dist).unwrap();
        assert_eq!(subsets[0].members, vec![3, 4]);
        let a0 = frechet_mean(&phi, &dist).unwrap();
        assert!(a0.row(0).is_empty());
    }
}
