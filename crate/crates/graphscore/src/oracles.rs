//! Brute-force reference implementations for tests and the `verify`
//! command: permutation-sum subset probabilities, support enumeration,
//! exact Frechet means, exact expected gradients and finite differences.
//!
//! Oracles exist to be trusted: size guards are hard errors, never silent
//! truncation, and every routine here stays independent of the quadrature
//! and closed-form paths it is used to check.

use itertools::Itertools;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{BinaryAdjacency, GraphDistribution, RowSubset, ScoreMatrix};
use crate::numeric::sigmoid;
use crate::samplers::{adjacency_from_subsets, GraphSample};

/// Largest subset size accepted by the permutation-sum oracle.
pub const MAX_ORACLE_SUBSET: usize = 6;

/// Largest support size accepted by [`enumerate_support`].
pub const MAX_SUPPORT_SIZE: usize = 100_000;

/// Full materialization of a graph distribution's support.
#[derive(Debug, Clone)]
pub struct SupportEnumeration {
    /// Support elements; SNS elements carry their pre-dummy-removal subsets.
    pub elements: Vec<GraphSample>,
    /// Exact probabilities, summing to one.
    pub probabilities: Vec<f64>,
}

impl SupportEnumeration {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Exact expected adjacency from the enumeration.
    pub fn mean(&self) -> Array2<f64> {
        let n = self.elements[0].adjacency.n_nodes();
        let mut mu = Array2::zeros((n, n));
        for (sample, &p) in self.elements.iter().zip(&self.probabilities) {
            mu += &(sample.adjacency.dense() * p);
        }
        mu
    }
}

/// Exact unordered Plackett-Luce probability of drawing `subset` when
/// sampling without replacement from `weights` (normalized internally):
/// the sum over all orderings of the sequential products
/// `w_j / (1 - sum of already-drawn w)`.
pub fn enumerate_subset_prob(weights: &[f64], subset: &[usize]) -> Result<f64> {
    if subset.len() > MAX_ORACLE_SUBSET {
        return Err(Error::Config(format!(
            "subset of size {} exceeds the oracle bound {MAX_ORACLE_SUBSET}",
            subset.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("weights must be positive and finite".into()));
    }
    if subset.iter().any(|&i| i >= weights.len()) {
        return Err(Error::Config("subset index out of range".into()));
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|&x| x / total).collect();
    let mut prob = 0.0;
    let k = subset.len();
    for perm in subset.iter().permutations(k) {
        let mut term = 1.0;
        let mut drawn = 0.0;
        for &&j in &perm {
            term *= w[j] / (1.0 - drawn);
            drawn += w[j];
        }
        prob += term;
    }
    Ok(prob)
}

/// Materialize every support element of the distribution with its exact
/// probability. BES enumerates all edge patterns; SNS enumerates the
/// cartesian product of per-row K-subsets.
pub fn enumerate_support(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
) -> Result<SupportEnumeration> {
    dist.validate(phi)?;
    let n = phi.n_nodes();
    match *dist {
        GraphDistribution::Bes => {
            let n_edges = n * (n - 1);
            if n_edges > 20 {
                return Err(Error::Config(format!(
                    "BES enumeration limited to 20 stochastic edges, got {n_edges}"
                )));
            }
            let slots: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect();
            let probs: Vec<f64> = slots.iter().map(|&(i, j)| sigmoid(phi.get(i, j))).collect();
            let mut elements = Vec::with_capacity(1 << n_edges);
            let mut probabilities = Vec::with_capacity(1 << n_edges);
            for mask in 0u32..(1 << n_edges) {
                let mut p = 1.0;
                let mut edges = Vec::new();
                for (b, (&slot, &edge_p)) in slots.iter().zip(&probs).enumerate() {
                    if mask >> b & 1 == 1 {
                        p *= edge_p;
                        edges.push(slot);
                    } else {
                        p *= 1.0 - edge_p;
                    }
                }
                elements.push(GraphSample {
                    adjacency: BinaryAdjacency::from_edges(n, &edges)?,
                    subsets: None,
                });
                probabilities.push(p);
            }
            Ok(SupportEnumeration { elements, probabilities })
        }
        GraphDistribution::Sns { k_neighbors, temperature, .. } => {
            // Per row: all K-subsets of the extended candidate set.
            let mut row_choices: Vec<Vec<(Vec<usize>, f64)>> = Vec::with_capacity(n);
            let mut support_size = 1usize;
            for i in 0..n {
                let candidates: Vec<usize> = phi.candidates(i).collect();
                let max = candidates.iter().map(|&j| phi.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = candidates
                    .iter()
                    .map(|&j| ((phi.get(i, j) / temperature) - max / temperature).exp())
                    .collect();
                let mut choices = Vec::new();
                for combo in (0..candidates.len()).combinations(k_neighbors) {
                    let p = enumerate_subset_prob(&weights, &combo)?;
                    let members = combo.iter().map(|&c| candidates[c]).collect();
                    choices.push((members, p));
                }
                support_size = support_size.saturating_mul(choices.len());
                if support_size > MAX_SUPPORT_SIZE {
                    return Err(Error::Config(format!(
                        "SNS support exceeds the enumeration bound {MAX_SUPPORT_SIZE}"
                    )));
                }
                row_choices.push(choices);
            }
            let mut elements = Vec::with_capacity(support_size);
            let mut probabilities = Vec::with_capacity(support_size);
            let mut index = vec![0usize; n];
            loop {
                let mut p = 1.0;
                let mut subsets = Vec::with_capacity(n);
                for (i, &c) in index.iter().enumerate() {
                    let (members, row_p) = &row_choices[i][c];
                    p *= row_p;
                    subsets.push(RowSubset::new(i, members.clone()));
                }
                elements.push(GraphSample {
                    adjacency: adjacency_from_subsets(n, &subsets),
                    subsets: Some(subsets),
                });
                probabilities.push(p);
                // Mixed-radix increment.
                let mut carry = true;
                for (i, c) in index.iter_mut().enumerate() {
                    *c += 1;
                    if *c < row_choices[i].len() {
                        carry = false;
                        break;
                    }
                    *c = 0;
                }
                if carry {
                    break;
                }
            }
            Ok(SupportEnumeration { elements, probabilities })
        }
    }
}

/// The support element minimizing the expected squared Hamming distance to
/// a random graph, by exhaustive quadratic scan. Ties resolve to the first
/// occurrence in enumeration order.
///
/// The distance is taken on the sampled object itself: for SNS with dummy
/// candidates that is the pre-removal subsets, since the distribution
/// lives on fixed-size extended neighborhoods and dummy dropping is a
/// projection applied afterwards. (On the projected adjacencies the
/// minimizer can differ: a dummy can out-rank a weak real candidate.)
pub fn exact_frechet_mean(enumeration: &SupportEnumeration) -> Result<BinaryAdjacency> {
    if enumeration.is_empty() {
        return Err(Error::Config("empty support".into()));
    }
    if enumeration.len() > 20_000 {
        return Err(Error::Config(format!(
            "support of size {} too large for the quadratic Frechet scan",
            enumeration.len()
        )));
    }
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (c, candidate) in enumeration.elements.iter().enumerate() {
        let mut value = 0.0;
        for (sample, &p) in enumeration.elements.iter().zip(&enumeration.probabilities) {
            let h = support_hamming(sample, candidate) as f64;
            value += p * h * h;
        }
        if value < best_value {
            best_value = value;
            best = c;
        }
    }
    Ok(enumeration.elements[best].adjacency.clone())
}

/// Hamming distance between two support elements: symmetric difference of
/// the row subsets when present (SNS), adjacency entries otherwise (BES).
fn support_hamming(a: &GraphSample, b: &GraphSample) -> usize {
    match (&a.subsets, &b.subsets) {
        (Some(sa), Some(sb)) => sa
            .iter()
            .zip(sb)
            .map(|(ra, rb)| {
                let in_both = ra
                    .members
                    .iter()
                    .filter(|m| rb.members.binary_search(m).is_ok())
                    .count();
                ra.members.len() + rb.members.len() - 2 * in_both
            })
            .sum(),
        _ => a.adjacency.hamming(&b.adjacency),
    }
}

/// Exact score-function expectation `sum_A p(A) cost(A) grad log p(A)` over
/// an enumerable support.
///
/// BES scores use the Bernoulli closed form `a - sigmoid(phi)`; SNS row
/// scores are obtained by central finite differences of the enumerated
/// log-probability, keeping the oracle independent of the quadrature path.
pub fn exact_expected_gradient(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: impl Fn(&BinaryAdjacency) -> f64,
) -> Result<Array2<f64>> {
    let enumeration = enumerate_support(phi, dist)?;
    let n = phi.n_nodes();
    let mut grad = Array2::zeros((n, phi.n_cols()));
    for (sample, &p) in enumeration.elements.iter().zip(&enumeration.probabilities) {
        let delta = cost(&sample.adjacency);
        let score = oracle_score(phi, dist, sample)?;
        grad.scaled_add(p * delta, &score);
    }
    Ok(grad)
}

/// Exact expected cost over the support (for finite-difference cross-checks
/// of [`exact_expected_gradient`]).
pub fn exact_expected_cost(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: impl Fn(&BinaryAdjacency) -> f64,
) -> Result<f64> {
    let enumeration = enumerate_support(phi, dist)?;
    Ok(enumeration
        .elements
        .iter()
        .zip(&enumeration.probabilities)
        .map(|(sample, &p)| p * cost(&sample.adjacency))
        .sum())
}

fn oracle_score(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    sample: &GraphSample,
) -> Result<Array2<f64>> {
    let n = phi.n_nodes();
    let mut score = Array2::zeros((n, phi.n_cols()));
    match *dist {
        GraphDistribution::Bes => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let a = if sample.adjacency.has_edge(i, j) { 1.0 } else { 0.0 };
                    score[(i, j)] = a - sigmoid(phi.get(i, j));
                }
            }
        }
        GraphDistribution::Sns { k_neighbors: _, temperature, .. } => {
            let subsets = sample
                .subsets
                .as_ref()
                .ok_or_else(|| Error::Config("SNS oracle score needs row subsets".into()))?;
            for (i, subset) in subsets.iter().enumerate() {
                let candidates: Vec<usize> = phi.candidates(i).collect();
                let member_pos: Vec<usize> = subset
                    .members
                    .iter()
                    .map(|&m| candidates.iter().position(|&c| c == m).expect("member is a candidate"))
                    .collect();
                let base: Vec<f64> = candidates.iter().map(|&j| phi.get(i, j)).collect();
                let log_p = |scores: &[f64]| -> f64 {
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let weights: Vec<f64> =
                        scores.iter().map(|&s| ((s - max) / temperature).exp()).collect();
                    enumerate_subset_prob(&weights, &member_pos)
                        .expect("oracle subset within bounds")
                        .ln()
                };
                let row_grad = finite_diff_gradient(log_p, &base, 1e-5);
                for (c, &j) in candidates.iter().enumerate() {
                    score[(i, j)] = row_grad[c];
                }
            }
        }
    }
    Ok(score)
}

/// Central finite differences of a scalar function, coordinate by
/// coordinate. Exact for affine functions up to rounding.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut point = x.to_vec();
    for i in 0..x.len() {
        point[i] = x[i] + step;
        let plus = f(&point);
        point[i] = x[i] - step;
        let minus = f(&point);
        point[i] = x[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}
