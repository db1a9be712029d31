//! Cross-checks between the closed-form/quadrature paths and the
//! brute-force oracles, at the instance sizes the oracles are rated for.

mod common;

use graphscore::graph::{GraphDistribution, RowSubset};
use graphscore::oracles::{
    enumerate_subset_prob, enumerate_support, exact_expected_cost, exact_expected_gradient,
    exact_frechet_mean, finite_diff_gradient,
};
use graphscore::rng::RngStream;
use graphscore::samplers::{distribution_mean, frechet_mean, sns_row_log_likelihood};
use rand::Rng;

#[test]
fn quadrature_matches_enumeration_up_to_k5() {
    // Relative 1e-6 agreement holds through K = 5 (oracle size bound is 6).
    let mut gen = RngStream::new(50, 0).rng();
    let mut worst = 0.0f64;
    for case in 0..60 {
        let n = 7usize;
        let k = 1 + case % 5;
        let node = case % n;
        let scores: Vec<f64> = (0..n).map(|_| gen.gen::<f64>() * 4.0 - 2.0).collect();
        let candidates: Vec<usize> = (0..n).filter(|&j| j != node).collect();
        let members: Vec<usize> = candidates.iter().copied().take(k).collect();
        let subset = RowSubset::new(node, members.clone());
        let quad = sns_row_log_likelihood(&scores, &subset, 1.0, 128).unwrap().log_prob;
        let weights: Vec<f64> = candidates.iter().map(|&j| scores[j].exp()).collect();
        let positions: Vec<usize> = members
            .iter()
            .map(|m| candidates.iter().position(|c| c == m).unwrap())
            .collect();
        let exact = enumerate_subset_prob(&weights, &positions).unwrap().ln();
        worst = worst.max((quad - exact).abs() / exact.abs().max(1e-12));
    }
    assert!(worst < 1e-6, "worst relative deviation {worst:.3e}");
}

#[test]
fn support_probabilities_sum_to_one_with_dummies() {
    for seed in 0..10 {
        let phi = common::random_phi(4, 1, 1.5, RngStream::new(60, seed));
        let dist = GraphDistribution::Sns { k_neighbors: 2, n_dummies: 1, temperature: 0.7 };
        let support = enumerate_support(&phi, &dist).unwrap();
        let total: f64 = support.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "sum {total}");
    }
}

#[test]
fn expected_gradient_cross_checked_by_finite_differences() {
    // d/dPhi of sum_A p(A) cost(A), with a cost that depends on the graph
    // nonlinearly, matches the score-function form of the oracle.
    let phi = common::random_phi(3, 0, 1.0, RngStream::new(61, 0));
    let cost = |a: &graphscore::graph::BinaryAdjacency| {
        let e = a.n_edges() as f64;
        (e * 0.35 + 1.0).ln() + if a.has_edge(0, 1) { 0.4 } else { 0.0 }
    };
    let oracle = exact_expected_gradient(&phi, &GraphDistribution::Bes, cost).unwrap();
    let flat: Vec<f64> = phi.values().iter().cloned().collect();
    let f = |x: &[f64]| {
        let values = ndarray::Array2::from_shape_vec((3, 3), x.to_vec()).unwrap();
        let p = graphscore::graph::ScoreMatrix::from_values(3, 0, values).unwrap();
        exact_expected_cost(&p, &GraphDistribution::Bes, cost).unwrap()
    };
    let fd = finite_diff_gradient(f, &flat, 1e-5);
    for (idx, (&g, f)) in oracle.iter().zip(&fd).enumerate() {
        let (i, j) = (idx / 3, idx % 3);
        if i == j {
            continue;
        }
        assert!((g - f).abs() < 1e-6, "({i},{j}): {g} vs {f}");
    }
}

#[test]
fn sns_expected_gradient_matches_finite_differences_of_expected_cost() {
    let phi = common::random_phi(3, 0, 0.9, RngStream::new(62, 0));
    let dist = GraphDistribution::sns(1, 0);
    let cost = |a: &graphscore::graph::BinaryAdjacency| (a.n_edges() as f64).sqrt() + 0.25;
    let oracle = exact_expected_gradient(&phi, &dist, cost).unwrap();
    let flat: Vec<f64> = phi.values().iter().cloned().collect();
    let f = |x: &[f64]| {
        let values = ndarray::Array2::from_shape_vec((3, 3), x.to_vec()).unwrap();
        let p = graphscore::graph::ScoreMatrix::from_values(3, 0, values).unwrap();
        exact_expected_cost(&p, &dist, cost).unwrap()
    };
    let fd = finite_diff_gradient(f, &flat, 1e-5);
    for (idx, (&g, f)) in oracle.iter().zip(&fd).enumerate() {
        let (i, j) = (idx / 3, idx % 3);
        if i == j {
            continue;
        }
        assert!((g - f).abs() < 1e-5, "({i},{j}): {g} vs {f}");
    }
}

#[test]
fn closed_forms_match_oracles_on_random_instances() {
    // Same families as the acceptance gate, smaller counts; exercised here
    // so a regression is caught in the unit pass as well.
    for inst in 0..10 {
        let phi = common::random_phi(3, 0, 1.5, RngStream::new(63, inst));
        let support = enumerate_support(&phi, &GraphDistribution::Bes).unwrap();
        assert_eq!(
            frechet_mean(&phi, &GraphDistribution::Bes).unwrap(),
            exact_frechet_mean(&support).unwrap()
        );
        let mu = distribution_mean(&phi, &GraphDistribution::Bes).unwrap();
        let exact = support.mean();
        for (a, b) in mu.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    for inst in 0..10 {
        let dist = GraphDistribution::Sns { k_neighbors: 2, n_dummies: 1, temperature: 1.0 };
        let phi = common::random_phi(4, 1, 1.5, RngStream::new(64, inst));
        let support = enumerate_support(&phi, &dist).unwrap();
        assert_eq!(frechet_mean(&phi, &dist).unwrap(), exact_frechet_mean(&support).unwrap());
        let mu = distribution_mean(&phi, &dist).unwrap();
        let exact = support.mean();
        for (a, b) in mu.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn oracle_size_guards_are_hard_errors() {
    let phi = common::random_phi(6, 0, 1.0, RngStream::new(65, 0));
    // 6 * 5 = 30 stochastic edges > 20.
    assert!(enumerate_support(&phi, &GraphDistribution::Bes).is_err());

    // Per-row C(9, 4) = 126 choices over 10 rows blows the product bound.
    let phi = common::random_phi(10, 0, 1.0, RngStream::new(65, 1));
    assert!(enumerate_support(&phi, &GraphDistribution::sns(4, 0)).is_err());
}
