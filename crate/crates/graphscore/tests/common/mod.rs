//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use std::sync::OnceLock;

use graphscore::config::DEFAULT_THETA;
use graphscore::dataset::SplitBounds;
use graphscore::gpvar::{gpvar_generate, make_graph, GpvarParams, GraphKind, TimeSeries};
use graphscore::graph::{BinaryAdjacency, GraphDistribution, ScoreMatrix};
use graphscore::rng::RngStream;
use rand::Rng;

/// The default 20-node synthetic instance used by the experiment suite:
/// SBM graph (4 blocks, p_in 0.5, p_out 0.05, seed 1), filter
/// coefficients [[1.5, -1.2], [1.8, -0.3], [-0.6, 0.3]] (L = Q = 2),
/// 30000 steps (seed 2) with a 70/10/20 split.
pub struct DefaultInstance {
    pub graph: BinaryAdjacency,
    pub params: GpvarParams,
    pub series: TimeSeries,
    pub splits: SplitBounds,
}

pub fn default_instance() -> &'static DefaultInstance {
    static INSTANCE: OnceLock<DefaultInstance> = OnceLock::new();
    INSTANCE.get_or_init(|| {
        let graph = make_graph(
            GraphKind::Sbm { blocks: 4, p_in: 0.5, p_out: 0.05 },
            20,
            RngStream::new(1, 0),
        )
        .expect("default graph");
        let params = GpvarParams::new(ndarray::arr2(&DEFAULT_THETA)).expect("default theta");
        let series =
            gpvar_generate(&graph, &params, 30_000, RngStream::new(2, 0)).expect("default series");
        let splits = SplitBounds::from_fractions(30_000, 0.7, 0.1);
        DefaultInstance { graph, params, series, splits }
    })
}

/// SNS configuration covering the default graph's degree spread (max
/// degree 6, min degree 2).
pub fn default_sns() -> GraphDistribution {
    GraphDistribution::Sns { k_neighbors: 6, n_dummies: 4, temperature: 1.0 }
}

/// Scores drawn uniformly from [-scale, scale] off the diagonal.
pub fn random_phi(n: usize, n_dummies: usize, scale: f64, rng: RngStream) -> ScoreMatrix {
    let mut gen = rng.rng();
    let mut phi = ScoreMatrix::zeros(n, n_dummies);
    for i in 0..n {
        for j in 0..n + n_dummies {
            if i != j {
                phi.set(i, j, scale * (gen.gen::<f64>() * 2.0 - 1.0));
            }
        }
    }
    phi
}

/// Scores that indicate a target graph: +s for its edges, -s for real
/// non-edges, 0 for dummy columns (so dummies absorb the slack in rows
/// whose true degree is below K).
pub fn indicator_phi(truth: &BinaryAdjacency, n_dummies: usize, strength: f64) -> ScoreMatrix {
    let n = truth.n_nodes();
    let mut phi = ScoreMatrix::zeros(n, n_dummies);
    for i in 0..n {
        for j in 0..n + n_dummies {
            if i == j {
                continue;
            }
            let score = if j >= n {
                0.0
            } else if truth.has_edge(i, j) {
                strength
            } else {
                -strength
            };
            phi.set(i, j, score);
        }
    }
    phi
}

pub const OPTIMAL_MAE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
