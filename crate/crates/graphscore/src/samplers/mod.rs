//! Graph samplers, sample likelihoods and distribution moments.
//!
//! Two distributions are implemented. The binary edge sampler (BES) draws
//! one independent Bernoulli per directed edge with parameter
//! `sigmoid(phi_ij)`. The subset neighborhood sampler (SNS) draws, per row,
//! exactly K candidates without replacement from the softmax of the row
//! scores, realized with the Gumbel-top-k trick; dummy candidates are
//! discarded after sampling so rows can end up with fewer than K real
//! neighbors.
//!
//! Both samplers expose differentiable log-likelihoods of their samples,
//! the expected adjacency matrix and the Frechet-mean graph used as the
//! variance-reduction baseline.

mod bes;
mod moments;
mod sns;

pub use bes::{bes_kl_regularizer, bes_log_likelihood, bes_row_log_likelihood, bes_sample};
pub use moments::{distribution_mean, frechet_mean, frechet_subsets, sns_row_mean};
pub use sns::{sns_log_likelihood, sns_row_log_likelihood, sns_sample};

use ndarray::Array2;

use crate::error::Result;
use crate::graph::{BinaryAdjacency, GraphDistribution, RowSubset, ScoreMatrix};
use crate::rng::RngStream;

/// Default quadrature resolution for subset likelihoods and SNS moments.
pub const DEFAULT_QUAD_POINTS: usize = 128;

/// Samples with log-probability below this are flagged as numerically
/// delicate; the trainer reacts by lowering the score learning rate.
pub const LOG_PROB_FLAG_THRESHOLD: f64 = -30.0;

/// Log-likelihood of one row sample together with its analytic gradient.
#[derive(Debug, Clone)]
pub struct LikelihoodResult {
    /// `log p` of the row sample; always <= 0.
    pub log_prob: f64,
    /// Gradient w.r.t. every candidate score of the row, laid out like the
    /// score-matrix row (diagonal slot zero, dummy columns included).
    pub grad_row: Vec<f64>,
    /// Set when `log_prob` fell below [`LOG_PROB_FLAG_THRESHOLD`].
    pub unstable: bool,
}

/// Log-likelihood of a full graph sample.
#[derive(Debug, Clone)]
pub struct MatrixLikelihood {
    pub log_prob: f64,
    /// Gradient w.r.t. the full score matrix. Because rows are sampled
    /// independently, row `i` of this matrix is exactly the score of the
    /// row-i sample: the per-node scores of the surrogate objective are
    /// slices of this matrix.
    pub grad: Array2<f64>,
    /// Number of rows whose likelihood tripped the stability flag.
    pub unstable_rows: usize,
}

/// A graph drawn from one of the distributions.
///
/// For SNS the pre-dummy-removal row subsets are kept alongside the
/// adjacency: the likelihood is defined on the subsets, while predictors
/// only ever see the adjacency.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub adjacency: BinaryAdjacency,
    pub subsets: Option<Vec<RowSubset>>,
}

/// Draw one graph from the configured distribution.
pub fn sample_graph(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    rng: RngStream,
) -> Result<GraphSample> {
    match dist {
        GraphDistribution::Bes => Ok(GraphSample {
            adjacency: bes_sample(phi, rng)?,
            subsets: None,
        }),
        GraphDistribution::Sns { .. } => {
            let (adjacency, subsets) = sns_sample(phi, dist, rng)?;
            Ok(GraphSample { adjacency, subsets: Some(subsets) })
        }
    }
}

/// The Frechet-mean graph packaged like a sample, so it can be fed to the
/// same cost and likelihood paths as a random draw.
pub fn frechet_graph_sample(phi: &ScoreMatrix, dist: &GraphDistribution) -> Result<GraphSample> {
    match dist {
        GraphDistribution::Bes => Ok(GraphSample {
            adjacency: frechet_mean(phi, dist)?,
            subsets: None,
        }),
        GraphDistribution::Sns { .. } => {
            let subsets = frechet_subsets(phi, dist)?;
            let adjacency = adjacency_from_subsets(phi.n_nodes(), &subsets);
            Ok(GraphSample { adjacency, subsets: Some(subsets) })
        }
    }
}

/// Log-likelihood and score of a sample under the distribution it was
/// drawn from.
pub fn score_sample(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    sample: &GraphSample,
    quad_points: usize,
) -> Result<MatrixLikelihood> {
    match dist {
        GraphDistribution::Bes => Ok(bes_log_likelihood(phi, &sample.adjacency)),
        GraphDistribution::Sns { temperature, .. } => {
            let subsets = sample.subsets.as_ref().ok_or_else(|| {
                crate::error::Error::Config(
                    "subset sampler scores need the pre-removal subsets".into(),
                )
            })?;
            sns_log_likelihood(phi, subsets, *temperature, quad_points)
        }
    }
}

/// Strip dummy members out of row subsets, yielding the adjacency.
pub fn adjacency_from_subsets(n_nodes: usize, subsets: &[RowSubset]) -> BinaryAdjacency {
    let rows = subsets
        .iter()
        .map(|s| s.members.iter().copied().filter(|&j| j < n_nodes).collect())
        .collect();
    BinaryAdjacency::from_rows(n_nodes, rows).expect("subsets produce a valid adjacency")
}
