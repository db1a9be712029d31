//! Score-function Monte Carlo gradient estimators for the expected
//! forecasting cost, with closed-form variance-reduction baselines.
//!
//! All estimators build on the identity `grad E[f] = E[f * grad log p]`:
//! they sample graphs, evaluate a black-box cost and weight the sample
//! scores by (possibly baseline-corrected) costs. Variants:
//!
//! - [`estimate_naive`]: plain REINFORCE on the global cost.
//! - [`estimate_baseline`]: subtracts the cost of the Frechet-mean graph
//!   (`simple`), or scales it by the squared-score ratio against a running
//!   estimate of `E[(grad log p)^2]` (`ratio`). Either choice leaves the
//!   expectation unchanged because scores have zero mean.
//! - [`estimate_surrogate`]: mixes the global-cost score term (weight
//!   lambda) with per-node cost times per-row score terms; rows are
//!   sampled independently, so row i of the full score is exactly the
//!   score of row i's neighborhood.
//! - [`estimate_multilayer`]: one independent graph per message-passing
//!   layer; layers below the last contribute global-cost score terms, the
//!   last layer contributes the per-node terms.
//!
//! Cost conventions: `CostBreakdown.global` is the per-node mean. The
//! per-node terms of the surrogate and multilayer estimators target the
//! gradient of the summed per-node cost (N times the mean), so the
//! multilayer global terms use the summed cost as well; this makes L = 1
//! coincide with the surrogate at lambda = 0 and keeps the estimator
//! unbiased for the gradient of the summed objective.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{BinaryAdjacency, GraphDistribution, ScoreMatrix};
use crate::rng::RngStream;
use crate::samplers::{
    frechet_graph_sample, sample_graph, score_sample, GraphSample, DEFAULT_QUAD_POINTS,
};

/// Cost of one forward evaluation, globally and per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    /// Global cost; always the mean of `per_node`.
    pub global: f64,
    pub per_node: Vec<f64>,
}

impl CostBreakdown {
    /// Build from per-node costs; the global cost is their mean.
    pub fn from_per_node(per_node: Vec<f64>) -> Self {
        assert!(!per_node.is_empty(), "cost breakdown needs at least one node");
        let global = per_node.iter().sum::<f64>() / per_node.len() as f64;
        Self { global, per_node }
    }

    /// Constant cost at every node.
    pub fn uniform(value: f64, n_nodes: usize) -> Self {
        Self { global: value, per_node: vec![value; n_nodes] }
    }

    /// Summed per-node cost (`N * global`).
    pub fn total(&self) -> f64 {
        self.global * self.per_node.len() as f64
    }
}

/// Baseline selection for the control-variate correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// No correction.
    None,
    /// Subtract the cost of the Frechet-mean graph; one extra cost
    /// evaluation per estimate, independent of the sample count.
    Simple,
    /// Per-coordinate baseline `cost(A0) * score(A0)^2 / E[score^2]`, the
    /// denominator tracked as a moving average across calls.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub mode: BaselineMode,
    /// Decay of the squared-score moving average used by ratio mode.
    pub score_sq_decay: f64,
}

impl BaselineConfig {
    pub fn none() -> Self {
        Self { mode: BaselineMode::None, score_sq_decay: 0.99 }
    }

    pub fn simple() -> Self {
        Self { mode: BaselineMode::Simple, score_sq_decay: 0.99 }
    }

    pub fn ratio(decay: f64) -> Self {
        Self { mode: BaselineMode::Ratio, score_sq_decay: decay }
    }

    fn validate(&self) -> Result<()> {
        if !(self.score_sq_decay > 0.0 && self.score_sq_decay < 1.0) {
            return Err(Error::Config(format!(
                "score_sq_decay must lie in (0, 1), got {}",
                self.score_sq_decay
            )));
        }
        Ok(())
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self::simple()
    }
}

/// Cross-call state for ratio-mode baselines: a moving average of the
/// per-coordinate squared score. The squared score does not depend on the
/// observations, so a running cross-batch estimate is valid. The average
/// is seeded with the first batch (rather than zero), which keeps it a
/// convex combination of observed values at every step.
#[derive(Debug, Clone, Default)]
pub struct EstimatorState {
    score_sq_ma: Option<Array2<f64>>,
}

impl EstimatorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current estimate to use for this batch's baseline, folding the
    /// batch's mean squared score into the state. After the seeding call
    /// the returned snapshot predates the update, so the baseline stays
    /// independent of the current samples.
    fn advance(&mut self, mean_sq: &Array2<f64>, decay: f64) -> Array2<f64> {
        match &mut self.score_sq_ma {
            Some(ma) => {
                let snapshot = ma.clone();
                ma.zip_mut_with(mean_sq, |m, &s| *m = decay * *m + (1.0 - decay) * s);
                snapshot
            }
            None => {
                self.score_sq_ma = Some(mean_sq.clone());
                mean_sq.clone()
            }
        }
    }
}

/// One Monte Carlo gradient estimate with diagnostics.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// Estimated gradient w.r.t. the full score matrix (dummies included).
    pub grad_phi: Array2<f64>,
    /// Global cost of the Frechet-mean graph when a baseline was used.
    pub baseline_value: Option<f64>,
    /// Per-coordinate sample variance of the per-draw contributions
    /// (zero when `n_samples` = 1).
    pub per_coordinate_variance: Array2<f64>,
    pub n_samples: usize,
    /// Mean global cost over the Monte Carlo draws.
    pub mean_cost: f64,
    /// Row-likelihood evaluations that tripped the stability flag.
    pub unstable_rows: u64,
    /// Total row-likelihood evaluations (for instability rates).
    pub rows_evaluated: u64,
}

/// Plain score-function estimator of `grad E[cost.global]` (one cost and
/// one score evaluation per sample).
pub fn estimate_naive(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    m_samples: usize,
    rng: RngStream,
) -> Result<GradientEstimate> {
    let mut state = EstimatorState::new();
    estimate_single_graph(
        phi,
        dist,
        cost,
        m_samples,
        Mode::Global { lambda: 1.0, per_node: false },
        &BaselineConfig::none(),
        &mut state,
        rng,
    )
}

/// Baseline-corrected estimator; same expectation as [`estimate_naive`].
pub fn estimate_baseline(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    m_samples: usize,
    baseline: &BaselineConfig,
    state: &mut EstimatorState,
    rng: RngStream,
) -> Result<GradientEstimate> {
    estimate_single_graph(
        phi,
        dist,
        cost,
        m_samples,
        Mode::Global { lambda: 1.0, per_node: false },
        baseline,
        state,
        rng,
    )
}

/// Surrogate-objective estimator mixing global and per-node cost terms;
/// baselines (when enabled) are applied to both, using the global and
/// per-node costs of the Frechet-mean graph.
pub fn estimate_surrogate(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    m_samples: usize,
    lambda: f64,
    baseline: &BaselineConfig,
    state: &mut EstimatorState,
    rng: RngStream,
) -> Result<GradientEstimate> {
    estimate_single_graph(
        phi,
        dist,
        cost,
        m_samples,
        Mode::Global { lambda, per_node: true },
        baseline,
        state,
        rng,
    )
}

#[derive(Clone, Copy)]
enum Mode {
    Global { lambda: f64, per_node: bool },
}

struct Draw {
    score: Array2<f64>,
    breakdown: CostBreakdown,
    unstable: u64,
}

#[allow(clippy::too_many_arguments)]
fn estimate_single_graph(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    m_samples: usize,
    mode: Mode,
    baseline: &BaselineConfig,
    state: &mut EstimatorState,
    rng: RngStream,
) -> Result<GradientEstimate> {
    if m_samples == 0 {
        return Err(Error::Config("need at least one Monte Carlo sample".into()));
    }
    baseline.validate()?;
    dist.validate(phi)?;
    let n = phi.n_nodes();
    let cols = phi.n_cols();

    // Baseline quantities: one extra cost evaluation, whatever M is.
    let base = match baseline.mode {
        BaselineMode::None => None,
        BaselineMode::Simple | BaselineMode::Ratio => {
            let sample = frechet_graph_sample(phi, dist)?;
            let breakdown = cost(&sample.adjacency);
            Some((sample, breakdown))
        }
    };

    let draws: Vec<Draw> = (0..m_samples)
        .into_par_iter()
        .map(|m| -> Result<Draw> {
            let sample = sample_graph(phi, dist, rng.child(m as u64))?;
            let breakdown = cost(&sample.adjacency);
            debug_assert_eq!(breakdown.per_node.len(), n);
            let score = score_sample(phi, dist, &sample, DEFAULT_QUAD_POINTS)?;
            Ok(Draw { unstable: score.unstable_rows as u64, score: score.grad, breakdown })
        })
        .collect::<Result<Vec<_>>>()?;

    // Ratio matrix score(A0)^2 / E[score^2], shared across draws.
    let ratio = match (baseline.mode, &base) {
        (BaselineMode::Ratio, Some((base_sample, _))) => {
            let base_score = score_sample(phi, dist, base_sample, DEFAULT_QUAD_POINTS)?;
            let mut mean_sq = Array2::zeros((n, cols));
            for d in &draws {
                mean_sq += &d.score.mapv(|g| g * g);
            }
            mean_sq /= m_samples as f64;
            let ma = state.advance(&mean_sq, baseline.score_sq_decay);
            let mut r = base_score.grad.mapv(|g| g * g);
            r.zip_mut_with(&ma, |num, &den| *num = (*num / den.max(1e-12)).min(1e6));
            Some(r)
        }
        _ => None,
    };

    let contributions: Vec<Array2<f64>> = draws
        .iter()
        .map(|draw| {
            let Mode::Global { lambda, per_node } = mode;
            let mut c = Array2::zeros((n, cols));
            // Per-coordinate effective baseline value.
            let beta = |i: usize, j: usize, value: f64| -> f64 {
                match (&base, &ratio) {
                    (None, _) => 0.0,
                    (Some(_), Some(r)) => value * r[(i, j)],
                    (Some(_), None) => value,
                }
            };
            let base_breakdown = base.as_ref().map(|(_, b)| b);
            for ((i, j), s) in draw.score.indexed_iter() {
                let mut weight =
                    lambda * (draw.breakdown.global - beta(i, j, base_breakdown.map_or(0.0, |b| b.global)));
                if per_node {
                    weight += draw.breakdown.per_node[i]
                        - beta(i, j, base_breakdown.map_or(0.0, |b| b.per_node[i]));
                }
                c[(i, j)] = weight * s;
            }
            c
        })
        .collect();

    let (grad, variance) = mean_and_variance(&contributions, n, cols);
    let mean_cost = draws.iter().map(|d| d.breakdown.global).sum::<f64>() / m_samples as f64;
    let unstable: u64 = draws.iter().map(|d| d.unstable).sum();

    Ok(GradientEstimate {
        grad_phi: grad,
        baseline_value: base.as_ref().map(|(_, b)| b.global),
        per_coordinate_variance: variance,
        n_samples: m_samples,
        mean_cost,
        unstable_rows: unstable,
        rows_evaluated: (m_samples as u64) * n as u64,
    })
}

/// Multi-layer estimator: one independent sample per layer per draw.
/// Global-cost score terms for layers 1..L-1 use the summed cost; the
/// last layer contributes per-node cost times per-row score terms. The
/// baseline (simple mode only) evaluates the cost at the Frechet mean
/// substituted into every layer.
pub fn estimate_multilayer(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost_layers: &(impl Fn(&[BinaryAdjacency]) -> CostBreakdown + Sync),
    n_layers: usize,
    m_samples: usize,
    baseline: &BaselineConfig,
    rng: RngStream,
) -> Result<GradientEstimate> {
    if n_layers == 0 {
        return Err(Error::Config("multilayer estimator needs at least one layer".into()));
    }
    if m_samples == 0 {
        return Err(Error::Config("need at least one Monte Carlo sample".into()));
    }
    if baseline.mode == BaselineMode::Ratio {
        return Err(Error::Config(
            "ratio baseline is not defined for the multilayer estimator; use simple".into(),
        ));
    }
    dist.validate(phi)?;
    let n = phi.n_nodes();

    let base = match baseline.mode {
        BaselineMode::None => None,
        _ => {
            let sample = frechet_graph_sample(phi, dist)?;
            let layers: Vec<BinaryAdjacency> =
                (0..n_layers).map(|_| sample.adjacency.clone()).collect();
            Some(cost_layers(&layers))
        }
    };

    struct LayeredDraw {
        contribution: Array2<f64>,
        cost_global: f64,
        unstable: u64,
    }

    let draws: Vec<LayeredDraw> = (0..m_samples)
        .into_par_iter()
        .map(|m| -> Result<LayeredDraw> {
            let draw_rng = rng.child(m as u64);
            let samples: Vec<GraphSample> = (0..n_layers)
                .map(|l| sample_graph(phi, dist, draw_rng.child(l as u64)))
                .collect::<Result<Vec<_>>>()?;
            let adjacencies: Vec<BinaryAdjacency> =
                samples.iter().map(|s| s.adjacency.clone()).collect();
            let breakdown = cost_layers(&adjacencies);
            debug_assert_eq!(breakdown.per_node.len(), n);

            let delta_total = match &base {
                Some(b) => breakdown.total() - b.total(),
                None => breakdown.total(),
            };
            let mut contribution = Array2::zeros((n, phi.n_cols()));
            let mut unstable = 0u64;
            for (l, sample) in samples.iter().enumerate() {
                let score = score_sample(phi, dist, sample, DEFAULT_QUAD_POINTS)?;
                unstable += score.unstable_rows as u64;
                if l + 1 < n_layers {
                    contribution.scaled_add(delta_total, &score.grad);
                } else {
                    for i in 0..n {
                        let delta_i = match &base {
                            Some(b) => breakdown.per_node[i] - b.per_node[i],
                            None => breakdown.per_node[i],
                        };
                        let mut row = contribution.row_mut(i);
                        row.scaled_add(delta_i, &score.grad.row(i));
                    }
                }
            }
            Ok(LayeredDraw { contribution, cost_global: breakdown.global, unstable })
        })
        .collect::<Result<Vec<_>>>()?;

    let contributions: Vec<Array2<f64>> = draws.iter().map(|d| d.contribution.clone()).collect();
    let (grad, variance) = mean_and_variance(&contributions, n, phi.n_cols());
    let mean_cost = draws.iter().map(|d| d.cost_global).sum::<f64>() / m_samples as f64;
    let unstable: u64 = draws.iter().map(|d| d.unstable).sum();

    Ok(GradientEstimate {
        grad_phi: grad,
        baseline_value: base.as_ref().map(|b| b.global),
        per_coordinate_variance: variance,
        n_samples: m_samples,
        mean_cost,
        unstable_rows: unstable,
        rows_evaluated: (m_samples as u64) * (n_layers as u64) * n as u64,
    })
}

/// Mean and unbiased per-coordinate variance in draw order; the fixed
/// summation order makes results reproducible at any thread count.
fn mean_and_variance(draws: &[Array2<f64>], n: usize, cols: usize) -> (Array2<f64>, Array2<f64>) {
    let m = draws.len();
    let mut mean = Array2::zeros((n, cols));
    for d in draws {
        mean += d;
    }
    mean /= m.max(1) as f64;
    let mut variance = Array2::zeros((n, cols));
    if m > 1 {
        for d in draws {
            let centered = d - &mean;
            variance += &centered.mapv(|x| x * x);
        }
        variance /= (m - 1) as f64;
    }
    (mean, variance)
}

/// Estimator configurations accepted by [`variance_probe`].
#[derive(Debug, Clone, Copy)]
pub enum EstimatorKind {
    Naive,
    Baseline(BaselineConfig),
    Surrogate { lambda: f64, baseline: BaselineConfig },
}

/// Summary of repeated single-estimate runs: per-coordinate mean and
/// variance across repeats, plus the variance trace.
#[derive(Debug, Clone)]
pub struct VarianceSummary {
    pub mean: Array2<f64>,
    pub variance: Array2<f64>,
    pub variance_trace: f64,
    pub n_repeats: usize,
}

/// Repeat an estimator `n_repeats` times on child streams of `rng` and
/// summarize the spread of the estimates. Two probes driven by the same
/// `rng` see identical graph samples, giving paired-seed comparisons.
pub fn variance_probe(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    kind: EstimatorKind,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    m_samples: usize,
    n_repeats: usize,
    rng: RngStream,
) -> Result<VarianceSummary> {
    if n_repeats < 100 {
        return Err(Error::Config(format!(
            "variance probe needs at least 100 repeats, got {n_repeats}"
        )));
    }
    let estimates: Vec<Array2<f64>> = (0..n_repeats)
        .map(|r| -> Result<Array2<f64>> {
            let run_rng = rng.child(r as u64);
            let est = match kind {
                EstimatorKind::Naive => estimate_naive(phi, dist, cost, m_samples, run_rng)?,
                EstimatorKind::Baseline(cfg) => estimate_baseline(
                    phi,
                    dist,
                    cost,
                    m_samples,
                    &cfg,
                    &mut EstimatorState::new(),
                    run_rng,
                )?,
                EstimatorKind::Surrogate { lambda, baseline } => estimate_surrogate(
                    phi,
                    dist,
                    cost,
                    m_samples,
                    lambda,
                    &baseline,
                    &mut EstimatorState::new(),
                    run_rng,
                )?,
            };
            Ok(est.grad_phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, variance) = mean_and_variance(&estimates, phi.n_nodes(), phi.n_cols());
    let variance_trace = variance.sum();
    Ok(VarianceSummary { mean, variance, variance_trace, n_repeats })
}
