//! Optimization loops for graph identification (fixed predictor, learn
//! the score matrix) and joint training (learn scores and filter
//! coefficients together), with per-epoch validation and edge-recovery
//! metrics.
//!
//! Every stochastic choice is drawn from a stream derived from the config
//! seed and a (tag, index) pair, so whole training histories are
//! reproducible bit for bit; the only non-deterministic record field is
//! the wall-clock time, which reproducibility comparisons must skip.

use std::ops::Range;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_baseline, estimate_naive, estimate_surrogate, BaselineConfig, BaselineMode,
    CostBreakdown, EstimatorState, GradientEstimate,
};
use crate::gpvar::{gpvar_grad_theta, gpvar_predict, normalize_adjacency, GpvarParams, TimeSeries};
use crate::graph::{BinaryAdjacency, GraphDistribution, ScoreMatrix};
use crate::rng::RngStream;
use crate::samplers::{frechet_mean, sample_graph};

/// Stream tags partitioning the seed's stream space.
mod tag {
    pub const INIT_PHI: u64 = 1;
    pub const INIT_THETA: u64 = 2;
    pub const WINDOWS: u64 = 3;
    pub const ESTIMATOR: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const THETA_SAMPLE: u64 = 6;
}

fn stream(seed: u64, tag: u64, index: u64) -> RngStream {
    RngStream::new(seed, (tag << 48) | index)
}

/// Windows evaluated per fresh sample in one-sample evaluation mode.
const EVAL_BATCH: usize = 256;

/// Learning-rate floor applied by the instability fallback.
const LR_PHI_FLOOR: f64 = 0.025;

/// Fraction of flagged row likelihoods per epoch that triggers halving.
const INSTABILITY_RATE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    /// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Fresh Monte Carlo sample per evaluation batch.
    OneSample,
    /// Deterministic Frechet-mean graph.
    Frechet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Global-cost score terms only (with or without baseline).
    Naive,
    /// Surrogate objective with per-node terms.
    Surrogate,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Windows per batch; one graph sample is shared by the whole batch.
    pub batch_size: usize,
    pub lr_phi: f64,
    pub lr_theta: f64,
    pub optimizer: OptimizerKind,
    pub estimator: EstimatorMode,
    pub baseline: BaselineConfig,
    /// Global-term weight of the surrogate objective; defaults to 1/N.
    pub lambda: Option<f64>,
    pub m_samples: usize,
    pub eval_mode: EvalMode,
    /// Residual norm for the training cost (1 or 2); evaluation always
    /// reports mean absolute error.
    pub cost_norm: u8,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batches_per_epoch: 64,
            batch_size: 32,
            lr_phi: 0.05,
            lr_theta: 0.05,
            optimizer: OptimizerKind::Adam,
            estimator: EstimatorMode::Surrogate,
            baseline: BaselineConfig::simple(),
            lambda: None,
            m_samples: 1,
            eval_mode: EvalMode::Frechet,
            cost_norm: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batches_per_epoch == 0 || self.batch_size == 0 || self.m_samples == 0 {
            return Err(Error::Config("batch counts and sample counts must be positive".into()));
        }
        if !(self.lr_phi > 0.0) || !(self.lr_theta > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.cost_norm != 1 && self.cost_norm != 2 {
            return Err(Error::Config(format!("unsupported cost norm {}", self.cost_norm)));
        }
        Ok(())
    }
}

/// Edge-recovery metrics of the Frechet-mean graph against ground truth,
/// over off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

pub fn edge_metrics(predicted: &BinaryAdjacency, truth: &BinaryAdjacency) -> EdgeMetrics {
    let n = truth.n_nodes();
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = predicted.has_edge(i, j);
            let t = truth.has_edge(i, j);
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
            if p == t {
                correct += 1;
            }
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    EdgeMetrics { precision, recall, accuracy: correct as f64 / (n * (n - 1)) as f64 }
}

/// Per-epoch training record. `epoch` 0 is the pre-training evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
    pub edge_precision: f64,
    pub edge_recall: f64,
    pub edge_accuracy: f64,
    pub baseline_value_mean: f64,
    pub grad_variance_trace: f64,
    pub instability_flags: u64,
    /// Measured wall-clock time; not part of the reproducibility contract.
    pub wall_ms: f64,
}

/// First/second-moment optimizer state matching one parameter matrix.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    m: Array2<f64>,
    v: Array2<f64>,
    t: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, shape: (usize, usize)) -> Self {
        Self { kind, m: Array2::zeros(shape), v: Array2::zeros(shape), t: 0 }
    }

    /// One descent step in place.
    pub fn step(&mut self, params: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) -> Result<()> {
        if params.dim() != grad.dim() || params.dim() != self.m.dim() {
            return Err(Error::Config(format!(
                "optimizer shape mismatch: params {:?}, grad {:?}, state {:?}",
                params.dim(),
                grad.dim(),
                self.m.dim()
            )));
        }
        match self.kind {
            OptimizerKind::Sgd => sgd_step(params, grad, lr),
            OptimizerKind::Adam => adam_step(self, params, grad, lr),
        }
        Ok(())
    }
}

/// Plain gradient descent: `params -= lr * grad`.
pub fn sgd_step(params: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) {
    params.scaled_add(-lr, grad);
}

/// Standard Adam update with bias correction.
pub fn adam_step(state: &mut OptimizerState, params: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    state.t += 1;
    state.m.zip_mut_with(grad, |m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
    state.v.zip_mut_with(grad, |v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
    let mc = 1.0 - BETA1.powi(state.t as i32);
    let vc = 1.0 - BETA2.powi(state.t as i32);
    for ((i, j), p) in params.indexed_iter_mut() {
        let m_hat = state.m[(i, j)] / mc;
        let v_hat = state.v[(i, j)] / vc;
        *p -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

/// Near-uniform score initialization: i.i.d. normal(0, 0.01^2) entries
/// (dummy columns included), zero diagonal.
pub fn init_scores(dist: &GraphDistribution, n: usize, rng: RngStream) -> ScoreMatrix {
    let n_dummies = match *dist {
        GraphDistribution::Bes => 0,
        GraphDistribution::Sns { n_dummies, .. } => n_dummies,
    };
    let mut gen = rng.rng();
    let mut phi = ScoreMatrix::zeros(n, n_dummies);
    for i in 0..n {
        for j in 0..n + n_dummies {
            if i != j {
                let z: f64 = gen.sample(StandardNormal);
                phi.set(i, j, 0.01 * z);
            }
        }
    }
    phi
}

/// Forecast evaluation over a split: mean absolute one-step error, plus
/// edge metrics of the Frechet mean against the optional ground truth.
pub fn evaluate(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    params: &GpvarParams,
    series: &TimeSeries,
    range: Range<usize>,
    eval_mode: EvalMode,
    truth: Option<&BinaryAdjacency>,
    rng: RngStream,
) -> Result<(f64, Option<EdgeMetrics>)> {
    let w = params.temporal_order();
    let start = range.start + w;
    if start >= range.end {
        return Err(Error::Config("split too short for the window length".into()));
    }
    let a0 = frechet_mean(phi, dist)?;
    let metrics = truth.map(|t| edge_metrics(&a0, t));

    let mut abs_sum = 0.0;
    let mut count = 0usize;
    let mut batch_index = 0u64;
    let mut t = start;
    while t < range.end {
        let batch_end = (t + EVAL_BATCH).min(range.end);
        let a_tilde = match eval_mode {
            EvalMode::Frechet => normalize_adjacency(&a0),
            EvalMode::OneSample => {
                let sample = sample_graph(phi, dist, rng.child(batch_index))?;
                normalize_adjacency(&sample.adjacency)
            }
        };
        while t < batch_end {
            let window = series.values.slice(ndarray::s![t - w..t, ..]);
            let pred = gpvar_predict(params, &a_tilde, window)?;
            for (i, &p) in pred.iter().enumerate() {
                abs_sum += (p - series.values[(t, i)]).abs();
                count += 1;
            }
            t += 1;
        }
        batch_index += 1;
    }
    Ok((abs_sum / count as f64, metrics))
}

/// Batch cost: mean per-node residual norm over a set of one-step windows
/// under a candidate graph.
fn batch_cost(
    series: &TimeSeries,
    targets: &[usize],
    params: &GpvarParams,
    a: &BinaryAdjacency,
    cost_norm: u8,
) -> CostBreakdown {
    let w = params.temporal_order();
    let n = series.n_nodes();
    let a_tilde = normalize_adjacency(a);
    let mut per_node = vec![0.0; n];
    for &t in targets {
        let window = series.values.slice(ndarray::s![t - w..t, ..]);
        let pred = gpvar_predict(params, &a_tilde, window).expect("window length checked");
        for i in 0..n {
            let r = pred[i] - series.values[(t, i)];
            per_node[i] += if cost_norm == 1 { r.abs() } else { r * r };
        }
    }
    for c in per_node.iter_mut() {
        *c /= targets.len() as f64;
    }
    CostBreakdown::from_per_node(per_node)
}

fn sample_window_targets(
    range: &Range<usize>,
    window: usize,
    batch_size: usize,
    rng: RngStream,
) -> Vec<usize> {
    let lo = range.start + window;
    let hi = range.end;
    let mut gen = rng.rng();
    (0..batch_size).map(|_| gen.gen_range(lo..hi)).collect()
}

fn run_estimator(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    cost: &(impl Fn(&BinaryAdjacency) -> CostBreakdown + Sync),
    cfg: &TrainConfig,
    lambda: f64,
    state: &mut EstimatorState,
    rng: RngStream,
) -> Result<GradientEstimate> {
    match cfg.estimator {
        EstimatorMode::Naive => match cfg.baseline.mode {
            BaselineMode::None => estimate_naive(phi, dist, cost, cfg.m_samples, rng),
            _ => estimate_baseline(phi, dist, cost, cfg.m_samples, &cfg.baseline, state, rng),
        },
        EstimatorMode::Surrogate => {
            estimate_surrogate(phi, dist, cost, cfg.m_samples, lambda, &cfg.baseline, state, rng)
        }
    }
}

/// Shared epoch loop; `theta` is updated alongside the scores only when
/// `fit_theta` is set.
#[allow(clippy::too_many_arguments)]
fn train_loop(
    series: &TimeSeries,
    train_range: Range<usize>,
    val_range: Range<usize>,
    mut params: GpvarParams,
    fit_theta: bool,
    truth: &BinaryAdjacency,
    dist: &GraphDistribution,
    cfg: &TrainConfig,
) -> Result<(Vec<EpochRecord>, ScoreMatrix, GpvarParams)> {
    cfg.validate()?;
    dist.validate_counts(series.n_nodes())?;
    let n = series.n_nodes();
    let w = params.temporal_order();
    if train_range.end <= train_range.start + w {
        return Err(Error::Data("training split shorter than the window length".into()));
    }
    let lambda = cfg.lambda.unwrap_or(1.0 / n as f64);

    let mut phi = init_scores(dist, n, stream(cfg.seed, tag::INIT_PHI, 0));
    let mut opt_phi = OptimizerState::new(cfg.optimizer, phi.values().dim());
    let mut opt_theta = OptimizerState::new(cfg.optimizer, params.theta().dim());
    let mut est_state = EstimatorState::new();
    let mut lr_phi = cfg.lr_phi;

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let epoch0 = Instant::now();
    let (train_mae, _) = evaluate(
        &phi,
        dist,
        &params,
        series,
        train_range.clone(),
        cfg.eval_mode,
        None,
        stream(cfg.seed, tag::EVAL, 1_000_000),
    )?;
    let (val_mae, metrics) = evaluate(
        &phi,
        dist,
        &params,
        series,
        val_range.clone(),
        cfg.eval_mode,
        Some(truth),
        stream(cfg.seed, tag::EVAL, 0),
    )?;
    let metrics = metrics.expect("ground truth provided");
    history.push(EpochRecord {
        epoch: 0,
        train_mae,
        val_mae,
        edge_precision: metrics.precision,
        edge_recall: metrics.recall,
        edge_accuracy: metrics.accuracy,
        baseline_value_mean: 0.0,
        grad_variance_trace: 0.0,
        instability_flags: 0,
        wall_ms: epoch0.elapsed().as_secs_f64() * 1e3,
    });

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut cost_sum = 0.0;
        let mut baseline_sum = 0.0;
        let mut baseline_count = 0usize;
        let mut variance_sum = 0.0;
        let mut unstable = 0u64;
        let mut rows_evaluated = 0u64;

        for b in 0..cfg.batches_per_epoch {
            let idx = ((epoch - 1) * cfg.batches_per_epoch + b) as u64;
            let targets = sample_window_targets(
                &train_range,
                w,
                cfg.batch_size,
                stream(cfg.seed, tag::WINDOWS, idx),
            );
            let cost = |a: &BinaryAdjacency| batch_cost(series, &targets, &params, a, cfg.cost_norm);
            let est = run_estimator(
                &phi,
                dist,
                &cost,
                cfg,
                lambda,
                &mut est_state,
                stream(cfg.seed, tag::ESTIMATOR, idx),
            )?;
            if !est.mean_cost.is_finite() || est.grad_phi.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {b}; \
                     try a lower lr_phi (the subset sampler is known to need 0.025)"
                )));
            }

            let theta_grad = if fit_theta {
                let sample =
                    sample_graph(&phi, dist, stream(cfg.seed, tag::THETA_SAMPLE, idx))?;
                let a_tilde = normalize_adjacency(&sample.adjacency);
                let mut acc = Array2::zeros(params.theta().dim());
                for &t in &targets {
                    let window = series.values.slice(ndarray::s![t - w..t, ..]);
                    let g = gpvar_grad_theta(
                        &params,
                        &[&a_tilde],
                        window,
                        series.values.row(t),
                        cfg.cost_norm,
                    )?;
                    acc += &g;
                }
                acc /= targets.len() as f64;
                Some(acc)
            } else {
                None
            };

            // Simultaneous updates: both gradients are taken at the same
            // parameter values, then both parameter sets step.
            let mut grad_phi = est.grad_phi.clone();
            for i in 0..n {
                grad_phi[(i, i)] = 0.0;
            }
            opt_phi.step(phi.values_mut(), &grad_phi, lr_phi)?;
            if let Some(g) = theta_grad {
                opt_theta.step(params.theta_mut(), &g, cfg.lr_theta)?;
                if params.theta().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "filter coefficients diverged at epoch {epoch}; lower lr_theta"
                    )));
                }
            }

            cost_sum += est.mean_cost;
            if let Some(bv) = est.baseline_value {
                baseline_sum += bv;
                baseline_count += 1;
            }
            variance_sum += est.per_coordinate_variance.sum();
            unstable += est.unstable_rows;
            rows_evaluated += est.rows_evaluated;
        }

        let (val_mae, metrics) = evaluate(
            &phi,
            dist,
            &params,
            series,
            val_range.clone(),
            cfg.eval_mode,
            Some(truth),
            stream(cfg.seed, tag::EVAL, epoch as u64),
        )?;
        let metrics = metrics.expect("ground truth provided");
        if !val_mae.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite validation error at epoch {epoch}; try a lower learning rate"
            )));
        }

        // Instability fallback: halve the score learning rate (once per
        // trigger, floored) when too many row likelihoods were flagged.
        if rows_evaluated > 0 {
            let rate = unstable as f64 / rows_evaluated as f64;
            if rate > INSTABILITY_RATE_LIMIT && lr_phi > LR_PHI_FLOOR {
                lr_phi = (lr_phi / 2.0).max(LR_PHI_FLOOR);
                log::warn!(
                    "epoch {epoch}: {:.2}% unstable likelihoods, lowering lr_phi to {lr_phi}",
                    rate * 100.0
                );
            }
        }

        let record = EpochRecord {
            epoch,
            train_mae: cost_sum / cfg.batches_per_epoch as f64,
            val_mae,
            edge_precision: metrics.precision,
            edge_recall: metrics.recall,
            edge_accuracy: metrics.accuracy,
            baseline_value_mean: if baseline_count > 0 {
                baseline_sum / baseline_count as f64
            } else {
                0.0
            },
            grad_variance_trace: variance_sum / cfg.batches_per_epoch as f64,
            instability_flags: unstable,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        log::info!(
            "epoch {epoch}: train {:.4}, val {:.4}, edge acc {:.3}",
            record.train_mae,
            record.val_mae,
            record.edge_accuracy
        );
        history.push(record);
    }

    Ok((history, phi, params))
}

/// Graph identification: the predictor is fixed to the true filter
/// coefficients and only the score matrix is learned.
pub fn train_identification(
    series: &TimeSeries,
    train_range: Range<usize>,
    val_range: Range<usize>,
    true_params: &GpvarParams,
    truth: &BinaryAdjacency,
    dist: &GraphDistribution,
    cfg: &TrainConfig,
) -> Result<(Vec<EpochRecord>, ScoreMatrix)> {
    let (history, phi, _) = train_loop(
        series,
        train_range,
        val_range,
        true_params.clone(),
        false,
        truth,
        dist,
        cfg,
    )?;
    Ok((history, phi))
}

/// Joint training: scores and an over-specified filter are fitted
/// simultaneously, with the filter gradient taken through the sampled
/// graph and the same learning rate family as the scores.
#[allow(clippy::too_many_arguments)]
pub fn train_joint(
    series: &TimeSeries,
    train_range: Range<usize>,
    val_range: Range<usize>,
    fitted_spatial_order: usize,
    fitted_temporal_order: usize,
    truth: &BinaryAdjacency,
    dist: &GraphDistribution,
    cfg: &TrainConfig,
) -> Result<(Vec<EpochRecord>, ScoreMatrix, GpvarParams)> {
    let mut gen = stream(cfg.seed, tag::INIT_THETA, 0).rng();
    let mut theta = Array2::zeros((fitted_spatial_order + 1, fitted_temporal_order));
    for v in theta.iter_mut() {
        let z: f64 = gen.sample(StandardNormal);
        *v = 0.1 * z;
    }
    let params = GpvarParams::new(theta)?;
    train_loop(series, train_range, val_range, params, true, truth, dist, cfg)
}

impl GraphDistribution {
    /// Validate K against the node count before a score matrix exists.
    fn validate_counts(&self, n_nodes: usize) -> Result<()> {
        if let GraphDistribution::Sns { k_neighbors, n_dummies, temperature } = *self {
            if !(temperature > 0.0) {
                return Err(Error::Config("temperature must be positive".into()));
            }
            if k_neighbors == 0 || k_neighbors > n_nodes - 1 + n_dummies {
                return Err(Error::Config(format!(
                    "k = {k_neighbors} out of range for {} candidates",
                    n_nodes - 1 + n_dummies
                )));
            }
        }
        Ok(())
    }
}
