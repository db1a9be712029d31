//! Graph polynomial vector autoregressive (GPVAR) processes: synthetic
//! data generation, the differentiable one-step predictor and random graph
//! construction.
//!
//! The generator recursion is
//!
//! ```text
//! X_t = tanh( sum_{l=0..L} sum_{q=1..Q} Theta[l][q] * A~^l X_{t-q} ) + eta_t
//! ```
//!
//! with `A~ = D^{-1/2} (I + A) D^{-1/2}` the normalized shift operator and
//! `eta_t` standard Gaussian noise. The tanh saturation keeps trajectories
//! bounded for any coefficient choice.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::BinaryAdjacency;
use crate::rng::RngStream;

/// Number of leading steps discarded after the random initial condition.
pub const BURN_IN_STEPS: usize = 100;

/// Filter coefficients, shape `(L + 1) x Q`: `theta[(l, q - 1)]` scales the
/// l-th power of the shift operator applied to the lag-q signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GpvarParams {
    theta: Array2<f64>,
}

impl GpvarParams {
    pub fn new(theta: Array2<f64>) -> Result<Self> {
        if theta.ncols() == 0 {
            return Err(Error::Config("temporal order Q must be at least 1".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite filter coefficient".into()));
        }
        Ok(Self { theta })
    }

    pub fn zeros(spatial_order: usize, temporal_order: usize) -> Self {
        Self { theta: Array2::zeros((spatial_order + 1, temporal_order)) }
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Array2<f64> {
        &mut self.theta
    }

    /// L: highest power of the shift operator.
    pub fn spatial_order(&self) -> usize {
        self.theta.nrows() - 1
    }

    /// Q: number of lags entering the filter.
    pub fn temporal_order(&self) -> usize {
        self.theta.ncols()
    }
}

/// A node-aligned multivariate series, shape `T x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Array2<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn n_nodes(&self) -> usize {
        self.values.ncols()
    }
}

/// One-step forecasting task description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastTask {
    /// Input window length; must cover the filter's temporal order.
    pub window: usize,
    /// Prediction steps ahead.
    pub horizon: usize,
    /// Residual norm: 1 for absolute error, 2 for squared error.
    pub cost_norm: u8,
}

impl ForecastTask {
    pub fn one_step(window: usize) -> Self {
        Self { window, horizon: 1, cost_norm: 1 }
    }
}

/// Normalized shift operator `D^{-1/2} (I + A) D^{-1/2}` with
/// `D_ii = 1 + |row i|`; isolated rows keep `D_ii = 1`.
pub fn normalize_adjacency(a: &BinaryAdjacency) -> Array2<f64> {
    let n = a.n_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((1 + a.row(i).len()) as f64).sqrt()).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        out[(i, i)] = inv_sqrt[i] * inv_sqrt[i];
        for &j in a.row(i) {
            out[(i, j)] = inv_sqrt[i] * inv_sqrt[j];
        }
    }
    out
}

/// Generate a trajectory of `length` steps following the GPVAR recursion,
/// after a random Gaussian initial condition and a discarded burn-in.
pub fn gpvar_generate(
    a: &BinaryAdjacency,
    params: &GpvarParams,
    length: usize,
    rng: RngStream,
) -> Result<TimeSeries> {
    let q = params.temporal_order();
    if length <= q {
        return Err(Error::Config(format!(
            "series length {length} must exceed the temporal order {q}"
        )));
    }
    let n = a.n_nodes();
    let a_tilde = normalize_adjacency(a);
    let mut gen = rng.rng();
    let total = q + BURN_IN_STEPS + length;
    let mut values = Array2::zeros((total, n));
    for t in 0..q {
        for i in 0..n {
            values[(t, i)] = gen.sample::<f64, _>(StandardNormal);
        }
    }
    for t in q..total {
        let window = values.slice(ndarray::s![t - q..t, ..]);
        let signal = filter_response(params, &[&a_tilde], window, false);
        for i in 0..n {
            let noise: f64 = gen.sample(StandardNormal);
            values[(t, i)] = signal[i].tanh() + noise;
        }
    }
    Ok(TimeSeries { values: values.slice(ndarray::s![q + BURN_IN_STEPS.., ..]).to_owned() })
}

/// One-step conditional-mean prediction from the trailing `window` rows
/// (`window.row(window.nrows() - 1)` is the most recent observation).
pub fn gpvar_predict(
    params: &GpvarParams,
    a_tilde: &Array2<f64>,
    window: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    check_window(params, window)?;
    let s = filter_response(params, &[a_tilde], window, false);
    Ok(s.mapv(f64::tanh))
}

/// Multi-layer variant: power l of the shift operator is replaced by the
/// ordered product `A~(l) ... A~(1)`. With all layers equal this reduces
/// to [`gpvar_predict`].
pub fn gpvar_predict_multilayer(
    params: &GpvarParams,
    a_tilde_layers: &[&Array2<f64>],
    window: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    check_window(params, window)?;
    if a_tilde_layers.len() != params.spatial_order() {
        return Err(Error::Config(format!(
            "expected {} layer adjacencies, got {}",
            params.spatial_order(),
            a_tilde_layers.len()
        )));
    }
    let s = filter_response(params, a_tilde_layers, window, true);
    Ok(s.mapv(f64::tanh))
}

/// Exact gradient of the per-step cost w.r.t. the filter coefficients,
/// chaining through tanh and the p-norm subgradient (`sign` at p = 1, with
/// 0 at exact-zero residuals). The cost is the per-node mean of `|r_i|^p`.
pub fn gpvar_grad_theta(
    params: &GpvarParams,
    a_tilde_layers: &[&Array2<f64>],
    window: ArrayView2<f64>,
    target: ArrayView1<f64>,
    cost_norm: u8,
) -> Result<Array2<f64>> {
    check_window(params, window)?;
    let multilayer = a_tilde_layers.len() > 1;
    if multilayer && a_tilde_layers.len() != params.spatial_order() {
        return Err(Error::Config("layer count does not match the spatial order".into()));
    }
    let n = window.ncols();
    let l_max = params.spatial_order();
    let q_max = params.temporal_order();
    let features = lag_features(params, a_tilde_layers, window, multilayer);
    let mut s = Array1::zeros(n);
    for l in 0..=l_max {
        for q in 1..=q_max {
            s.scaled_add(params.theta[(l, q - 1)], &features[l][q - 1]);
        }
    }
    let pred = s.mapv(f64::tanh);
    // d cost / d s_i, with cost = mean_i |pred_i - target_i|^p.
    let mut upstream = Array1::zeros(n);
    for i in 0..n {
        let r = pred[i] - target[i];
        let dcost = match cost_norm {
            1 => {
                if r == 0.0 {
                    0.0
                } else {
                    r.signum()
                }
            }
            2 => 2.0 * r,
            p => return Err(Error::Config(format!("unsupported cost norm {p}"))),
        };
        upstream[i] = dcost * (1.0 - pred[i] * pred[i]) / n as f64;
    }
    let mut grad = Array2::zeros((l_max + 1, q_max));
    for l in 0..=l_max {
        for q in 1..=q_max {
            grad[(l, q - 1)] = upstream.dot(&features[l][q - 1]);
        }
    }
    Ok(grad)
}

/// Linear filter response before the tanh.
fn filter_response(
    params: &GpvarParams,
    a_tilde_layers: &[&Array2<f64>],
    window: ArrayView2<f64>,
    multilayer: bool,
) -> Array1<f64> {
    let n = window.ncols();
    let features = lag_features(params, a_tilde_layers, window, multilayer);
    let mut s = Array1::zeros(n);
    for l in 0..=params.spatial_order() {
        for q in 1..=params.temporal_order() {
            s.scaled_add(params.theta[(l, q - 1)], &features[l][q - 1]);
        }
    }
    s
}

/// `features[l][q-1] = (product of shift operators up to layer l) X_{t-q}`,
/// built by repeated matrix-vector products; dense powers are never formed.
fn lag_features(
    params: &GpvarParams,
    a_tilde_layers: &[&Array2<f64>],
    window: ArrayView2<f64>,
    multilayer: bool,
) -> Vec<Vec<Array1<f64>>> {
    let w = window.nrows();
    let l_max = params.spatial_order();
    let q_max = params.temporal_order();
    let mut features: Vec<Vec<Array1<f64>>> = Vec::with_capacity(l_max + 1);
    let lag0: Vec<Array1<f64>> =
        (1..=q_max).map(|q| window.row(w - q).to_owned()).collect();
    features.push(lag0);
    for l in 1..=l_max {
        let op = if multilayer { a_tilde_layers[l - 1] } else { a_tilde_layers[0] };
        let next: Vec<Array1<f64>> =
            features[l - 1].iter().map(|z| op.dot(z)).collect();
        features.push(next);
    }
    features
}

fn check_window(params: &GpvarParams, window: ArrayView2<f64>) -> Result<()> {
    if window.nrows() < params.temporal_order() {
        return Err(Error::Config(format!(
            "window of {} steps shorter than temporal order {}",
            window.nrows(),
            params.temporal_order()
        )));
    }
    Ok(())
}

/// Random graph families for the synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    /// Independent directed edges with probability `p`.
    ErdosRenyi { p: f64 },
    /// Stochastic block model over `blocks` contiguous groups; undirected
    /// edges drawn with `p_in` within and `p_out` across groups, then
    /// symmetrized.
    Sbm { blocks: usize, p_in: f64, p_out: f64 },
    /// Nodes placed uniformly in the unit square, each connected to its
    /// `k` nearest neighbors, symmetrized.
    KnnGeometric { k: usize },
}

/// Sample a graph, regenerating up to 10 times if any node ends up
/// isolated (empty neighbor row).
pub fn make_graph(kind: GraphKind, n: usize, rng: RngStream) -> Result<BinaryAdjacency> {
    if n < 2 {
        return Err(Error::Config("graphs need at least two nodes".into()));
    }
    match kind {
        GraphKind::ErdosRenyi { p } | GraphKind::Sbm { p_in: p, .. } if !(0.0..=1.0).contains(&p) => {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
        _ => {}
    }
    let mut gen = rng.rng();
    for _attempt in 0..10 {
        let a = match kind {
            GraphKind::ErdosRenyi { p } => {
                let mut rows = vec![Vec::new(); n];
                for (i, row) in rows.iter_mut().enumerate() {
                    for j in 0..n {
                        if j != i && gen.gen::<f64>() < p {
                            row.push(j);
                        }
                    }
                }
                BinaryAdjacency::from_rows(n, rows)?
            }
            GraphKind::Sbm { blocks, p_in, p_out } => {
                if blocks == 0 || blocks > n {
                    return Err(Error::Config(format!("invalid block count {blocks}")));
                }
                if !(0.0..=1.0).contains(&p_out) {
                    return Err(Error::Config(format!("edge probability {p_out} outside [0, 1]")));
                }
                let block_of = |i: usize| i * blocks / n;
                let mut rows = vec![Vec::new(); n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let p = if block_of(i) == block_of(j) { p_in } else { p_out };
                        if gen.gen::<f64>() < p {
                            rows[i].push(j);
                            rows[j].push(i);
                        }
                    }
                }
                BinaryAdjacency::from_rows(n, rows)?
            }
            GraphKind::KnnGeometric { k } => {
                if k == 0 || k >= n {
                    return Err(Error::Config(format!("invalid neighbor count {k}")));
                }
                let points: Vec<(f64, f64)> =
                    (0..n).map(|_| (gen.gen::<f64>(), gen.gen::<f64>())).collect();
                let mut rows = vec![Vec::new(); n];
                for i in 0..n {
                    let mut by_dist: Vec<(usize, f64)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let dx = points[i].0 - points[j].0;
                            let dy = points[i].1 - points[j].1;
                            (j, dx * dx + dy * dy)
                        })
                        .collect();
                    by_dist.sort_by(|(ja, da), (jb, db)| da.total_cmp(db).then(ja.cmp(jb)));
                    for &(j, _) in by_dist.iter().take(k) {
                        rows[i].push(j);
                        rows[j].push(i);
                    }
                }
                BinaryAdjacency::from_rows(n, rows)?
            }
        };
        if (0..n).all(|i| !a.row(i).is_empty()) {
            return Ok(a);
        }
    }
    Err(Error::Data(
        "graph generation left isolated nodes after 10 attempts; raise the edge density".into(),
    ))
}
