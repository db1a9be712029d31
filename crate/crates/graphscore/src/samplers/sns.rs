//! Subset neighborhood sampler: Gumbel-top-k draws and the quadrature
//! likelihood of unordered subsets.
//!
//! The probability of drawing subset S without replacement from the
//! softmax of row scores has an exact integral form: conditioning on the
//! maximum Gumbel of the complement C and substituting its CDF,
//!
//! ```text
//! p(S) = ∫_0^1 ∏_{i in S} (1 - u^{eps_i}) du,   eps_i = exp(phi_i/tau - phi_C),
//! ```
//!
//! with `phi_C` the log-sum-exp of the complement scores over tau. A fixed
//! tanh-sinh rule evaluates both the value and, by differentiating under
//! the integral sign, the gradient w.r.t. every candidate score (members
//! through `eps_i`, complement members through `phi_C`); the
//! double-exponential node clustering is what keeps the `u^eps` endpoint
//! behavior accurate for fractional exponents. All factors are handled in
//! log space via `log1p(-exp(eps * ln u))`.

use ndarray::Array2;

use super::{LikelihoodResult, MatrixLikelihood, LOG_PROB_FLAG_THRESHOLD};
use crate::error::{Error, Result};
use crate::graph::{BinaryAdjacency, GraphDistribution, RowSubset, ScoreMatrix};
use crate::gumbel::gumbel_draw;
use crate::numeric::{log1m_exp, logsumexp, TanhSinh};
use crate::rng::RngStream;

/// Clamp range for the exponent ratios, guarding against overflow when
/// score gaps are extreme.
const LN_EPS_MIN: f64 = -23.025850929940457; // ln(1e-10)
const LN_EPS_MAX: f64 = 23.025850929940457; // ln(1e10)

/// Minimum admissible quadrature resolution.
pub const MIN_QUAD_POINTS: usize = 32;

/// Draw one graph: per row, perturb every candidate score (dummies
/// included) with Gumbel noise, keep the K largest, then drop dummy
/// members for the adjacency. The pre-removal subsets are returned for
/// likelihood evaluation.
pub fn sns_sample(
    phi: &ScoreMatrix,
    dist: &GraphDistribution,
    rng: RngStream,
) -> Result<(BinaryAdjacency, Vec<RowSubset>)> {
    dist.validate(phi)?;
    let (k, temperature) = match *dist {
        GraphDistribution::Sns { k_neighbors, temperature, .. } => (k_neighbors, temperature),
        GraphDistribution::Bes => {
            return Err(Error::Config("sns_sample called with a Bernoulli distribution".into()))
        }
    };
    let n = phi.n_nodes();
    let mut gen = rng.rng();
    let mut subsets = Vec::with_capacity(n);
    for i in 0..n {
        let mut perturbed: Vec<(usize, f64)> = Vec::with_capacity(phi.n_cols() - 1);
        for j in 0..phi.n_cols() {
            if j == i {
                continue;
            }
            let g = phi.get(i, j) / temperature + gumbel_draw(&mut gen, 0.0);
            perturbed.push((j, g));
        }
        // Descending by perturbed score, ties broken by smallest index.
        perturbed.sort_by(|(ja, ga), (jb, gb)| gb.total_cmp(ga).then(ja.cmp(jb)));
        let members: Vec<usize> = perturbed.iter().take(k).map(|&(j, _)| j).collect();
        subsets.push(RowSubset::new(i, members));
    }
    let adjacency = super::adjacency_from_subsets(n, &subsets);
    Ok((adjacency, subsets))
}

/// Log-probability of one row subset and its gradient w.r.t. every
/// candidate score in the row.
///
/// `phi_row` is the full score-matrix row (dummy columns included); the
/// candidate set is every index except `subset.node`. An empty complement
/// is the degenerate exact case `p(S) = 1`.
pub fn sns_row_log_likelihood(
    phi_row: &[f64],
    subset: &RowSubset,
    temperature: f64,
    quad_points: usize,
) -> Result<LikelihoodResult> {
    if quad_points < MIN_QUAD_POINTS {
        return Err(Error::Config(format!(
            "quadrature needs at least {MIN_QUAD_POINTS} points, got {quad_points}"
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let n_cols = phi_row.len();
    if subset.members.len() >= n_cols {
        return Err(Error::Config(format!(
            "subset of size {} exceeds the {} candidates of the row",
            subset.members.len(),
            n_cols - 1
        )));
    }
    for &m in &subset.members {
        if m >= n_cols || m == subset.node {
            return Err(Error::Config(format!("invalid subset member {m}")));
        }
    }

    let mut grad_row = vec![0.0; n_cols];
    let members = &subset.members;
    let complement: Vec<usize> = (0..n_cols)
        .filter(|&j| j != subset.node && members.binary_search(&j).is_err())
        .collect();

    if members.is_empty() || complement.is_empty() {
        // p(S) = 1 exactly: nothing left to compete against (or nothing drawn).
        return Ok(LikelihoodResult { log_prob: 0.0, grad_row, unstable: false });
    }

    let comp_scaled: Vec<f64> = complement.iter().map(|&j| phi_row[j] / temperature).collect();
    let phi_c = logsumexp(&comp_scaled);
    let ln_eps: Vec<f64> = members
        .iter()
        .map(|&j| (phi_row[j] / temperature - phi_c).clamp(LN_EPS_MIN, LN_EPS_MAX))
        .collect();
    let eps: Vec<f64> = ln_eps.iter().map(|&e| e.exp()).collect();

    let rule = TanhSinh::cached(quad_points);
    let n_k = rule.len();
    let k_members = members.len();

    // Per-node log factors log(1 - u^eps_i) and their row sums.
    let mut log_terms = vec![0.0; k_members * n_k];
    let mut sum_log_terms = vec![0.0; n_k];
    let mut ln_neg_ln_u = vec![0.0; n_k];
    let ln_u = &rule.ln_nodes;
    for (kq, &lu) in ln_u.iter().enumerate() {
        ln_neg_ln_u[kq] = (-lu).ln();
        let mut total = 0.0;
        for (mi, &e) in eps.iter().enumerate() {
            let lt = log1m_exp(e * lu);
            log_terms[mi * n_k + kq] = lt;
            total += lt;
        }
        sum_log_terms[kq] = total;
    }

    let log_w = &rule.ln_weights;
    let mut scratch = vec![0.0; n_k];
    for kq in 0..n_k {
        scratch[kq] = log_w[kq] + sum_log_terms[kq];
    }
    let log_prob = logsumexp(&scratch).min(0.0);

    // J_i = ∫ [∏_{i' != i} (1 - u^{eps_i'})] u^{eps_i} ln u du  (negative).
    // d log p / d phi_m = (eps_m / tau) * |J_m| / p              for m in S,
    //                   = -(softmax_m / tau) * Σ_i eps_i |J_i| / p otherwise.
    let mut member_pull = 0.0;
    for mi in 0..k_members {
        for kq in 0..n_k {
            scratch[kq] = log_w[kq] + (sum_log_terms[kq] - log_terms[mi * n_k + kq])
                + eps[mi] * ln_u[kq]
                + ln_neg_ln_u[kq];
        }
        let log_j = logsumexp(&scratch);
        let g = (ln_eps[mi] + log_j - log_prob).exp() / temperature;
        grad_row[members[mi]] = g;
        member_pull += g;
    }
    for (ci, &j) in complement.iter().enumerate() {
        let softmax = (comp_scaled[ci] - phi_c).exp();
        grad_row[j] = -softmax * member_pull;
    }

    Ok(LikelihoodResult {
        log_prob,
        grad_row,
        unstable: log_prob < LOG_PROB_FLAG_THRESHOLD,
    })
}

/// Joint log-likelihood of a full set of row subsets; rows are independent
/// so the gradient rows stack into the score-matrix layout.
pub fn sns_log_likelihood(
    phi: &ScoreMatrix,
    subsets: &[RowSubset],
    temperature: f64,
    quad_points: usize,
) -> Result<MatrixLikelihood> {
    let n = phi.n_nodes();
    if subsets.len() != n {
        return Err(Error::Config(format!(
            "expected {n} row subsets, got {}",
            subsets.len()
        )));
    }
    let mut grad = Array2::zeros((n, phi.n_cols()));
    let mut log_prob = 0.0;
    let mut unstable_rows = 0;
    for (i, subset) in subsets.iter().enumerate() {
        if subset.node != i {
            return Err(Error::Config(format!("subset {i} tagged with node {}", subset.node)));
        }
        let row = sns_row_log_likelihood(&phi.row(i), subset, temperature, quad_points)?;
        log_prob += row.log_prob;
        if row.unstable {
            unstable_rows += 1;
        }
        for (j, g) in row.grad_row.iter().enumerate() {
            grad[(i, j)] = *g;
        }
    }
    Ok(MatrixLikelihood { log_prob, grad, unstable_rows })
}
