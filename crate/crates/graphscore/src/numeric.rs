//! Stable scalar helpers and Gauss-Legendre quadrature rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// log(sum(exp(values))) with max-shift for stability.
///
/// Exact for a single element. An empty slice is a contract violation.
pub fn logsumexp(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "logsumexp of empty sequence");
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // All -inf (or a stray +inf/NaN propagates as-is).
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Logistic function, evaluated without overflow on either tail.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) without underflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// log(1 - exp(x)) for x < 0, accurate near both ends.
pub fn log1m_exp(x: f64) -> f64 {
    debug_assert!(x < 0.0, "log1m_exp needs x < 0, got {x}");
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Tanh-sinh (double-exponential) rule on the open unit interval.
///
/// Nodes and weights are carried in log space: with `s = (pi/2) sinh t`
/// the node is `u = sigmoid(2s)`, so `ln u = log_sigmoid(2s)` stays exact
/// even where `u` itself would round to 1. The double-exponential
/// clustering integrates endpoint singularities of the form `u^eps`
/// (arbitrary positive `eps`) to near machine precision, which fixed-order
/// Gauss rules cannot.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    /// `ln u` per node, ascending in u.
    pub ln_nodes: Vec<f64>,
    /// `ln w` per node; weights sum to 1 up to the rule's accuracy.
    pub ln_weights: Vec<f64>,
}

/// Half-width of the uniform grid in the tanh-sinh variable.
const TANH_SINH_T_MAX: f64 = 4.0;

impl TanhSinh {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "quadrature needs at least two nodes");
        let h = 2.0 * TANH_SINH_T_MAX / (n - 1) as f64;
        let mut ln_nodes = Vec::with_capacity(n);
        let mut ln_weights = Vec::with_capacity(n);
        for k in 0..n {
            let t = -TANH_SINH_T_MAX + h * k as f64;
            let s = std::f64::consts::FRAC_PI_2 * t.sinh();
            // du/dt = 2 u (1 - u) * (pi/2) cosh t.
            ln_nodes.push(log_sigmoid(2.0 * s));
            ln_weights.push(
                (h * std::f64::consts::PI * t.cosh()).ln()
                    + log_sigmoid(2.0 * s)
                    + log_sigmoid(-2.0 * s),
            );
        }
        Self { ln_nodes, ln_weights }
    }

    /// Shared, cached rule for a given node count.
    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TanhSinh>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(Self::new(n))).clone()
    }

    pub fn len(&self) -> usize {
        self.ln_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_nodes.is_empty()
    }

    /// Integrate `f(u)` over (0, 1), passing `ln u` to the integrand.
    pub fn integrate_ln(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.ln_nodes
            .iter()
            .zip(&self.ln_weights)
            .map(|(&lu, &lw)| lw.exp() * f(lu))
            .sum()
    }
}
