//! Core graph-domain types: score matrices, sampled adjacencies and
//! distribution configuration.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution parameters: one row of candidate-neighbor scores per node.
///
/// Row `i` holds the logits for the stochastic edges `j -> i`. Columns
/// `n_nodes..n_nodes + n_dummies` are learnable dummy candidates used by the
/// subset sampler to allow fewer than K real neighbors. Diagonal entries are
/// never read; self-loops are excluded from every distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_nodes: usize,
    n_dummies: usize,
    values: Array2<f64>,
}

impl ScoreMatrix {
    /// All-zero scores.
    pub fn zeros(n_nodes: usize, n_dummies: usize) -> Self {
        assert!(n_nodes > 0, "score matrix needs at least one node");
        Self {
            n_nodes,
            n_dummies,
            values: Array2::zeros((n_nodes, n_nodes + n_dummies)),
        }
    }

    /// Wrap an existing `n_nodes x (n_nodes + n_dummies)` matrix.
    pub fn from_values(n_nodes: usize, n_dummies: usize, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != n_nodes || values.ncols() != n_nodes + n_dummies {
            return Err(Error::Config(format!(
                "score matrix shape {:?} does not match {} nodes + {} dummies",
                values.dim(),
                n_nodes,
                n_dummies
            )));
        }
        for i in 0..n_nodes {
            for j in 0..values.ncols() {
                if i != j && !values[(i, j)].is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite score at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n_nodes, n_dummies, values })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dummies(&self) -> usize {
        self.n_dummies
    }

    /// Number of columns, real plus dummy.
    pub fn n_cols(&self) -> usize {
        self.n_nodes + self.n_dummies
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j, "diagonal scores are masked");
        self.values[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i != j, "diagonal scores are masked");
        self.values[(i, j)] = v;
    }

    /// Copy of row `i` as a plain vector (diagonal slot included, unused).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    /// Candidate column indices for row `i`: everything except the diagonal.
    pub fn candidates(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n_cols = self.n_cols();
        (0..n_cols).filter(move |&j| j != i)
    }
}

/// A sampled binary graph stored as per-row sorted neighbor sets.
///
/// `rows[i]` lists the in-neighbors `j` of node `i` (edges `j -> i`), sorted
/// ascending with no duplicates and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryAdjacency {
    n_nodes: usize,
    rows: Vec<Vec<usize>>,
}

impl BinaryAdjacency {
    /// Empty graph on `n_nodes` nodes.
    pub fn empty(n_nodes: usize) -> Self {
        assert!(n_nodes > 0);
        Self { n_nodes, rows: vec![Vec::new(); n_nodes] }
    }

    /// Build from per-row neighbor lists; sorts, dedups and validates.
    pub fn from_rows(n_nodes: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.len() != n_nodes {
            return Err(Error::Config(format!(
                "expected {} rows, got {}",
                n_nodes,
                rows.len()
            )));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if row.iter().any(|&j| j >= n_nodes) {
                return Err(Error::Config(format!("row {i} has out-of-range neighbor")));
            }
            if row.binary_search(&i).is_ok() {
                return Err(Error::Config(format!("row {i} contains a self-loop")));
            }
        }
        Ok(Self { n_nodes, rows })
    }

    /// Build from a directed edge list of `(target, source)` pairs, i.e.
    /// `(i, j)` inserts `j` into row `i`.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_nodes];
        for &(i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Config(format!("edge ({i}, {j}) out of range")));
            }
            rows[i].push(j);
        }
        Self::from_rows(n_nodes, rows)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All `(target, source)` pairs in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                out.push((i, j));
            }
        }
        out
    }

    /// Dense 0/1 view, row i holding indicator of its neighbor set.
    pub fn dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n_nodes, self.n_nodes));
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// Hamming distance: number of differing off-diagonal entries.
    pub fn hamming(&self, other: &BinaryAdjacency) -> usize {
        assert_eq!(self.n_nodes, other.n_nodes);
        let mut dist = 0;
        for i in 0..self.n_nodes {
            let (a, b) = (&self.rows[i], &other.rows[i]);
            let mut common = 0;
            let (mut p, mut q) = (0, 0);
            while p < a.len() && q < b.len() {
                match a[p].cmp(&b[q]) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        p += 1;
                        q += 1;
                    }
                }
            }
            dist += a.len() + b.len() - 2 * common;
        }
        dist
    }
}

/// Graph distribution configuration: independent Bernoulli edges, or
/// per-row subsets of fixed size K sampled without replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphDistribution {
    /// One independent Bernoulli per directed edge with parameter
    /// `sigmoid(phi_ij)`.
    Bes,
    /// Per-row Gumbel-top-k subset of exactly `k_neighbors` candidates,
    /// drawn from the softmax of `phi / temperature`; dummy candidates are
    /// discarded after sampling.
    Sns {
        k_neighbors: usize,
        n_dummies: usize,
        temperature: f64,
    },
}

impl GraphDistribution {
    pub fn sns(k_neighbors: usize, n_dummies: usize) -> Self {
        GraphDistribution::Sns { k_neighbors, n_dummies, temperature: 1.0 }
    }

    /// Check internal consistency and compatibility with a score matrix.
    pub fn validate(&self, phi: &ScoreMatrix) -> Result<()> {
        match *self {
            GraphDistribution::Bes => {
                if phi.n_dummies() != 0 {
                    return Err(Error::Config(
                        "binary edge sampler does not use dummy columns".into(),
                    ));
                }
            }
            GraphDistribution::Sns { k_neighbors, n_dummies, temperature } => {
                if !(temperature > 0.0) {
                    return Err(Error::Config(format!(
                        "temperature must be positive, got {temperature}"
                    )));
                }
                if phi.n_dummies() != n_dummies {
                    return Err(Error::Config(format!(
                        "score matrix has {} dummy columns, distribution expects {}",
                        phi.n_dummies(),
                        n_dummies
                    )));
                }
                let candidates = phi.n_nodes() - 1 + n_dummies;
                if k_neighbors == 0 || k_neighbors > candidates {
                    return Err(Error::Config(format!(
                        "k = {k_neighbors} out of range for {candidates} candidates per row"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One sampled neighborhood before dummy removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSubset {
    /// Row (target node) the subset belongs to.
    pub node: usize,
    /// Sorted member indices; values `>= n_nodes` are dummy candidates.
    pub members: Vec<usize>,
    /// Size as sampled, before dummy removal.
    pub k: usize,
}

impl RowSubset {
    pub fn new(node: usize, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        debug_assert!(!members.contains(&node));
        let k = members.len();
        Self { node, members, k }
    }
}
