//! The gains span and orthogonal projections onto it.
//!
//! The terminal gains of all predictable strategies form the span of the
//! elementary one-step gains `1_{path through n} (S^i(child) - S^i(n))`, one
//! per (non-terminal node, asset) pair. Projections are taken in `L^2` of the
//! reference probability with exact path weights.

use serde::{Deserialize, Serialize};

use crate::error::{MvhError, Result};
use crate::linalg::{mat_vec, weighted_min_norm_lstsq, Mat};
use crate::process::{AdaptedProcess, EdgeMeasure, Strategy, VectorProcess};
use crate::tree::EventTree;

/// Elementary strategies and their terminal gains (terminals x elements).
#[derive(Debug, Clone)]
pub struct GainsBasis {
    elements: Vec<(usize, usize)>,
    matrix: Mat<f64>,
    rank: usize,
}

impl GainsBasis {
    /// `(node, asset)` of every basis column.
    pub fn elements(&self) -> &[(usize, usize)] {
        &self.elements
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Dimension of the gains span under the reference probability.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.matrix.nrows()).map(|r| self.matrix[(r, k)]).collect()
    }

    /// Strategy whose holding of asset `i` at node `n` is the coefficient of
    /// element `(n, i)`.
    pub fn strategy(&self, tree: &EventTree, coefficients: &[f64]) -> Strategy {
        let mut s = Strategy::zeros(tree, tree.assets());
        for (k, &(n, i)) in self.elements.iter().enumerate() {
            let mut row = s.at(n).to_vec();
            row[i] = coefficients[k];
            s.set(n, &row);
        }
        s
    }
}

pub fn gains_basis(tree: &EventTree) -> GainsBasis {
    let d = tree.assets();
    let mut offset = vec![usize::MAX; tree.len()];
    let mut elements = Vec::with_capacity(tree.non_terminals().len() * d);
    for &n in tree.non_terminals() {
        offset[n] = elements.len();
        elements.extend((0..d).map(|i| (n, i)));
    }
    let mut matrix = Mat::zeros(tree.terminals().len(), elements.len());
    for (s, &leaf) in tree.terminals().iter().enumerate() {
        let mut c = leaf;
        while let Some(n) = tree.parent(c) {
            for (i, inc) in tree.increment(c).into_iter().enumerate() {
                matrix[(s, offset[n] + i)] = inc;
            }
            c = n;
        }
    }
    let weights = tree.terminal_weights();
    let rank = if elements.is_empty() {
        0
    } else {
        weighted_min_norm_lstsq(&matrix, &vec![0.0; weights.len()], &weights).rank
    };
    GainsBasis { elements, matrix, rank }
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// Minimum-norm coefficients on the basis elements.
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Orthogonal projection of a terminal vector onto the gains span.
pub fn project_l2(tree: &EventTree, target: &[f64], basis: &GainsBasis) -> Projection {
    assert_eq!(target.len(), tree.terminals().len());
    let weights = tree.terminal_weights();
    let sol = weighted_min_norm_lstsq(&basis.matrix, target, &weights);
    let fitted = mat_vec(&basis.matrix, &sol.x);
    let residual = target.iter().zip(&fitted).map(|(t, f)| t - f).collect();
    Projection { coefficients: sol.x, fitted, residual }
}

/// Node-by-node weighted regression of the increments of a scalar process
/// on the increments of a vector process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Minimum-norm regression coefficients per non-terminal node.
    pub coefficients: Strategy,
    /// Residual increments `dM - psi . dY` per node; zero at the root.
    pub residual_increments: AdaptedProcess,
    /// Cumulative residual process, zero at the root.
    pub residual: AdaptedProcess,
    /// Rank of the conditional second-moment matrix of the regressor
    /// increments per node (zero at terminals).
    pub rank: Vec<usize>,
}

impl RegressionResult {
    /// Conditional second-moment matrix `sum_c mu(c|n) dY_c dY_c^T`.
    pub fn second_moment(
        tree: &EventTree,
        regressors: &VectorProcess,
        measure: &EdgeMeasure,
        n: usize,
    ) -> Mat<f64> {
        let dim = regressors.dim();
        let mut m = Mat::zeros(dim, dim);
        for &c in tree.children(n) {
            let dy = regressors.increment(tree, c);
            let w = measure.weight(c);
            for a in 0..dim {
                for b in 0..dim {
                    m[(a, b)] += w * dy[a] * dy[b];
                }
            }
        }
        m
    }
}

/// At each non-terminal node `n`, `psi(n)` minimizes
/// `sum_c mu(c|n) (dM_c - psi . dY_c)^2` (minimum norm when the conditional
/// second-moment matrix is singular). Requires a strictly positive measure.
pub fn nodewise_regression(
    tree: &EventTree,
    m: &AdaptedProcess,
    regressors: &VectorProcess,
    measure: &EdgeMeasure,
) -> Result<RegressionResult> {
    let dim = regressors.dim();
    let mut coefficients = Strategy::zeros(tree, dim);
    let mut increments = AdaptedProcess::zeros(tree);
    let mut residual = AdaptedProcess::zeros(tree);
    let mut rank = vec![0; tree.len()];
    for &n in tree.non_terminals() {
        let children = tree.children(n);
        if let Some(&c) = children.iter().find(|&&c| measure.weight(c) <= 0.0) {
            return Err(MvhError::NonPositiveMeasure(tree.id(c).to_string()));
        }
        let design = Mat::from_fn(children.len(), dim, |r, j| {
            regressors.at(children[r])[j] - regressors.at(n)[j]
        });
        let target: Vec<f64> = children.iter().map(|&c| m[c] - m[n]).collect();
        let weights: Vec<f64> = children.iter().map(|&c| measure.weight(c)).collect();
        let sol = weighted_min_norm_lstsq(&design, &target, &weights);
        rank[n] = sol.rank;
        let psi = sol.x;
        coefficients.set(n, &psi);
        for (r, &c) in children.iter().enumerate() {
            let fit: f64 = (0..dim).map(|j| psi[j] * design[(r, j)]).sum();
            let dl = target[r] - fit;
            increments.set(c, dl);
            residual.set(c, residual[n] + dl);
        }
    }
    Ok(RegressionResult { coefficients, residual_increments: increments, residual, rank })
}
