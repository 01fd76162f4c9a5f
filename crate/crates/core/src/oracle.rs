//! Brute-force reference solution used to cross-check the main pipeline.
//!
//! Shares no recursion with the main code path: paths are enumerated by a
//! depth-first walk with their own column layout, `g*` is the minimum-norm
//! solution of the density constraints written as one dense linear system,
//! and `theta^H`, `alpha^H` come from a single joint regression of `H` on the
//! elementary gains and `g*`.

use std::collections::BTreeMap;


use crate::error::{MvhError, Result};
use crate::linalg::{min_norm_lstsq_with, Mat};
use crate::process::Claim;
use crate::tree::EventTree;

/// Largest number of terminal paths the dense oracle accepts.
pub const ORACLE_MAX_TERMINALS: usize = 3000;

const ORACLE_RANK_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Terminal node of each enumerated path, in depth-first order.
    pub paths: Vec<usize>,
    pub path_weights: Vec<f64>,
    /// `g*` per path.
    pub g_star: Vec<f64>,
    pub e_gstar_sq: f64,
    /// Minimum-norm hedge holdings per non-terminal node.
    pub theta_h: BTreeMap<usize, Vec<f64>>,
    pub alpha_h: f64,
    /// `E[(H - G_T(theta^H))^2]`.
    pub objective: f64,
}

impl OracleSolution {
    /// Re-indexes a per-path vector by terminal node, returning values in
    /// the order of `terminals`.
    pub fn align(&self, per_path: &[f64], terminals: &[usize]) -> Vec<f64> {
        let by_node: BTreeMap<usize, f64> = self.paths.iter().copied().zip(per_path.iter().copied()).collect();
        terminals.iter().map(|n| by_node[n]).collect()
    }
}

struct PathSpace {
    /// Terminal node per path.
    leaves: Vec<usize>,
    weights: Vec<f64>,
    /// Elementary gains, paths x columns.
    gains: Mat<f64>,
    columns: Vec<(usize, usize)>,
}

fn enumerate(tree: &EventTree) -> Result<PathSpace> {
    let d = tree.assets();
    // columns in depth-first pre-order of the non-terminal nodes
    let mut columns = Vec::new();
    let mut col_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut stack = vec![tree.root()];
    let mut leaves = Vec::new();
    while let Some(n) = stack.pop() {
        let kids = &tree.node(n).children;
        if kids.is_empty() {
            leaves.push(n);
        } else {
            col_of.insert(n, columns.len());
            columns.extend((0..d).map(|i| (n, i)));
            stack.extend(kids.iter().rev());
        }
    }
    if leaves.len() > ORACLE_MAX_TERMINALS {
        return Err(MvhError::OracleTooLarge { terminals: leaves.len(), max: ORACLE_MAX_TERMINALS });
    }
    let mut gains = Mat::zeros(leaves.len(), columns.len());
    let mut weights = Vec::with_capacity(leaves.len());
    for (r, &leaf) in leaves.iter().enumerate() {
        let mut w = 1.0;
        let mut c = leaf;
        while let Some(n) = tree.node(c).parent {
            w *= tree.node(c).prob;
            for i in 0..d {
                gains[(r, col_of[&n] + i)] = tree.node(c).price[i] - tree.node(n).price[i];
            }
            c = n;
        }
        weights.push(w);
    }
    Ok(PathSpace { leaves, weights, gains, columns })
}

fn pinv_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    min_norm_lstsq_with(a, b, ORACLE_RANK_TOL).x
}

pub fn oracle_full_solve(tree: &EventTree, claim: &Claim) -> Result<OracleSolution> {
    let space = enumerate(tree)?;
    let n = space.leaves.len();
    let k = space.columns.len();
    let sw: Vec<f64> = space.weights.iter().map(|w| w.sqrt()).collect();

    // min |x|^2 s.t. C x = e_1, C = [1 A]^T W^(1/2); then g = W^(-1/2) x
    let c = Mat::from_fn(k + 1, n, |r, s| if r == 0 { sw[s] } else { space.gains[(s, r - 1)] * sw[s] });
    let mut e1 = vec![0.0; k + 1];
    e1[0] = 1.0;
    let x = pinv_solve(&c, &e1);
    let g_star: Vec<f64> = (0..n).map(|s| x[s] / sw[s]).collect();
    let e_gstar_sq = x.iter().map(|v| v * v).sum();

    // joint weighted regression of H on [A | g*]
    let h: Vec<f64> = {
        let slot: BTreeMap<usize, usize> = tree.terminals().iter().enumerate().map(|(s, &t)| (t, s)).collect();
        space.leaves.iter().map(|leaf| claim.payoff()[slot[leaf]]).collect()
    };
    let design = Mat::from_fn(n, k + 1, |s, j| sw[s] * if j < k { space.gains[(s, j)] } else { g_star[s] });
    let target: Vec<f64> = (0..n).map(|s| sw[s] * h[s]).collect();
    let coef = pinv_solve(&design, &target);
    let alpha_h = coef[k];

    let mut theta_h: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (j, &(node, asset)) in space.columns.iter().enumerate() {
        theta_h.entry(node).or_insert_with(|| vec![0.0; tree.assets()])[asset] = coef[j];
    }
    let objective = (0..n)
        .map(|s| {
            let fit: f64 = (0..k).map(|j| space.gains[(s, j)] * coef[j]).sum();
            space.weights[s] * (h[s] - fit).powi(2)
        })
        .sum();

    Ok(OracleSolution {
        paths: space.leaves,
        path_weights: space.weights,
        g_star,
        e_gstar_sq,
        theta_h,
        alpha_h,
        objective,
    })
}
