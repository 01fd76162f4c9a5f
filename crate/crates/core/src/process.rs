//! Processes on an event tree: adapted values, predictable strategies,
//! one-step measures, claims, and the two recursions everything else is
//! built from (backward conditional expectation and forward integration).

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::tree::{ClaimSpec, EventTree};

/// One scalar per node, in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdaptedProcess(Vec<f64>);

impl AdaptedProcess {
    pub fn new(values: Vec<f64>) -> Self {
        AdaptedProcess(values)
    }

    pub fn zeros(tree: &EventTree) -> Self {
        AdaptedProcess(vec![0.0; tree.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, n: usize, value: f64) {
        self.0[n] = value;
    }

    /// Values at the terminal nodes, in terminal order.
    pub fn terminal(&self, tree: &EventTree) -> Vec<f64> {
        tree.terminals().iter().map(|&n| self.0[n]).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        AdaptedProcess(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        AdaptedProcess(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for AdaptedProcess {
    type Output = f64;

    fn index(&self, n: usize) -> &f64 {
        &self.0[n]
    }
}

/// A `dim`-vector per node, node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorProcess {
    dim: usize,
    data: Vec<f64>,
}

impl VectorProcess {
    pub fn from_fn(tree: &EventTree, dim: usize, f: impl Fn(usize) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(tree.len() * dim);
        for n in 0..tree.len() {
            let row = f(n);
            assert_eq!(row.len(), dim, "row dimension at node {n}");
            data.extend(row);
        }
        VectorProcess { dim, data }
    }

    /// The price process of the tree.
    pub fn prices(tree: &EventTree) -> Self {
        Self::from_fn(tree, tree.assets(), |n| tree.price(n).to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    /// `X(c) - X(parent(c))`.
    pub fn increment(&self, tree: &EventTree, c: usize) -> Vec<f64> {
        match tree.parent(c) {
            Some(p) => self.at(c).iter().zip(self.at(p)).map(|(a, b)| a - b).collect(),
            None => vec![0.0; self.dim],
        }
    }

    pub fn component(&self, i: usize) -> AdaptedProcess {
        AdaptedProcess((0..self.data.len() / self.dim).map(|n| self.at(n)[i]).collect())
    }
}

/// A predictable strategy: a `dim`-vector chosen at each non-terminal node
/// and held over the step into each of its children. Terminal rows are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl Strategy {
    pub fn zeros(tree: &EventTree, dim: usize) -> Self {
        let rows = (0..tree.len())
            .map(|n| if tree.is_terminal(n) { Vec::new() } else { vec![0.0; dim] })
            .collect();
        Strategy { dim, rows }
    }

    /// The same holding `value` at every non-terminal node.
    pub fn constant(tree: &EventTree, value: &[f64]) -> Self {
        let mut s = Self::zeros(tree, value.len());
        for &n in tree.non_terminals() {
            s.rows[n].copy_from_slice(value);
        }
        s
    }

    pub fn from_fn(tree: &EventTree, dim: usize, f: impl Fn(usize) -> Vec<f64>) -> Self {
        let mut s = Self::zeros(tree, dim);
        for &n in tree.non_terminals() {
            let row = f(n);
            assert_eq!(row.len(), dim, "strategy dimension at node {n}");
            s.rows[n] = row;
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn set(&mut self, n: usize, row: &[f64]) {
        assert_eq!(row.len(), self.dim);
        self.rows[n].copy_from_slice(row);
    }

    /// True when rows exist exactly on the non-terminal nodes of `tree`.
    pub fn is_defined_on(&self, tree: &EventTree) -> bool {
        self.rows.len() == tree.len()
            && (0..tree.len()).all(|n| {
                let want = if tree.is_terminal(n) { 0 } else { self.dim };
                self.rows[n].len() == want
            })
    }

    pub fn combine(&self, a: f64, other: &Strategy, b: f64) -> Strategy {
        assert_eq!(self.dim, other.dim);
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        Strategy { dim: self.dim, rows }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// One-step conditional weights `mu(n | parent(n))` per node; the root
/// carries 1. Weights need not be positive (signed measures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeMeasure(Vec<f64>);

impl EdgeMeasure {
    pub fn new(weights: Vec<f64>) -> Self {
        EdgeMeasure(weights)
    }

    /// The reference probability of the tree.
    pub fn physical(tree: &EventTree) -> Self {
        EdgeMeasure(tree.nodes().iter().map(|n| n.prob).collect())
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.0[n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// Path weights of the terminal nodes, in terminal order.
    pub fn terminal_weights(&self, tree: &EventTree) -> Vec<f64> {
        let mut path = vec![1.0; tree.len()];
        for n in 1..tree.len() {
            let p = tree.parent(n).expect("non-root");
            path[n] = path[p] * self.0[n];
        }
        tree.terminals().iter().map(|&n| path[n]).collect()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }
}

/// A contingent claim: one payoff per terminal node, in terminal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    label: String,
    payoff: Vec<f64>,
}

impl Claim {
    pub fn new(label: impl Into<String>, payoff: Vec<f64>) -> Self {
        Claim { label: label.into(), payoff }
    }

    /// `f` applied to the terminal price vector.
    pub fn from_terminal_prices(
        tree: &EventTree,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Self {
        Claim::new(label, tree.terminals().iter().map(|&n| f(tree.price(n))).collect())
    }

    /// European call on asset `asset` struck at `strike`.
    pub fn call(tree: &EventTree, asset: usize, strike: f64) -> Self {
        Claim::from_terminal_prices(tree, format!("call_{asset}_{strike}"), |s| {
            (s[asset] - strike).max(0.0)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn to_spec(&self, tree: &EventTree) -> ClaimSpec {
        ClaimSpec {
            label: self.label.clone(),
            payoff: tree.terminal_ids().into_iter().zip(self.payoff.iter().copied()).collect(),
        }
    }
}

/// Backward recursion `X(n) = sum_c mu(c|n) X(c)` from terminal values.
pub fn conditional_expectation(
    tree: &EventTree,
    terminal: &[f64],
    measure: &EdgeMeasure,
) -> AdaptedProcess {
    assert_eq!(terminal.len(), tree.terminals().len());
    let mut out = vec![0.0; tree.len()];
    for (s, &n) in tree.terminals().iter().enumerate() {
        out[n] = terminal[s];
    }
    for &n in tree.non_terminals().iter().rev() {
        out[n] = tree.children(n).iter().map(|&c| measure.weight(c) * out[c]).sum();
    }
    AdaptedProcess(out)
}

/// Expectation of a terminal vector under the reference probability.
pub fn expectation(tree: &EventTree, terminal: &[f64]) -> f64 {
    tree.terminals().iter().zip(terminal).map(|(&n, x)| tree.path_prob(n) * x).sum()
}

/// `E[f g]` under the reference probability.
pub fn inner(tree: &EventTree, f: &[f64], g: &[f64]) -> f64 {
    tree.terminals()
        .iter()
        .zip(f.iter().zip(g))
        .map(|(&n, (a, b))| tree.path_prob(n) * a * b)
        .sum()
}

/// Discrete stochastic integral `(h . X)`: zero at the root and
/// `I(c) = I(n) + h(n) . (X(c) - X(n))` along every edge.
pub fn integrate(tree: &EventTree, h: &Strategy, x: &VectorProcess) -> AdaptedProcess {
    assert_eq!(h.dim(), x.dim());
    let mut out = vec![0.0; tree.len()];
    for &n in tree.non_terminals() {
        let row = h.at(n);
        for &c in tree.children(n) {
            let step: f64 = row
                .iter()
                .zip(x.at(c).iter().zip(x.at(n)))
                .map(|(a, (xc, xn))| a * (xc - xn))
                .sum();
            out[c] = out[n] + step;
        }
    }
    AdaptedProcess(out)
}

/// Gains process `G(theta) = theta . S`.
pub fn gains(tree: &EventTree, theta: &Strategy) -> AdaptedProcess {
    integrate(tree, theta, &VectorProcess::prices(tree))
}

/// `E[(H - x0 - G_T(theta))^2]` under the reference probability.
pub fn hedging_error(tree: &EventTree, claim: &Claim, theta: &Strategy, x0: f64) -> f64 {
    let g = gains(tree, theta).terminal(tree);
    let err: Vec<f64> = claim.payoff().iter().zip(&g).map(|(h, g)| h - x0 - g).collect();
    inner(tree, &err, &err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::builtin_fixture;

    #[test]
    fn conditional_expectation_of_claim() {
        let (tree, claim) = builtin_fixture("A").unwrap();
        let x = conditional_expectation(&tree, claim.payoff(), &EdgeMeasure::physical(&tree));
        assert_eq!(x[0], 1.5);
        assert_eq!(x.terminal(&tree), vec![3.0, 0.0]);
    }

    #[test]
    fn conditional_expectation_of_constant() {
        let (tree, _) = builtin_fixture("C").unwrap();
        let ones = vec![1.0; tree.terminals().len()];
        let x = conditional_expectation(&tree, &ones, &EdgeMeasure::physical(&tree));
        assert!(x.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn gains_of_half_unit() {
        let (tree, _) = builtin_fixture("A").unwrap();
        let g = gains(&tree, &Strategy::constant(&tree, &[0.5]));
        assert_eq!(g.terminal(&tree), vec![2.0, -1.0]);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn gains_of_zero_and_unit() {
        let (tree, _) = builtin_fixture("B").unwrap();
        let zero = gains(&tree, &Strategy::zeros(&tree, 1));
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let unit = gains(&tree, &Strategy::constant(&tree, &[1.0]));
        assert_eq!(unit.terminal(&tree), vec![12.0, 2.0, -1.0]);
    }

    #[test]
    fn hedging_error_of_replicating_strategy() {
        let (tree, claim) = builtin_fixture("A").unwrap();
        let e = hedging_error(&tree, &claim, &Strategy::constant(&tree, &[0.5]), 1.0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn strategy_defined_on_non_terminals() {
        let (tree, _) = builtin_fixture("C").unwrap();
        let s = Strategy::zeros(&tree, 1);
        assert!(s.is_defined_on(&tree));
        for &n in tree.terminals() {
            assert!(s.at(n).is_empty());
        }
    }
}
