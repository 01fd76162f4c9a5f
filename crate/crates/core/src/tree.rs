//! Finite event trees and the JSON model format.
//!
//! A tree encodes a finite filtered probability space: the nodes at depth
//! `t` are the atoms of the time-`t` sigma-field, each edge carries the
//! one-step conditional probability of moving from parent to child, and each
//! node carries the `d` risky asset prices observed there.
//!
//! Trees are only ever constructed through validation, so every
//! [`EventTree`] in circulation satisfies the structural invariants:
//! one root, strictly positive edge probabilities summing to one below every
//! non-terminal node, all leaves at the horizon, finite prices of a common
//! dimension.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MvhError, Result};
use crate::process::Claim;

/// Absolute tolerance on the sum of one-step probabilities below a node.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// One node record of the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: String,
    pub parent: Option<String>,
    pub p: f64,
    pub price: Vec<f64>,
}

/// One claim record of the model file; payoffs are keyed by terminal id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSpec {
    pub label: String,
    pub payoff: BTreeMap<String, f64>,
}

/// The on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub nodes: Vec<RawNode>,
    #[serde(default)]
    pub claims: Vec<ClaimSpec>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("model serializes");
        out.push('\n');
        out
    }

    /// Validates the document and builds the tree together with its claims.
    pub fn build(&self) -> Result<(EventTree, Vec<Claim>)> {
        let (tree, mut violations) = assemble(self.d, Some(self.horizon), &self.nodes);
        let claims = match &tree {
            Some(tree) => {
                let (claims, claim_violations) = build_claims(tree, &self.claims);
                violations.extend(claim_violations);
                claims
            }
            None => Vec::new(),
        };
        match tree {
            Some(tree) if violations.is_empty() => Ok((tree, claims)),
            _ => Err(MvhError::InvalidModel(ValidationReport { violations })),
        }
    }
}

/// A single structural defect, located by node id where possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoAssets,
    ZeroHorizon,
    NoRoot,
    MultipleRoots(Vec<String>),
    DuplicateId(String),
    UnknownParent { node: String, parent: String },
    RootProbability { node: String, p: f64 },
    BadProbability { node: String, p: f64 },
    ProbabilitySum { node: String, sum: f64 },
    DimensionMismatch { node: String, expected: usize, found: usize },
    NonFinitePrice(String),
    Unreachable(String),
    BeyondHorizon { node: String, time: usize, horizon: usize },
    NonTerminalLeaf { node: String, time: usize, horizon: usize },
    ClaimUnknownNode { label: String, node: String },
    ClaimNotTerminal { label: String, node: String },
    ClaimMissingPayoff { label: String, node: String },
    ClaimNonFinite { label: String, node: String },
    DuplicateClaim(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoAssets => write!(f, "model must have at least one risky asset (d >= 1)"),
            ZeroHorizon => write!(f, "horizon T must be at least 1"),
            NoRoot => write!(f, "no root node (a node with \"parent\": null)"),
            MultipleRoots(ids) => write!(f, "multiple root nodes: {}", ids.join(", ")),
            DuplicateId(id) => write!(f, "duplicate node id {id}"),
            UnknownParent { node, parent } => {
                write!(f, "orphan node {node}: parent {parent} does not exist")
            }
            RootProbability { node, p } => write!(f, "root {node} must have p = 1, found {p}"),
            BadProbability { node, p } => {
                write!(f, "edge probability {p} into node {node} is not in (0, 1]")
            }
            ProbabilitySum { node, sum } => write!(f, "probabilities sum to {sum} at node {node}"),
            DimensionMismatch { node, expected, found } => write!(
                f,
                "price dimension mismatch at node {node}: expected {expected}, found {found}"
            ),
            NonFinitePrice(node) => write!(f, "non-finite price at node {node}"),
            Unreachable(node) => write!(f, "node {node} is not reachable from the root"),
            BeyondHorizon { node, time, horizon } => {
                write!(f, "node {node} at time {time} lies beyond the horizon T = {horizon}")
            }
            NonTerminalLeaf { node, time, horizon } => write!(
                f,
                "non-terminal leaf {node} at time {time} has no children (T = {horizon})"
            ),
            ClaimUnknownNode { label, node } => {
                write!(f, "claim {label}: payoff references unknown node {node}")
            }
            ClaimNotTerminal { label, node } => {
                write!(f, "claim {label}: node {node} is not terminal")
            }
            ClaimMissingPayoff { label, node } => {
                write!(f, "claim {label}: missing payoff for terminal node {node}")
            }
            ClaimNonFinite { label, node } => {
                write!(f, "claim {label}: non-finite payoff at node {node}")
            }
            DuplicateClaim(label) => write!(f, "duplicate claim label {label}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a model document, collecting all
/// violations rather than stopping at the first.
pub fn validate(model: &ModelFile) -> ValidationReport {
    match model.build() {
        Ok(_) => ValidationReport::default(),
        Err(MvhError::InvalidModel(report)) => report,
        Err(e) => unreachable!("build only fails with InvalidModel, got {e}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// One-step probability of reaching this node from its parent.
    pub prob: f64,
    pub price: Vec<f64>,
    pub time: usize,
}

/// A validated finite event tree. Nodes are stored in breadth-first order,
/// so the root is index 0 and every parent precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    nodes: Vec<Node>,
    horizon: usize,
    assets: usize,
    terminals: Vec<usize>,
    non_terminals: Vec<usize>,
    terminal_slot: Vec<Option<usize>>,
    path_prob: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EventTree {
    /// Builds a tree from raw node records; the horizon is inferred from the
    /// deepest node when `horizon` is `None`.
    pub fn from_nodes(d: usize, horizon: Option<usize>, nodes: &[RawNode]) -> Result<Self> {
        match assemble(d, horizon, nodes) {
            (Some(tree), v) if v.is_empty() => Ok(tree),
            (_, violations) => Err(MvhError::InvalidModel(ValidationReport { violations })),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> &Node {
        &self.nodes[n]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    pub fn non_terminals(&self) -> &[usize] {
        &self.non_terminals
    }

    pub fn terminal_slot(&self, n: usize) -> Option<usize> {
        self.terminal_slot[n]
    }

    pub fn is_terminal(&self, n: usize) -> bool {
        self.terminal_slot[n].is_some()
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.nodes[n].children
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.nodes[n].parent
    }

    pub fn price(&self, n: usize) -> &[f64] {
        &self.nodes[n].price
    }

    pub fn id(&self, n: usize) -> &str {
        &self.nodes[n].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Product of edge probabilities from the root down to `n`.
    pub fn path_prob(&self, n: usize) -> f64 {
        self.path_prob[n]
    }

    /// Path probabilities of the terminal nodes, in terminal order.
    pub fn terminal_weights(&self) -> Vec<f64> {
        self.terminals.iter().map(|&n| self.path_prob[n]).collect()
    }

    /// Price increment `S(n) - S(parent(n))`; zero at the root.
    pub fn increment(&self, n: usize) -> Vec<f64> {
        match self.nodes[n].parent {
            Some(p) => self.nodes[n]
                .price
                .iter()
                .zip(&self.nodes[p].price)
                .map(|(a, b)| a - b)
                .collect(),
            None => vec![0.0; self.assets],
        }
    }

    /// Nodes of the subtree rooted at `n`, including `n`.
    pub fn subtree(&self, n: usize) -> Vec<usize> {
        let mut out = vec![n];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.nodes[out[i]].children);
            i += 1;
        }
        out
    }

    pub fn ids(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn terminal_ids(&self) -> Vec<String> {
        self.terminals.iter().map(|&n| self.nodes[n].id.clone()).collect()
    }

    /// Same tree with every price replaced by `f(price)`.
    pub fn map_prices(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let raw: Vec<RawNode> = self
            .to_raw()
            .into_iter()
            .map(|mut r| {
                r.price = f(&r.price);
                r
            })
            .collect();
        let d = raw.first().map_or(self.assets, |r| r.price.len());
        EventTree::from_nodes(d, Some(self.horizon), &raw)
    }

    pub fn to_raw(&self) -> Vec<RawNode> {
        self.nodes
            .iter()
            .map(|n| RawNode {
                id: n.id.clone(),
                parent: n.parent.map(|p| self.nodes[p].id.clone()),
                p: n.prob,
                price: n.price.clone(),
            })
            .collect()
    }

    pub fn to_model(&self, claims: &[Claim]) -> ModelFile {
        ModelFile {
            d: self.assets,
            horizon: self.horizon,
            nodes: self.to_raw(),
            claims: claims.iter().map(|c| c.to_spec(self)).collect(),
        }
    }
}

fn assemble(
    d: usize,
    horizon: Option<usize>,
    raw: &[RawNode],
) -> (Option<EventTree>, Vec<Violation>) {
    let mut violations = Vec::new();
    if d == 0 {
        violations.push(Violation::NoAssets);
    }

    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(raw.len());
    for (i, node) in raw.iter().enumerate() {
        if by_id.insert(node.id.as_str(), i).is_some() {
            violations.push(Violation::DuplicateId(node.id.clone()));
        }
    }

    let roots: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].parent.is_none()).collect();
    match roots.len() {
        0 => violations.push(Violation::NoRoot),
        1 => {}
        _ => violations.push(Violation::MultipleRoots(
            roots.iter().map(|&i| raw[i].id.clone()).collect(),
        )),
    }

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); raw.len()];
    for (i, node) in raw.iter().enumerate() {
        if let Some(pid) = &node.parent {
            match by_id.get(pid.as_str()) {
                Some(&p) => children[p].push(i),
                None => violations.push(Violation::UnknownParent {
                    node: node.id.clone(),
                    parent: pid.clone(),
                }),
            }
        }
    }

    for node in raw {
        if node.price.len() != d {
            violations.push(Violation::DimensionMismatch {
                node: node.id.clone(),
                expected: d,
                found: node.price.len(),
            });
        }
        if node.price.iter().any(|x| !x.is_finite()) {
            violations.push(Violation::NonFinitePrice(node.id.clone()));
        }
        if node.parent.is_none() {
            if (node.p - 1.0).abs() > PROB_SUM_TOL || !node.p.is_finite() {
                violations.push(Violation::RootProbability { node: node.id.clone(), p: node.p });
            }
        } else if !(node.p > 0.0 && node.p <= 1.0) {
            violations.push(Violation::BadProbability { node: node.id.clone(), p: node.p });
        }
    }

    if roots.len() != 1 {
        return (None, violations);
    }

    // breadth-first from the root; children keep file order
    let mut order = Vec::with_capacity(raw.len());
    let mut time = vec![usize::MAX; raw.len()];
    let mut queue = VecDeque::from([roots[0]]);
    time[roots[0]] = 0;
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &children[i] {
            if time[c] == usize::MAX {
                time[c] = time[i] + 1;
                queue.push_back(c);
            }
        }
    }
    for (i, node) in raw.iter().enumerate() {
        if time[i] == usize::MAX {
            violations.push(Violation::Unreachable(node.id.clone()));
        }
    }

    let horizon = horizon.unwrap_or_else(|| order.iter().map(|&i| time[i]).max().unwrap_or(0));
    if horizon == 0 {
        violations.push(Violation::ZeroHorizon);
    }

    for &i in &order {
        let t = time[i];
        if t > horizon {
            violations.push(Violation::BeyondHorizon { node: raw[i].id.clone(), time: t, horizon });
        } else if children[i].is_empty() {
            if t < horizon {
                violations.push(Violation::NonTerminalLeaf {
                    node: raw[i].id.clone(),
                    time: t,
                    horizon,
                });
            }
        } else {
            let sum: f64 = children[i].iter().map(|&c| raw[c].p).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL || !sum.is_finite() {
                violations.push(Violation::ProbabilitySum { node: raw[i].id.clone(), sum });
            }
        }
    }

    if !violations.is_empty() {
        return (None, violations);
    }

    let mut new_index = vec![0usize; raw.len()];
    for (k, &i) in order.iter().enumerate() {
        new_index[i] = k;
    }
    let nodes: Vec<Node> = order
        .iter()
        .map(|&i| Node {
            id: raw[i].id.clone(),
            parent: raw[i].parent.as_ref().map(|pid| new_index[by_id[pid.as_str()]]),
            children: children[i].iter().map(|&c| new_index[c]).collect(),
            prob: if raw[i].parent.is_none() { 1.0 } else { raw[i].p },
            price: raw[i].price.clone(),
            time: time[i],
        })
        .collect();

    let mut path_prob = vec![1.0; nodes.len()];
    for k in 1..nodes.len() {
        let p = nodes[k].parent.expect("non-root has a parent");
        path_prob[k] = path_prob[p] * nodes[k].prob;
    }
    let mut terminals = Vec::new();
    let mut non_terminals = Vec::new();
    let mut terminal_slot = vec![None; nodes.len()];
    for (k, node) in nodes.iter().enumerate() {
        if node.children.is_empty() {
            terminal_slot[k] = Some(terminals.len());
            terminals.push(k);
        } else {
            non_terminals.push(k);
        }
    }
    let index = nodes.iter().enumerate().map(|(k, n)| (n.id.clone(), k)).collect();

    let tree = EventTree {
        nodes,
        horizon,
        assets: d,
        terminals,
        non_terminals,
        terminal_slot,
        path_prob,
        index,
    };
    (Some(tree), violations)
}

fn build_claims(tree: &EventTree, specs: &[ClaimSpec]) -> (Vec<Claim>, Vec<Violation>) {
    let mut violations = Vec::new();
    let mut claims = Vec::with_capacity(specs.len());
    let mut seen = std::collections::HashSet::new();
    for spec in specs {
        if !seen.insert(spec.label.as_str()) {
            violations.push(Violation::DuplicateClaim(spec.label.clone()));
        }
        let mut payoff = vec![f64::NAN; tree.terminals().len()];
        let mut ok = true;
        for (id, &value) in &spec.payoff {
            match tree.index_of(id) {
                None => {
                    ok = false;
                    violations.push(Violation::ClaimUnknownNode {
                        label: spec.label.clone(),
                        node: id.clone(),
                    });
                }
                Some(n) => match tree.terminal_slot(n) {
                    None => {
                        ok = false;
                        violations.push(Violation::ClaimNotTerminal {
                            label: spec.label.clone(),
                            node: id.clone(),
                        });
                    }
                    Some(s) => {
                        if !value.is_finite() {
                            ok = false;
                            violations.push(Violation::ClaimNonFinite {
                                label: spec.label.clone(),
                                node: id.clone(),
                            });
                        }
                        payoff[s] = value;
                    }
                },
            }
        }
        for (s, &n) in tree.terminals().iter().enumerate() {
            if payoff[s].is_nan() && !spec.payoff.contains_key(tree.id(n)) {
                ok = false;
                violations.push(Violation::ClaimMissingPayoff {
                    label: spec.label.clone(),
                    node: tree.id(n).to_string(),
                });
            }
        }
        if ok {
            claims.push(Claim::new(spec.label.clone(), payoff));
        }
    }
    (claims, violations)
}
