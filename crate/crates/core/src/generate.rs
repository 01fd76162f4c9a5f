//! Seeded random event trees for randomized checks.
//!
//! At every non-terminal node a martingale weight vector `q` is drawn first
//! and the relative price jumps are centred under `q`, so `q` is an
//! equivalent martingale measure by construction and no generated tree admits
//! arbitrage. The reference probability is `q` tilted by a random factor in
//! `exp([-drift, drift])`; `drift = 0` makes the reference probability itself
//! a martingale measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MvhError, Result};
use crate::process::Claim;
use crate::tree::{EventTree, RawNode};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub depth: usize,
    pub max_branching: usize,
    pub assets: usize,
    /// Half-width of the relative price jumps; must lie in `(0, 0.5)` so
    /// prices stay strictly positive after centring.
    pub jump_scale: f64,
    pub drift: f64,
    /// Forces the root to branch into `max(max_branching, assets + 2)`
    /// children, which makes the market incomplete at the root.
    pub force_incomplete: bool,
}

impl GeneratorConfig {
    pub fn new(seed: u64, depth: usize, max_branching: usize, assets: usize) -> Self {
        GeneratorConfig {
            seed,
            depth,
            max_branching,
            assets,
            jump_scale: 0.2,
            drift: 0.25,
            force_incomplete: false,
        }
    }
}

pub fn generate_random_tree(cfg: &GeneratorConfig) -> Result<EventTree> {
    if cfg.depth < 1 {
        return Err(MvhError::Generator("depth must be at least 1".into()));
    }
    if cfg.max_branching < 2 {
        return Err(MvhError::Generator("max_branching must be at least 2".into()));
    }
    if cfg.assets < 1 {
        return Err(MvhError::Generator("at least one asset is required".into()));
    }
    if !(cfg.jump_scale > 0.0 && cfg.jump_scale < 0.5) {
        return Err(MvhError::Generator("jump_scale must lie in (0, 0.5)".into()));
    }
    if !(cfg.drift >= 0.0 && cfg.drift.is_finite()) {
        return Err(MvhError::Generator("drift must be finite and non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.assets;
    let root_price: Vec<f64> = (0..d).map(|_| rng.random_range(50.0..150.0)).collect();
    let mut nodes = vec![RawNode {
        id: "n0".into(),
        parent: None,
        p: 1.0,
        price: root_price,
    }];
    let mut frontier = vec![0usize];
    for level in 0..cfg.depth {
        let mut next = Vec::new();
        for &n in &frontier {
            let k = if level == 0 && cfg.force_incomplete {
                cfg.max_branching.max(d + 2)
            } else {
                rng.random_range(2..=cfg.max_branching)
            };
            let q = normalized((0..k).map(|_| rng.random_range(0.5..1.5)).collect());
            let mut jumps = vec![vec![0.0; d]; k];
            for i in 0..d {
                for jump in jumps.iter_mut() {
                    jump[i] = cfg.jump_scale * rng.random_range(-1.0..1.0);
                }
                let mean: f64 = q.iter().zip(&jumps).map(|(w, r)| w * r[i]).sum();
                for jump in jumps.iter_mut() {
                    jump[i] -= mean;
                }
            }
            let p = normalized(
                q.iter().map(|w| w * (cfg.drift * rng.random_range(-1.0..1.0)).exp()).collect(),
            );
            let parent_id = nodes[n].id.clone();
            let parent_price = nodes[n].price.clone();
            for c in 0..k {
                let id = format!("n{}", nodes.len());
                let price = parent_price.iter().zip(&jumps[c]).map(|(s, r)| s * (1.0 + r)).collect();
                nodes.push(RawNode { id, parent: Some(parent_id.clone()), p: p[c], price });
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    EventTree::from_nodes(d, Some(cfg.depth), &nodes)
}

/// Normalizes positive weights to sum to one, putting any rounding residue
/// on the largest weight so the sum is exact to the last bit where possible.
fn normalized(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut out: Vec<f64> = w.iter().map(|x| x / total).collect();
    let imax = (0..out.len()).max_by(|&a, &b| out[a].total_cmp(&out[b])).unwrap_or(0);
    let rest: f64 = out.iter().enumerate().filter(|&(i, _)| i != imax).map(|(_, x)| x).sum();
    out[imax] = 1.0 - rest;
    out
}

/// Random claims for a generated tree: uniform terminal payoffs and a call
/// on the first asset with a random strike around the root price.
pub fn random_claims(tree: &EventTree, seed: u64) -> Vec<Claim> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let s0 = tree.price(tree.root())[0];
    let payoff = (0..tree.terminals().len()).map(|_| rng.random_range(0.0..2.0 * s0)).collect();
    let strike = s0 * rng.random_range(0.8..1.2);
    let call = Claim::from_terminal_prices(tree, "call", |s| (s[0] - strike).max(0.0));
    vec![Claim::new("random", payoff), call]
}
