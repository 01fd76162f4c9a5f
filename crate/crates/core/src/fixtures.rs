//! Built-in hand-sized markets.
//!
//! * `A`: one period, `p = (1/2, 1/2)`, `S0 = 4`, `S1 in {8, 2}`, claim `H = (3, 0)`.
//!   Complete; the martingale measure is unique.
//! * `B`: one period, `p = (0.1, 0.45, 0.45)`, `S0 = 10`, `S1 in {22, 12, 9}`,
//!   claim `H = (S1 - 10)^+ = (12, 2, 0)`. Incomplete, and the variance-optimal
//!   signed martingale density is negative on the first state.
//! * `C`: two periods, `d = 1`. Root price 100; a trinomial first step to
//!   115 / 100 / 88 with probabilities 0.3 / 0.4 / 0.3; then a binomial step
//!   from every time-1 node with factors 1.1 / 0.92 at probability 1/2 each.
//!   Claim: call struck at 100.
//! * `D`: two periods, `d = 1`. Root price 10, first step to 9 / 11 / 13 with
//!   probabilities 1/4, 1/2, 1/4, then a deterministic second step. The
//!   variance-optimal density is (2, 1, 0): it vanishes on the whole subtree
//!   below the price-13 node. Claim: call struck at 10.

use crate::error::{MvhError, Result};
use crate::process::Claim;
use crate::tree::{EventTree, RawNode};

pub const FIXTURE_NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn node(id: &str, parent: Option<&str>, p: f64, price: f64) -> RawNode {
    RawNode {
        id: id.to_string(),
        parent: parent.map(str::to_string),
        p,
        price: vec![price],
    }
}

pub fn builtin_fixture(name: &str) -> Result<(EventTree, Claim)> {
    match name {
        "A" => {
            let tree = EventTree::from_nodes(
                1,
                Some(1),
                &[node("0", None, 1.0, 4.0), node("up", Some("0"), 0.5, 8.0), node("down", Some("0"), 0.5, 2.0)],
            )?;
            Ok((tree, Claim::new("H", vec![3.0, 0.0])))
        }
        "B" => {
            let tree = EventTree::from_nodes(
                1,
                Some(1),
                &[
                    node("0", None, 1.0, 10.0),
                    node("s1", Some("0"), 0.1, 22.0),
                    node("s2", Some("0"), 0.45, 12.0),
                    node("s3", Some("0"), 0.45, 9.0),
                ],
            )?;
            let claim = Claim::from_terminal_prices(&tree, "call_10", |s| (s[0] - 10.0).max(0.0));
            Ok((tree, claim))
        }
        "C" => {
            let mut nodes = vec![node("0", None, 1.0, 100.0)];
            let first = [("u", 0.3, 115.0), ("m", 0.4, 100.0), ("d", 0.3, 88.0)];
            for (id, p, s) in first {
                nodes.push(node(id, Some("0"), p, s));
            }
            for (id, _, s) in first {
                nodes.push(node(&format!("{id}u"), Some(id), 0.5, s * 1.1));
                nodes.push(node(&format!("{id}d"), Some(id), 0.5, s * 0.92));
            }
            let tree = EventTree::from_nodes(1, Some(2), &nodes)?;
            let claim = Claim::from_terminal_prices(&tree, "call_100", |s| (s[0] - 100.0).max(0.0));
            Ok((tree, claim))
        }
        "D" => {
            let tree = EventTree::from_nodes(
                1,
                Some(2),
                &[
                    node("0", None, 1.0, 10.0),
                    node("a", Some("0"), 0.25, 9.0),
                    node("b", Some("0"), 0.5, 11.0),
                    node("c", Some("0"), 0.25, 13.0),
                    node("a1", Some("a"), 1.0, 9.0),
                    node("b1", Some("b"), 1.0, 11.0),
                    node("c1", Some("c"), 1.0, 13.0),
                ],
            )?;
            let claim = Claim::from_terminal_prices(&tree, "call_10", |s| (s[0] - 10.0).max(0.0));
            Ok((tree, claim))
        }
        other => Err(MvhError::UnknownFixture(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_a_is_the_binomial() {
        let (tree, claim) = builtin_fixture("A").unwrap();
        assert_eq!(tree.price(0), &[4.0]);
        assert_eq!(tree.terminals().len(), 2);
        assert_eq!(claim.payoff(), &[3.0, 0.0]);
    }

    #[test]
    fn fixture_b_is_the_trinomial() {
        let (tree, claim) = builtin_fixture("B").unwrap();
        let incs: Vec<f64> = tree.terminals().iter().map(|&n| tree.increment(n)[0]).collect();
        assert_eq!(incs, vec![12.0, 2.0, -1.0]);
        assert_eq!(claim.payoff(), &[12.0, 2.0, 0.0]);
    }

    #[test]
    fn fixture_c_shape() {
        let (tree, _) = builtin_fixture("C").unwrap();
        assert_eq!(tree.horizon(), 2);
        assert_eq!(tree.terminals().len(), 6);
        let total: f64 = tree.terminal_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_fixture() {
        assert!(matches!(builtin_fixture("Z"), Err(MvhError::UnknownFixture(_))));
    }
}
