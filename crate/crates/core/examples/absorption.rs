//! The product Z~* Z* stays at zero once it hits zero. On a finite tree its
//! terminal value is (g*)^2, so hitting zero forces g* = 0 below that node:
//! absorption only appears when g* vanishes somewhere. Fixture D shows it;
//! random trees with non-vanishing g* never hit zero.
//!
//! Run: `cargo run --example absorption`

use mvh::fixtures::builtin_fixture;
use mvh::generate::{generate_random_tree, GeneratorConfig};
use mvh::projection::gains_basis;
use mvh::tree::EventTree;
use mvh::vsmm::{absorption, check_me_nonempty, compute_vsmm};

fn report(label: &str, tree: &EventTree, verbose: bool) -> mvh::Result<usize> {
    let bundle = compute_vsmm(tree, &gains_basis(tree), &check_me_nonempty(tree))?;
    let abs = absorption(tree, &bundle);
    let hits: Vec<&str> = abs.hitting_nodes.iter().map(|&n| tree.id(n)).collect();
    if !verbose && hits.is_empty() {
        return Ok(0);
    }
    println!("{label}: g* non-zero everywhere: {}, product hits zero at {hits:?}", bundle.flags.h3);
    for &n in &abs.hitting_nodes {
        let below = tree.subtree(n);
        let max_below = below.iter().map(|&m| abs.product[m].abs()).fold(0.0, f64::max);
        println!("  below {}: max |Z~* Z*| = {max_below:.1e}", tree.id(n));
    }
    Ok(hits.len())
}

fn main() -> mvh::Result<()> {
    let (tree, _) = builtin_fixture("D")?;
    report("fixture D", &tree, true)?;
    let mut hits = 0;
    for seed in 0..50 {
        let tree = generate_random_tree(&GeneratorConfig::new(seed, 3, 4, 1))?;
        hits += report(&format!("random tree {seed}"), &tree, false)?;
    }
    println!("50 random trees: {hits} zero hits");
    Ok(())
}
