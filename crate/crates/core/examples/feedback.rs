//! The optimal hedge as a feedback rule on the running shortfall, simulated
//! forward from zero wealth and compared with the direct projection.
//!
//! Run: `cargo run --example feedback`

use mvh::analysis::analyze;
use mvh::check::Tolerances;
use mvh::generate::{generate_random_tree, random_claims, GeneratorConfig};
use mvh::process::gains;
use mvh::qstar::simulate_feedback;

fn main() -> mvh::Result<()> {
    let mut cfg = GeneratorConfig::new(42, 3, 4, 2);
    cfg.force_incomplete = true;
    let tree = generate_random_tree(&cfg)?;
    let claim = &random_claims(&tree, cfg.seed)[1];
    let a = analyze(&tree, claim, &Tolerances::default());
    let (b, h) = (a.vsmm.as_ref().unwrap(), a.hedge.as_ref().unwrap());
    let (dec, q) = (a.vsmm_decomposition.as_ref().unwrap(), a.qstar.as_ref().unwrap());
    println!("{} nodes, claim {:?}; predicate {} (eta^J vanishes: {})", tree.len(), claim.label(), q.predicate, q.eta_j_vanishes);

    let (_, g_fb) = simulate_feedback(&tree, b, &dec.v_h, &q.eta_h, Some(&q.eta_j));
    let g = gains(&tree, &h.theta_h);
    let gap = tree.terminals().iter().map(|&n| (g_fb[n] - g[n]).abs()).fold(0.0, f64::max);
    println!("terminal gains, feedback vs projection: max gap {gap:.2e}");
    if q.predicate {
        let (_, g_simple) = simulate_feedback(&tree, b, &dec.v_h, &q.eta_h, None);
        let gap = tree.terminals().iter().map(|&n| (g_simple[n] - g[n]).abs()).fold(0.0, f64::max);
        println!("simplified rule without eta^J: max gap {gap:.2e}");
    }
    Ok(())
}
