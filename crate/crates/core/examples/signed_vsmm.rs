//! A trinomial market whose variance-optimal martingale density is negative
//! on one state: the hedge and the numeraire change still work, the
//! feedback representation is reported unavailable.
//!
//! Run: `cargo run --example signed_vsmm`

use mvh::analysis::analyze;
use mvh::check::Tolerances;
use mvh::fixtures::builtin_fixture;

fn main() -> mvh::Result<()> {
    let (tree, claim) = builtin_fixture("B")?;
    let a = analyze(&tree, &claim, &Tolerances::default());
    let b = a.vsmm.as_ref().unwrap();
    println!("g* = {:?}", b.g_star.g);
    println!("flags: {:?}", b.flags);
    let h = a.hedge.as_ref().unwrap();
    println!("theta^H = {:?}, alpha^H = {}, objective = {}", h.theta_h.at(tree.root()), h.alpha_h, h.objective);
    println!("V^H_0 = {}", a.vsmm_decomposition.as_ref().unwrap().v0);
    for u in &a.unavailable {
        println!("unavailable {}: {}", u.section, u.reason);
    }
    Ok(())
}
