//! Deflating by Z~*, the measure P~, and the GKW split of the deflated claim.
//!
//! Run: `cargo run --example numeraire_gkw`

use mvh::analysis::analyze;
use mvh::check::Tolerances;
use mvh::fixtures::builtin_fixture;
use mvh::numeraire::psi_to_theta;
use mvh::process::gains;

fn main() -> mvh::Result<()> {
    let (tree, claim) = builtin_fixture("C")?;
    let a = analyze(&tree, &claim, &Tolerances::default());
    let (b, h, sec) = (a.vsmm.as_ref().unwrap(), a.hedge.as_ref().unwrap(), a.numeraire.as_ref().unwrap());

    println!("E_P~[H / Z~_T] = {}  (alpha^H = {})", sec.gkw.mean_term, h.alpha_h);
    for &n in tree.non_terminals() {
        let p: Vec<f64> = tree.children(n).iter().map(|&c| sec.frame.ptilde.weight(c)).collect();
        println!("node {:>4}: P~ one-step {:?}, psi^H {:?}", tree.id(n), p, sec.gkw.psi_h.at(n));
    }
    // psi^H mapped back to share holdings reproduces the optimal hedge's gains
    let theta = psi_to_theta(&tree, &sec.frame, &sec.gkw.psi_h, b);
    let (g1, g2) = (gains(&tree, &theta), gains(&tree, &h.theta_h));
    let gap = (0..tree.len()).map(|n| (g1[n] - g2[n]).abs()).fold(0.0, f64::max);
    println!("max |G(theta from psi^H) - G(theta^H)| = {gap:.2e}");
    Ok(())
}
