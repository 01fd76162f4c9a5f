//! The one-period binomial market: every object of the theory in closed form.
//!
//! Run: `cargo run --example fixture_a_closed_form`

use mvh::analysis::{analyze, verify};
use mvh::check::Tolerances;
use mvh::fixtures::builtin_fixture;

fn main() -> mvh::Result<()> {
    let (tree, claim) = builtin_fixture("A")?;
    let tol = Tolerances::default();
    let a = analyze(&tree, &claim, &tol);
    let (b, h) = (a.vsmm.as_ref().unwrap(), a.hedge.as_ref().unwrap());
    let dec = a.vsmm_decomposition.as_ref().unwrap();
    let q = a.qstar.as_ref().unwrap();
    let root = tree.root();

    println!("g*        = {:?}   (2/3, 4/3)", b.g_star.g);
    println!("E[g*^2]   = {}   (10/9)", b.e_gstar_sq);
    println!("theta*    = {}   (-1/9)", b.theta_star.at(root)[0]);
    println!("theta^H   = {}", h.theta_h.at(root)[0]);
    println!("alpha^H   = {}", h.alpha_h);
    println!("phi^H     = {}", dec.phi_h.at(root)[0]);
    println!("V^H_0     = {}", dec.v0);
    let shortfall = -b.theta_star.at(root)[0] / b.z_tilde[root] * dec.v_h[root];
    println!(
        "feedback: theta^H = eta^H - eta^J + shortfall term = {:.12} - {:.12} + {:.12}",
        q.eta_h.at(root)[0],
        q.eta_j.at(root)[0],
        shortfall
    );
    let verdicts = verify(&tree, &claim, &a, &tol);
    println!("{} checks, {} failed", verdicts.len(), verdicts.iter().filter(|v| !v.passed).count());
    Ok(())
}
