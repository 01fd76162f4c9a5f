//! The randomized identity suite, as `mvh verify` runs it.
//!
//! Run: `cargo run --release --example random_verify`

use mvh::check::Tolerances;
use mvh::suite::{render_summary, run_suite, SuiteConfig};

fn main() -> mvh::Result<()> {
    let cfg = SuiteConfig { seed: 7, count: 25, depth: 3, branching: 3, assets: 2, vary: false, tol: Tolerances::default() };
    let (_, summary) = run_suite(&cfg)?;
    print!("{}", render_summary(&summary));
    std::process::exit(if summary.all_passed() { 0 } else { 1 });
}
