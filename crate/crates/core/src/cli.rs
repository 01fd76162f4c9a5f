//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 invalid model or unknown
//! claim, 3 unreadable input, 4 pipeline refused (report still written).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::check::Tolerances;
use crate::generate::{generate_random_tree, random_claims, GeneratorConfig};
use crate::report::{find_claim, HedgeReport};
use crate::suite::{render_summary, run_suite, SuiteConfig};
use crate::tree::{validate, ModelFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNREADABLE: i32 = 3;
pub const EXIT_REFUSED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mvh", version, about = "Mean-variance hedging on finite event-tree markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file against every structural invariant.
    Validate { model: PathBuf },
    /// Run the full pipeline for one claim and write a JSON report.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        claim: String,
        #[arg(long)]
        out: PathBuf,
        /// Relative identity tolerance; the oracle tolerance is 10x this.
        /// Overrides MVH_TOL.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write a seeded random model, with a uniform random claim and a call
    /// on the first asset.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        assets: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        jump_scale: f64,
        #[arg(long, default_value_t = 0.25)]
        drift: f64,
        /// Give the root more children than assets + 1.
        #[arg(long)]
        force_incomplete: bool,
    },
    /// Run every identity check on a batch of random trees.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        branching: usize,
        #[arg(long, default_value_t = 2)]
        assets: usize,
        /// Draw depth, branching and assets per tree up to the given maxima.
        #[arg(long)]
        vary: bool,
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Analyze { model, claim, out, tol } => cmd_analyze(&model, &claim, &out, tol),
        Command::Generate { seed, depth, branching, assets, out, jump_scale, drift, force_incomplete } => {
            let mut cfg = GeneratorConfig::new(seed, depth, branching, assets);
            cfg.jump_scale = jump_scale;
            cfg.drift = drift;
            cfg.force_incomplete = force_incomplete;
            cmd_generate(&cfg, &out)
        }
        Command::Verify { seed, count, depth, branching, assets, vary, tol } => {
            let cfg = SuiteConfig { seed, count, depth, branching, assets, vary, tol: Tolerances::resolve(tol) };
            cmd_verify(&cfg)
        }
    }
}

/// Reads and parses a model file; `Err` carries the exit code.
fn read_model(path: &Path) -> Result<ModelFile, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_UNREADABLE
    })?;
    ModelFile::from_json(&text).map_err(|e| {
        eprintln!("error: {} is not a model document: {e}", path.display());
        EXIT_UNREADABLE
    })
}

pub fn cmd_validate(path: &Path) -> i32 {
    let model = match read_model(path) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let report = validate(&model);
    if report.is_valid() {
        println!("{}: valid", path.display());
        EXIT_OK
    } else {
        eprintln!("{report}");
        EXIT_INVALID
    }
}

pub fn cmd_analyze(path: &Path, label: &str, out: &Path, tol: Option<f64>) -> i32 {
    let model = match read_model(path) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let (tree, claims) = match model.build() {
        Ok(built) => built,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let claim = match find_claim(&claims, label) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let tol = Tolerances::resolve(tol);
    let report = HedgeReport::build(&model, &tree, &claim, &tol);
    let written = report.to_json().and_then(|json| Ok(std::fs::write(out, json)?));
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", out.display());
        return EXIT_UNREADABLE;
    }
    let failed: Vec<&str> = report.verdicts.iter().filter(|v| !v.passed).map(|v| v.check.as_str()).collect();
    println!(
        "{}: claim {:?}, {} verdicts, {} failed",
        path.display(),
        report.claim,
        report.verdicts.len(),
        failed.len()
    );
    for check in &failed {
        println!("FAILED {check}");
    }
    if let Some(reason) = &report.reason {
        println!("refused: {reason}");
    }
    for u in &report.analysis.unavailable {
        println!("unavailable {}: {}", u.section, u.reason);
    }
    report.exit_code()
}

pub fn cmd_generate(cfg: &GeneratorConfig, out: &Path) -> i32 {
    let tree = match generate_random_tree(cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let claims = random_claims(&tree, cfg.seed);
    if let Err(e) = std::fs::write(out, tree.to_model(&claims).to_json()) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return EXIT_UNREADABLE;
    }
    println!(
        "{}: {} nodes, {} terminals, claims {}",
        out.display(),
        tree.len(),
        tree.terminals().len(),
        claims.iter().map(|c| c.label()).collect::<Vec<_>>().join(", ")
    );
    EXIT_OK
}

pub fn cmd_verify(cfg: &SuiteConfig) -> i32 {
    match run_suite(cfg) {
        Ok((_, summary)) => {
            print!("{}", render_summary(&summary));
            if summary.all_passed() {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
