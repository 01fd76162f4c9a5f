//! Randomized identity suite over generated trees.
//!
//! Tree `i` uses seed `seed + i`; even-indexed trees are forced incomplete.
//! Each tree is analyzed for a uniform random claim and a call on the first
//! asset. Trees run in parallel, but results are reported in index order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, verify};
use crate::check::{Tolerances, Verdict};
use crate::error::Result;
use crate::generate::{generate_random_tree, random_claims, GeneratorConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub count: usize,
    pub depth: usize,
    pub branching: usize,
    pub assets: usize,
    /// Draw depth, branching and asset count per tree, up to the maxima
    /// above, instead of using them as fixed values.
    pub vary: bool,
    pub tol: Tolerances,
}

/// Outcome of one (tree, claim) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub index: usize,
    pub seed: u64,
    pub claim: String,
    pub terminals: usize,
    pub qstar_equivalent: bool,
    pub refused: Option<String>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub applicable: usize,
    pub passed: usize,
    pub worst_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub trees: usize,
    pub cases: usize,
    pub qstar_equivalent_trees: usize,
    pub refused_cases: usize,
    pub checks: Vec<CheckSummary>,
    /// `(tree index, seed, claim, check)` of every failed verdict.
    pub failures: Vec<(usize, u64, String, String)>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.check == name)
    }
}

/// Generator settings for tree `index`.
pub fn tree_config(cfg: &SuiteConfig, index: usize) -> GeneratorConfig {
    let seed = cfg.seed.wrapping_add(index as u64);
    let (depth, branching, assets) = if cfg.vary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5a11);
        (
            rng.random_range(1..=cfg.depth.max(1)),
            rng.random_range(2..=cfg.branching.max(2)),
            rng.random_range(1..=cfg.assets.max(1)),
        )
    } else {
        (cfg.depth, cfg.branching, cfg.assets)
    };
    let mut g = GeneratorConfig::new(seed, depth, branching, assets);
    g.force_incomplete = index.is_multiple_of(2);
    g
}

pub fn run_tree(cfg: &SuiteConfig, index: usize) -> Result<Vec<CaseResult>> {
    let gcfg = tree_config(cfg, index);
    let tree = generate_random_tree(&gcfg)?;
    Ok(random_claims(&tree, gcfg.seed)
        .into_iter()
        .map(|claim| {
            let a = analyze(&tree, &claim, &cfg.tol);
            let verdicts = verify(&tree, &claim, &a, &cfg.tol);
            CaseResult {
                index,
                seed: gcfg.seed,
                claim: claim.label().to_string(),
                terminals: tree.terminals().len(),
                qstar_equivalent: a.vsmm.as_ref().is_some_and(|b| b.flags.qstar_equivalent),
                refused: a.refusal(),
                verdicts,
            }
        })
        .collect())
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<(Vec<CaseResult>, SuiteSummary)> {
    let per_tree: Vec<Result<Vec<CaseResult>>> = (0..cfg.count).into_par_iter().map(|i| run_tree(cfg, i)).collect();
    let mut cases = Vec::new();
    for r in per_tree {
        cases.extend(r?);
    }
    let summary = summarize(cfg.count, &cases);
    Ok((cases, summary))
}

pub fn summarize(trees: usize, cases: &[CaseResult]) -> SuiteSummary {
    let mut checks: BTreeMap<String, CheckSummary> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut qstar_trees = std::collections::BTreeSet::new();
    for c in cases {
        if c.qstar_equivalent {
            qstar_trees.insert(c.index);
        }
        for v in &c.verdicts {
            let row = checks.entry(v.check.clone()).or_insert_with(|| CheckSummary {
                check: v.check.clone(),
                applicable: 0,
                passed: 0,
                worst_deviation: 0.0,
                tolerance: v.tolerance,
            });
            row.applicable += 1;
            if v.passed {
                row.passed += 1;
            } else {
                failures.push((c.index, c.seed, c.claim.clone(), v.check.clone()));
            }
            if v.max_deviation > row.worst_deviation {
                row.worst_deviation = v.max_deviation;
                row.tolerance = v.tolerance;
            }
        }
    }
    SuiteSummary {
        trees,
        cases: cases.len(),
        qstar_equivalent_trees: qstar_trees.len(),
        refused_cases: cases.iter().filter(|c| c.refused.is_some()).count(),
        checks: checks.into_values().collect(),
        failures,
    }
}

/// Plain-text summary table.
pub fn render_summary(s: &SuiteSummary) -> String {
    let width = s.checks.iter().map(|c| c.check.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>7}  {:>7}  {:>12}  {:>9}\n",
        "check", "applied", "passed", "worst dev", "tolerance"
    );
    for c in &s.checks {
        out.push_str(&format!(
            "{:<width$}  {:>7}  {:>7}  {:>12.3e}  {:>9.1e}\n",
            c.check, c.applicable, c.passed, c.worst_deviation, c.tolerance
        ));
    }
    out.push_str(&format!(
        "trees: {}  cases: {}  trees with equivalent VSMM: {}  refused cases: {}  failed verdicts: {}\n",
        s.trees,
        s.cases,
        s.qstar_equivalent_trees,
        s.refused_cases,
        s.failures.len()
    ));
    for (i, seed, claim, check) in &s.failures {
        out.push_str(&format!("FAILED tree {i} (seed {seed}) claim {claim}: {check}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(count: usize) -> SuiteConfig {
        SuiteConfig { seed: 11, count, depth: 2, branching: 3, assets: 1, vary: false, tol: Tolerances::default() }
    }

    #[test]
    fn empty_suite_passes() {
        let (cases, s) = run_suite(&cfg(0)).unwrap();
        assert!(cases.is_empty() && s.all_passed());
    }

    #[test]
    fn small_suite_passes_and_is_ordered() {
        let (cases, s) = run_suite(&cfg(4)).unwrap();
        assert_eq!(s.cases, 8);
        assert!(cases.windows(2).all(|w| w[0].index <= w[1].index));
        assert!(s.all_passed(), "{}", render_summary(&s));
    }
}
