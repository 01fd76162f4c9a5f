//! End-to-end runs of the `mvh` binary: exit-code contract, report
//! contents, and re-verification from a written report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvh::fixtures::{builtin_fixture, FIXTURE_NAMES};
use mvh::report::{reverify, HedgeReport, Status};
use mvh::tree::ModelFile;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn mvh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvh")).args(args).env_remove("MVH_TOL").output().unwrap()
}

fn model(name: &str) -> String {
    models().join(name).to_str().unwrap().to_string()
}

fn analyze(model_path: &str, claim: &str, out: &Path, extra: &[&str]) -> (i32, HedgeReport) {
    let mut args = vec!["analyze", model_path, "--claim", claim, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = mvh(&args);
    let report = HedgeReport::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    (o.status.code().unwrap(), report)
}

#[test]
fn shipped_models_match_builtin_fixtures() {
    for name in FIXTURE_NAMES {
        let (tree, claim) = builtin_fixture(name).unwrap();
        let text = std::fs::read_to_string(models().join(format!("fixture_{}.json", name.to_lowercase()))).unwrap();
        assert_eq!(text, tree.to_model(&[claim]).to_json(), "fixture {name}");
    }
}

#[test]
fn validate_exit_codes() {
    let ok = mvh(&["validate", &model("fixture_a.json")]);
    assert_eq!(ok.status.code(), Some(0));

    let bad = mvh(&["validate", &model("bad_probability.json")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("probabilities sum to 1.2 at node 0"));

    let missing = mvh(&["validate", &model("no_such_model.json")]);
    assert_eq!(missing.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(mvh(&["validate", garbage.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn fixture_a_report_contains_the_hedge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let (code, r) = analyze(&model("fixture_a.json"), "H", &out, &[]);
    assert_eq!(code, 0);
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.schema, "mvh-report/1");
    let theta_h = r.analysis.hedge.as_ref().unwrap().theta_h.at(0)[0];
    assert!((theta_h - 0.6).abs() < 1e-12);
    assert!(r.verdicts.iter().all(|v| v.passed && v.tolerance.is_finite()));
    assert_eq!(r.node_ids, vec!["0", "up", "down"]);
    assert_eq!(r.terminal_ids, vec!["up", "down"]);
}

#[test]
fn fixture_b_succeeds_with_feedback_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let (code, r) = analyze(&model("fixture_b.json"), "call_10", &out, &[]);
    assert_eq!(code, 0);
    assert!(!r.flags.qstar_equivalent && r.flags.h3);
    assert!(r.analysis.qstar.is_none());
    assert!(r.analysis.unavailable.iter().any(|u| u.section == "qstar" && u.reason.contains("signed")));
}

#[test]
fn refusals_exit_four_and_still_write_a_report() {
    let dir = tempfile::tempdir().unwrap();
    for (file, claim, needle) in [("arbitrage.json", "H", "martingale measure"), ("fixture_d.json", "call_10", "vanishes")] {
        let out = dir.path().join(file);
        let (code, r) = analyze(&model(file), claim, &out, &[]);
        assert_eq!(code, 4, "{file}");
        assert_eq!(r.status, Status::Refused);
        assert!(r.reason.as_deref().unwrap().contains(needle), "{file}: {:?}", r.reason);
    }
}

#[test]
fn unknown_claim_and_invalid_model_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = mvh(&["analyze", &model("fixture_a.json"), "--claim", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = mvh(&["analyze", &model("bad_probability.json"), "--claim", "H", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn tolerance_flag_and_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let (_, r) = analyze(&model("fixture_c.json"), "call_100", &out, &["--tol", "1e-7"]);
    assert_eq!(r.tolerances.identity, 1e-7);
    assert_eq!(r.tolerances.oracle, 1e-6);

    let o = Command::new(env!("CARGO_BIN_EXE_mvh"))
        .args(["analyze", &model("fixture_c.json"), "--claim", "call_100", "--out", out.to_str().unwrap()])
        .env("MVH_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r = HedgeReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.tolerances.identity, 1e-6);
}

#[test]
fn written_report_reverifies_to_the_same_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let path = model("fixture_c.json");
    let (_, r) = analyze(&path, "call_100", &out, &[]);
    let m = ModelFile::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(reverify(&r, &m).unwrap(), r.verdicts);
}

#[test]
fn generate_then_analyze_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str| {
        let p = dir.path().join(name);
        let args = ["generate", "--seed", "2", "--depth", "3", "--branching", "4", "--assets", "2", "--out"];
        let mut args: Vec<&str> = args.to_vec();
        args.push(p.to_str().unwrap());
        assert_eq!(mvh(&args).status.code(), Some(0));
        std::fs::read(p).unwrap()
    };
    let (g1, g2) = (gen("g1.json"), gen("g2.json"));
    assert_eq!(g1, g2);
    let p = dir.path().join("g1.json");
    assert_eq!(mvh(&["validate", p.to_str().unwrap()]).status.code(), Some(0));
    let (c1, r1) = analyze(p.to_str().unwrap(), "random", &dir.path().join("r1.json"), &[]);
    let (c2, _) = analyze(p.to_str().unwrap(), "random", &dir.path().join("r2.json"), &[]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(std::fs::read(dir.path().join("r1.json")).unwrap(), std::fs::read(dir.path().join("r2.json")).unwrap());
    assert_eq!(r1.model.assets, 2);
}

#[test]
fn verify_exit_codes() {
    let o = mvh(&["verify", "--seed", "7", "--count", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let o = mvh(&["verify", "--seed", "7", "--count", "25", "--depth", "3", "--branching", "3", "--assets", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("feedback_equation") && table.contains("trees: 25"));
}
