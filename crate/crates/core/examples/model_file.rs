//! Writing a model document by hand, validating it, and producing a report.
//!
//! Run: `cargo run --example model_file`

use std::collections::BTreeMap;

use mvh::check::Tolerances;
use mvh::report::{find_claim, reverify, HedgeReport};
use mvh::tree::{validate, ClaimSpec, ModelFile, RawNode};

fn node(id: &str, parent: Option<&str>, p: f64, price: [f64; 2]) -> RawNode {
    RawNode { id: id.into(), parent: parent.map(Into::into), p, price: price.to_vec() }
}

fn main() -> mvh::Result<()> {
    // two assets, four states: incomplete
    let model = ModelFile {
        d: 2,
        horizon: 1,
        nodes: vec![
            node("0", None, 1.0, [100.0, 50.0]),
            node("a", Some("0"), 0.3, [120.0, 55.0]),
            node("b", Some("0"), 0.2, [105.0, 45.0]),
            node("c", Some("0"), 0.3, [95.0, 52.0]),
            node("d", Some("0"), 0.2, [85.0, 48.0]),
        ],
        claims: vec![ClaimSpec {
            label: "basket_call".into(),
            payoff: BTreeMap::from([("a".into(), 25.0), ("b".into(), 0.0), ("c".into(), 0.0), ("d".into(), 0.0)]),
        }],
    };
    println!("validation: {}", validate(&model));
    let text = model.to_json();
    let parsed = ModelFile::from_json(&text)?;
    let (tree, claims) = parsed.build()?;
    let claim = find_claim(&claims, "basket_call")?;

    let report = HedgeReport::build(&parsed, &tree, &claim, &Tolerances::default());
    println!("status {:?}, model sha256 {}", report.status, report.model.sha256);
    println!("scalars {:?}", report.scalars);
    let again = reverify(&HedgeReport::from_json(&report.to_json()?)?, &parsed)?;
    println!("re-verified from the report: {}", again == report.verdicts);
    Ok(())
}
