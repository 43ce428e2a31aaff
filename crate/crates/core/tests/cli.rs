use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use hamtorus::algebra::HamiltonianElement;
use hamtorus::automorphism::TorusAutomorphism;
use hamtorus::derivations::GradedDerivation;
use hamtorus::generation::{evaluate_witness, BracketWitness};
use hamtorus::lattice::LatticeVector;
use hamtorus::scalar::Scalar;
use serde_json::{json, Value};

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hamtorus"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], payload: Value) -> Value {
    let out = run(args, &payload.to_string());
    assert_eq!(out.status.code(), Some(0), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["v"], 1);
    doc
}

fn failure(args: &[&str], payload: &str) -> Value {
    let out = run(args, payload);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["v"], 1);
    assert!(doc["detail"].is_string());
    doc
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("hamtorus-cli-{}-{name}", std::process::id()))
}

fn v(c: &[i64]) -> LatticeVector {
    LatticeVector::new(c.to_vec()).unwrap()
}

fn q(s: &str) -> Scalar {
    s.parse().unwrap()
}

#[test]
fn bracket_mixes_cartan_and_hamiltonian_terms() {
    let doc = ok(
        &["bracket"],
        json!({
            "x": {"n": 2, "cartan": ["1", "0"], "terms": [{"deg": [1, 0], "coef": "1"}]},
            "y": {"n": 2, "cartan": ["0", "0"], "terms": [{"deg": [0, 1], "coef": "2"}, {"deg": [2, 3], "coef": "1/2"}]}
        }),
    );
    let expected = json!({
        "v": 1, "n": 2, "cartan": ["0", "0"],
        "terms": [
            {"coef": "-2", "deg": [1, 1]},
            {"coef": "1", "deg": [2, 3]},
            {"coef": "-3/2", "deg": [3, 3]}
        ]
    });
    assert_eq!(doc, expected);
    let mut body = doc.clone();
    body.as_object_mut().unwrap().remove("v");
    let typed: HamiltonianElement = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(serde_json::to_value(&typed).unwrap(), body);
}

#[test]
fn gsp_classification_reports_multiplier() {
    assert_eq!(ok(&["gsp-classify"], json!({"matrix": [[0, 1], [1, 0]]})), json!({"v": 1, "class": "anti_symplectic", "multiplier": -1}));
    assert_eq!(ok(&["gsp-classify"], json!({"matrix": [[2, 1], [1, 1]]})), json!({"v": 1, "class": "symplectic", "multiplier": 1}));
    assert_eq!(ok(&["gsp-classify"], json!({"matrix": [[1, 2], [3, 4]]})), json!({"v": 1, "class": "not_in_gsp", "multiplier": null}));
}

#[test]
fn symplectic_completion_has_requested_first_column() {
    assert_eq!(ok(&["sp-complete"], json!({"r": [3, 5]})), json!({"v": 1, "matrix": [[3, 1], [5, 2]], "multiplier": 1}));
    let doc = ok(&["sp-complete", "--n", "4"], json!({"r": [2, 3, 0, 5]}));
    let m: Vec<Vec<i64>> = serde_json::from_value(doc["matrix"].clone()).unwrap();
    assert_eq!(m.iter().map(|row| row[0]).collect::<Vec<_>>(), vec![2, 3, 0, 5]);
    assert_eq!(failure(&["sp-complete"], r#"{"r":[2,4]}"#)["error"], "not_primitive");
}

#[test]
fn automorphism_apply_compose_and_verify() {
    let swap = json!({"q": [[0, 1], [1, 0]], "multiplier": -1, "lambda": ["2", "1/3"]});
    let doc = ok(
        &["aut-apply"],
        json!({"sigma": swap, "x": {"n": 2, "cartan": ["1", "0"], "terms": [{"deg": [1, 2], "coef": "1"}]}}),
    );
    assert_eq!(doc, json!({"v": 1, "n": 2, "cartan": ["0", "1"], "terms": [{"coef": "2/9", "deg": [2, 1]}]}));

    let shear = json!({"q": [[1, 1], [0, 1]], "multiplier": 1, "lambda": ["-1", "3"]});
    let doc = ok(&["aut-compose"], json!({"outer": swap, "inner": shear}));
    assert_eq!(doc, json!({"v": 1, "q": [[0, 1], [1, 1]], "multiplier": -1, "lambda": ["-2", "-2"]}));
    let mut body = doc.clone();
    body.as_object_mut().unwrap().remove("v");
    let typed: TorusAutomorphism = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(serde_json::to_value(&typed).unwrap(), body);

    let doc = ok(&["aut-verify", "--radius", "2"], json!({"sigma": swap}));
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["rule"], "odd_shift");
    assert_eq!(doc["counterexample"], Value::Null);

    let plain = json!({"q": [[0, 1], [1, 0]], "multiplier": -1, "lambda": ["1", "1"]});
    let doc = ok(&["aut-verify", "--radius", "2"], json!({"sigma": plain, "rule": "parity"}));
    assert_eq!(doc["pass"], false);
    assert_eq!(doc["rule"], "parity");
    let c = &doc["counterexample"];
    assert_eq!((c["r"].clone(), c["s"].clone()), (json!([1, 0]), json!([0, 1])));
    assert_eq!(c["image_of_bracket"]["terms"], json!([{"coef": "-1", "deg": [1, 1]}]));
    assert_eq!(c["bracket_of_images"]["terms"], json!([{"coef": "1", "deg": [1, 1]}]));

    let bad = json!({"q": [[0, 1], [1, 0]], "multiplier": 1, "lambda": ["1", "1"]});
    failure(&["aut-verify"], &json!({"sigma": bad}).to_string());
}

#[test]
fn generation_witness_is_frozen_and_evaluates() {
    let doc = ok(&["gen-witness"], json!({"r": [2, 0]}));
    let expected = json!({
        "v": 1, "target": [2, 0], "scalar": "2", "leaves": 4, "depth": 3,
        "witness": {"deg": [2, 0], "scalar": "2", "node": [
            {"deg": [3, 1], "scalar": "1", "node": [
                {"deg": [2, 1], "scalar": "1", "node": [{"leaf": [1, 1]}, {"leaf": [1, 0]}]},
                {"leaf": [1, 0]}
            ]},
            {"leaf": [-1, -1]}
        ]}
    });
    assert_eq!(doc, expected);
    let w: BracketWitness = serde_json::from_value(doc["witness"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&w).unwrap(), doc["witness"]);
    assert_eq!(evaluate_witness(&w).unwrap(), HamiltonianElement::monomial(&v(&[2, 0]), q("2")).unwrap());

    assert_eq!(ok(&["gen-witness"], json!({"r": [1, 1]}))["witness"], json!({"leaf": [1, 1]}));
    let doc = ok(&["gen-witness"], json!({"r": [0, 2, 0, -1]}));
    let w: BracketWitness = serde_json::from_value(doc["witness"].clone()).unwrap();
    let value = evaluate_witness(&w).unwrap();
    assert_eq!(value.as_monomial().map(|(_, d)| d.clone()), Some(v(&[0, 2, 0, -1])));
}

#[test]
fn simplicity_probe_chain_is_frozen() {
    let doc = ok(
        &["simplicity-probe"],
        json!({"x": {"n": 2, "cartan": ["0", "0"], "terms": [{"deg": [0, 1], "coef": "1"}, {"deg": [1, 0], "coef": "1"}]}, "target": [3, -2]}),
    );
    assert_eq!(doc["scalar"], "-1");
    assert_eq!(doc["witness"]["steps"], json!([[-1, 0], [4, -3]]));
    assert_eq!(doc["witness"]["target"], json!([3, -2]));
}

fn derivation_basis(doc: &Value) -> Vec<GradedDerivation> {
    serde_json::from_value(doc["basis"].clone()).unwrap()
}

#[test]
fn derivation_dimensions_are_frozen() {
    let cases: [(&[i64], &str, usize); 5] = [
        (&[1, 0], "3", 1),
        (&[0, 0], "3", 2),
        (&[1, 1], "3", 1),
        (&[0, 0, 0, 0], "2", 4),
        (&[2, -1], "4", 1),
    ];
    for (degree, radius, dimension) in cases {
        let n = degree.len().to_string();
        let doc = ok(&["der-solve", "--n", &n, "--radius", radius], json!({"degree": degree}));
        assert_eq!(doc["dimension"], dimension, "degree {degree:?}");
        assert_eq!(doc["basis"].as_array().unwrap().len(), dimension);
        let basis = derivation_basis(&doc);
        assert_eq!(serde_json::to_value(&basis).unwrap(), doc["basis"]);
    }
}

#[test]
fn degree_one_zero_derivation_is_scaled_adjoint() {
    let doc = ok(&["der-solve", "--radius", "3"], json!({"degree": [1, 0]}));
    let basis = derivation_basis(&doc);
    // ad h_(1,0) sends h_r to -r_2 h_(r+(1,0)); RREF scales by -1/3
    for r in hamtorus::lattice::box_vectors(2, 3) {
        assert_eq!(basis[0].value(&r), Scalar::new(-r.coords()[1], 3).unwrap(), "at {r}");
    }
}

#[test]
fn degree_zero_derivations_are_linear_characters() {
    let doc = ok(&["der-solve", "--radius", "3"], json!({"degree": [0, 0]}));
    let basis = derivation_basis(&doc);
    // rows are (2/3) r_1 - r_2 and its companion; check the first exactly
    for r in hamtorus::lattice::box_vectors(2, 3) {
        let c = r.coords();
        assert_eq!(basis[0].value(&r), Scalar::new(2 * c[0] - 3 * c[1], 3).unwrap(), "at {r}");
    }
}

#[test]
fn certification_matches_inner_derivations() {
    for degree in [json!([1, 0]), json!([0, 0]), json!([-2, 1])] {
        let doc = ok(&["der-certify", "--radius", "3"], json!({"degree": degree}));
        assert_eq!(doc["match"], true, "degree {degree}");
        assert_eq!(doc["dimension"], doc["expected"]);
        assert!(doc["residuals"].as_array().unwrap().iter().all(|r| r == "0"));
    }
}

#[test]
fn files_and_pretty_output() {
    let input = scratch("in.json");
    let output = scratch("out.json");
    std::fs::write(&input, json!({"r": [2, 0]}).to_string()).unwrap();
    let out = run(
        &["gen-witness", "--in", input.to_str().unwrap(), "--out", output.to_str().unwrap(), "--pretty"],
        "",
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&output).unwrap();
    assert!(text.contains("\n  \"depth\": 3"));
    assert!(text.ends_with("}\n"));
    let compact = run(&["gen-witness"], r#"{"r":[2,0]}"#);
    let a: Value = serde_json::from_str(&text).unwrap();
    let b: Value = serde_json::from_slice(&compact.stdout).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(compact.stdout).unwrap().lines().count(), 1);
    std::fs::remove_file(&input).ok();
    std::fs::remove_file(&output).ok();

    let missing = scratch("missing.json");
    let doc = failure(&["gen-witness", "--in", missing.to_str().unwrap()], "");
    assert_eq!(doc["error"], "io");
}

#[test]
fn malformed_payloads_fail_with_error_documents() {
    assert_eq!(failure(&["bracket"], "garbage")["error"], "invalid_payload");
    assert_eq!(failure(&["gen-witness"], r#"{"r":[2,0],"extra":1}"#)["error"], "invalid_payload");
    assert_eq!(failure(&["gen-witness"], r#"{"r":[0,0]}"#)["error"], "zero_vector");
    assert_eq!(failure(&["der-solve", "--n", "4"], r#"{"degree":[1,0]}"#)["error"], "dimension_mismatch");
    assert_eq!(failure(&["gen-witness"], r#"{"r":[1,0,0]}"#)["error"], "invalid_payload");
    let unsorted = r#"{"x":{"n":2,"cartan":["0","0"],"terms":[{"deg":[1,0],"coef":"1"},{"deg":[0,1],"coef":"1"}]},"target":[1,0]}"#;
    assert_eq!(failure(&["simplicity-probe"], unsorted)["error"], "invalid_payload");
}

#[test]
fn outputs_are_deterministic() {
    let payload = json!({"degree": [1, -1]}).to_string();
    let a = run(&["der-certify", "--radius", "2"], &payload);
    let b = run(&["der-certify", "--radius", "2"], &payload);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
