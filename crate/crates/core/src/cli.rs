//! Command-line front end: JSON payload in, one JSON document out.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::HamiltonianElement;
use crate::automorphism::{verify_homomorphism_with, SignRule, TorusAutomorphism};
use crate::derivations::{certify_inner, solve_graded_derivations, GradedDerivation, TruncationBox};
use crate::generation::{evaluate_witness, generation_witness, simplicity_reduce, BracketWitness, IdealWitness};
use crate::lattice::{check_dimension, LatticeVector};
use crate::scalar::Scalar;
use crate::selfcheck;
use crate::symplectic::{classify, symplectic_complete, GspClass, IntegerMatrix};

/// Schema version stamped on every document.
pub const SCHEMA_VERSION: u64 = 1;

const DEFAULT_RADIUS: i64 = 3;

#[derive(Debug, Parser)]
#[command(name = "hamtorus", version, about = "Exact computations in Hamiltonian Lie algebras on tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Ambient dimension; when given, payload dimensions must match.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Box radius for `aut-verify`, `der-solve` and `der-certify` (default 3).
    #[arg(long, global = true)]
    pub radius: Option<i64>,
    /// Seed for the randomized suites of `selfcheck`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Payload file; standard input when absent.
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Indent the output document.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// `{"x", "y"}` to the bracket `[x, y]`.
    Bracket,
    /// `{"matrix"}` to its conformal symplectic class and multiplier.
    GspClassify,
    /// `{"r"}` (primitive) to a symplectic matrix with first column `r`.
    SpComplete,
    /// `{"sigma", "x", "rule"?}` to `σ(x)`.
    AutApply,
    /// `{"outer", "inner"}` to `outer ∘ inner`.
    AutCompose,
    /// `{"sigma", "rule"?}` to a homomorphism report over the box.
    AutVerify,
    /// `{"r"}` to a bracket witness over the standard generators.
    GenWitness,
    /// `{"x", "target"}` to an ideal witness reaching `h_target`.
    SimplicityProbe,
    /// `{"degree"}` to a basis of graded derivations on the box.
    DerSolve,
    /// `{"degree"}` to a comparison with the inner derivations.
    DerCertify,
    /// Runs the invariant suite; no payload.
    Selfcheck,
}

impl Command {
    pub fn needs_payload(self) -> bool {
        self != Command::Selfcheck
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Math(#[from] crate::Error),
    #[error("invalid payload: {0}")]
    Payload(#[from] serde_json::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Math(e) => e.code(),
            CliError::Payload(_) => "invalid_payload",
            CliError::Io(_) => "io",
        }
    }

    pub fn document(&self) -> Value {
        json!({ "v": SCHEMA_VERSION, "error": self.code(), "detail": self.to_string() })
    }
}

/// Exit status and document of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: i32,
    pub document: Value,
}

impl Outcome {
    fn ok(document: Value) -> Self {
        Outcome { status: 0, document }
    }

    fn error(e: &CliError) -> Self {
        Outcome { status: 1, document: e.document() }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairIn {
    x: HamiltonianElement,
    y: HamiltonianElement,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixIn {
    matrix: IntegerMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorIn {
    r: LatticeVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyIn {
    sigma: TorusAutomorphism,
    x: HamiltonianElement,
    #[serde(default)]
    rule: SignRule,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposeIn {
    outer: TorusAutomorphism,
    inner: TorusAutomorphism,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyIn {
    sigma: TorusAutomorphism,
    #[serde(default)]
    rule: SignRule,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeIn {
    x: HamiltonianElement,
    target: LatticeVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DegreeIn {
    degree: LatticeVector,
}

#[derive(Serialize)]
struct ClassOut {
    class: GspClass,
    multiplier: Option<i64>,
}

#[derive(Serialize)]
struct WitnessOut {
    target: LatticeVector,
    scalar: Scalar,
    leaves: usize,
    depth: usize,
    witness: BracketWitness,
}

#[derive(Serialize)]
struct ProbeOut {
    scalar: Scalar,
    witness: IdealWitness,
}

#[derive(Serialize)]
struct SolveOut {
    n: usize,
    degree: LatticeVector,
    radius: i64,
    dimension: usize,
    basis: Vec<GradedDerivation>,
}

/// Serializes `value` and stamps the schema version on it.
fn versioned<T: Serialize>(value: &T) -> Result<Value, CliError> {
    let mut doc = serde_json::to_value(value)?;
    match &mut doc {
        Value::Object(map) => {
            map.insert("v".to_string(), json!(SCHEMA_VERSION));
            Ok(doc)
        }
        _ => Ok(json!({ "v": SCHEMA_VERSION, "value": doc })),
    }
}

fn parse<T: DeserializeOwned>(payload: Option<&str>) -> Result<T, CliError> {
    let text = payload.ok_or_else(|| CliError::Io("this command needs a JSON payload".into()))?;
    Ok(serde_json::from_str(text)?)
}

fn expect_dim(declared: Option<usize>, found: usize) -> Result<(), CliError> {
    match declared {
        Some(n) => {
            check_dimension(n)?;
            if n != found {
                return Err(crate::Error::DimensionMismatch { expected: n, found }.into());
            }
            Ok(())
        }
        None => Ok(()),
    }
}

fn dispatch(cli: &Cli, payload: Option<&str>) -> Result<Outcome, CliError> {
    let radius = cli.radius.unwrap_or(DEFAULT_RADIUS);
    let doc = match cli.command {
        Command::Bracket => {
            let p: PairIn = parse(payload)?;
            expect_dim(cli.n, p.x.dim())?;
            versioned(&p.x.bracket(&p.y)?)?
        }
        Command::GspClassify => {
            let p: MatrixIn = parse(payload)?;
            expect_dim(cli.n, p.matrix.dim())?;
            let class = classify(&p.matrix)?;
            versioned(&ClassOut { class, multiplier: class.multiplier() })?
        }
        Command::SpComplete => {
            let p: VectorIn = parse(payload)?;
            expect_dim(cli.n, p.r.dim())?;
            versioned(&symplectic_complete(&p.r)?)?
        }
        Command::AutApply => {
            let p: ApplyIn = parse(payload)?;
            expect_dim(cli.n, p.sigma.dim())?;
            versioned(&p.sigma.apply_with(&p.x, p.rule)?)?
        }
        Command::AutCompose => {
            let p: ComposeIn = parse(payload)?;
            expect_dim(cli.n, p.outer.dim())?;
            versioned(&p.outer.compose(&p.inner)?)?
        }
        Command::AutVerify => {
            let p: VerifyIn = parse(payload)?;
            expect_dim(cli.n, p.sigma.dim())?;
            let mut doc = versioned(&verify_homomorphism_with(&p.sigma, radius, p.rule)?)?;
            doc["rule"] = serde_json::to_value(p.rule)?;
            doc
        }
        Command::GenWitness => {
            let p: VectorIn = parse(payload)?;
            expect_dim(cli.n, p.r.dim())?;
            let witness = generation_witness(&p.r)?;
            let value = evaluate_witness(&witness)?;
            let scalar = value.coefficient(&p.r);
            versioned(&WitnessOut {
                target: p.r,
                scalar,
                leaves: witness.leaf_count(),
                depth: witness.depth(),
                witness,
            })?
        }
        Command::SimplicityProbe => {
            let p: ProbeIn = parse(payload)?;
            expect_dim(cli.n, p.x.dim())?;
            let witness = simplicity_reduce(&p.x, &p.target)?;
            let scalar = witness.evaluate()?;
            versioned(&ProbeOut { scalar, witness })?
        }
        Command::DerSolve => {
            let p: DegreeIn = parse(payload)?;
            expect_dim(cli.n, p.degree.dim())?;
            let bx = TruncationBox::new(p.degree.dim(), radius)?;
            let basis = solve_graded_derivations(&p.degree, &bx)?;
            versioned(&SolveOut {
                n: p.degree.dim(),
                degree: p.degree,
                radius,
                dimension: basis.len(),
                basis,
            })?
        }
        Command::DerCertify => {
            let p: DegreeIn = parse(payload)?;
            expect_dim(cli.n, p.degree.dim())?;
            let bx = TruncationBox::new(p.degree.dim(), radius)?;
            versioned(&certify_inner(&p.degree, &bx)?)?
        }
        Command::Selfcheck => {
            let report = selfcheck::run(cli.seed);
            let status = if report.pass { 0 } else { 2 };
            return Ok(Outcome { status, document: versioned(&report)? });
        }
    };
    Ok(Outcome::ok(doc))
}

/// Runs one command on an already loaded payload.
pub fn execute(cli: &Cli, payload: Option<&str>) -> Outcome {
    dispatch(cli, payload).unwrap_or_else(|e| Outcome::error(&e))
}

/// The document as emitted, with a trailing newline.
pub fn render(document: &Value, pretty: bool) -> String {
    let mut text = if pretty {
        serde_json::to_string_pretty(document)
    } else {
        serde_json::to_string(document)
    }
    .expect("JSON values always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hamtorus").chain(args.iter().copied())).unwrap()
    }

    fn run(args: &[&str], payload: &str) -> Outcome {
        execute(&cli(args), Some(payload))
    }

    #[test]
    fn bracket_example() {
        let payload = r#"{"x":{"n":2,"terms":[{"deg":[1,0],"coef":"1"}],"cartan":["0","0"]},
                          "y":{"n":2,"terms":[{"deg":[0,1],"coef":"1"}],"cartan":["0","0"]}}"#;
        let out = run(&["bracket", "--n", "2"], payload);
        assert_eq!(out.status, 0, "{}", out.document);
        assert_eq!(
            out.document,
            json!({"v": 1, "n": 2, "terms": [{"deg": [1, 1], "coef": "-1"}], "cartan": ["0", "0"]})
        );
    }

    #[test]
    fn classify_identity() {
        let out = run(&["gsp-classify"], r#"{"matrix":[[1,0],[0,1]]}"#);
        assert_eq!(out.document, json!({"v": 1, "class": "symplectic", "multiplier": 1}));
        let out = run(&["gsp-classify"], r#"{"matrix":[[2,0],[0,1]]}"#);
        assert_eq!(out.document, json!({"v": 1, "class": "not_in_gsp", "multiplier": null}));
    }

    #[test]
    fn certify_example() {
        let out = run(&["der-certify", "--radius", "3"], r#"{"degree":[1,0]}"#);
        assert_eq!(out.status, 0);
        assert_eq!(out.document["dimension"], json!(1));
        assert_eq!(out.document["match"], json!(true));
        assert_eq!(out.document["v"], json!(1));
    }

    #[test]
    fn errors_are_documents() {
        let out = run(&["sp-complete"], r#"{"r":[2,4]}"#);
        assert_eq!(out.status, 1);
        assert_eq!(out.document["error"], json!("not_primitive"));
        assert_eq!(out.document["v"], json!(1));
        let out = run(&["sp-complete", "--n", "4"], r#"{"r":[1,0]}"#);
        assert_eq!(out.document["error"], json!("dimension_mismatch"));
        let out = run(&["bracket"], "{not json");
        assert_eq!(out.document["error"], json!("invalid_payload"));
        let out = run(&["gen-witness"], r#"{"r":[1,0],"extra":1}"#);
        assert_eq!(out.document["error"], json!("invalid_payload"));
        let out = run(&["der-solve", "--radius", "2"], r#"{"degree":[3,0]}"#);
        assert_eq!(out.document["error"], json!("degree_outside_box"));
        assert_eq!(execute(&cli(&["bracket"]), None).document["error"], json!("io"));
    }

    #[test]
    fn verify_reports_rule() {
        let payload = r#"{"sigma":{"q":[[1,0],[0,-1]],"multiplier":-1,"lambda":["1","1"]},"rule":"parity"}"#;
        let out = run(&["aut-verify", "--radius", "2"], payload);
        assert_eq!(out.status, 0);
        assert_eq!(out.document["pass"], json!(false));
        assert_eq!(out.document["rule"], json!("parity"));
        assert_eq!(out.document["counterexample"]["r"], json!([1, 0]));
        assert_eq!(out.document["counterexample"]["s"], json!([0, 1]));
    }

    #[test]
    fn render_is_compact_or_pretty() {
        let doc = json!({"v": 1, "a": [1, 2]});
        assert_eq!(render(&doc, false), "{\"a\":[1,2],\"v\":1}\n");
        assert!(render(&doc, true).contains("\n  \"a\""));
    }
}
