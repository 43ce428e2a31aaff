//! The invariant suite behind the `selfcheck` command.

use serde::{Deserialize, Serialize};

use crate::algebra::embed_to_witt;
use crate::automorphism::{verify_homomorphism, verify_homomorphism_with, SignRule, TorusAutomorphism};
use crate::derivations::{certify_inner, degree_zero_character_solve, linear_character_coefficients, TruncationBox};
use crate::generation::{evaluate_witness, generation_witness, simplicity_reduce};
use crate::lattice::{box_vectors, LatticeVector};
use crate::sampling::Sampler;
use crate::symplectic::{standard_anti_symplectic, symplectic_complete, IntegerMatrix};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

struct Tally {
    cases: u64,
    failures: u64,
    first_failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { cases: 0, failures: 0, first_failure: None }
    }

    /// Records one case; `Ok(None)` passes, `Ok(Some(why))` and `Err` fail.
    fn record(&mut self, label: impl FnOnce() -> String, outcome: Result<Option<String>>) {
        self.cases += 1;
        let why = match outcome {
            Ok(None) => return,
            Ok(Some(why)) => why,
            Err(e) => format!("error {}: {e}", e.code()),
        };
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(format!("{}: {why}", label()));
        }
    }

    fn finish(self, id: u8, name: &str) -> CriterionReport {
        CriterionReport {
            id,
            name: name.to_string(),
            pass: self.failures == 0 && self.cases > 0,
            cases: self.cases,
            failures: self.failures,
            first_failure: self.first_failure,
        }
    }
}

fn fail_unless(ok: bool, why: impl FnOnce() -> String) -> Option<String> {
    if ok {
        None
    } else {
        Some(why())
    }
}

fn sampler(seed: u64, criterion: u8, n: usize) -> Sampler {
    Sampler::new(seed, (u64::from(criterion) << 8) | n as u64)
}

/// Jacobi identity and agreement of the Hamiltonian bracket with the Witt
/// bracket under the embedding, on 500 random triples per N ∈ {2, 4}.
pub fn jacobi_and_oracle(seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4] {
        let mut s = sampler(seed, 1, n);
        for k in 0..500 {
            let outcome = (|| {
                let x = s.element(n, 5, 5, 9, true)?;
                let y = s.element(n, 5, 5, 9, true)?;
                let z = s.element(n, 5, 5, 9, true)?;
                let jacobi = x
                    .bracket(&y.bracket(&z)?)?
                    .add(&y.bracket(&z.bracket(&x)?)?)?
                    .add(&z.bracket(&x.bracket(&y)?)?)?;
                if !jacobi.is_zero() {
                    return Ok(Some(format!("Jacobi sum is {jacobi:?}")));
                }
                for (a, b) in [(&x, &y), (&y, &z), (&z, &x)] {
                    let lhs = embed_to_witt(&a.bracket(b)?)?;
                    let rhs = embed_to_witt(a)?.bracket(&embed_to_witt(b)?)?;
                    if lhs != rhs {
                        return Ok(Some(format!("embedding does not intertwine on {a:?}, {b:?}")));
                    }
                }
                Ok(None)
            })();
            tally.record(|| format!("N={n} triple {k}"), outcome);
        }
    }
    tally.finish(1, "jacobi_and_witt_oracle")
}

/// Homomorphism check for 100 random automorphisms per N ∈ {2, 4}, the pinned
/// failure of the plain parity sign, and the conjugation law on 50 cases.
pub fn automorphisms(seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4] {
        let mut s = sampler(seed, 2, n);
        for k in 0..100 {
            let anti = k % 2 == 1;
            let outcome = s.automorphism(n, anti).and_then(|sigma| {
                let report = verify_homomorphism(&sigma, 3)?;
                Ok(fail_unless(report.pass, || format!("counterexample {:?}", report.counterexample)))
            });
            tally.record(|| format!("N={n} automorphism {k}"), outcome);
        }
    }

    let pinned = (|| {
        let sigma = TorusAutomorphism::from_matrix(standard_anti_symplectic(2)?)?;
        let report = verify_homomorphism_with(&sigma, 3, SignRule::Parity)?;
        let expected = (LatticeVector::new(vec![1, 0])?, LatticeVector::new(vec![0, 1])?);
        Ok(fail_unless(
            matches!(&report.counterexample, Some(c) if (&c.r, &c.s) == (&expected.0, &expected.1)),
            || format!("parity sign gave {:?}", report.counterexample),
        ))
    })();
    tally.record(|| "parity sign regression".to_string(), pinned);

    let mut s = sampler(seed, 2, 0);
    for k in 0..50 {
        let n = if k % 2 == 0 { 2 } else { 4 };
        let outcome = (|| {
            let anti = s.coin();
            let theta = s.automorphism(n, anti)?;
            let lambda = s.scaling(n);
            let mu = theta.conjugate_scaling(&lambda)?;
            let theta_inv = theta.inverse()?;
            let pure = TorusAutomorphism::scaling_only(lambda)?;
            let conj = TorusAutomorphism::scaling_only(mu)?;
            for _ in 0..10 {
                let x = s.element(n, 5, 5, 9, true)?;
                let lhs = theta_inv.apply(&pure.apply(&theta.apply(&x)?)?)?;
                if lhs != conj.apply(&x)? {
                    return Ok(Some(format!("conjugation law fails on {x:?}")));
                }
            }
            Ok(None)
        })();
        tally.record(|| format!("N={n} conjugation {k}"), outcome);
    }
    tally.finish(2, "automorphism_classification")
}

/// `symplectic_complete` on 200 random primitive vectors per N ∈ {2, 4, 6}.
pub fn symplectic_transitivity(seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4, 6] {
        let mut s = sampler(seed, 3, n);
        for _ in 0..200 {
            let r = s.primitive_vector(n, 20);
            let outcome = (|| {
                let q = symplectic_complete(&r)?;
                let m = q.matrix();
                let j = IntegerMatrix::standard_j(n)?;
                let gram = m.transpose().mul(&j)?.mul(m)?;
                Ok(fail_unless(gram == j && m.column(0) == r, || format!("completion {m:?}")))
            })();
            tally.record(|| format!("N={n} r={r}"), outcome);
        }
    }
    tally.finish(3, "symplectic_transitivity")
}

/// Generation witnesses for every `0 < |r|∞ ≤ 4`, N ∈ {2, 4}.
pub fn generation(_seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4] {
        for r in box_vectors(n, 4) {
            let outcome = (|| {
                let w = generation_witness(&r)?;
                let value = evaluate_witness(&w)?;
                Ok(fail_unless(
                    matches!(value.as_monomial(), Some((c, deg)) if deg == &r && !c.is_zero()),
                    || format!("witness evaluates to {value:?}"),
                ))
            })();
            tally.record(|| format!("N={n} r={r}"), outcome);
        }
    }
    tally.finish(4, "generation")
}

/// `simplicity_reduce` on 100 random x per N ∈ {2, 4}, each against 20
/// random targets.
pub fn simplicity(seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4] {
        let mut s = sampler(seed, 5, n);
        for k in 0..100 {
            let x = s.nonzero_derived_element(n, 4, 3);
            for t in 0..20 {
                let target = s.nonzero_vector(n, 4);
                let outcome = x.as_ref().map_err(Clone::clone).and_then(|x| {
                    let w = simplicity_reduce(x, &target)?;
                    if &w.start != x || w.target != target {
                        return Ok(Some("witness does not start at x or end at the target".into()));
                    }
                    let c = w.evaluate()?;
                    Ok(fail_unless(!c.is_zero(), || "chain ends at zero".into()))
                });
                tally.record(|| format!("N={n} element {k} target {t}"), outcome);
            }
        }
    }
    tally.finish(5, "simplicity")
}

/// Every degree with `|d|∞ ≤ 2` on the radius 3 box, N ∈ {2, 4}, plus the
/// degree zero additive characters.
pub fn derivations(_seed: u64) -> CriterionReport {
    let mut tally = Tally::new();
    for n in [2, 4] {
        let bx = match TruncationBox::new(n, 3) {
            Ok(bx) => bx,
            Err(e) => {
                tally.record(|| format!("N={n} box"), Err(e));
                continue;
            }
        };
        let zero = LatticeVector::zero(n).expect("even dimension");
        for d in std::iter::once(zero).chain(box_vectors(n, 2)) {
            let outcome = certify_inner(&d, &bx).map(|report| {
                fail_unless(report.matches, || {
                    format!("dimension {} (expected {})", report.dimension, report.expected)
                })
            });
            tally.record(|| format!("N={n} degree {d}"), outcome);
        }
        let outcome = (|| {
            let basis = degree_zero_character_solve(&bx)?;
            if basis.len() != n {
                return Ok(Some(format!("{} additive characters", basis.len())));
            }
            for c in &basis {
                if linear_character_coefficients(c, &bx)?.is_none() {
                    return Ok(Some("a basis character is not linear".into()));
                }
            }
            Ok(None)
        })();
        tally.record(|| format!("N={n} additive characters"), outcome);
    }
    tally.finish(6, "derivations")
}

pub fn run(seed: u64) -> SelfcheckReport {
    let criteria = vec![
        jacobi_and_oracle(seed),
        automorphisms(seed),
        symplectic_transitivity(seed),
        generation(seed),
        simplicity(seed),
        derivations(seed),
    ];
    SelfcheckReport { seed, pass: criteria.iter().all(|c| c.pass), criteria }
}
