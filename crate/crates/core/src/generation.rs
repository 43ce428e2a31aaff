//! Bracket witnesses for generation of `H_N'` and ideal-reduction chains for
//! its simplicity.
//!
//! The generating set is `S = {±e_i, ±e_j ± e_k : j < k}`. A
//! [`BracketWitness`] is a binary tree over elements of `S` whose nested
//! bracket is a nonzero multiple of `h_r`; an [`IdealWitness`] is a chain of
//! `ad(h_s)` steps taking an arbitrary nonzero element of `H_N'` to a
//! multiple of a chosen `h_t`. Both are re-evaluated from scratch by their
//! checkers and never trusted on their cached values.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::HamiltonianElement;
use crate::error::{Error, Result};
use crate::lattice::{box_vectors, check_dimension, LatticeVector};
use crate::scalar::Scalar;
use crate::symplectic::GspMatrix;

/// A finite set of degrees whose basis elements generate a subalgebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    n: usize,
    members: BTreeSet<LatticeVector>,
}

impl GeneratorSet {
    /// `{±e_i} ∪ {±e_j ± e_k : j < k}`.
    pub fn standard(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let members = box_vectors(n, 1)
            .into_iter()
            .filter(|v| v.coords().iter().filter(|&&c| c != 0).count() <= 2)
            .collect();
        Ok(GeneratorSet { n, members })
    }

    /// The image `Q(S)` of this set under a lattice automorphism.
    pub fn transformed(&self, q: &GspMatrix) -> Result<Self> {
        if q.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: q.dim() });
        }
        let members = self.members.iter().map(|v| q.apply(v)).collect::<Result<_>>()?;
        Ok(GeneratorSet { n: self.n, members })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, r: &LatticeVector) -> bool {
        self.members.contains(r)
    }

    pub fn members(&self) -> impl Iterator<Item = &LatticeVector> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A bracket expression over generator leaves with cached value
/// `scalar · h_degree`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BracketWitness {
    Leaf(LatticeVector),
    Node {
        left: Box<BracketWitness>,
        right: Box<BracketWitness>,
        scalar: Scalar,
        degree: LatticeVector,
    },
}

impl BracketWitness {
    pub fn leaf(r: LatticeVector) -> Result<Self> {
        if r.is_zero() {
            return Err(Error::ZeroVector);
        }
        Ok(BracketWitness::Leaf(r))
    }

    /// `[left, right]`, caching `ω(l, r) · scalar_l · scalar_r`.
    pub fn node(left: BracketWitness, right: BracketWitness) -> Result<Self> {
        let w = left.degree().pairing(right.degree())?;
        if w == 0 {
            return Err(Error::InvalidWitness(format!(
                "children of degrees {} and {} pair to zero",
                left.degree(),
                right.degree()
            )));
        }
        let scalar = Scalar::from(w) * left.scalar() * right.scalar();
        let degree = left.degree().checked_add(right.degree())?;
        Ok(BracketWitness::Node { left: Box::new(left), right: Box::new(right), scalar, degree })
    }

    pub fn degree(&self) -> &LatticeVector {
        match self {
            BracketWitness::Leaf(r) => r,
            BracketWitness::Node { degree, .. } => degree,
        }
    }

    pub fn scalar(&self) -> Scalar {
        match self {
            BracketWitness::Leaf(_) => Scalar::one(),
            BracketWitness::Node { scalar, .. } => scalar.clone(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BracketWitness::Leaf(_) => 1,
            BracketWitness::Node { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            BracketWitness::Leaf(_) => 0,
            BracketWitness::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WitnessDoc {
    Leaf {
        leaf: LatticeVector,
    },
    Node {
        node: (Box<BracketWitness>, Box<BracketWitness>),
        scalar: Scalar,
        deg: LatticeVector,
    },
}

impl Serialize for BracketWitness {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = match self {
            BracketWitness::Leaf(r) => WitnessDoc::Leaf { leaf: r.clone() },
            BracketWitness::Node { left, right, scalar, degree } => WitnessDoc::Node {
                node: (left.clone(), right.clone()),
                scalar: scalar.clone(),
                deg: degree.clone(),
            },
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BracketWitness {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match WitnessDoc::deserialize(deserializer)? {
            WitnessDoc::Leaf { leaf } => BracketWitness::leaf(leaf).map_err(D::Error::custom),
            WitnessDoc::Node { node: (l, r), scalar, deg } => {
                let w = BracketWitness::node(*l, *r).map_err(D::Error::custom)?;
                if w.scalar() != scalar || w.degree() != &deg {
                    return Err(D::Error::custom(format!(
                        "cached value {scalar}·h_{deg} disagrees with children ({}·h_{})",
                        w.scalar(),
                        w.degree()
                    )));
                }
                Ok(w)
            }
        }
    }
}

fn sign(c: i64) -> i64 {
    if c < 0 {
        -1
    } else {
        1
    }
}

fn unit(n: usize, i: usize, eps: i64) -> LatticeVector {
    let mut c = vec![0; n];
    c[i] = eps;
    LatticeVector::from_slice_unchecked(&c)
}

fn extend(acc: BracketWitness, leaf: LatticeVector) -> Result<BracketWitness> {
    BracketWitness::node(acc, BracketWitness::Leaf(leaf))
}

/// Witness for `Σ ε_i e_i` with every `ε_i = ±1`.
fn sign_vector_witness(eps: &[i64]) -> Result<BracketWitness> {
    let n = eps.len();
    let m = n / 2;
    if m == 1 {
        return BracketWitness::leaf(LatticeVector::new(eps.to_vec())?);
    }
    let mut first = vec![0; n];
    first[0] = eps[0];
    first[1] = eps[1];
    let mut acc = BracketWitness::Leaf(LatticeVector::new(first)?);
    // each new leaf pairs with exactly one coordinate already present
    for k in 2..m {
        let j = m + k - 2;
        let mut c = vec![0; n];
        c[k] = eps[k];
        c[j] = eps[j];
        acc = extend(acc, LatticeVector::new(c)?)?;
    }
    acc = extend(acc, unit(n, n - 2, eps[n - 2]))?;
    extend(acc, unit(n, n - 1, eps[n - 1]))
}

/// Witness for `r` with no zero coordinate.
fn full_support_witness(r: &LatticeVector) -> Result<BracketWitness> {
    let eps: Vec<i64> = r.coords().iter().map(|&c| sign(c)).collect();
    let mut acc = sign_vector_witness(&eps)?;
    let n = r.dim();
    for (i, (&c, &e)) in r.coords().iter().zip(&eps).enumerate() {
        for _ in 1..c.unsigned_abs() {
            acc = extend(acc, unit(n, i, e))?;
        }
    }
    Ok(acc)
}

/// First `s = k·σ` (k = 1, 2, …; σ over sign patterns, all-plus first) with
/// `r + s` free of zero coordinates and `ω(r, s) ≠ 0`.
fn splitting_vector(r: &LatticeVector) -> Result<LatticeVector> {
    let n = r.dim();
    let bound = r.max_norm() as i64 + 2;
    for k in 1..=bound {
        for mask in 0u64..(1 << n) {
            let s: Vec<i64> =
                (0..n).map(|i| if mask >> i & 1 == 1 { -k } else { k }).collect();
            let s = LatticeVector::new(s)?;
            let sum = r.checked_add(&s)?;
            if sum.coords().iter().all(|&c| c != 0) && r.pairing(&s)? != 0 {
                return Ok(s);
            }
        }
    }
    Err(Error::Internal(format!("no splitting vector found for {r}")))
}

/// A bracket witness over the standard generating set with degree `r`.
pub fn generation_witness(r: &LatticeVector) -> Result<BracketWitness> {
    if r.is_zero() {
        return Err(Error::ZeroVector);
    }
    if GeneratorSet::standard(r.dim())?.contains(r) {
        return BracketWitness::leaf(r.clone());
    }
    if r.coords().iter().all(|&c| c != 0) {
        return full_support_witness(r);
    }
    let s = splitting_vector(r)?;
    let left = full_support_witness(&r.checked_add(&s)?)?;
    let right = full_support_witness(&s.checked_neg()?)?;
    BracketWitness::node(left, right)
}

/// Evaluates over the standard generating set of the witness's dimension.
pub fn evaluate_witness(w: &BracketWitness) -> Result<HamiltonianElement> {
    evaluate_witness_over(w, &GeneratorSet::standard(w.degree().dim())?)
}

/// Recomputes the nested bracket and checks it against the cached value.
pub fn evaluate_witness_over(w: &BracketWitness, set: &GeneratorSet) -> Result<HamiltonianElement> {
    let value = match w {
        BracketWitness::Leaf(r) => {
            if !set.contains(r) {
                return Err(Error::InvalidWitness(format!("leaf {r} is not a generator")));
            }
            return HamiltonianElement::basis(r);
        }
        BracketWitness::Node { left, right, .. } => {
            let l = evaluate_witness_over(left, set)?;
            let r = evaluate_witness_over(right, set)?;
            l.bracket(&r)?
        }
    };
    if value.is_zero() {
        return Err(Error::InvalidWitness(format!(
            "bracket at degree {} evaluates to zero",
            w.degree()
        )));
    }
    let expected = HamiltonianElement::monomial(w.degree(), w.scalar())?;
    if value != expected {
        return Err(Error::InvalidWitness(format!(
            "node evaluates to {value:?}, cache says {}·h_{}",
            w.scalar(),
            w.degree()
        )));
    }
    Ok(value)
}

/// Pushes every leaf through `q`, recomputing cached values.
pub fn transport(w: &BracketWitness, q: &GspMatrix) -> Result<BracketWitness> {
    match w {
        BracketWitness::Leaf(r) => BracketWitness::leaf(q.apply(r)?),
        BracketWitness::Node { left, right, .. } => {
            BracketWitness::node(transport(left, q)?, transport(right, q)?)
        }
    }
}

/// A chain `X_{k+1} = [h_{s_k}, X_k]` from `start` to a multiple of `h_target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealWitness {
    pub start: HamiltonianElement,
    pub steps: Vec<LatticeVector>,
    pub target: LatticeVector,
}

impl IdealWitness {
    /// Replays the chain and returns `c` with final element `c · h_target`, `c ≠ 0`.
    pub fn evaluate(&self) -> Result<Scalar> {
        let mut x = self.start.clone();
        for s in &self.steps {
            x = HamiltonianElement::basis(s)?.bracket(&x)?;
        }
        match x.as_monomial() {
            Some((c, deg)) if deg == &self.target => Ok(c.clone()),
            _ => Err(Error::InvalidWitness(format!(
                "chain ends at {x:?}, not a nonzero multiple of h_{}",
                self.target
            ))),
        }
    }
}

fn pair(a: &LatticeVector, b: &LatticeVector) -> Result<i128> {
    a.pairing(b)
}

fn apply_step(x: &HamiltonianElement, s: &LatticeVector) -> Result<HamiltonianElement> {
    HamiltonianElement::basis(s)?.bracket(x)
}

/// Nonzero integer vectors orthogonal to `w`: `w_b e_a − w_a e_b` reduced by
/// their content, with negations, sorted by (max-norm, lex).
fn kernel_candidates(w: &LatticeVector) -> Result<Vec<LatticeVector>> {
    let n = w.dim();
    let c = w.coords();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if c[a] == 0 && c[b] == 0 {
                continue;
            }
            let mut v = vec![0i64; n];
            v[a] = c[b];
            v[b] = c[a].checked_neg().ok_or(Error::Overflow)?;
            let v = LatticeVector::new(v)?;
            let g = v.content() as i64;
            let reduced = LatticeVector::new(v.coords().iter().map(|x| x / g).collect())?;
            out.insert(reduced.checked_neg()?);
            out.insert(reduced);
        }
    }
    let mut list: Vec<_> = out.into_iter().collect();
    list.sort_by(|x, y| x.max_norm().cmp(&y.max_norm()).then_with(|| x.cmp(y)));
    Ok(list)
}

/// Shrinks the support of `x` to one term by brackets with basis elements,
/// then moves that term to `target`. The returned chain is re-evaluated.
pub fn simplicity_reduce(x: &HamiltonianElement, target: &LatticeVector) -> Result<IdealWitness> {
    if x.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: target.dim() });
    }
    if x.has_cartan_part() {
        return Err(Error::CartanPart);
    }
    if x.is_zero() || target.is_zero() {
        return Err(Error::ZeroVector);
    }
    let n = x.dim();
    let mut steps = Vec::new();
    let mut current = x.clone();

    while current.terms().len() > 1 {
        let support: Vec<LatticeVector> = current.support().cloned().collect();
        let r1 = &support[0];
        let s = match support[1..].iter().find(|r| !r.is_collinear(r1)) {
            Some(rj) => {
                // kill r_j while keeping r_1
                let mut candidates = Vec::new();
                let direct = target.checked_sub(r1)?;
                if !direct.is_zero() {
                    candidates.push(direct);
                }
                candidates.extend(kernel_candidates(&rj.bar()?)?);
                let mut chosen = None;
                for s in candidates {
                    if pair(&s, rj)? == 0 && pair(&s, r1)? != 0 {
                        chosen = Some(s);
                        break;
                    }
                }
                chosen.ok_or_else(|| Error::Internal(format!("no annihilator for {rj}")))?
            }
            None => {
                // all terms on one line: bracket once to break collinearity
                let mut chosen = None;
                for sgn in [1, -1] {
                    for i in 0..n {
                        let s = unit(n, i, sgn);
                        if pair(&s, r1)? != 0 {
                            chosen = Some(s);
                            break;
                        }
                    }
                    if chosen.is_some() {
                        break;
                    }
                }
                chosen.ok_or_else(|| Error::Internal(format!("no direction off {r1}")))?
            }
        };
        current = apply_step(&current, &s)?;
        steps.push(s);
    }

    let r = current
        .as_monomial()
        .map(|(_, d)| d.clone())
        .ok_or_else(|| Error::Internal("reduction emptied the element".into()))?;
    if &r != target {
        if pair(target, &r)? != 0 {
            steps.push(target.checked_sub(&r)?);
        } else {
            let mut via = None;
            for u in box_vectors(n, 1) {
                if pair(&u, &r)? != 0 && pair(target, &u)? != 0 {
                    via = Some(u);
                    break;
                }
            }
            let u = via.ok_or_else(|| Error::Internal(format!("no auxiliary degree for {r}")))?;
            steps.push(u.checked_sub(&r)?);
            steps.push(target.checked_sub(&u)?);
        }
    }

    let witness = IdealWitness { start: x.clone(), steps, target: target.clone() };
    witness.evaluate()?;
    Ok(witness)
}
