//! Elements of `H_N = H_N' ⋊ h` and the Witt-algebra oracle.
//!
//! An element is a finite combination `Σ a_r h_r` (r ≠ 0) plus a Cartan
//! part `D(u, 0)`. The bracket is
//!
//! ```text
//! [h_r, h_s]       = ω(r, s) h_{r+s}
//! [D(u,0), h_r]    = (u · r) h_r
//! [D(u,0), D(v,0)] = 0
//! ```
//!
//! Terms are kept in a `BTreeMap` keyed by lattice vector, so iteration order
//! is lexicographic and equality is structural.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{check_dimension, LatticeVector};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct HamiltonianElement {
    n: usize,
    terms: BTreeMap<LatticeVector, Scalar>,
    cartan: Vec<Scalar>,
}

fn scalar_dot(u: &[Scalar], r: &LatticeVector) -> Scalar {
    let mut acc = Scalar::zero();
    for (ui, ri) in u.iter().zip(r.coords()) {
        if *ri != 0 && !ui.is_zero() {
            acc += &(ui * &Scalar::from(*ri));
        }
    }
    acc
}

fn add_term(terms: &mut BTreeMap<LatticeVector, Scalar>, key: LatticeVector, coef: Scalar) {
    if coef.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match terms.entry(key) {
        Entry::Vacant(e) => {
            e.insert(coef);
        }
        Entry::Occupied(mut e) => {
            let sum = e.get() + &coef;
            if sum.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
    }
}

impl HamiltonianElement {
    pub fn zero(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(HamiltonianElement { n, terms: BTreeMap::new(), cartan: vec![Scalar::zero(); n] })
    }

    /// The basis element `h_r`.
    pub fn basis(r: &LatticeVector) -> Result<Self> {
        Self::monomial(r, Scalar::one())
    }

    /// `coef · h_r`; zero `r` is rejected since `h_0` does not exist.
    pub fn monomial(r: &LatticeVector, coef: Scalar) -> Result<Self> {
        if r.is_zero() {
            return Err(Error::ZeroVector);
        }
        let mut x = Self::zero(r.dim())?;
        add_term(&mut x.terms, r.clone(), coef);
        Ok(x)
    }

    /// The Cartan element `D(u, 0)`.
    pub fn cartan_element(u: Vec<Scalar>) -> Result<Self> {
        let n = u.len();
        check_dimension(n)?;
        Ok(HamiltonianElement { n, terms: BTreeMap::new(), cartan: u })
    }

    /// Sums the given terms; repeated keys are combined and zeros pruned.
    pub fn from_terms<I>(n: usize, terms: I, cartan: Vec<Scalar>) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticeVector, Scalar)>,
    {
        check_dimension(n)?;
        if cartan.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cartan.len() });
        }
        let mut map = BTreeMap::new();
        for (r, c) in terms {
            if r.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.dim() });
            }
            if r.is_zero() {
                return Err(Error::ZeroVector);
            }
            add_term(&mut map, r, c);
        }
        Ok(HamiltonianElement { n, terms: map, cartan })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<LatticeVector, Scalar> {
        &self.terms
    }

    pub fn cartan(&self) -> &[Scalar] {
        &self.cartan
    }

    pub fn coefficient(&self, r: &LatticeVector) -> Scalar {
        self.terms.get(r).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn has_cartan_part(&self) -> bool {
        self.cartan.iter().any(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && !self.has_cartan_part()
    }

    pub fn support(&self) -> impl Iterator<Item = &LatticeVector> {
        self.terms.keys()
    }

    /// `Some((coef, r))` when the element is exactly `coef · h_r`, coef ≠ 0.
    pub fn as_monomial(&self) -> Option<(&Scalar, &LatticeVector)> {
        if self.terms.len() == 1 && !self.has_cartan_part() {
            self.terms.iter().next().map(|(r, c)| (c, r))
        } else {
            None
        }
    }

    fn ensure_same_dim(&self, other: &HamiltonianElement) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    pub fn add(&self, other: &HamiltonianElement) -> Result<HamiltonianElement> {
        self.ensure_same_dim(other)?;
        let mut terms = self.terms.clone();
        for (r, c) in &other.terms {
            add_term(&mut terms, r.clone(), c.clone());
        }
        let cartan = self.cartan.iter().zip(&other.cartan).map(|(a, b)| a + b).collect();
        Ok(HamiltonianElement { n: self.n, terms, cartan })
    }

    pub fn scale(&self, k: &Scalar) -> HamiltonianElement {
        if k.is_zero() {
            return HamiltonianElement {
                n: self.n,
                terms: BTreeMap::new(),
                cartan: vec![Scalar::zero(); self.n],
            };
        }
        HamiltonianElement {
            n: self.n,
            terms: self.terms.iter().map(|(r, c)| (r.clone(), c * k)).collect(),
            cartan: self.cartan.iter().map(|c| c * k).collect(),
        }
    }

    pub fn neg(&self) -> HamiltonianElement {
        self.scale(&-Scalar::one())
    }

    pub fn sub(&self, other: &HamiltonianElement) -> Result<HamiltonianElement> {
        self.add(&other.neg())
    }

    /// The Lie bracket `[self, other]`.
    pub fn bracket(&self, other: &HamiltonianElement) -> Result<HamiltonianElement> {
        self.ensure_same_dim(other)?;
        let mut terms = BTreeMap::new();
        for (r, a) in &self.terms {
            for (s, b) in &other.terms {
                let w = r.pairing(s)?;
                if w == 0 {
                    continue;
                }
                let coef = &(a * b) * &Scalar::from(w);
                add_term(&mut terms, r.checked_add(s)?, coef);
            }
        }
        if self.has_cartan_part() {
            for (s, b) in &other.terms {
                add_term(&mut terms, s.clone(), scalar_dot(&self.cartan, s) * b);
            }
        }
        if other.has_cartan_part() {
            for (r, a) in &self.terms {
                add_term(&mut terms, r.clone(), -(scalar_dot(&other.cartan, r) * a));
            }
        }
        Ok(HamiltonianElement { n: self.n, terms, cartan: vec![Scalar::zero(); self.n] })
    }

    /// The adjoint operator `ad(self): y ↦ [self, y]`.
    pub fn ad(&self) -> Adjoint<'_> {
        Adjoint(self)
    }
}

/// `ad(x)` as a value.
#[derive(Clone, Copy, Debug)]
pub struct Adjoint<'a>(&'a HamiltonianElement);

impl Adjoint<'_> {
    pub fn apply(&self, y: &HamiltonianElement) -> Result<HamiltonianElement> {
        self.0.bracket(y)
    }
}

pub fn bracket(x: &HamiltonianElement, y: &HamiltonianElement) -> Result<HamiltonianElement> {
    x.bracket(y)
}

pub fn ad(x: &HamiltonianElement) -> Adjoint<'_> {
    x.ad()
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TermDoc {
    pub(crate) deg: LatticeVector,
    pub(crate) coef: Scalar,
}

#[derive(Serialize, Deserialize)]
struct ElementDoc {
    n: usize,
    cartan: Vec<Scalar>,
    terms: Vec<TermDoc>,
}

impl Serialize for HamiltonianElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ElementDoc {
            n: self.n,
            cartan: self.cartan.clone(),
            terms: self
                .terms
                .iter()
                .map(|(r, c)| TermDoc { deg: r.clone(), coef: c.clone() })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl HamiltonianElement {
    fn from_doc(doc: ElementDoc) -> Result<Self> {
        check_dimension(doc.n)?;
        if doc.cartan.len() != doc.n {
            return Err(Error::DimensionMismatch { expected: doc.n, found: doc.cartan.len() });
        }
        let mut terms = BTreeMap::new();
        let mut prev: Option<&LatticeVector> = None;
        for t in &doc.terms {
            if t.deg.dim() != doc.n {
                return Err(Error::DimensionMismatch { expected: doc.n, found: t.deg.dim() });
            }
            if t.deg.is_zero() {
                return Err(Error::NonCanonical("term with zero degree".into()));
            }
            if t.coef.is_zero() {
                return Err(Error::NonCanonical(format!("zero coefficient at {}", t.deg)));
            }
            if let Some(p) = prev {
                if p >= &t.deg {
                    return Err(Error::NonCanonical(format!(
                        "terms not strictly sorted: {} before {}",
                        p, t.deg
                    )));
                }
            }
            prev = Some(&t.deg);
        }
        for t in doc.terms {
            terms.insert(t.deg, t.coef);
        }
        Ok(HamiltonianElement { n: doc.n, terms, cartan: doc.cartan })
    }
}

impl<'de> Deserialize<'de> for HamiltonianElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = ElementDoc::deserialize(deserializer)?;
        HamiltonianElement::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Element of the Witt algebra `W_N`: terms `D(u, r)` keyed by `r`
/// (zero allowed), with nonzero coefficient vectors `u`.
///
/// Used only as an independent oracle for the Hamiltonian bracket.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WittElement {
    n: usize,
    terms: BTreeMap<LatticeVector, Vec<Scalar>>,
}

fn add_witt_term(terms: &mut BTreeMap<LatticeVector, Vec<Scalar>>, r: LatticeVector, u: Vec<Scalar>) {
    if u.iter().all(Scalar::is_zero) {
        return;
    }
    let entry = terms.entry(r);
    use std::collections::btree_map::Entry;
    match entry {
        Entry::Vacant(e) => {
            e.insert(u);
        }
        Entry::Occupied(mut e) => {
            let sum: Vec<Scalar> = e.get().iter().zip(&u).map(|(a, b)| a + b).collect();
            if sum.iter().all(Scalar::is_zero) {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
    }
}

impl WittElement {
    pub fn zero(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(WittElement { n, terms: BTreeMap::new() })
    }

    /// The single term `D(u, r)`.
    pub fn term(u: Vec<Scalar>, r: &LatticeVector) -> Result<Self> {
        if u.len() != r.dim() {
            return Err(Error::DimensionMismatch { expected: r.dim(), found: u.len() });
        }
        let mut x = Self::zero(r.dim())?;
        add_witt_term(&mut x.terms, r.clone(), u);
        Ok(x)
    }

    pub fn terms(&self) -> &BTreeMap<LatticeVector, Vec<Scalar>> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `[D(u,r), D(v,s)] = D((u·s) v − (v·r) u, r + s)`, extended bilinearly.
    pub fn bracket(&self, other: &WittElement) -> Result<WittElement> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut terms = BTreeMap::new();
        for (r, u) in &self.terms {
            for (s, v) in &other.terms {
                let us = scalar_dot(u, s);
                let vr = scalar_dot(v, r);
                let w: Vec<Scalar> =
                    v.iter().zip(u).map(|(vi, ui)| &(&us * vi) - &(&vr * ui)).collect();
                add_witt_term(&mut terms, r.checked_add(s)?, w);
            }
        }
        Ok(WittElement { n: self.n, terms })
    }

    /// True iff every term `D(u, r)` has `u · r = 0`, i.e. lies in `S_N`.
    pub fn is_divergence_free(&self) -> bool {
        self.terms.iter().all(|(r, u)| scalar_dot(u, r).is_zero())
    }
}

pub fn witt_bracket(x: &WittElement, y: &WittElement) -> Result<WittElement> {
    x.bracket(y)
}

pub fn witt_divergence_check(x: &WittElement) -> bool {
    x.is_divergence_free()
}

/// `h_r ↦ D(bar(r), r)`, `D(u, 0) ↦ D(u, 0)`.
pub fn embed_to_witt(x: &HamiltonianElement) -> Result<WittElement> {
    let mut out = WittElement::zero(x.n)?;
    for (r, a) in &x.terms {
        let u: Vec<Scalar> = r.bar()?.coords().iter().map(|&c| &Scalar::from(c) * a).collect();
        add_witt_term(&mut out.terms, r.clone(), u);
    }
    add_witt_term(&mut out.terms, LatticeVector::zero(x.n)?, x.cartan.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> LatticeVector {
        LatticeVector::new(c.to_vec()).unwrap()
    }

    fn h(c: &[i64]) -> HamiltonianElement {
        HamiltonianElement::basis(&v(c)).unwrap()
    }

    fn ints(c: &[i64]) -> Vec<Scalar> {
        c.iter().map(|&x| Scalar::from(x)).collect()
    }

    #[test]
    fn bracket_examples() {
        let got = h(&[1, 0]).bracket(&h(&[0, 1])).unwrap();
        let want = HamiltonianElement::monomial(&v(&[1, 1]), Scalar::from(-1)).unwrap();
        assert_eq!(got, want);

        let d1 = HamiltonianElement::cartan_element(ints(&[1, 0])).unwrap();
        let got = d1.bracket(&h(&[2, 3])).unwrap();
        assert_eq!(got, HamiltonianElement::monomial(&v(&[2, 3]), Scalar::from(2)).unwrap());

        let x = h(&[1, 2]).add(&d1).unwrap().add(&h(&[-3, 1])).unwrap();
        assert!(x.bracket(&x).unwrap().is_zero());
    }

    #[test]
    fn opposite_degrees_commute() {
        assert!(h(&[2, -1, 3, 0]).bracket(&h(&[-2, 1, -3, 0])).unwrap().is_zero());
        assert_eq!(HamiltonianElement::basis(&v(&[0, 0])), Err(Error::ZeroVector));
    }

    #[test]
    fn ad_examples() {
        let zero = HamiltonianElement::zero(2).unwrap();
        assert!(zero.ad().apply(&h(&[3, 1])).unwrap().is_zero());
        assert_eq!(
            h(&[1, 0]).ad().apply(&h(&[0, 1])).unwrap(),
            HamiltonianElement::monomial(&v(&[1, 1]), Scalar::from(-1)).unwrap()
        );
        let d2 = HamiltonianElement::cartan_element(ints(&[0, 1])).unwrap();
        assert_eq!(
            d2.ad().apply(&h(&[2, 3])).unwrap(),
            HamiltonianElement::monomial(&v(&[2, 3]), Scalar::from(3)).unwrap()
        );
    }

    #[test]
    fn cartan_on_right_has_opposite_sign() {
        let d = HamiltonianElement::cartan_element(ints(&[2, -1])).unwrap();
        let lhs = h(&[1, 1]).bracket(&d).unwrap();
        let rhs = d.bracket(&h(&[1, 1])).unwrap().neg();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            h(&[1, 0]).bracket(&h(&[1, 0, 0, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn witt_bracket_examples() {
        let a = WittElement::term(ints(&[1, 0]), &v(&[0, 0])).unwrap();
        let b = WittElement::term(ints(&[0, 1]), &v(&[1, 1])).unwrap();
        assert_eq!(a.bracket(&b).unwrap(), b);

        let x = WittElement::term(ints(&[0, -1]), &v(&[1, 0])).unwrap();
        let y = WittElement::term(ints(&[1, 0]), &v(&[0, 1])).unwrap();
        let want = WittElement::term(ints(&[-1, 1]), &v(&[1, 1])).unwrap();
        assert_eq!(x.bracket(&y).unwrap(), want);
        assert!(x.bracket(&x).unwrap().is_zero());
    }

    #[test]
    fn embedding_examples() {
        assert_eq!(
            embed_to_witt(&h(&[1, 0])).unwrap(),
            WittElement::term(ints(&[0, -1]), &v(&[1, 0])).unwrap()
        );
        assert_eq!(
            embed_to_witt(&h(&[0, 1])).unwrap(),
            WittElement::term(ints(&[1, 0]), &v(&[0, 1])).unwrap()
        );
        assert!(embed_to_witt(&HamiltonianElement::zero(4).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn divergence_examples() {
        assert!(embed_to_witt(&h(&[3, -2, 1, 5])).unwrap().is_divergence_free());
        assert!(!WittElement::term(ints(&[1, 0]), &v(&[1, 0])).unwrap().is_divergence_free());
        assert!(WittElement::term(ints(&[0, 1]), &v(&[1, 0])).unwrap().is_divergence_free());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let x = h(&[1, 0])
            .add(&HamiltonianElement::monomial(&v(&[-2, 3]), Scalar::new(3, 7).unwrap()).unwrap())
            .unwrap()
            .add(&HamiltonianElement::cartan_element(ints(&[1, -4])).unwrap())
            .unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(
            s,
            r#"{"n":2,"cartan":["1","-4"],"terms":[{"deg":[-2,3],"coef":"3/7"},{"deg":[1,0],"coef":"1"}]}"#
        );
        assert_eq!(serde_json::from_str::<HamiltonianElement>(&s).unwrap(), x);

        let unsorted = r#"{"n":2,"cartan":["0","0"],"terms":[{"deg":[1,0],"coef":"1"},{"deg":[-2,3],"coef":"1"}]}"#;
        assert!(serde_json::from_str::<HamiltonianElement>(unsorted).is_err());
        let zero_coef = r#"{"n":2,"cartan":["0","0"],"terms":[{"deg":[1,0],"coef":"0"}]}"#;
        assert!(serde_json::from_str::<HamiltonianElement>(zero_coef).is_err());
        let zero_deg = r#"{"n":2,"cartan":["0","0"],"terms":[{"deg":[0,0],"coef":"1"}]}"#;
        assert!(serde_json::from_str::<HamiltonianElement>(zero_deg).is_err());
        let dup = r#"{"n":2,"cartan":["0","0"],"terms":[{"deg":[1,0],"coef":"1"},{"deg":[1,0],"coef":"2"}]}"#;
        assert!(serde_json::from_str::<HamiltonianElement>(dup).is_err());
    }
}
