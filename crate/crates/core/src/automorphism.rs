//! Automorphisms of `H_N'` and `H_N` parametrized by `(Q, λ) ∈ GSp_N(Z) ⋉ (Q^×)^N`.
//!
//! ```text
//! h_r     ↦ c_r h_{Qr},   c_r = λ^r                 if Q^T J Q =  J
//!                          c_r = (−1)^{|r|−1} λ^r    if Q^T J Q = −J
//! D(u, 0) ↦ D(Q^{−T} u, 0)
//! ```
//!
//! with `λ^r = Π λ_i^{r_i}` and `|r| = Σ r_i`. The anti-symplectic sign is
//! the one forced by the cocycle rule `c_{r+s} = −c_r c_s`;
//! [`SignRule::Parity`] keeps the alternative `(−1)^{|r|}` around so the
//! homomorphism check can show that it fails.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::HamiltonianElement;
use crate::error::{Error, Result};
use crate::lattice::{box_vectors, pairing_i128, pairing_small, LatticeVector};
use crate::scalar::Scalar;
use crate::symplectic::{GspMatrix, IntegerMatrix};

/// Sign applied to `λ^r` when the matrix part is anti-symplectic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRule {
    /// `(−1)^{|r|−1}`: the rule under which `apply` is a Lie homomorphism.
    #[default]
    OddShift,
    /// `(−1)^{|r|}`: differs by a global sign on odd-|r| generators; not a homomorphism.
    Parity,
}

impl SignRule {
    fn sign(self, r: &LatticeVector) -> i64 {
        let s = r.coordinate_sum();
        let exponent = match self {
            SignRule::OddShift => s - 1,
            SignRule::Parity => s,
        };
        if exponent.rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }
}

/// `λ_i^k` with its `i128` form when it fits.
type Power = (Scalar, Option<(i128, i128)>);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TorusAutomorphism {
    q: GspMatrix,
    q_inv_t: IntegerMatrix,
    scaling: Vec<Scalar>,
}

/// `λ^r = Π λ_i^{r_i}`.
pub(crate) fn scaling_power(lambda: &[Scalar], r: &LatticeVector) -> Result<Scalar> {
    let mut acc = Scalar::one();
    for (l, &e) in lambda.iter().zip(r.coords()) {
        if e != 0 {
            let p = l.pow(e).ok_or(Error::Overflow)?;
            acc = acc * p;
        }
    }
    Ok(acc)
}

impl TorusAutomorphism {
    pub fn new(q: GspMatrix, scaling: Vec<Scalar>) -> Result<Self> {
        if scaling.len() != q.dim() {
            return Err(Error::DimensionMismatch { expected: q.dim(), found: scaling.len() });
        }
        if let Some(index) = scaling.iter().position(Scalar::is_zero) {
            return Err(Error::ZeroScaling { index });
        }
        let q_inv_t = q.inverse_transpose()?;
        Ok(TorusAutomorphism { q, q_inv_t, scaling })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(GspMatrix::identity(n)?, vec![Scalar::one(); n])
    }

    /// The pure scaling `σ_λ`: `h_r ↦ λ^r h_r`.
    pub fn scaling_only(lambda: Vec<Scalar>) -> Result<Self> {
        Self::new(GspMatrix::identity(lambda.len())?, lambda)
    }

    /// The pure matrix automorphism `σ_Q` (all λ_i = 1).
    pub fn from_matrix(q: GspMatrix) -> Result<Self> {
        let n = q.dim();
        Self::new(q, vec![Scalar::one(); n])
    }

    pub fn matrix(&self) -> &GspMatrix {
        &self.q
    }

    pub fn scaling(&self) -> &[Scalar] {
        &self.scaling
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// Image of the basis element `h_r`: `(c_r, Qr)`.
    pub fn apply_basis(&self, r: &LatticeVector) -> Result<(Scalar, LatticeVector)> {
        self.apply_basis_with(r, SignRule::OddShift)
    }

    pub fn apply_basis_with(&self, r: &LatticeVector, rule: SignRule) -> Result<(Scalar, LatticeVector)> {
        if r.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: r.dim() });
        }
        if r.is_zero() {
            return Err(Error::ZeroVector);
        }
        let mut coef = scaling_power(&self.scaling, r)?;
        if !self.q.is_symplectic() && rule.sign(r) < 0 {
            coef = -coef;
        }
        Ok((coef, self.q.apply(r)?))
    }

    /// `apply_basis_with` for every nonzero `r` of the box of the given
    /// radius, in lexicographic order, sharing the powers of each `λ_i`.
    fn basis_images(&self, radius: i64, rule: SignRule) -> Result<Vec<(LatticeVector, Scalar, LatticeVector)>> {
        let powers: Vec<Vec<Power>> = self
            .scaling
            .iter()
            .map(|l| {
                (-radius..=radius)
                    .map(|k| {
                        let p = l.pow(k).ok_or(Error::Overflow)?;
                        let small = p.to_i128_pair();
                        Ok((p, small))
                    })
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for r in box_vectors(self.dim(), radius) {
            let factors: Vec<_> =
                r.coords().iter().zip(&powers).map(|(&k, p)| &p[(k + radius) as usize]).collect();
            let small = factors.iter().try_fold((1i128, 1i128), |(a, b), (_, f)| {
                let (p, q) = (*f)?;
                Some((a.checked_mul(p)?, b.checked_mul(q)?))
            });
            let mut coef = match small {
                Some((p, q)) => {
                    let g = num_integer::Integer::gcd(&p, &q);
                    Scalar::new(p / g, q / g)?
                }
                None => factors.iter().fold(Scalar::one(), |acc, (f, _)| acc * f.clone()),
            };
            if !self.q.is_symplectic() && rule.sign(&r) < 0 {
                coef = -coef;
            }
            let qr = self.q.apply(&r)?;
            out.push((r, coef, qr));
        }
        Ok(out)
    }

    pub fn apply(&self, x: &HamiltonianElement) -> Result<HamiltonianElement> {
        self.apply_with(x, SignRule::OddShift)
    }

    pub fn apply_with(&self, x: &HamiltonianElement, rule: SignRule) -> Result<HamiltonianElement> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        let n = self.dim();
        let mut terms = Vec::with_capacity(x.terms().len());
        for (r, a) in x.terms() {
            let (c, qr) = self.apply_basis_with(r, rule)?;
            terms.push((qr, a * &c));
        }
        let cartan = (0..n)
            .map(|i| {
                let mut acc = Scalar::zero();
                for (j, u) in x.cartan().iter().enumerate() {
                    let e = self.q_inv_t.get(i, j);
                    if e != 0 && !u.is_zero() {
                        acc += &(u * &Scalar::from(e));
                    }
                }
                acc
            })
            .collect();
        HamiltonianElement::from_terms(n, terms, cartan)
    }

    fn ensure_same_dim(&self, other: &TorusAutomorphism) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Builds the automorphism with matrix `q` whose action on every `h_{e_i}`
    /// matches `action`, then checks it against `action` on all `h_{e_i + e_j}`.
    fn extensional<F>(q: GspMatrix, action: F) -> Result<TorusAutomorphism>
    where
        F: Fn(&HamiltonianElement) -> Result<HamiltonianElement>,
    {
        let n = q.dim();
        let units: Vec<LatticeVector> =
            (0..n).map(|i| LatticeVector::unit(n, i)).collect::<Result<_>>()?;
        let mut scaling = Vec::with_capacity(n);
        for e in &units {
            let image = action(&HamiltonianElement::basis(e)?)?;
            let (c, deg) = image
                .as_monomial()
                .ok_or_else(|| Error::Internal(format!("image of h_{e} is not a monomial")))?;
            if deg != &q.apply(e)? {
                return Err(Error::Internal(format!("image of h_{e} has degree {deg}")));
            }
            // |e_i| = 1, so both sign rules give +1 here
            scaling.push(c.clone());
        }
        let sigma = TorusAutomorphism::new(q, scaling)?;
        for i in 0..n {
            for j in i..n {
                let r = units[i].checked_add(&units[j])?;
                let x = HamiltonianElement::basis(&r)?;
                if sigma.apply(&x)? != action(&x)? {
                    return Err(Error::Internal(format!("extensional check failed at h_{r}")));
                }
            }
        }
        Ok(sigma)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &TorusAutomorphism) -> Result<TorusAutomorphism> {
        self.ensure_same_dim(other)?;
        let q = self.q.multiply(&other.q)?;
        Self::extensional(q, |x| self.apply(&other.apply(x)?))
    }

    pub fn inverse(&self) -> Result<TorusAutomorphism> {
        let q_inv = self.q.inverse()?;
        let n = self.dim();
        // σ(h_{Q^{-1} e_i}) = c h_{e_i}  ⇒  σ^{-1}(h_{e_i}) = c^{-1} h_{Q^{-1} e_i}
        let mut scaling = Vec::with_capacity(n);
        for i in 0..n {
            let pre = q_inv.apply(&LatticeVector::unit(n, i)?)?;
            let (c, _) = self.apply_basis(&pre)?;
            scaling.push(c.recip().ok_or_else(|| Error::Internal("zero image coefficient".into()))?);
        }
        let inv = TorusAutomorphism::new(q_inv, scaling)?;
        let round = self.compose(&inv)?;
        if round != TorusAutomorphism::identity(n)? {
            return Err(Error::Internal("inverse does not invert".into()));
        }
        Ok(inv)
    }

    /// `μ` with `θ^{-1} σ_λ θ = σ_μ`, namely `μ_i = λ^{Q e_i}`.
    pub fn conjugate_scaling(&self, lambda: &[Scalar]) -> Result<Vec<Scalar>> {
        let n = self.dim();
        if lambda.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lambda.len() });
        }
        if let Some(index) = lambda.iter().position(Scalar::is_zero) {
            return Err(Error::ZeroScaling { index });
        }
        (0..n).map(|i| scaling_power(lambda, &self.q.matrix().column(i))).collect()
    }
}

pub fn apply(sigma: &TorusAutomorphism, x: &HamiltonianElement) -> Result<HamiltonianElement> {
    sigma.apply(x)
}

pub fn compose(s1: &TorusAutomorphism, s2: &TorusAutomorphism) -> Result<TorusAutomorphism> {
    s1.compose(s2)
}

pub fn conjugate_scaling(theta: &TorusAutomorphism, lambda: &[Scalar]) -> Result<Vec<Scalar>> {
    theta.conjugate_scaling(lambda)
}

#[derive(Serialize, Deserialize)]
struct AutomorphismDoc {
    q: IntegerMatrix,
    multiplier: i64,
    lambda: Vec<Scalar>,
}

impl Serialize for TorusAutomorphism {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AutomorphismDoc {
            q: self.q.matrix().clone(),
            multiplier: self.q.multiplier(),
            lambda: self.scaling.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TorusAutomorphism {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AutomorphismDoc::deserialize(deserializer)?;
        let q = GspMatrix::new(doc.q).map_err(D::Error::custom)?;
        if q.multiplier() != doc.multiplier {
            return Err(D::Error::custom(format!(
                "declared multiplier {} but matrix has multiplier {}",
                doc.multiplier,
                q.multiplier()
            )));
        }
        TorusAutomorphism::new(q, doc.lambda).map_err(D::Error::custom)
    }
}

/// First pair on which the homomorphism identity fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub r: LatticeVector,
    pub s: LatticeVector,
    /// `σ([h_r, h_s])`
    pub image_of_bracket: HamiltonianElement,
    /// `[σ(h_r), σ(h_s)]`
    pub bracket_of_images: HamiltonianElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HomomorphismReport {
    pub pass: bool,
    pub radius: i64,
    pub pairs_checked: u64,
    pub counterexample: Option<Counterexample>,
}

struct ImageTable {
    n: usize,
    offset: i64,
    side: usize,
    coefs: Vec<Option<Scalar>>,
    /// `i128` shadows of `coefs` for the fast comparison path
    small: Vec<Option<(i128, i128)>>,
    degrees: Vec<i64>,
}

impl ImageTable {
    fn build(sigma: &TorusAutomorphism, radius: i64, rule: SignRule) -> Result<Self> {
        let n = sigma.dim();
        let side = (2 * radius + 1) as usize;
        let total = side.pow(n as u32);
        let mut coefs = Vec::with_capacity(total);
        let mut degrees = vec![0i64; total * n];
        coefs.resize_with(total, || None);
        let mut table =
            ImageTable { n, offset: radius, side, coefs, small: vec![None; total], degrees: Vec::new() };
        for (r, c, qr) in sigma.basis_images(radius, rule)? {
            let idx = table.index(r.coords());
            degrees[idx * n..(idx + 1) * n].copy_from_slice(qr.coords());
            table.small[idx] = c.to_i128_pair();
            table.coefs[idx] = Some(c);
        }
        table.degrees = degrees;
        Ok(table)
    }

    fn index(&self, v: &[i64]) -> usize {
        let mut idx = 0usize;
        for &c in v {
            idx = idx * self.side + (c + self.offset) as usize;
        }
        idx
    }

    fn degree(&self, idx: usize) -> &[i64] {
        &self.degrees[idx * self.n..(idx + 1) * self.n]
    }

    fn coef(&self, idx: usize) -> &Scalar {
        self.coefs[idx].as_ref().expect("index of a nonzero vector")
    }
}

fn small_eq(lhs: (i128, i128, i128), rhs: (i128, i128, i128, i128)) -> Option<bool> {
    // lhs = w·n1/d1, rhs = w'·n2·n3/(d2·d3)
    let (w, n1, d1) = lhs;
    let (w2, n2, n3, d23) = rhs;
    let l = w.checked_mul(n1)?.checked_mul(d23)?;
    let r = w2.checked_mul(n2)?.checked_mul(n3)?.checked_mul(d1)?;
    Some(l == r)
}

impl ImageTable {
    /// `ω(r,s)·c_{r+s} h_{Q(r+s)} = ω(Qr,Qs)·c_r c_s h_{Qr+Qs}`, exactly.
    fn pair_holds(&self, r: &[i64], s: &[i64]) -> bool {
        let sum: Vec<i64> = r.iter().zip(s).map(|(a, b)| a + b).collect();
        let (ir, is) = (self.index(r), self.index(s));
        let (qr, qs) = (self.degree(ir), self.degree(is));
        let w = pairing_small(r, s) as i128;
        let w2 = pairing_i128(qr, qs).expect("image degrees are small");
        let lhs_zero = w == 0 || sum.iter().all(|&c| c == 0);
        if lhs_zero || w2 == 0 {
            return lhs_zero && w2 == 0;
        }
        let isum = self.index(&sum);
        let image_sum: Vec<i64> = qr.iter().zip(qs).map(|(a, b)| a + b).collect();
        if self.degree(isum) != image_sum.as_slice() {
            return false;
        }
        if let (Some((n1, d1)), Some((n2, e2)), Some((n3, e3))) =
            (self.small[isum], self.small[ir], self.small[is])
        {
            if let Some(eq) = e2.checked_mul(e3).and_then(|d23| small_eq((w, n1, d1), (w2, n2, n3, d23))) {
                return eq;
            }
        }
        let (c1, c2, c3) = (self.coef(isum), self.coef(ir), self.coef(is));
        &Scalar::from(w) * c1 == &(c2 * c3) * &Scalar::from(w2)
    }
}

fn bits(x: i128) -> u32 {
    128 - x.unsigned_abs().leading_zeros()
}

/// The pair check with all cross products known to fit in `i128`.
struct FastPairs<'a> {
    table: &'a ImageTable,
    origin: usize,
    coords: Vec<i64>,
    indices: Vec<usize>,
    num: Vec<i128>,
    den: Vec<i128>,
}

impl<'a> FastPairs<'a> {
    /// `None` unless every coefficient has an `i128` shadow and the products
    /// `ω·n_{r+s}·d_r·d_s` and `ω'·n_r·n_s·d_{r+s}` cannot overflow.
    fn new(table: &'a ImageTable, small_box: &[LatticeVector]) -> Option<Self> {
        let n = table.n;
        let mut num = vec![0i128; table.small.len()];
        let mut den = vec![1i128; table.small.len()];
        let mut big_bits = 0;
        for (idx, c) in table.small.iter().enumerate() {
            if table.coefs[idx].is_some() {
                let (p, q) = (*c)?;
                num[idx] = p;
                den[idx] = q;
                big_bits = big_bits.max(bits(p)).max(bits(q));
            }
        }
        let indices: Vec<usize> = small_box.iter().map(|r| table.index(r.coords())).collect();
        let mut small_bits = 0;
        let mut max_coord = 0i128;
        let mut max_image = 0i128;
        for (r, &idx) in small_box.iter().zip(&indices) {
            small_bits = small_bits.max(bits(num[idx])).max(bits(den[idx]));
            max_coord = max_coord.max(r.max_norm() as i128);
            for &d in table.degree(idx) {
                max_image = max_image.max(d.unsigned_abs() as i128);
            }
        }
        let half = (n / 2) as i128;
        let w_bits = bits(2 * half * max_coord * max_coord);
        let w2_bits = bits(2 * half * max_image * max_image);
        // image degrees of sums stay within i64 and products within i128
        if w2_bits > 62 || w_bits.max(w2_bits) + big_bits + 2 * small_bits > 126 {
            return None;
        }
        let coords = small_box.iter().flat_map(|r| r.coords().iter().copied()).collect();
        let origin = table.index(&vec![0; n]);
        Some(FastPairs { table, origin, coords, indices, num, den })
    }

    #[inline]
    fn holds(&self, ir: usize, is: usize, r: &[i64], s: &[i64]) -> bool {
        let t = self.table;
        let (qr, qs) = (t.degree(ir), t.degree(is));
        let w = pairing_small(r, s) as i128;
        let w2 = pairing_small(qr, qs) as i128;
        // the table index is affine, so idx(r + s) = idx(r) + idx(s) − idx(0)
        let isum = ir + is - self.origin;
        let lhs_zero = w == 0 || isum == self.origin;
        if lhs_zero || w2 == 0 {
            return lhs_zero && w2 == 0;
        }
        let qsum = t.degree(isum);
        if qsum.iter().zip(qr.iter().zip(qs)).any(|(a, (b, c))| *a != b.wrapping_add(*c)) {
            return false;
        }
        // bounded by construction, see `new`
        let lhs = w.wrapping_mul(self.num[isum]).wrapping_mul(self.den[ir]).wrapping_mul(self.den[is]);
        let rhs = w2.wrapping_mul(self.num[ir]).wrapping_mul(self.num[is]).wrapping_mul(self.den[isum]);
        lhs == rhs
    }

    /// First failing box pair `(a, b)`, `a < b`, in lexicographic order.
    fn first_box_failure(&self) -> Option<(usize, usize)> {
        let n = self.table.n;
        let len = self.indices.len();
        for a in 0..len {
            let r = &self.coords[a * n..(a + 1) * n];
            let ir = self.indices[a];
            for b in a + 1..len {
                let s = &self.coords[b * n..(b + 1) * n];
                if !self.holds(ir, self.indices[b], r, s) {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

/// Checks `σ([x, y]) = [σ(x), σ(y)]` for the Cartan generators against every
/// `h_r`, then for all pairs `h_r, h_s` with `|r|∞, |s|∞ ≤ radius`. Pairs of
/// standard unit vectors are checked first, then all box pairs in
/// lexicographic order; the first failure is reported.
pub fn verify_homomorphism(sigma: &TorusAutomorphism, radius: i64) -> Result<HomomorphismReport> {
    verify_homomorphism_with(sigma, radius, SignRule::OddShift)
}

pub fn verify_homomorphism_with(
    sigma: &TorusAutomorphism,
    radius: i64,
    rule: SignRule,
) -> Result<HomomorphismReport> {
    if radius < 1 {
        return Err(Error::RadiusTooSmall(radius));
    }
    let n = sigma.dim();
    let table = ImageTable::build(sigma, 2 * radius, rule)?;
    let small_box = box_vectors(n, radius);
    let mut checked = 0u64;

    let counterexample = |r: &LatticeVector, s: &LatticeVector, checked: u64| -> Result<HomomorphismReport> {
        let hr = HamiltonianElement::basis(r)?;
        let hs = HamiltonianElement::basis(s)?;
        let image_of_bracket = sigma.apply_with(&hr.bracket(&hs)?, rule)?;
        let bracket_of_images = sigma.apply_with(&hr, rule)?.bracket(&sigma.apply_with(&hs, rule)?)?;
        Ok(HomomorphismReport {
            pass: false,
            radius,
            pairs_checked: checked,
            counterexample: Some(Counterexample {
                r: r.clone(),
                s: s.clone(),
                image_of_bracket,
                bracket_of_images,
            }),
        })
    };

    // Cartan generators: σ([D(e_i,0), h_r]) = r_i σ(h_r) against [σ D(e_i,0), σ h_r].
    for i in 0..n {
        let mut u = vec![Scalar::zero(); n];
        u[i] = Scalar::one();
        let image = sigma.apply_with(&HamiltonianElement::cartan_element(u)?, rule)?;
        if !image.terms().is_empty() {
            return Err(Error::Internal("Cartan element left the Cartan subalgebra".into()));
        }
        let v = image.cartan();
        let ints: Option<Vec<i128>> =
            v.iter().map(|c| c.to_i128_pair().filter(|&(_, d)| d == 1).map(|(p, _)| p)).collect();
        for r in &small_box {
            checked += 1;
            let deg = table.degree(table.index(r.coords()));
            let expected = r.coords()[i];
            let ok = match &ints {
                Some(ints) => {
                    ints.iter().zip(deg).map(|(a, &d)| a * d as i128).sum::<i128>() == expected as i128
                }
                None => {
                    let mut pair = Scalar::zero();
                    for (vj, dj) in v.iter().zip(deg) {
                        pair += &(vj * &Scalar::from(*dj));
                    }
                    pair == Scalar::from(expected)
                }
            };
            if !ok {
                let zero = LatticeVector::zero(n)?;
                let hr = HamiltonianElement::basis(r)?;
                let d = HamiltonianElement::cartan_element(
                    (0..n).map(|j| Scalar::from(i64::from(i == j))).collect(),
                )?;
                return Ok(HomomorphismReport {
                    pass: false,
                    radius,
                    pairs_checked: checked,
                    counterexample: Some(Counterexample {
                        r: zero,
                        s: r.clone(),
                        image_of_bracket: sigma.apply_with(&d.bracket(&hr)?, rule)?,
                        bracket_of_images: image.bracket(&sigma.apply_with(&hr, rule)?)?,
                    }),
                });
            }
        }
    }

    // unit pairs first, then all box pairs in lexicographic order
    let units: Vec<LatticeVector> = (0..n).map(|i| LatticeVector::unit(n, i)).collect::<Result<_>>()?;
    let mut order = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            order.push((&units[i], &units[j]));
        }
    }

    let fast = FastPairs::new(&table, &small_box);
    let slow = |r: &[i64], s: &[i64]| table.pair_holds(r, s);
    for (r, s) in order {
        checked += 1;
        let ok = match &fast {
            Some(f) => f.holds(table.index(r.coords()), table.index(s.coords()), r.coords(), s.coords()),
            None => slow(r.coords(), s.coords()),
        };
        if !ok {
            return counterexample(r, s, checked);
        }
    }
    let failure = match &fast {
        Some(f) => f.first_box_failure(),
        None => {
            let mut hit = None;
            'outer: for (a, r) in small_box.iter().enumerate() {
                for (b, s) in small_box.iter().enumerate().skip(a + 1) {
                    if !slow(r.coords(), s.coords()) {
                        hit = Some((a, b));
                        break 'outer;
                    }
                }
            }
            hit
        }
    };
    let len = small_box.len() as u64;
    match failure {
        Some((a, b)) => {
            // pairs (a', b') with a' < a come first, then (a, a+1..=b)
            let a64 = a as u64;
            let before = a64 * len - a64 * (a64 + 1) / 2;
            checked += before + (b - a) as u64;
            counterexample(&small_box[a], &small_box[b], checked)
        }
        None => {
            checked += len * len.saturating_sub(1) / 2;
            Ok(HomomorphismReport { pass: true, radius, pairs_checked: checked, counterexample: None })
        }
    }
}
