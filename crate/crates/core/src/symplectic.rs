//! Integer symplectic and conformal-symplectic matrices.
//!
//! `GSp_N(Z)` is the set of integer matrices with `Q^T J Q = ±J`; the sign is
//! the multiplier. [`symplectic_complete`] realizes transitivity of `Sp_N(Z)`
//! on primitive vectors by an exact symplectic Gram–Schmidt over `Z`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{check_dimension, LatticeVector};

/// Square integer matrix of even dimension, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntegerMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl IntegerMatrix {
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        let n = rows.len();
        for row in &rows {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
        }
        check_dimension(n)?;
        Ok(IntegerMatrix { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Ok(IntegerMatrix { n, entries })
    }

    /// The standard matrix `J = [[0, I], [−I, 0]]`.
    pub fn standard_j(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let m = n / 2;
        let mut entries = vec![0; n * n];
        for i in 0..m {
            entries[i * n + m + i] = 1;
            entries[(m + i) * n + i] = -1;
        }
        Ok(IntegerMatrix { n, entries })
    }

    pub fn diagonal(diag: &[i64]) -> Result<Self> {
        let n = diag.len();
        check_dimension(n)?;
        let mut entries = vec![0; n * n];
        for (i, d) in diag.iter().enumerate() {
            entries[i * n + i] = *d;
        }
        Ok(IntegerMatrix { n, entries })
    }

    pub fn from_columns(cols: &[LatticeVector]) -> Result<Self> {
        let n = cols.len();
        check_dimension(n)?;
        let mut entries = vec![0; n * n];
        for (j, c) in cols.iter().enumerate() {
            if c.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.dim() });
            }
            for (i, v) in c.coords().iter().enumerate() {
                entries[i * n + j] = *v;
            }
        }
        Ok(IntegerMatrix { n, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> LatticeVector {
        let c: Vec<i64> = (0..self.n).map(|i| self.get(i, j)).collect();
        LatticeVector::from_slice_unchecked(&c)
    }

    pub fn transpose(&self) -> IntegerMatrix {
        let n = self.n;
        let mut entries = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        IntegerMatrix { n, entries }
    }

    pub fn neg(&self) -> Result<IntegerMatrix> {
        let entries = self
            .entries
            .iter()
            .map(|v| v.checked_neg().ok_or(Error::Overflow))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntegerMatrix { n: self.n, entries })
    }

    pub fn mul(&self, other: &IntegerMatrix) -> Result<IntegerMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let n = self.n;
        let mut entries = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i128 = 0;
                for k in 0..n {
                    acc += self.get(i, k) as i128 * other.get(k, j) as i128;
                }
                entries[i * n + j] = i64::try_from(acc).map_err(|_| Error::Overflow)?;
            }
        }
        Ok(IntegerMatrix { n, entries })
    }

    pub fn mul_vec(&self, v: &LatticeVector) -> Result<LatticeVector> {
        if v.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.dim() });
        }
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            let acc = crate::lattice::dot_i128(row, v.coords())?;
            out.push(i64::try_from(acc).map_err(|_| Error::Overflow)?);
        }
        Ok(LatticeVector::from_slice_unchecked(&out))
    }

    /// Exact determinant by Bareiss fraction-free elimination.
    pub fn determinant(&self) -> BigInt {
        let n = self.n;
        let mut a: Vec<Vec<BigInt>> =
            self.rows().into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                    a[i][j] = v;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    fn is_multiple_of_j(&self, lambda: i64) -> bool {
        let m = self.n / 2;
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let expected = if j == i + m && i < m {
                    lambda
                } else if i >= m && j + m == i {
                    -lambda
                } else {
                    0
                };
                self.get(i, j) == expected
            })
        })
    }
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.rows())
    }
}

impl Serialize for IntegerMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntegerMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<i64>>::deserialize(deserializer)?;
        IntegerMatrix::new(rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GspClass {
    Symplectic,
    AntiSymplectic,
    NotInGsp,
}

impl GspClass {
    pub fn multiplier(self) -> Option<i64> {
        match self {
            GspClass::Symplectic => Some(1),
            GspClass::AntiSymplectic => Some(-1),
            GspClass::NotInGsp => None,
        }
    }
}

/// Checks unimodularity, then `M^T J M = ±J`. Returns the specific failure.
fn check_gsp(m: &IntegerMatrix) -> Result<i64> {
    let det = m.determinant();
    if det.abs() != BigInt::one() {
        return Err(Error::NotUnimodular { det: det.to_string() });
    }
    let j = IntegerMatrix::standard_j(m.dim())?;
    let conj = m.transpose().mul(&j)?.mul(m)?;
    if conj.is_multiple_of_j(1) {
        Ok(1)
    } else if conj.is_multiple_of_j(-1) {
        Ok(-1)
    } else {
        Err(Error::NotConformalSymplectic)
    }
}

pub fn classify(m: &IntegerMatrix) -> Result<GspClass> {
    match check_gsp(m) {
        Ok(1) => Ok(GspClass::Symplectic),
        Ok(_) => Ok(GspClass::AntiSymplectic),
        Err(Error::NotUnimodular { .. }) | Err(Error::NotConformalSymplectic) => {
            Ok(GspClass::NotInGsp)
        }
        Err(e) => Err(e),
    }
}

/// A matrix certified to lie in `GSp_N(Z)`, together with its multiplier.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GspMatrix {
    matrix: IntegerMatrix,
    multiplier: i64,
}

impl GspMatrix {
    pub fn new(matrix: IntegerMatrix) -> Result<Self> {
        let multiplier = check_gsp(&matrix)?;
        Ok(GspMatrix { matrix, multiplier })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(GspMatrix { matrix: IntegerMatrix::identity(n)?, multiplier: 1 })
    }

    pub fn matrix(&self) -> &IntegerMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn multiplier(&self) -> i64 {
        self.multiplier
    }

    pub fn is_symplectic(&self) -> bool {
        self.multiplier == 1
    }

    pub fn apply(&self, v: &LatticeVector) -> Result<LatticeVector> {
        self.matrix.mul_vec(v)
    }

    pub fn multiply(&self, other: &GspMatrix) -> Result<GspMatrix> {
        let product = GspMatrix::new(self.matrix.mul(&other.matrix)?)?;
        if product.multiplier != self.multiplier * other.multiplier {
            return Err(Error::Internal("multiplier is not multiplicative".into()));
        }
        Ok(product)
    }

    /// `Q^{-1} = −λ J Q^T J`, integral because `Q^T J Q = λ J`.
    pub fn inverse(&self) -> Result<GspMatrix> {
        let j = IntegerMatrix::standard_j(self.dim())?;
        let mut inv = j.mul(&self.matrix.transpose())?.mul(&j)?;
        if self.multiplier == 1 {
            inv = inv.neg()?;
        }
        let inv = GspMatrix::new(inv)?;
        let check = self.matrix.mul(&inv.matrix)?;
        if check != IntegerMatrix::identity(self.dim())? {
            return Err(Error::Internal("inverse does not invert".into()));
        }
        Ok(inv)
    }

    /// `Q^{-T}`, the action on Cartan coordinates.
    pub fn inverse_transpose(&self) -> Result<IntegerMatrix> {
        Ok(self.inverse()?.matrix.transpose())
    }
}

impl fmt::Debug for GspMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GspMatrix({:?}, λ={})", self.matrix, self.multiplier)
    }
}

#[derive(Serialize, Deserialize)]
struct GspMatrixDoc {
    matrix: IntegerMatrix,
    multiplier: i64,
}

impl Serialize for GspMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GspMatrixDoc { matrix: self.matrix.clone(), multiplier: self.multiplier }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GspMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = GspMatrixDoc::deserialize(deserializer)?;
        let q = GspMatrix::new(doc.matrix).map_err(serde::de::Error::custom)?;
        if q.multiplier != doc.multiplier {
            return Err(serde::de::Error::custom(format!(
                "declared multiplier {} but matrix has multiplier {}",
                doc.multiplier, q.multiplier
            )));
        }
        Ok(q)
    }
}

pub fn multiplier(q: &GspMatrix) -> i64 {
    q.multiplier()
}

pub fn multiply(a: &GspMatrix, b: &GspMatrix) -> Result<GspMatrix> {
    a.multiply(b)
}

pub fn inverse(q: &GspMatrix) -> Result<GspMatrix> {
    q.inverse()
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    // returns (g, x, y) with a x + b y = g, g ≥ 0
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Coefficients `y` with `Σ w_i y_i = gcd(w)`, gcd returned non-negative.
pub(crate) fn ext_gcd_vec(w: &[i128]) -> (i128, Vec<i128>) {
    let mut coeffs = vec![0i128; w.len()];
    let mut g = 0i128;
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0 {
            continue;
        }
        if g == 0 {
            g = wi.abs();
            coeffs[i] = wi.signum();
            continue;
        }
        let (ng, x, y) = ext_gcd(g, wi);
        for c in coeffs.iter_mut().take(i) {
            *c *= x;
        }
        coeffs[i] = y;
        g = ng;
    }
    (g, coeffs)
}

fn pair_wide(r: &[i128], s: &[i128]) -> Result<i128> {
    let m = r.len() / 2;
    let mut acc: i128 = 0;
    for i in 0..m {
        let t = r[m + i]
            .checked_mul(s[i])
            .and_then(|x| r[i].checked_mul(s[m + i]).and_then(|y| x.checked_sub(y)))
            .ok_or(Error::Overflow)?;
        acc = acc.checked_add(t).ok_or(Error::Overflow)?;
    }
    Ok(acc)
}

fn axpy(acc: &mut [i128], k: i128, v: &[i128]) -> Result<()> {
    for (a, x) in acc.iter_mut().zip(v) {
        *a = k.checked_mul(*x).and_then(|p| a.checked_add(p)).ok_or(Error::Overflow)?;
    }
    Ok(())
}

/// Row-echelon Z-basis of the lattice spanned by `rows` (zero rows dropped).
fn echelon_basis(mut rows: Vec<Vec<i128>>) -> Result<Vec<Vec<i128>>> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut pivot = 0;
    for col in 0..n {
        loop {
            let best = (pivot..rows.len())
                .filter(|&i| rows[i][col] != 0)
                .min_by_key(|&i| rows[i][col].unsigned_abs());
            let Some(b) = best else { break };
            rows.swap(pivot, b);
            let p = rows[pivot][col];
            let mut done = true;
            for i in pivot + 1..rows.len() {
                let q = rows[i][col] / p;
                if q != 0 {
                    let src = rows[pivot].clone();
                    axpy(&mut rows[i], -q, &src)?;
                }
                if rows[i][col] != 0 {
                    done = false;
                }
            }
            if done {
                if rows[pivot][col] < 0 {
                    for x in rows[pivot].iter_mut() {
                        *x = -*x;
                    }
                }
                pivot += 1;
                break;
            }
        }
        if pivot == rows.len() {
            break;
        }
    }
    rows.truncate(pivot);
    rows.retain(|r| r.iter().any(|&x| x != 0));
    Ok(rows)
}

/// Returns `Q ∈ Sp_N(Z)` with `Q e_1 = r` for a primitive vector `r`.
///
/// Builds a symplectic basis `a_1..a_m, b_1..b_m` with `a_1 = r` and
/// `ω(a_k, b_k) = −1`: each partner `b_k` comes from an extended-gcd solve
/// over the current lattice basis, and the remaining basis is projected onto
/// the ω-complement of `span{a_k, b_k}` (integral because the pairing is
/// a unit) and re-echelonized. The result is re-validated before return.
pub fn symplectic_complete(r: &LatticeVector) -> Result<GspMatrix> {
    if r.is_zero() {
        return Err(Error::ZeroVector);
    }
    let g = r.content();
    if g != 1 {
        return Err(Error::NotPrimitive { gcd: g });
    }
    let n = r.dim();
    let m = n / 2;
    let mut basis: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect();
    let mut a_cols: Vec<Vec<i128>> = Vec::with_capacity(m);
    let mut b_cols: Vec<Vec<i128>> = Vec::with_capacity(m);

    for k in 0..m {
        let a: Vec<i128> = if k == 0 {
            r.coords().iter().map(|&c| c as i128).collect()
        } else {
            basis[0].clone()
        };
        let weights = basis.iter().map(|l| pair_wide(&a, l)).collect::<Result<Vec<_>>>()?;
        let (gw, y) = ext_gcd_vec(&weights);
        if gw != 1 {
            return Err(Error::Internal(format!(
                "pairing with the residual lattice has gcd {gw} at step {k}"
            )));
        }
        let mut b = vec![0i128; n];
        for (yj, l) in y.iter().zip(&basis) {
            axpy(&mut b, -*yj, l)?;
        }
        debug_assert_eq!(pair_wide(&a, &b)?, -1);

        let mut projected = Vec::with_capacity(basis.len());
        for v in &basis {
            let mut p = v.clone();
            axpy(&mut p, pair_wide(v, &b)?, &a)?;
            axpy(&mut p, -pair_wide(v, &a)?, &b)?;
            projected.push(p);
        }
        basis = echelon_basis(projected)?;
        if basis.len() != n - 2 * (k + 1) {
            return Err(Error::Internal("complement has the wrong rank".into()));
        }
        a_cols.push(a);
        b_cols.push(b);
    }

    let to_vec = |c: &Vec<i128>| -> Result<LatticeVector> {
        let coords = c
            .iter()
            .map(|&x| i64::try_from(x).map_err(|_| Error::Overflow))
            .collect::<Result<Vec<_>>>()?;
        LatticeVector::new(coords)
    };
    let cols = a_cols.iter().chain(&b_cols).map(to_vec).collect::<Result<Vec<_>>>()?;
    let q = GspMatrix::new(IntegerMatrix::from_columns(&cols)?)?;
    if q.multiplier() != 1 || &q.matrix.column(0) != r {
        return Err(Error::Internal("completion failed its postcondition".into()));
    }
    Ok(q)
}

/// Elementary symplectic generators: symmetric block transvections, the
/// `diag(A, A^{-T})` shears, and `J`, each with its inverse.
pub fn elementary_generators(n: usize) -> Result<Vec<GspMatrix>> {
    check_dimension(n)?;
    let m = n / 2;
    let mut out = Vec::new();
    let id = |n: usize| -> Vec<Vec<i64>> {
        (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
    };
    for sign in [1i64, -1] {
        for i in 0..m {
            for j in i..m {
                // [[I, S], [0, I]] and [[I, 0], [S, I]] with S symmetric
                let mut up = id(n);
                let mut low = id(n);
                up[i][m + j] += sign;
                low[m + i][j] += sign;
                if i != j {
                    up[j][m + i] += sign;
                    low[m + j][i] += sign;
                }
                out.push(GspMatrix::new(IntegerMatrix::new(up)?)?);
                out.push(GspMatrix::new(IntegerMatrix::new(low)?)?);
            }
        }
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                // diag(A, A^{-T}) with A = I + sign E_ij
                let mut d = id(n);
                d[i][j] += sign;
                d[m + j][m + i] -= sign;
                out.push(GspMatrix::new(IntegerMatrix::new(d)?)?);
            }
        }
    }
    let j = GspMatrix::new(IntegerMatrix::standard_j(n)?)?;
    out.push(j.inverse()?);
    out.push(j);
    Ok(out)
}

/// `diag(I_m, −I_m)`, the standard anti-symplectic element.
pub fn standard_anti_symplectic(n: usize) -> Result<GspMatrix> {
    check_dimension(n)?;
    let diag: Vec<i64> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
    GspMatrix::new(IntegerMatrix::diagonal(&diag)?)
}
