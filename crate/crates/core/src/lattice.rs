//! Points of the integer lattice `Z^N` (N = 2m), the standard symplectic
//! pairing and the bar map `r ↦ J r`.
//!
//! Coordinates are `i64`; every arithmetic operation is checked and reports
//! [`Error::Overflow`] instead of wrapping. Pairings are accumulated in `i128`.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Checks that `n` is a valid ambient dimension.
pub fn check_dimension(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::OddDimension(n));
    }
    Ok(())
}

/// A point of `Z^N`. Indexes a graded component of the algebra.
///
/// The derived `Ord` is the lexicographic order on coordinates, which is the
/// canonical term order everywhere in this crate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeVector(Vec<i64>);

impl LatticeVector {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        check_dimension(coords.len())?;
        Ok(LatticeVector(coords))
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(LatticeVector(vec![0; n]))
    }

    /// Standard basis vector `e_i` (0-based index).
    pub fn unit(n: usize, i: usize) -> Result<Self> {
        let mut v = Self::zero(n)?;
        if i >= n {
            return Err(Error::DimensionMismatch { expected: n, found: i + 1 });
        }
        v.0[i] = 1;
        Ok(v)
    }

    /// Builds a vector from a slice already known to have even length.
    pub(crate) fn from_slice_unchecked(coords: &[i64]) -> Self {
        debug_assert!(coords.len() >= 2 && coords.len().is_multiple_of(2));
        LatticeVector(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn half_dim(&self) -> usize {
        self.0.len() / 2
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn ensure_same_dim(&self, other: &LatticeVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// `bar(r) = (r_{m+1}, …, r_{2m}, −r_1, …, −r_m)`.
    pub fn bar(&self) -> Result<LatticeVector> {
        let m = self.half_dim();
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.0[m..]);
        for &c in &self.0[..m] {
            out.push(c.checked_neg().ok_or(Error::Overflow)?);
        }
        Ok(LatticeVector(out))
    }

    /// Standard dot product.
    pub fn dot(&self, other: &LatticeVector) -> Result<i128> {
        self.ensure_same_dim(other)?;
        dot_i128(&self.0, &other.0)
    }

    /// The symplectic pairing `ω(r, s) = (bar(r), s)`.
    pub fn pairing(&self, other: &LatticeVector) -> Result<i128> {
        self.ensure_same_dim(other)?;
        pairing_i128(&self.0, &other.0)
    }

    pub fn checked_add(&self, other: &LatticeVector) -> Result<LatticeVector> {
        self.ensure_same_dim(other)?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_add(*b).ok_or(Error::Overflow))
            .collect::<Result<Vec<_>>>()
            .map(LatticeVector)
    }

    pub fn checked_sub(&self, other: &LatticeVector) -> Result<LatticeVector> {
        self.ensure_same_dim(other)?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b).ok_or(Error::Overflow))
            .collect::<Result<Vec<_>>>()
            .map(LatticeVector)
    }

    pub fn checked_neg(&self) -> Result<LatticeVector> {
        self.0
            .iter()
            .map(|a| a.checked_neg().ok_or(Error::Overflow))
            .collect::<Result<Vec<_>>>()
            .map(LatticeVector)
    }

    pub fn checked_scale(&self, k: i64) -> Result<LatticeVector> {
        self.0
            .iter()
            .map(|a| a.checked_mul(k).ok_or(Error::Overflow))
            .collect::<Result<Vec<_>>>()
            .map(LatticeVector)
    }

    /// gcd of the coordinates (0 for the zero vector).
    pub fn content(&self) -> u64 {
        self.0.iter().fold(0u64, |g, &c| g.gcd(&c.unsigned_abs()))
    }

    pub fn is_primitive(&self) -> Result<bool> {
        if self.is_zero() {
            return Err(Error::ZeroVector);
        }
        Ok(self.content() == 1)
    }

    pub fn lex_compare(&self, other: &LatticeVector) -> Result<Ordering> {
        self.ensure_same_dim(other)?;
        Ok(self.0.cmp(&other.0))
    }

    /// Sum of coordinates, `|r|` in the sign rule for anti-symplectic maps.
    pub fn coordinate_sum(&self) -> i128 {
        self.0.iter().map(|&c| c as i128).sum()
    }

    pub fn max_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// True when `other` lies on the rational line through `self`.
    pub fn is_collinear(&self, other: &LatticeVector) -> bool {
        let (a, b) = (&self.0, &other.0);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                if (a[i] as i128) * (b[j] as i128) != (a[j] as i128) * (b[i] as i128) {
                    return false;
                }
            }
        }
        true
    }
}

pub(crate) fn dot_i128(a: &[i64], b: &[i64]) -> Result<i128> {
    let mut acc: i128 = 0;
    for (x, y) in a.iter().zip(b) {
        acc = acc.checked_add((*x as i128) * (*y as i128)).ok_or(Error::Overflow)?;
    }
    Ok(acc)
}

pub(crate) fn pairing_i128(r: &[i64], s: &[i64]) -> Result<i128> {
    let m = r.len() / 2;
    let mut acc: i128 = 0;
    for i in 0..m {
        let term = (r[m + i] as i128) * (s[i] as i128) - (r[i] as i128) * (s[m + i] as i128);
        acc = acc.checked_add(term).ok_or(Error::Overflow)?;
    }
    Ok(acc)
}

/// Pairing on small coordinates where overflow is impossible by construction;
/// callers guarantee the bound.
#[inline]
pub(crate) fn pairing_small(r: &[i64], s: &[i64]) -> i64 {
    let m = r.len() / 2;
    let mut acc = 0i64;
    for i in 0..m {
        acc = acc.wrapping_add(r[m + i].wrapping_mul(s[i]).wrapping_sub(r[i].wrapping_mul(s[m + i])));
    }
    acc
}

/// Free-function form of [`LatticeVector::bar`].
pub fn bar(r: &LatticeVector) -> Result<LatticeVector> {
    r.bar()
}

/// Free-function form of [`LatticeVector::pairing`].
pub fn pairing(r: &LatticeVector, s: &LatticeVector) -> Result<i128> {
    r.pairing(s)
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticeVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatticeVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<i64>::deserialize(deserializer)?;
        LatticeVector::new(coords).map_err(serde::de::Error::custom)
    }
}

/// Enumerates all `r` with `0 < |r|∞ ≤ radius` in lexicographic order.
pub fn box_vectors(n: usize, radius: i64) -> Vec<LatticeVector> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(n as u32);
    let mut out = Vec::with_capacity(total.saturating_sub(1));
    let mut cur = vec![-radius; n];
    for _ in 0..total {
        if cur.iter().any(|&c| c != 0) {
            out.push(LatticeVector(cur.clone()));
        }
        for k in (0..n).rev() {
            if cur[k] < radius {
                cur[k] += 1;
                break;
            }
            cur[k] = -radius;
        }
    }
    out
}
