//! Graded derivations of `H_N'` on finite truncations of the grading lattice.
//!
//! A derivation of degree `d` sends `h_r ↦ v_r h_{r+d}`. On a pair `(r, s)`
//! the Leibniz rule reads
//!
//! ```text
//! ω(r, s) v_{r+s} = ω(r + d, s) v_r + ω(r, s + d) v_s
//! ```
//!
//! with `v_{−d} = 0`, since `h_0` does not exist. The solver imposes this on
//! every pair with `r`, `s` and `r + s` in the box `0 < |r|∞ ≤ R` and returns
//! an exact basis of the solution space in reduced row echelon form over the
//! lexicographic order of the box.
//!
//! Solving has two stages. Propagation expresses every unknown as a rational
//! linear form in a few free parameters, using equations in which one of the
//! two summands has max-norm 1. Every equation is then imposed on the
//! parameter space in turn: an integer basis of the surviving parameter
//! space is kept, and whenever some basis vector violates an equation the
//! basis is cut down by that equation's exact residual row.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{HamiltonianElement, TermDoc};
use crate::error::{Error, Result};
use crate::lattice::{box_vectors, check_dimension, pairing_small, LatticeVector};
use crate::scalar::Scalar;

const MAX_BOX_POINTS: u128 = 1 << 22;

/// The window `B = {r ∈ Z^N : 0 < |r|∞ ≤ radius}`.
#[derive(Clone)]
pub struct TruncationBox {
    n: usize,
    radius: i64,
    index: OnceLock<Arc<BoxIndex>>,
}

impl fmt::Debug for TruncationBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationBox").field("n", &self.n).field("radius", &self.radius).finish()
    }
}

impl PartialEq for TruncationBox {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.radius == other.radius
    }
}

impl Eq for TruncationBox {}

impl TruncationBox {
    pub fn new(n: usize, radius: i64) -> Result<Self> {
        check_dimension(n)?;
        if radius < 2 {
            return Err(Error::RadiusTooSmall(radius));
        }
        let points = (2 * radius as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
        if points > MAX_BOX_POINTS {
            return Err(Error::BoxTooLarge { points });
        }
        Ok(TruncationBox { n, radius, index: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn contains(&self, r: &LatticeVector) -> bool {
        r.dim() == self.n && !r.is_zero() && r.max_norm() <= self.radius as u64
    }

    /// Members of the box in lexicographic order.
    pub fn vectors(&self) -> &[LatticeVector] {
        &self.index().vectors
    }

    pub fn len(&self) -> usize {
        self.vectors().len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors().is_empty()
    }

    /// Number of unordered pairs `r ≠ s` with `r, s, r + s` all in the box.
    pub fn constraint_pairs(&self) -> usize {
        self.index().triples.len()
    }

    fn index(&self) -> &BoxIndex {
        self.index.get_or_init(|| Arc::new(BoxIndex::build(self.n, self.radius)))
    }
}

#[derive(Serialize, Deserialize)]
struct BoxDoc {
    n: usize,
    radius: i64,
}

impl Serialize for TruncationBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BoxDoc { n: self.n, radius: self.radius }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TruncationBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = BoxDoc::deserialize(deserializer)?;
        TruncationBox::new(doc.n, doc.radius).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy)]
struct Triple {
    i: u32,
    j: u32,
    k: u32,
    w: i32,
}

struct BoxIndex {
    n: usize,
    radius: i64,
    side: usize,
    vectors: Vec<LatticeVector>,
    coords: Vec<i64>,
    lookup: Vec<u32>,
    triples: Vec<Triple>,
    steps: Vec<usize>,
    /// Position of each member in `steps`, or `ABSENT`.
    step_slot: Vec<u32>,
    /// For member `u` and step slot `g`: indices of `u + steps[g]` and `u − steps[g]`.
    neighbors: Vec<[u32; 2]>,
}

const ABSENT: u32 = u32::MAX;

impl BoxIndex {
    fn build(n: usize, radius: i64) -> Self {
        let vectors = box_vectors(n, radius);
        let side = (2 * radius + 1) as usize;
        let coords: Vec<i64> = vectors.iter().flat_map(|v| v.coords().iter().copied()).collect();
        let mut index = BoxIndex {
            n,
            radius,
            side,
            coords,
            lookup: vec![ABSENT; side.pow(n as u32)],
            triples: Vec::new(),
            steps: Vec::new(),
            step_slot: Vec::new(),
            neighbors: Vec::new(),
            vectors: Vec::new(),
        };
        for (i, v) in vectors.iter().enumerate() {
            let p = index.position(v.coords()).expect("box member");
            index.lookup[p] = i as u32;
            if v.max_norm() == 1 {
                index.steps.push(i);
            }
        }
        index.vectors = vectors;
        let len = index.vectors.len();
        index.step_slot = vec![ABSENT; len];
        for (slot, &g) in index.steps.iter().enumerate() {
            index.step_slot[g] = slot as u32;
        }
        let mut neighbors = Vec::with_capacity(len * index.steps.len());
        for u in 0..len {
            for &g in &index.steps {
                let pack = |x: Option<usize>| x.map_or(ABSENT, |x| x as u32);
                neighbors.push([pack(index.sum(u, g)), pack(index.diff(u, g))]);
            }
        }
        index.neighbors = neighbors;
        for i in 0..len {
            for j in i + 1..len {
                if let Some(k) = index.sum(i, j) {
                    let w = pairing_small(index.coords(i), index.coords(j)) as i32;
                    index.triples.push(Triple { i: i as u32, j: j as u32, k: k as u32, w });
                }
            }
        }
        index
    }

    fn coords(&self, i: usize) -> &[i64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    fn position(&self, v: &[i64]) -> Option<usize> {
        let mut p = 0usize;
        for &c in v {
            if c.abs() > self.radius {
                return None;
            }
            p = p * self.side + (c + self.radius) as usize;
        }
        Some(p)
    }

    fn lookup_position(&self, p: usize) -> Option<usize> {
        match self.lookup[p] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    fn find(&self, v: &[i64]) -> Option<usize> {
        self.lookup_position(self.position(v)?)
    }

    /// Index of `r_i + sign·r_j`, if it lies in the box.
    fn combine(&self, i: usize, j: usize, sign: i64) -> Option<usize> {
        let (a, b) = (self.coords(i), self.coords(j));
        let mut p = 0usize;
        for x in 0..self.n {
            let c = a[x] + sign * b[x];
            if c.abs() > self.radius {
                return None;
            }
            p = p * self.side + (c + self.radius) as usize;
        }
        self.lookup_position(p)
    }

    fn sum(&self, i: usize, j: usize) -> Option<usize> {
        self.combine(i, j, 1)
    }

    fn diff(&self, i: usize, j: usize) -> Option<usize> {
        self.combine(i, j, -1)
    }

    /// `(u + g, u − g)` for the step vector in slot `slot`.
    fn step_neighbors(&self, u: usize, slot: usize) -> (Option<usize>, Option<usize>) {
        let [a, b] = self.neighbors[u * self.steps.len() + slot];
        let unpack = |x: u32| if x == ABSENT { None } else { Some(x as usize) };
        (unpack(a), unpack(b))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Constraint {
    /// The Leibniz rule for a derivation of the given degree.
    Leibniz,
    /// `c_{r+s} = c_r + c_s` on pairs with `ω(r, s) ≠ 0`.
    Additive,
}

struct System<'a> {
    index: &'a BoxIndex,
    kind: Constraint,
    /// `ω(d, r)` for each box member.
    wd: Vec<i64>,
    /// The member `−d`, whose value is pinned to zero.
    pinned: Option<usize>,
}

impl<'a> System<'a> {
    fn new(index: &'a BoxIndex, kind: Constraint, degree: &LatticeVector) -> Self {
        let len = index.vectors.len();
        let wd = (0..len).map(|u| pairing_small(degree.coords(), index.coords(u))).collect();
        let pinned = if kind == Constraint::Leibniz && !degree.is_zero() {
            let neg: Vec<i64> = degree.coords().iter().map(|c| -c).collect();
            index.find(&neg)
        } else {
            None
        };
        System { index, kind, wd, pinned }
    }

    /// `(a, b, c)` with `a·v[r_i + r_j] + b·v[r_i] + c·v[r_j] = 0`, where `w = ω(r_i, r_j)`.
    fn coeffs(&self, i: usize, j: usize, w: i64) -> (i64, i64, i64) {
        match self.kind {
            Constraint::Leibniz => (w, -(w + self.wd[j]), -(w - self.wd[i])),
            Constraint::Additive if w != 0 => (1, -1, -1),
            Constraint::Additive => (0, 0, 0),
        }
    }

    fn pairing(&self, i: usize, j: usize) -> i64 {
        pairing_small(self.index.coords(i), self.index.coords(j))
    }

    /// Index of the first equation at or after `from` that `values` violates.
    fn first_violation(&self, values: &Values, from: usize) -> Option<usize> {
        let triples = &self.index.triples[from..];
        let hit = match values {
            // i64 values times i32-sized coefficients cannot overflow i128
            Values::Small(v) => {
                let wd = &self.wd;
                let at = |t: &Triple| {
                    let (i, j, k) = (t.i as usize, t.j as usize, t.k as usize);
                    (i, j, v[i] as i128, v[j] as i128, v[k] as i128)
                };
                match self.kind {
                    Constraint::Leibniz => triples.iter().position(|t| {
                        let (i, j, vi, vj, vk) = at(t);
                        let w = t.w as i128;
                        let inner = vk.wrapping_sub(vi).wrapping_sub(vj);
                        w.wrapping_mul(inner)
                            .wrapping_sub((wd[j] as i128).wrapping_mul(vi))
                            .wrapping_add((wd[i] as i128).wrapping_mul(vj))
                            != 0
                    }),
                    Constraint::Additive => triples.iter().position(|t| {
                        let (_, _, vi, vj, vk) = at(t);
                        t.w != 0 && vk.wrapping_sub(vi).wrapping_sub(vj) != 0
                    }),
                }
            }
            Values::Big(_) => triples.iter().position(|t| {
                let abc = self.coeffs(t.i as usize, t.j as usize, t.w as i64);
                !values.residual_big(abc, t).is_zero()
            }),
        };
        hit.map(|h| h + from)
    }
}

fn ratio(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// How one unknown is determined once its inputs are known.
#[derive(Clone, Copy, Debug)]
enum Step {
    Zero,
    Param(usize),
    /// `v[t] = (cx·v[x] + cy·v[y]) / div`
    Solve { x: u32, cx: i64, y: u32, cy: i64, div: i64 },
}

/// An order in which every unknown is either a free parameter or solved
/// from two earlier ones by a single equation.
struct Plan {
    len: usize,
    order: Vec<(usize, Step)>,
    params: usize,
}

type Frac = (i128, i128);

fn frac_combine(cx: i64, (n1, d1): Frac, cy: i64, (n2, d2): Frac, div: i64) -> Option<Frac> {
    let g = d1.gcd(&d2);
    let (l1, l2) = (d1 / g, d2 / g);
    let num = (cx as i128)
        .checked_mul(n1)?
        .checked_mul(l2)?
        .checked_add((cy as i128).checked_mul(n2)?.checked_mul(l1)?)?;
    let mut den = l1.checked_mul(d2)?.checked_mul(div as i128)?;
    let mut num = num;
    if den < 0 {
        num = num.checked_neg()?;
        den = den.checked_neg()?;
    }
    let h = num.gcd(&den);
    Some((num / h, den / h))
}

impl Plan {
    fn replay_small(&self, z: &[BigInt]) -> Option<Vec<Frac>> {
        let z: Vec<i128> = z.iter().map(ToPrimitive::to_i128).collect::<Option<_>>()?;
        let mut v: Vec<Frac> = vec![(0, 1); self.len];
        for &(t, step) in &self.order {
            v[t] = match step {
                Step::Zero => (0, 1),
                Step::Param(p) => (z[p], 1),
                Step::Solve { x, cx, y, cy, div } => {
                    frac_combine(cx, v[x as usize], cy, v[y as usize], div)?
                }
            };
        }
        Some(v)
    }

    fn replay_big(&self, z: &[BigInt]) -> Vec<BigRational> {
        let mut v = vec![BigRational::zero(); self.len];
        for &(t, step) in &self.order {
            v[t] = match step {
                Step::Zero => BigRational::zero(),
                Step::Param(p) => BigRational::from_integer(z[p].clone()),
                Step::Solve { x, cx, y, cy, div } => {
                    (&v[x as usize] * ratio(cx) + &v[y as usize] * ratio(cy)) / ratio(div)
                }
            };
        }
        v
    }

    /// Values of the solution with parameter vector `z`.
    fn replay(&self, z: &[BigInt]) -> Vec<BigRational> {
        match self.replay_small(z) {
            Some(v) => v
                .into_iter()
                .map(|(n, d)| BigRational::new_raw(BigInt::from(n), BigInt::from(d)))
                .collect(),
            None => self.replay_big(z),
        }
    }

    fn unit(&self, q: usize) -> Vec<BigInt> {
        (0..self.params).map(|p| if p == q { BigInt::one() } else { BigInt::zero() }).collect()
    }
}

struct Propagation<'s, 'a> {
    sys: &'s System<'a>,
    known: Vec<bool>,
    is_step: Vec<bool>,
    order: Vec<(usize, Step)>,
    unknown: usize,
    params: usize,
    queue: VecDeque<usize>,
}

impl<'s, 'a> Propagation<'s, 'a> {
    /// Each newly known value is checked against the equations it completes;
    /// when nothing is left to solve, the first unknown step vector (or else
    /// the first unknown) becomes a new parameter.
    fn run(sys: &'s System<'a>) -> Plan {
        let len = sys.index.vectors.len();
        let mut is_step = vec![false; len];
        for &g in &sys.index.steps {
            is_step[g] = true;
        }
        let mut p = Propagation {
            sys,
            known: vec![false; len],
            is_step,
            order: Vec::with_capacity(len),
            unknown: len,
            params: 0,
            queue: VecDeque::new(),
        };
        if let Some(z) = sys.pinned {
            p.set(z, Step::Zero);
            p.drain();
        }
        while p.unknown > 0 {
            let t = sys
                .index
                .steps
                .iter()
                .copied()
                .find(|&g| !p.known[g])
                .or_else(|| p.known.iter().position(|k| !k))
                .expect("an unknown remains");
            p.set(t, Step::Param(p.params));
            p.params += 1;
            p.drain();
        }
        Plan { len, order: p.order, params: p.params }
    }

    fn set(&mut self, t: usize, step: Step) {
        self.known[t] = true;
        self.order.push((t, step));
        self.unknown -= 1;
        self.queue.push_back(t);
    }

    fn drain(&mut self) {
        let index = self.sys.index;
        while let Some(u) = self.queue.pop_front() {
            for (slot, &g) in index.steps.iter().enumerate() {
                if g != u && self.known[g] {
                    self.complete(u, g, slot);
                }
            }
            if self.is_step[u] {
                let slot = index.step_slot[u] as usize;
                for x in 0..self.known.len() {
                    if x != u && self.known[x] {
                        self.complete(x, u, slot);
                    }
                }
            }
        }
    }

    /// Solves the equations on the pairs `(g, x)` and `(x − g, g)` for their
    /// single unknown, given that `x` and `g` are known.
    fn complete(&mut self, x: usize, g: usize, slot: usize) {
        let sys = self.sys;
        let (sum, diff) = sys.index.step_neighbors(x, slot);
        if let Some(t) = sum {
            if !self.known[t] {
                let (a, b, c) = sys.coeffs(g, x, sys.pairing(g, x));
                if a != 0 {
                    self.set(t, Step::Solve { x: g as u32, cx: -b, y: x as u32, cy: -c, div: a });
                }
            }
        }
        if let Some(t) = diff {
            if t != g && !self.known[t] {
                let (a, b, c) = sys.coeffs(t, g, sys.pairing(t, g));
                if b != 0 {
                    self.set(t, Step::Solve { x: x as u32, cx: -a, y: g as u32, cy: -c, div: b });
                }
            }
        }
    }
}

/// Integer values of one solution, scaled by a common denominator.
enum Values {
    Small(Vec<i64>),
    Big(Vec<BigInt>),
}

impl Values {
    fn from_plan(plan: &Plan, z: &[BigInt]) -> Values {
        if let Some(fracs) = plan.replay_small(z) {
            let mut l: i128 = 1;
            let mut ok = true;
            for &(_, d) in &fracs {
                if d != 1 {
                    match (l / l.gcd(&d)).checked_mul(d) {
                        Some(x) => l = x,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if ok {
                let ints: Option<Vec<i64>> = fracs
                    .iter()
                    .map(|&(n, d)| n.checked_mul(l / d).and_then(|x| i64::try_from(x).ok()))
                    .collect();
                if let Some(ints) = ints {
                    return Values::Small(ints);
                }
            }
        }
        Values::from_rationals(&plan.replay_big(z)).0
    }

    fn from_rationals(vals: &[BigRational]) -> (Values, BigInt) {
        let mut l = BigInt::one();
        for v in vals {
            if !v.denom().is_one() {
                l = l.lcm(v.denom());
            }
        }
        let ints: Vec<BigInt> = vals.iter().map(|v| v.numer() * (&l / v.denom())).collect();
        let small: Option<Vec<i64>> = ints.iter().map(|x| x.to_i64()).collect();
        match small {
            Some(s) => (Values::Small(s), l),
            None => (Values::Big(ints), l),
        }
    }

    fn big(&self, u: usize) -> BigInt {
        match self {
            Values::Small(v) => BigInt::from(v[u]),
            Values::Big(v) => v[u].clone(),
        }
    }

    fn residual_big(&self, (a, b, c): (i64, i64, i64), t: &Triple) -> BigInt {
        BigInt::from(a) * self.big(t.k as usize)
            + BigInt::from(b) * self.big(t.i as usize)
            + BigInt::from(c) * self.big(t.j as usize)
    }
}

fn content_reduce(v: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        g = g.gcd(x);
    }
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x = &*x / &g;
        }
    }
}

/// Intersects `span(basis)` with the kernel of `row`, fraction-free.
fn restrict(basis: Vec<Vec<BigInt>>, row: &[BigInt]) -> Vec<Vec<BigInt>> {
    let dots: Vec<BigInt> = basis
        .iter()
        .map(|z| z.iter().zip(row).map(|(a, b)| a * b).fold(BigInt::zero(), |s, x| s + x))
        .collect();
    let Some(p) = dots.iter().position(|d| !d.is_zero()) else {
        return basis;
    };
    let mut out = Vec::with_capacity(basis.len() - 1);
    for (l, z) in basis.iter().enumerate() {
        if l == p {
            continue;
        }
        let mut v: Vec<BigInt> =
            z.iter().zip(&basis[p]).map(|(a, b)| &dots[p] * a - &dots[l] * b).collect();
        content_reduce(&mut v);
        out.push(v);
    }
    out
}

fn integer_row(row: &[BigRational]) -> Vec<BigInt> {
    let mut l = BigInt::one();
    for v in row {
        if !v.denom().is_one() {
            l = l.lcm(v.denom());
        }
    }
    row.iter().map(|v| v.numer() * (&l / v.denom())).collect()
}

/// Reduced row echelon form with zero rows dropped.
fn rref(mut rows: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else { continue };
        rows.swap(rank, p);
        let inv = rows[rank][col].recip();
        for x in rows[rank].iter_mut() {
            if !x.is_zero() {
                *x = &*x * &inv;
            }
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                let (pivot, other) = if r < rank {
                    let (a, b) = rows.split_at_mut(rank);
                    (&b[0], &mut a[r])
                } else {
                    let (a, b) = rows.split_at_mut(r);
                    (&a[rank], &mut b[0])
                };
                for (o, x) in other.iter_mut().zip(pivot) {
                    if !x.is_zero() {
                        *o -= &f * x;
                    }
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    rows
}

/// Exact solution basis of the system, as dense rows over the box, in RREF.
fn solve_system(sys: &System<'_>) -> Vec<Vec<BigRational>> {
    let plan = Propagation::run(sys);
    let mut basis: Vec<Vec<BigInt>> = (0..plan.params).map(|q| plan.unit(q)).collect();
    let mut values: Vec<Values> = basis.iter().map(|z| Values::from_plan(&plan, z)).collect();
    let mut columns: Option<Vec<Vec<BigRational>>> = None;
    let mut from = 0;
    while !basis.is_empty() {
        let Some(h) = values.iter().filter_map(|v| sys.first_violation(v, from)).min() else {
            break;
        };
        let t = sys.index.triples[h];
        let abc = sys.coeffs(t.i as usize, t.j as usize, t.w as i64);
        let cols = columns
            .get_or_insert_with(|| (0..plan.params).map(|q| plan.replay(&plan.unit(q))).collect());
        let (a, b, c) = (ratio(abc.0), ratio(abc.1), ratio(abc.2));
        let row: Vec<BigRational> = cols
            .iter()
            .map(|col| &a * &col[t.k as usize] + &b * &col[t.i as usize] + &c * &col[t.j as usize])
            .collect();
        basis = restrict(basis, &integer_row(&row));
        values = basis.iter().map(|z| Values::from_plan(&plan, z)).collect();
        // every new basis vector satisfies equations 0..=h
        from = h + 1;
    }
    rref(basis.iter().map(|z| plan.replay(z)).collect())
}

/// Largest absolute residual of a dense solution over every equation.
fn max_residual(sys: &System<'_>, row: &[BigRational]) -> Scalar {
    let (values, scale) = Values::from_rationals(row);
    let mut worst = BigInt::zero();
    let mut from = 0;
    while let Some(h) = sys.first_violation(&values, from) {
        let t = &sys.index.triples[h];
        let r = values.residual_big(sys.coeffs(t.i as usize, t.j as usize, t.w as i64), t).abs();
        if r > worst {
            worst = r;
        }
        from = h + 1;
    }
    Scalar::from_rational(BigRational::new(worst, scale))
}

/// `∂(h_r) = values[r] · h_{r+degree}` for `r` in a truncation box; absent
/// entries are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedDerivation {
    degree: LatticeVector,
    values: BTreeMap<LatticeVector, Scalar>,
}

impl GradedDerivation {
    pub fn new<I>(degree: LatticeVector, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticeVector, Scalar)>,
    {
        let mut map = BTreeMap::new();
        for (r, c) in values {
            degree.ensure_same_dim(&r)?;
            if r.is_zero() {
                return Err(Error::ZeroVector);
            }
            if !c.is_zero() {
                map.insert(r, c);
            }
        }
        Ok(GradedDerivation { degree, values: map })
    }

    pub fn zero(degree: LatticeVector) -> Self {
        GradedDerivation { degree, values: BTreeMap::new() }
    }

    fn from_dense(degree: &LatticeVector, bx: &TruncationBox, row: &[BigRational]) -> Self {
        let values = bx
            .vectors()
            .iter()
            .zip(row)
            .filter(|(_, c)| !c.is_zero())
            .map(|(r, c)| (r.clone(), Scalar::from_rational(c.clone())))
            .collect();
        GradedDerivation { degree: degree.clone(), values }
    }

    fn to_dense(&self, bx: &TruncationBox) -> Vec<BigRational> {
        bx.vectors().iter().map(|r| self.value(r).as_rational().clone()).collect()
    }

    pub fn degree(&self) -> &LatticeVector {
        &self.degree
    }

    pub fn values(&self) -> &BTreeMap<LatticeVector, Scalar> {
        &self.values
    }

    pub fn value(&self, r: &LatticeVector) -> Scalar {
        self.values.get(r).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// `∂(h_r)`, zero when `r + degree = 0`.
    pub fn apply_basis(&self, r: &LatticeVector) -> Result<HamiltonianElement> {
        let target = r.checked_add(&self.degree)?;
        let c = self.value(r);
        if target.is_zero() || c.is_zero() {
            return HamiltonianElement::zero(r.dim());
        }
        HamiltonianElement::monomial(&target, c)
    }

    fn apply_terms(&self, x: &HamiltonianElement) -> Result<HamiltonianElement> {
        let mut acc = HamiltonianElement::zero(x.dim())?;
        for (r, a) in x.terms() {
            acc = acc.add(&self.apply_basis(r)?.scale(a))?;
        }
        Ok(acc)
    }

    /// First pair `(r, s)` in the box with `r + s` in the box on which
    /// `∂[h_r, h_s] = [∂h_r, h_s] + [h_r, ∂h_s]` fails, computed with the
    /// algebra's own bracket.
    pub fn leibniz_violation(&self, bx: &TruncationBox) -> Result<Option<(LatticeVector, LatticeVector)>> {
        let vs = bx.vectors();
        for (a, r) in vs.iter().enumerate() {
            let hr = HamiltonianElement::basis(r)?;
            let dr = self.apply_basis(r)?;
            for s in &vs[a + 1..] {
                let sum = r.checked_add(s)?;
                if !bx.contains(&sum) {
                    continue;
                }
                let hs = HamiltonianElement::basis(s)?;
                let lhs = self.apply_terms(&hr.bracket(&hs)?)?;
                let rhs = dr.bracket(&hs)?.add(&hr.bracket(&self.apply_basis(s)?)?)?;
                if lhs != rhs {
                    return Ok(Some((r.clone(), s.clone())));
                }
            }
        }
        Ok(None)
    }
}

#[derive(Serialize, Deserialize)]
struct DerivationDoc {
    degree: LatticeVector,
    values: Vec<TermDoc>,
}

impl Serialize for GradedDerivation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DerivationDoc {
            degree: self.degree.clone(),
            values: self
                .values
                .iter()
                .map(|(r, c)| TermDoc { deg: r.clone(), coef: c.clone() })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GradedDerivation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = DerivationDoc::deserialize(deserializer)?;
        for w in doc.values.windows(2) {
            if w[0].deg >= w[1].deg {
                return Err(D::Error::custom(format!("values not strictly sorted at {}", w[1].deg)));
            }
        }
        if let Some(t) = doc.values.iter().find(|t| t.coef.is_zero()) {
            return Err(D::Error::custom(format!("zero value stored at {}", t.deg)));
        }
        GradedDerivation::new(doc.degree, doc.values.into_iter().map(|t| (t.deg, t.coef)))
            .map_err(D::Error::custom)
    }
}

fn check_degree(degree: &LatticeVector, bx: &TruncationBox) -> Result<()> {
    if degree.dim() != bx.dim() {
        return Err(Error::DimensionMismatch { expected: bx.dim(), found: degree.dim() });
    }
    if degree.max_norm() > bx.radius() as u64 {
        return Err(Error::DegreeOutsideBox { degree: degree.to_string(), radius: bx.radius() });
    }
    Ok(())
}

/// Basis of the degree-`degree` derivations of `H_N'` restricted to the box.
pub fn solve_graded_derivations(degree: &LatticeVector, bx: &TruncationBox) -> Result<Vec<GradedDerivation>> {
    check_degree(degree, bx)?;
    let sys = System::new(bx.index(), Constraint::Leibniz, degree);
    Ok(solve_system(&sys).iter().map(|row| GradedDerivation::from_dense(degree, bx, row)).collect())
}

/// Basis of the additive characters `c_{r+s} = c_r + c_s` imposed on pairs
/// with `ω(r, s) ≠ 0`, returned as degree-zero derivations `h_r ↦ c_r h_r`.
pub fn degree_zero_character_solve(bx: &TruncationBox) -> Result<Vec<GradedDerivation>> {
    let zero = LatticeVector::zero(bx.dim())?;
    let sys = System::new(bx.index(), Constraint::Additive, &zero);
    Ok(solve_system(&sys).iter().map(|row| GradedDerivation::from_dense(&zero, bx, row)).collect())
}

/// `(c_1, …, c_N)` with `c_r = Σ r_i c_i` on the whole box, if the character is linear.
pub fn linear_character_coefficients(c: &GradedDerivation, bx: &TruncationBox) -> Result<Option<Vec<Scalar>>> {
    let n = bx.dim();
    let coeffs: Vec<Scalar> =
        (0..n).map(|i| Ok(c.value(&LatticeVector::unit(n, i)?))).collect::<Result<_>>()?;
    for r in bx.vectors() {
        let mut expected = Scalar::zero();
        for (ci, ri) in coeffs.iter().zip(r.coords()) {
            if *ri != 0 {
                expected += &(ci * &Scalar::from(*ri));
            }
        }
        if c.value(r) != expected {
            return Ok(None);
        }
    }
    Ok(Some(coeffs))
}

/// The restriction of `ad(x)` to the box, for `x` homogeneous of `degree`.
pub fn inner_derivation(
    x: &HamiltonianElement,
    degree: &LatticeVector,
    bx: &TruncationBox,
) -> Result<GradedDerivation> {
    if x.dim() != bx.dim() {
        return Err(Error::DimensionMismatch { expected: bx.dim(), found: x.dim() });
    }
    check_degree(degree, bx)?;
    let homogeneous = if degree.is_zero() {
        x.terms().is_empty()
    } else {
        !x.has_cartan_part() && x.support().all(|r| r == degree)
    };
    if !homogeneous {
        return Err(Error::NotHomogeneous(degree.to_string()));
    }
    let ad = x.ad();
    let mut values = Vec::new();
    for r in bx.vectors() {
        let image = ad.apply(&HamiltonianElement::basis(r)?)?;
        let target = r.checked_add(degree)?;
        if image.has_cartan_part() || image.support().any(|t| t != &target) {
            return Err(Error::Internal(format!("ad image of h_{r} is not homogeneous")));
        }
        values.push((r.clone(), image.coefficient(&target)));
    }
    GradedDerivation::new(degree.clone(), values)
}

/// Outcome of comparing the solved derivation space with the inner derivations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerReport {
    pub n: usize,
    pub degree: LatticeVector,
    pub radius: i64,
    pub dimension: usize,
    pub expected: usize,
    #[serde(rename = "match")]
    pub matches: bool,
    /// Largest absolute Leibniz residual of each basis vector.
    pub residuals: Vec<Scalar>,
    pub basis: Vec<GradedDerivation>,
}

/// `[ad h_degree]` for nonzero degree, `[ad D(e_i, 0)]` for degree zero.
pub fn predicted_inner_basis(degree: &LatticeVector, bx: &TruncationBox) -> Result<Vec<GradedDerivation>> {
    let n = bx.dim();
    if degree.is_zero() {
        (0..n)
            .map(|i| {
                let mut u = vec![Scalar::zero(); n];
                u[i] = Scalar::one();
                inner_derivation(&HamiltonianElement::cartan_element(u)?, degree, bx)
            })
            .collect()
    } else {
        Ok(vec![inner_derivation(&HamiltonianElement::basis(degree)?, degree, bx)?])
    }
}

/// Solves for the degree-`degree` derivations and checks that they are
/// exactly the predicted inner derivations.
pub fn certify_inner(degree: &LatticeVector, bx: &TruncationBox) -> Result<InnerReport> {
    check_degree(degree, bx)?;
    let sys = System::new(bx.index(), Constraint::Leibniz, degree);
    let rows = solve_system(&sys);
    let predicted = predicted_inner_basis(degree, bx)?;
    let predicted_rows = rref(predicted.iter().map(|d| d.to_dense(bx)).collect());
    let residuals: Vec<Scalar> = rows.iter().map(|row| max_residual(&sys, row)).collect();
    let expected = predicted.len();
    let matches = rows.len() == expected
        && predicted_rows == rows
        && residuals.iter().all(Scalar::is_zero);
    Ok(InnerReport {
        n: bx.dim(),
        degree: degree.clone(),
        radius: bx.radius(),
        dimension: rows.len(),
        expected,
        matches,
        residuals,
        basis: rows.iter().map(|row| GradedDerivation::from_dense(degree, bx, row)).collect(),
    })
}

/// Smallest radius in `2..=max_radius` (and at least `|degree|∞`) at which
/// the solved dimension equals the inner-derivation dimension.
pub fn collapse_radius(degree: &LatticeVector, max_radius: i64) -> Result<Option<i64>> {
    let n = degree.dim();
    let expected = if degree.is_zero() { n } else { 1 };
    let start = (degree.max_norm() as i64).max(2);
    for radius in start..=max_radius {
        let bx = TruncationBox::new(n, radius)?;
        if solve_graded_derivations(degree, &bx)?.len() == expected {
            return Ok(Some(radius));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[i64]) -> LatticeVector {
        LatticeVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn box_counts() {
        let b = TruncationBox::new(2, 3).unwrap();
        assert_eq!(b.len(), 48);
        assert_eq!(TruncationBox::new(4, 3).unwrap().len(), 2400);
        assert_eq!(TruncationBox::new(2, 1), Err(Error::RadiusTooSmall(1)));
        assert!(matches!(TruncationBox::new(12, 9), Err(Error::BoxTooLarge { .. })));
        let vs = b.vectors();
        let brute = (0..vs.len())
            .flat_map(|i| (i + 1..vs.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| b.contains(&vs[i].checked_add(&vs[j]).unwrap()))
            .count();
        assert_eq!(b.constraint_pairs(), brute);
    }

    #[test]
    fn nonzero_degree_example() {
        let bx = TruncationBox::new(2, 3).unwrap();
        let basis = solve_graded_derivations(&v(&[1, 0]), &bx).unwrap();
        assert_eq!(basis.len(), 1);
        // normalized so the first nonzero value in lex order is 1; ω((1,0), r) = −r_2
        let first = bx.vectors().iter().find(|r| r.coords()[1] != 0).unwrap();
        assert_eq!(first, &v(&[-3, -3]));
        for r in bx.vectors() {
            assert_eq!(basis[0].value(r), Scalar::new(-r.coords()[1], 3).unwrap());
        }
    }

    #[test]
    fn degree_zero_example() {
        let bx = TruncationBox::new(2, 3).unwrap();
        let basis = solve_graded_derivations(&v(&[0, 0]), &bx).unwrap();
        assert_eq!(basis.len(), 2);
        for d in &basis {
            assert!(linear_character_coefficients(d, &bx).unwrap().is_some());
        }
    }

    #[test]
    fn degree_outside_box_rejected() {
        let bx = TruncationBox::new(2, 3).unwrap();
        assert!(matches!(
            solve_graded_derivations(&v(&[4, 0]), &bx),
            Err(Error::DegreeOutsideBox { .. })
        ));
    }

    #[test]
    fn inner_examples() {
        let bx = TruncationBox::new(2, 2).unwrap();
        let d = inner_derivation(&HamiltonianElement::basis(&v(&[1, 0])).unwrap(), &v(&[1, 0]), &bx)
            .unwrap();
        assert_eq!(d.value(&v(&[0, 1])), Scalar::from(-1));
        let zero = inner_derivation(&HamiltonianElement::zero(2).unwrap(), &v(&[1, 0]), &bx).unwrap();
        assert!(zero.is_zero());
        let cartan = HamiltonianElement::cartan_element(vec![Scalar::one(), Scalar::zero()]).unwrap();
        let d = inner_derivation(&cartan, &v(&[0, 0]), &bx).unwrap();
        assert_eq!(d.value(&v(&[2, 1])), Scalar::from(2));
        assert!(matches!(
            inner_derivation(&cartan, &v(&[1, 0]), &bx),
            Err(Error::NotHomogeneous(_))
        ));
    }

    #[test]
    fn certify_examples() {
        let r = certify_inner(&v(&[1, 1]), &TruncationBox::new(2, 3).unwrap()).unwrap();
        assert!(r.matches && r.dimension == 1, "{r:?}");
        let r = certify_inner(&v(&[0, 0, 0, 0]), &TruncationBox::new(4, 2).unwrap()).unwrap();
        assert!(r.matches && r.dimension == 4, "{r:?}");
        let r = certify_inner(&v(&[2, -1]), &TruncationBox::new(2, 4).unwrap()).unwrap();
        assert!(r.matches && r.dimension == 1, "{r:?}");
    }

    #[test]
    fn characters() {
        let bx = TruncationBox::new(2, 3).unwrap();
        let basis = degree_zero_character_solve(&bx).unwrap();
        assert_eq!(basis.len(), 2);
        for c in &basis {
            let coeffs = linear_character_coefficients(c, &bx).unwrap().unwrap();
            assert!(coeffs.iter().any(|x| !x.is_zero()));
            for r in bx.vectors() {
                assert_eq!(c.value(&r.checked_neg().unwrap()), -c.value(r));
            }
        }
        assert_eq!(degree_zero_character_solve(&TruncationBox::new(4, 2).unwrap()).unwrap().len(), 4);
    }

    #[test]
    fn solver_output_satisfies_leibniz_independently() {
        for radius in [2, 3] {
            let bx = TruncationBox::new(2, radius).unwrap();
            for d in box_vectors(2, 2).into_iter().chain([v(&[0, 0])]) {
                for basis_vec in solve_graded_derivations(&d, &bx).unwrap() {
                    assert_eq!(basis_vec.leibniz_violation(&bx).unwrap(), None, "degree {d}");
                }
            }
        }
    }

    #[test]
    fn corrupted_derivation_detected() {
        let bx = TruncationBox::new(2, 2).unwrap();
        let good = solve_graded_derivations(&v(&[1, 0]), &bx).unwrap().remove(0);
        let mut values: Vec<_> = good.values().iter().map(|(r, c)| (r.clone(), c.clone())).collect();
        values[3].1 = &values[3].1 + &Scalar::one();
        let bad = GradedDerivation::new(v(&[1, 0]), values).unwrap();
        assert!(bad.leibniz_violation(&bx).unwrap().is_some());
    }

    #[test]
    fn json_round_trip() {
        let bx = TruncationBox::new(2, 2).unwrap();
        let report = certify_inner(&v(&[1, 0]), &bx).unwrap();
        let s = serde_json::to_string(&report).unwrap();
        assert!(s.contains(r#""match":true"#));
        assert_eq!(serde_json::from_str::<InnerReport>(&s).unwrap(), report);
        let b: TruncationBox = serde_json::from_str(r#"{"n":2,"radius":3}"#).unwrap();
        assert_eq!(b, TruncationBox::new(2, 3).unwrap());
        assert!(serde_json::from_str::<TruncationBox>(r#"{"n":2,"radius":1}"#).is_err());
    }

    #[test]
    fn rref_normalizes() {
        let q = |a: i64| ratio(a);
        let rows = rref(vec![vec![q(0), q(2), q(4)], vec![q(0), q(1), q(3)]]);
        assert_eq!(rows, vec![vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn enlarging_the_box_never_adds_solutions(a in -2i64..=2, b in -2i64..=2) {
            let d = v(&[a, b]);
            let small = solve_graded_derivations(&d, &TruncationBox::new(2, 2).unwrap()).unwrap().len();
            let large = solve_graded_derivations(&d, &TruncationBox::new(2, 3).unwrap()).unwrap().len();
            prop_assert!(large <= small);
        }

        #[test]
        fn inner_derivations_lie_in_solution_space(a in -2i64..=2, b in -2i64..=2, c in -5i64..=5) {
            prop_assume!(c != 0);
            let d = v(&[a, b]);
            let bx = TruncationBox::new(2, 3).unwrap();
            let x = if d.is_zero() {
                HamiltonianElement::cartan_element(vec![Scalar::from(c), Scalar::from(1 - c)]).unwrap()
            } else {
                HamiltonianElement::monomial(&d, Scalar::from(c)).unwrap()
            };
            let inner = inner_derivation(&x, &d, &bx).unwrap();
            let mut rows: Vec<_> = solve_graded_derivations(&d, &bx).unwrap().iter().map(|g| g.to_dense(&bx)).collect();
            let rank = rows.len();
            rows.push(inner.to_dense(&bx));
            prop_assert_eq!(rref(rows).len(), rank);
        }
    }
}
