//! Seeded random inputs for the invariant suites.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::HamiltonianElement;
use crate::automorphism::TorusAutomorphism;
use crate::lattice::LatticeVector;
use crate::scalar::Scalar;
use crate::symplectic::{elementary_generators, standard_anti_symplectic, GspMatrix};
use crate::Result;

/// Scaling entries drawn for random automorphisms.
const SCALING_CHOICES: [(i64, i64); 12] = [
    (1, 1),
    (-1, 1),
    (2, 1),
    (-2, 1),
    (3, 1),
    (-3, 1),
    (1, 2),
    (-1, 2),
    (2, 3),
    (-2, 3),
    (3, 2),
    (-3, 2),
];

/// Deterministic sampler; each suite uses its own stream of the same seed.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.gen_range(0..len)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.gen_bool(0.5)
    }

    /// `p/q` with `0 < |p| ≤ bound`, `0 < q ≤ bound`.
    pub fn nonzero_scalar(&mut self, bound: i64) -> Scalar {
        let mut p = self.rng.gen_range(1..=bound);
        if self.coin() {
            p = -p;
        }
        let q = self.rng.gen_range(1..=bound);
        Scalar::new(p, q).expect("positive denominator")
    }

    pub fn vector(&mut self, n: usize, bound: i64) -> LatticeVector {
        let coords = (0..n).map(|_| self.rng.gen_range(-bound..=bound)).collect();
        LatticeVector::new(coords).expect("nonempty coordinates")
    }

    pub fn nonzero_vector(&mut self, n: usize, bound: i64) -> LatticeVector {
        loop {
            let v = self.vector(n, bound);
            if !v.is_zero() {
                return v;
            }
        }
    }

    pub fn primitive_vector(&mut self, n: usize, bound: i64) -> LatticeVector {
        loop {
            let v = self.vector(n, bound);
            if v.content() == 1 {
                return v;
            }
        }
    }

    /// Up to `max_terms` terms in `|r|∞ ≤ bound`; with `cartan`, a random
    /// Cartan part on half of the draws.
    pub fn element(&mut self, n: usize, max_terms: usize, bound: i64, coef: i64, cartan: bool) -> Result<HamiltonianElement> {
        let count = self.rng.gen_range(1..=max_terms);
        let mut terms = BTreeMap::new();
        for _ in 0..count {
            let r = self.nonzero_vector(n, bound);
            let c = self.nonzero_scalar(coef);
            terms.entry(r).or_insert(c);
        }
        let part = if cartan && self.coin() {
            (0..n).map(|_| if self.coin() { self.nonzero_scalar(coef) } else { Scalar::zero() }).collect()
        } else {
            vec![Scalar::zero(); n]
        };
        HamiltonianElement::from_terms(n, terms, part)
    }

    /// Nonzero element of the derived algebra with at most `max_terms` terms.
    pub fn nonzero_derived_element(&mut self, n: usize, max_terms: usize, bound: i64) -> Result<HamiltonianElement> {
        // distinct supports with nonzero coefficients never cancel
        self.element(n, max_terms, bound, 9, false)
    }

    /// Product of up to eight elementary symplectic generators, times the
    /// standard anti-symplectic matrix when `anti` is set.
    pub fn gsp_matrix(&mut self, n: usize, anti: bool) -> Result<GspMatrix> {
        let gens = elementary_generators(n)?;
        let mut q = GspMatrix::identity(n)?;
        for _ in 0..self.rng.gen_range(1..=8) {
            let g = gens.choose(&mut self.rng).expect("generators are nonempty");
            q = q.multiply(g)?;
        }
        if anti {
            q = q.multiply(&standard_anti_symplectic(n)?)?;
        }
        Ok(q)
    }

    pub fn scaling(&mut self, n: usize) -> Vec<Scalar> {
        (0..n)
            .map(|_| {
                let (p, q) = *SCALING_CHOICES.choose(&mut self.rng).expect("choices are nonempty");
                Scalar::new(p, q).expect("positive denominator")
            })
            .collect()
    }

    pub fn automorphism(&mut self, n: usize, anti: bool) -> Result<TorusAutomorphism> {
        let q = self.gsp_matrix(n, anti)?;
        TorusAutomorphism::new(q, self.scaling(n))
    }
}
