//! Sparse Grassmann polynomials over momentum-labelled generators.
//!
//! The bitmask engine in [`crate::grassmann`] is limited to 64 generators; the
//! symmetry checks and the effective-potential bookkeeping need whole grids, so
//! monomials here are sorted generator lists with an explicit permutation sign.

use crate::grassmann::Eps;
use num_complex::Complex64;
use std::collections::HashMap;

/// `psi^eps_{k, spin, rho}` with `k = ((2n+1) pi / beta, m1 G1/L + m2 G2/L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MGen {
    pub n: i64,
    pub m1: usize,
    pub m2: usize,
    pub spin: u8,
    pub rho: u8,
    pub eps: Eps,
}

impl MGen {
    pub fn new(n: i64, m: [usize; 2], spin: u8, rho: u8, eps: Eps) -> Self {
        Self { n, m1: m[0], m2: m[1], spin, rho, eps }
    }

    pub fn m(&self) -> [usize; 2] {
        [self.m1, self.m2]
    }
}

/// Sorts `gens` in place and returns the permutation sign, or `None` if a generator repeats.
pub fn canonicalize(gens: &mut [MGen]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..gens.len() {
        let mut j = i;
        while j > 0 && gens[j - 1] > gens[j] {
            gens.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if gens.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentumPoly {
    terms: HashMap<Vec<MGen>, Complex64>,
}

impl MomentumPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<MGen>, &Complex64)> {
        self.terms.iter()
    }

    /// Coefficient of an already sorted monomial.
    pub fn coefficient(&self, sorted: &[MGen]) -> Complex64 {
        self.terms.get(sorted).copied().unwrap_or_default()
    }

    /// Adds `c psi_{g1} psi_{g2} ...` in the given order.
    pub fn add_product(&mut self, mut gens: Vec<MGen>, c: Complex64) {
        if c == Complex64::default() {
            return;
        }
        if let Some(s) = canonicalize(&mut gens) {
            *self.terms.entry(gens).or_default() += c * s;
        }
    }

    pub fn add(&mut self, other: &Self) {
        for (k, v) in &other.terms {
            *self.terms.entry(k.clone()).or_default() += v;
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect() }
    }

    /// The part of given degree.
    pub fn degree_part(&self, d: usize) -> Self {
        Self { terms: self.terms.iter().filter(|(k, _)| k.len() == d).map(|(k, v)| (k.clone(), *v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max |coefficient difference|` over the union of monomials.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut best = 0.0_f64;
        for (k, v) in &self.terms {
            best = best.max((v - other.coefficient(k)).norm());
        }
        for (k, v) in &other.terms {
            if !self.terms.contains_key(k) {
                best = best.max(v.norm());
            }
        }
        best
    }

    /// Replaces every generator by a linear combination of generators, optionally
    /// conjugating the coefficients of `self` (not those of the images).
    pub fn substitute<E>(&self, conjugate: bool, image: impl Fn(&MGen) -> Result<Vec<(Complex64, MGen)>, E>) -> Result<Self, E> {
        let mut cache: HashMap<MGen, Vec<(Complex64, MGen)>> = HashMap::new();
        let mut out = Self::zero();
        for (mono, &c) in &self.terms {
            let c = if conjugate { c.conj() } else { c };
            let mut partial: Vec<(Complex64, Vec<MGen>)> = vec![(c, Vec::with_capacity(mono.len()))];
            for g in mono {
                if !cache.contains_key(g) {
                    cache.insert(*g, image(g)?);
                }
                let img = &cache[g];
                let mut next = Vec::with_capacity(partial.len() * img.len());
                for (pc, pg) in &partial {
                    for (ic, ig) in img {
                        let mut v = pg.clone();
                        v.push(*ig);
                        next.push((pc * ic, v));
                    }
                }
                partial = next;
            }
            for (pc, pg) in partial {
                out.add_product(pg, pc);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: i64, spin: u8, eps: Eps) -> MGen {
        MGen::new(n, [0, 0], spin, 0, eps)
    }

    #[test]
    fn anticommutation_signs() {
        let (a, b) = (g(0, 0, Eps::Minus), g(1, 0, Eps::Plus));
        let mut p = MomentumPoly::zero();
        p.add_product(vec![a, b], Complex64::new(1.0, 0.0));
        p.add_product(vec![b, a], Complex64::new(1.0, 0.0));
        assert!(p.is_empty() || p.max_abs() == 0.0);
        let mut q = MomentumPoly::zero();
        q.add_product(vec![a, a], Complex64::new(1.0, 0.0));
        assert!(q.is_empty());
    }

    #[test]
    fn substitution_of_swap_is_involutive() {
        let mut p = MomentumPoly::zero();
        p.add_product(vec![g(0, 0, Eps::Plus), g(0, 0, Eps::Minus), g(0, 1, Eps::Plus), g(0, 1, Eps::Minus)], Complex64::new(0.5, 1.0));
        let flip = |x: &MGen| -> Result<_, ()> { Ok(vec![(Complex64::new(1.0, 0.0), MGen { spin: 1 - x.spin, ..*x })]) };
        let once = p.substitute(false, flip).unwrap();
        // The spin-flipped monomial needs two transpositions to re-sort, so the sign is +.
        assert_eq!(once.max_abs_diff(&p), 0.0);
        let twice = once.substitute(false, flip).unwrap();
        assert_eq!(twice, p);
    }
}
