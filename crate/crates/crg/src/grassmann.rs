//! Exact finite Grassmann algebra over at most 64 generators.
//!
//! Monomials are bitmasks and are always stored in ascending generator order,
//! so `psi_{i1} psi_{i2} ... psi_{ik}` with `i1 < i2 < ... < ik` is the
//! canonical form of the mask with those bits set.
//!
//! Momentum universes pack `(mode, spin, rho, eps)` as
//! `bit = ((mode * 2 + spin) * 2 + rho) * 2 + eps`, with `eps = 0` for
//! `psi^-` and `eps = 1` for `psi^+`; `spin = 0` is up and `rho = 0` is the
//! A sublattice. A mode is `freq_index * L^2 + m1 * L + m2`.

use crate::error::{CrgError, Result};
use crate::propagators::{MatsubaraGrid, MomentumTable};
use crate::honeycomb::HoneycombGeometry;
use num_complex::Complex64;
use std::collections::{BTreeMap, HashMap};

/// Default cap on the universe size for exact exponentials.
pub const EXACT_LIMIT: usize = 24;
/// Cap on the number of factors in a set-partition cumulant.
pub const CUMULANT_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Eps {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub mode: usize,
    pub spin: u8,
    pub rho: u8,
    pub eps: Eps,
}

/// An ordered set of generators; position in the list is the bit index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    gens: Vec<Generator>,
}

impl Universe {
    pub fn from_generators(gens: Vec<Generator>) -> Result<Self> {
        if gens.len() > 64 {
            return Err(CrgError::UniverseTooLarge { size: gens.len(), limit: 64 });
        }
        Ok(Self { gens })
    }

    /// Momentum-labelled universe with `n_modes` modes.
    pub fn momentum(n_modes: usize) -> Result<Self> {
        let mut gens = Vec::with_capacity(8 * n_modes);
        for mode in 0..n_modes {
            for spin in 0..2 {
                for rho in 0..2 {
                    for eps in [Eps::Minus, Eps::Plus] {
                        gens.push(Generator { mode, spin, rho, eps });
                    }
                }
            }
        }
        Self::from_generators(gens)
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn generator(&self, bit: usize) -> Generator {
        self.gens[bit]
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    /// Bit of a generator in a momentum universe.
    pub fn momentum_bit(mode: usize, spin: u8, rho: u8, eps: Eps) -> usize {
        ((mode * 2 + spin as usize) * 2 + rho as usize) * 2 + if eps == Eps::Plus { 1 } else { 0 }
    }

    pub fn plus_mask(&self) -> u64 {
        self.gens
            .iter()
            .enumerate()
            .filter(|(_, g)| g.eps == Eps::Plus)
            .fold(0u64, |m, (i, _)| m | (1u64 << i))
    }
}

/// Sign of `a * b` reordered to ascending order; zero when they share a generator.
pub fn monomial_sign(a: u64, b: u64) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += if j >= 63 { 0 } else { (a >> (j + 1)).count_ones() };
    }
    if swaps % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sparse polynomial in the Grassmann generators of a universe of `n_gen` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoly {
    n_gen: usize,
    terms: BTreeMap<u64, Complex64>,
}

impl GrassmannPoly {
    pub fn zero(n_gen: usize) -> Self {
        Self { n_gen, terms: BTreeMap::new() }
    }

    pub fn one(n_gen: usize) -> Self {
        Self::constant(n_gen, Complex64::new(1.0, 0.0))
    }

    pub fn constant(n_gen: usize, c: Complex64) -> Self {
        let mut p = Self::zero(n_gen);
        p.add_term(0, c);
        p
    }

    /// The single generator `psi_bit`.
    pub fn generator(n_gen: usize, bit: usize) -> Self {
        let mut p = Self::zero(n_gen);
        p.add_term(1u64 << bit, Complex64::new(1.0, 0.0));
        p
    }

    /// The product `psi_{b1} psi_{b2} ...` in the given (not necessarily sorted) order.
    pub fn ordered_product(n_gen: usize, bits: &[usize]) -> Self {
        let mut mask = 0u64;
        let mut sign = 1;
        for &b in bits {
            sign *= monomial_sign(mask, 1u64 << b);
            mask |= 1u64 << b;
        }
        let mut p = Self::zero(n_gen);
        if sign != 0 {
            p.add_term(mask, Complex64::new(sign as f64, 0.0));
        }
        p
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn terms(&self) -> &BTreeMap<u64, Complex64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mask: u64) -> Complex64 {
        self.terms.get(&mask).copied().unwrap_or_default()
    }

    /// Adds `c` to the coefficient of `mask`; exact zeros are dropped.
    pub fn add_term(&mut self, mask: u64, c: Complex64) {
        if c == Complex64::default() {
            return;
        }
        let e = self.terms.entry(mask).or_default();
        *e += c;
        if *e == Complex64::default() {
            self.terms.remove(&mask);
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut p = Self::zero(self.n_gen);
        for (&m, &v) in &self.terms {
            p.add_term(m, v * c);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut p = self.clone();
        for (&m, &v) in &other.terms {
            p.add_term(m, v);
        }
        Ok(p)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut acc: HashMap<u64, Complex64> = HashMap::new();
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &other.terms {
                let s = monomial_sign(a, b);
                if s != 0 {
                    *acc.entry(a | b).or_default() += ca * cb * s as f64;
                }
            }
        }
        let mut p = Self::zero(self.n_gen);
        for (m, v) in acc {
            p.add_term(m, v);
        }
        Ok(p)
    }

    /// True when every monomial has even degree.
    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 0)
    }

    /// `exp(X)` for `X` without constant term; the series terminates.
    pub fn exp(&self) -> Result<Self> {
        if self.n_gen > EXACT_LIMIT {
            return Err(CrgError::UniverseTooLarge { size: self.n_gen, limit: EXACT_LIMIT });
        }
        if self.coefficient(0) != Complex64::default() || !self.is_even() {
            return Err(CrgError::InvalidArgument("exp needs an even polynomial without constant term".into()));
        }
        let mut sum = Self::one(self.n_gen);
        let mut term = Self::one(self.n_gen);
        let mut k = 1.0;
        loop {
            term = term.multiply(self)?.scale(Complex64::new(1.0 / k, 0.0));
            if term.is_empty() {
                break;
            }
            sum = sum.add(&term)?;
            k += 1.0;
        }
        Ok(sum)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n_gen == other.n_gen {
            Ok(())
        } else {
            Err(CrgError::UniverseMismatch)
        }
    }
}

/// Covariance `<psi^-_a psi^+_b>` of a Gaussian Grassmann measure.
#[derive(Debug, Clone)]
pub struct Covariance {
    n_gen: usize,
    plus: u64,
    /// Dense `n_gen x n_gen`, only `[minus][plus]` entries meaningful.
    c: Vec<Complex64>,
}

impl Covariance {
    pub fn new(universe: &Universe) -> Self {
        let n = universe.len();
        Self { n_gen: n, plus: universe.plus_mask(), c: vec![Complex64::default(); n * n] }
    }

    pub fn set(&mut self, minus: usize, plus: usize, v: Complex64) {
        assert!(self.plus >> minus & 1 == 0 && self.plus >> plus & 1 == 1, "covariance pairs a psi^- with a psi^+");
        self.c[minus * self.n_gen + plus] = v;
    }

    pub fn get(&self, minus: usize, plus: usize) -> Complex64 {
        self.c[minus * self.n_gen + plus]
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn is_plus(&self, bit: usize) -> bool {
        self.plus >> bit & 1 == 1
    }

    /// `<psi_a psi_b>` for `a < b` in canonical order.
    fn pair(&self, a: usize, b: usize) -> Complex64 {
        match (self.is_plus(a), self.is_plus(b)) {
            (false, true) => self.get(a, b),
            (true, false) => -self.get(b, a),
            _ => Complex64::default(),
        }
    }

    /// Momentum-space covariance `<psi^-_k psi^+_k> = beta |Lambda| g_hat(k)`.
    pub fn momentum(universe: &Universe, table: &MomentumTable) -> Self {
        let mut cov = Self::new(universe);
        let vol = table.beta * table.nk as f64;
        for i in 0..table.nf {
            for m in 0..table.nk {
                let mode = i * table.nk + m;
                let g = table.get(i, m);
                for spin in 0..2 {
                    for r in 0..2u8 {
                        for c in 0..2u8 {
                            let a = Universe::momentum_bit(mode, spin, r, Eps::Minus);
                            let b = Universe::momentum_bit(mode, spin, c, Eps::Plus);
                            cov.set(a, b, g[(r as usize, c as usize)] * vol);
                        }
                    }
                }
            }
        }
        cov
    }

    /// Gaussian expectation of a polynomial.
    pub fn expectation(&self, x: &GrassmannPoly) -> Result<Complex64> {
        if x.n_gen() != self.n_gen {
            return Err(CrgError::UniverseMismatch);
        }
        let mut memo = HashMap::new();
        Ok(x.terms().iter().map(|(&m, &c)| c * self.wick(m, &mut memo)).sum())
    }

    /// Expectation of a canonical monomial by recursive Wick pairing of its lowest field.
    pub fn monomial_expectation(&self, mask: u64) -> Complex64 {
        self.wick(mask, &mut HashMap::new())
    }

    fn wick(&self, mask: u64, memo: &mut HashMap<u64, Complex64>) -> Complex64 {
        if mask == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let np = (mask & self.plus).count_ones();
        if 2 * np != mask.count_ones() {
            return Complex64::default();
        }
        if let Some(v) = memo.get(&mask) {
            return *v;
        }
        let f = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let mut acc = Complex64::default();
        let mut scan = rest;
        let mut between = 0u32;
        while scan != 0 {
            let g = scan.trailing_zeros() as usize;
            scan &= scan - 1;
            let p = self.pair(f, g);
            if p != Complex64::default() {
                let sub = self.wick(rest & !(1u64 << g), memo);
                let term = p * sub;
                acc += if between % 2 == 0 { term } else { -term };
            }
            between += 1;
        }
        memo.insert(mask, acc);
        acc
    }

    /// Truncated expectation of even polynomials by Moebius inversion over set partitions.
    pub fn truncated_expectation(&self, v: &[GrassmannPoly]) -> Result<Complex64> {
        let n = v.len();
        if n == 0 {
            return Err(CrgError::InvalidArgument("truncated expectation needs at least one factor".into()));
        }
        if n > CUMULANT_LIMIT {
            return Err(CrgError::InvalidArgument(format!("set-partition cumulants capped at N = {CUMULANT_LIMIT}")));
        }
        if v.iter().any(|p| !p.is_even()) {
            return Err(CrgError::InvalidArgument("truncated expectation needs even factors".into()));
        }
        let moments = self.subset_moments(v)?;
        let mut total = Complex64::default();
        for part in set_partitions(n) {
            let k = part.len();
            let mut term = Complex64::new(if k % 2 == 1 { 1.0 } else { -1.0 } * factorial(k - 1), 0.0);
            for block in &part {
                term *= moments[*block as usize];
            }
            total += term;
        }
        Ok(total)
    }

    /// `E(prod_{i in S} V_i)` for every subset `S`, products in increasing index order.
    pub fn subset_moments(&self, v: &[GrassmannPoly]) -> Result<Vec<Complex64>> {
        let n = v.len();
        let mut prods: Vec<Option<GrassmannPoly>> = vec![None; 1 << n];
        prods[0] = Some(GrassmannPoly::one(self.n_gen));
        let mut out = vec![Complex64::default(); 1 << n];
        out[0] = Complex64::new(1.0, 0.0);
        for s in 1usize..(1 << n) {
            let top = usize::BITS - 1 - s.leading_zeros();
            let prev = s & !(1 << top);
            let p = prods[prev].as_ref().expect("subsets built in increasing order").multiply(&v[top as usize])?;
            out[s] = self.expectation(&p)?;
            prods[s] = Some(p);
        }
        Ok(out)
    }

    /// `int P(dpsi) e^{-V}` by exact expansion of the exponential.
    pub fn partition_function(&self, v: &GrassmannPoly) -> Result<Complex64> {
        let e = v.scale(Complex64::new(-1.0, 0.0)).exp()?;
        self.expectation(&e)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// All set partitions of `{0..n}`, each block a bitmask.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, n, blocks, out);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

/// Cumulant as the mixed derivative of `log E(exp(sum lambda_i V_i))`, computed in the
/// ring of multilinear polynomials in the `lambda_i`.
pub fn cumulant_from_log(moments: &[Complex64]) -> Complex64 {
    let size = moments.len();
    let full = size - 1;
    // X = M - 1 is nilpotent; log(1 + X) = sum_k (-1)^{k+1} X^k / k.
    let mut x = moments.to_vec();
    x[0] = Complex64::default();
    let mul = |a: &[Complex64], b: &[Complex64]| {
        let mut c = vec![Complex64::default(); size];
        for s in 0..size {
            if a[s] == Complex64::default() {
                continue;
            }
            let comp = full & !s;
            let mut t = comp;
            loop {
                c[s | t] += a[s] * b[t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & comp;
            }
        }
        c
    };
    let mut power = x.clone();
    let mut log = vec![Complex64::default(); size];
    let n = full.count_ones() as usize;
    for k in 1..=n.max(1) {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        for s in 0..size {
            log[s] += power[s] * (sign / k as f64);
        }
        power = mul(&power, &x);
    }
    log[full]
}

/// The Hubbard interaction `U sum_rho int dx psi+_up psi-_up psi+_dn psi-_dn` in
/// momentum generators: `U/(beta|Lambda|)^3 sum_rho sum_{k1-k2+k3-k4=0} ...`.
pub fn interaction(geom: &HoneycombGeometry, grid: &MatsubaraGrid, u: f64) -> Result<GrassmannPoly> {
    let l = geom.l();
    let nk = l * l;
    let nf = grid.len();
    let n_modes = nf * nk;
    let universe = Universe::momentum(n_modes)?;
    let mut v = GrassmannPoly::zero(universe.len());
    if u == 0.0 {
        return Ok(v);
    }
    let coef = Complex64::new(u / (grid.beta() * nk as f64).powi(3), 0.0);
    let ns = grid.n_values();
    let n_index: HashMap<i64, usize> = ns.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    for f1 in 0..nf {
        for f2 in 0..nf {
            for f3 in 0..nf {
                let n4 = ns[f1] - ns[f2] + ns[f3];
                let Some(&f4) = n_index.get(&n4) else { continue };
                for m1 in 0..nk {
                    for m2 in 0..nk {
                        for m3 in 0..nk {
                            let a = |m: usize| ((m / l) as i64, (m % l) as i64);
                            let (a1, a2, a3) = (a(m1), a(m2), a(m3));
                            let li = l as i64;
                            let m4 = ((a1.0 - a2.0 + a3.0).rem_euclid(li) * li + (a1.1 - a2.1 + a3.1).rem_euclid(li)) as usize;
                            for rho in 0..2u8 {
                                let bits = [
                                    Universe::momentum_bit(f1 * nk + m1, 0, rho, Eps::Plus),
                                    Universe::momentum_bit(f2 * nk + m2, 0, rho, Eps::Minus),
                                    Universe::momentum_bit(f3 * nk + m3, 1, rho, Eps::Plus),
                                    Universe::momentum_bit(f4 * nk + m4, 1, rho, Eps::Minus),
                                ];
                                let mono = GrassmannPoly::ordered_product(universe.len(), &bits);
                                for (&mask, &c) in mono.terms() {
                                    v.add_term(mask, c * coef);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::ScalePropagator;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn nilpotent_and_anticommuting() {
        let p1 = GrassmannPoly::generator(4, 0);
        let p2 = GrassmannPoly::generator(4, 1);
        assert!(p1.multiply(&p1).unwrap().is_empty());
        let a = p1.multiply(&p2).unwrap();
        let b = p2.multiply(&p1).unwrap();
        assert_eq!(a, b.scale(c(-1.0)));
    }

    #[test]
    fn disjoint_even_products_commute() {
        let one = GrassmannPoly::one(4);
        let x = one.add(&GrassmannPoly::ordered_product(4, &[0, 1])).unwrap();
        let y = one.add(&GrassmannPoly::ordered_product(4, &[2, 3])).unwrap();
        let p = x.multiply(&y).unwrap();
        assert_eq!(p.len(), 4);
        for m in [0u64, 0b11, 0b1100, 0b1111] {
            assert_eq!(p.coefficient(m), c(1.0));
        }
        assert_eq!(p, y.multiply(&x).unwrap());
        assert_eq!(GrassmannPoly::zero(3).multiply(&x), Err(CrgError::UniverseMismatch));
    }

    #[test]
    fn associativity() {
        let n = 6;
        let a = GrassmannPoly::generator(n, 0).add(&GrassmannPoly::ordered_product(n, &[3, 1])).unwrap();
        let b = GrassmannPoly::generator(n, 2).add(&GrassmannPoly::generator(n, 5)).unwrap();
        let cc = GrassmannPoly::ordered_product(n, &[4, 0]).add(&GrassmannPoly::one(n)).unwrap();
        let l = a.multiply(&b).unwrap().multiply(&cc).unwrap();
        let r = a.multiply(&b.multiply(&cc).unwrap()).unwrap();
        assert_eq!(l, r);
    }

    fn pair_universe() -> Universe {
        Universe::from_generators(
            (0..4)
                .map(|i| Generator { mode: i / 2, spin: 0, rho: 0, eps: if i % 2 == 0 { Eps::Minus } else { Eps::Plus } })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn wick_small_cases() {
        let u = pair_universe();
        let mut cov = Covariance::new(&u);
        let g = [[c(1.5), Complex64::new(0.2, 0.7)], [c(-0.4), Complex64::new(0.0, 2.0)]];
        for a in 0..2 {
            for b in 0..2 {
                cov.set(2 * a, 2 * b + 1, g[a][b]);
            }
        }
        let x = GrassmannPoly::ordered_product(4, &[0, 3]);
        assert_eq!(cov.expectation(&x).unwrap(), g[0][1]);
        let x = GrassmannPoly::ordered_product(4, &[0, 1, 2, 3]);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        assert!((cov.expectation(&x).unwrap() - det).norm() < 1e-15);
        let x = GrassmannPoly::ordered_product(4, &[0, 2]);
        assert_eq!(cov.expectation(&x).unwrap(), Complex64::default());
    }

    #[test]
    fn cumulant_basics() {
        let u = pair_universe();
        let mut cov = Covariance::new(&u);
        cov.set(0, 1, c(2.0));
        cov.set(2, 3, c(3.0));
        let v1 = GrassmannPoly::ordered_product(4, &[0, 1]).add(&GrassmannPoly::one(4)).unwrap();
        let v2 = GrassmannPoly::ordered_product(4, &[2, 3]);
        // Uncoupled blocks: cumulant vanishes.
        assert!(cov.truncated_expectation(&[v1.clone(), v2.clone()]).unwrap().norm() < 1e-15);
        assert_eq!(cov.truncated_expectation(&[v1.clone()]).unwrap(), cov.expectation(&v1).unwrap());
        // Coupled: E^T = E(V1 V2) - E(V1) E(V2).
        cov.set(0, 3, c(0.5));
        cov.set(2, 1, c(-1.0));
        let w = v1.add(&v2).unwrap();
        let direct = cov.expectation(&w.multiply(&v2).unwrap()).unwrap()
            - cov.expectation(&w).unwrap() * cov.expectation(&v2).unwrap();
        assert!((cov.truncated_expectation(&[w, v2]).unwrap() - direct).norm() < 1e-14);
    }

    #[test]
    fn set_partition_counts() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(set_partitions(n).len(), b);
        }
    }

    #[test]
    fn log_cumulant_second_order() {
        let m = [c(1.0), c(2.0), c(3.0), c(10.0)];
        assert!((cumulant_from_log(&m) - c(4.0)).norm() < 1e-14);
    }

    #[test]
    fn interaction_counts() {
        let geom = HoneycombGeometry::new(1).unwrap();
        let grid = MatsubaraGrid::new(4.0, 2).unwrap();
        assert!(interaction(&geom, &grid, 0.0).unwrap().is_empty());
        let v = interaction(&geom, &grid, 1.0).unwrap();
        let ns = grid.n_values();
        let mut triples = 0;
        for a in ns {
            for b in ns {
                for d in ns {
                    if ns.contains(&(a - b + d)) {
                        triples += 1;
                    }
                }
            }
        }
        assert_eq!(v.len(), 2 * triples);
    }

    #[test]
    fn exact_partition_function() {
        // L = 1, beta = 4, M = 1: 2 frequencies, 16 generators.
        let geom = HoneycombGeometry::new(1).unwrap();
        let grid = MatsubaraGrid::new(4.0, 1).unwrap();
        let table = ScalePropagator::full(&geom, &grid).momentum_table();
        let univ = Universe::momentum(grid.len()).unwrap();
        let cov = Covariance::momentum(&univ, &table);
        assert_eq!(cov.partition_function(&GrassmannPoly::zero(univ.len())).unwrap(), c(1.0));
        let v1 = interaction(&geom, &grid, 1.0).unwrap();
        // Coefficients of log Xi from two small couplings.
        let e1 = cov.expectation(&v1).unwrap();
        let et2 = cov.truncated_expectation(&[v1.clone(), v1.clone()]).unwrap();
        let u = 1e-3;
        let lx = |s: f64| cov.partition_function(&v1.scale(c(s))).unwrap().ln();
        let d1 = (lx(u) - lx(-u)) / (2.0 * u);
        let d2 = (lx(u) - 2.0 * lx(0.0) + lx(-u)) / (u * u);
        assert!((d1 + e1).norm() < 1e-8);
        assert!((d2 - et2).norm() < 1e-4 * et2.norm().max(1.0));
    }
}
