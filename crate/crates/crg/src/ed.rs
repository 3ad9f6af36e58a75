//! Exact diagonalization of the Hubbard Hamiltonian
//! `H = -t sum (a+_x b_{x+d} + h.c.) + U sum_sites (n_up - 1/2)(n_dn - 1/2)`
//! on `L x L` periodic lattices with `L <= 2`.
//!
//! Orbital `o = 4 * cell + 2 * rho + spin` with `cell = n1 * L + n2`, the same
//! `(cell, rho, spin)` order as the Grassmann generators. Fock states are
//! bitmasks with creation operators applied in ascending orbital order.
//! Spectra are computed per `(N_up, N_dn)` sector and, within a sector, per
//! lattice-momentum block of the translation group.

use crate::error::{CrgError, Result};
use crate::honeycomb::{HoneycombGeometry, Vec2};
use crate::linalg::{eigvalsh, log_sum_exp};
use crate::propagators::{Mat2, Spacetime};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::collections::BTreeMap;

pub const ED_MAX_L: usize = 2;

pub fn orbital(cell: usize, rho: usize, spin: usize) -> usize {
    4 * cell + 2 * rho + spin
}

/// `(cell, rho, spin)` of an orbital.
pub fn orbital_parts(o: usize) -> (usize, usize, usize) {
    (o / 4, (o / 2) % 2, o % 2)
}

/// Single-particle hopping amplitudes `T[i][j]` between orbitals (spin-diagonal).
/// The A site of cell `x` couples to the B sites of cells `x`, `x - l2` and `x - l1`;
/// repeated bonds on small lattices add up.
pub fn hopping_matrix(geom: &HoneycombGeometry) -> Vec<Vec<f64>> {
    let l = geom.l();
    let t = geom.hopping();
    let n = 4 * l * l;
    let mut h = vec![vec![0.0; n]; n];
    let cell = |n1: i64, n2: i64| (n1.rem_euclid(l as i64) * l as i64 + n2.rem_euclid(l as i64)) as usize;
    for n1 in 0..l as i64 {
        for n2 in 0..l as i64 {
            let a = cell(n1, n2);
            for b in [cell(n1, n2), cell(n1, n2 - 1), cell(n1 - 1, n2)] {
                for s in 0..2 {
                    let (i, j) = (orbital(a, 0, s), orbital(b, 1, s));
                    h[i][j] -= t;
                    h[j][i] -= t;
                }
            }
        }
    }
    h
}

/// Fock space of `4 L^2` orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpace {
    pub l: usize,
    pub n_orbitals: usize,
}

impl FockSpace {
    pub fn new(l: usize) -> Result<Self> {
        if l > ED_MAX_L {
            return Err(CrgError::LatticeTooLarge { l, cap: ED_MAX_L });
        }
        Ok(Self { l, n_orbitals: 4 * l * l })
    }

    pub fn spin_mask(&self, spin: usize) -> u64 {
        (0..self.n_orbitals).filter(|o| o % 2 == spin).fold(0, |m, o| m | 1u64 << o)
    }

    /// Basis states of sector `(n_up, n_dn)`, ascending.
    pub fn sector_states(&self, n_up: u32, n_dn: u32) -> Vec<u64> {
        let (mu, md) = (self.spin_mask(0), self.spin_mask(1));
        (0..1u64 << self.n_orbitals)
            .filter(|s| (s & mu).count_ones() == n_up && (s & md).count_ones() == n_dn)
            .collect()
    }

    /// Orbital permutation of the translation by `(g1, g2)` cells.
    fn translation(&self, g: (usize, usize)) -> Vec<usize> {
        let l = self.l;
        (0..self.n_orbitals)
            .map(|o| {
                let (c, rho, s) = orbital_parts(o);
                let (n1, n2) = (c / l, c % l);
                orbital(((n1 + g.0) % l) * l + (n2 + g.1) % l, rho, s)
            })
            .collect()
    }
}

/// Image of a Fock state under an orbital permutation, with the fermionic reordering sign.
pub fn permute_state(state: u64, perm: &[usize]) -> (u64, f64) {
    let mut imgs = Vec::with_capacity(state.count_ones() as usize);
    let mut s = state;
    while s != 0 {
        let o = s.trailing_zeros() as usize;
        s &= s - 1;
        imgs.push(perm[o]);
    }
    let mut inv = 0;
    for i in 0..imgs.len() {
        for j in i + 1..imgs.len() {
            if imgs[i] > imgs[j] {
                inv += 1;
            }
        }
    }
    let mask = imgs.iter().fold(0u64, |m, &o| m | 1u64 << o);
    (mask, if inv % 2 == 0 { 1.0 } else { -1.0 })
}

/// `c+_i c_j |state>` as `(new_state, sign)`, if nonzero.
pub fn hop(state: u64, i: usize, j: usize) -> Option<(u64, f64)> {
    if state >> j & 1 == 0 {
        return None;
    }
    let s1 = state & !(1u64 << j);
    if i != j && s1 >> i & 1 == 1 {
        return None;
    }
    let below = |s: u64, k: usize| (s & ((1u64 << k) - 1)).count_ones();
    let n = below(state, j) + below(s1, i);
    Some((s1 | 1u64 << i, if n % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Eigenvalues of one particle-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpectrum {
    pub n_up: u32,
    pub n_dn: u32,
    /// How many sectors share this spectrum (spin flip and hole-particle images).
    pub multiplicity: u32,
    /// Particle number averaged over the sectors sharing this spectrum.
    pub mean_particles: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub l: usize,
    pub u: f64,
    pub sectors: Vec<SectorSpectrum>,
}

impl SpectralData {
    pub fn n_cells(&self) -> usize {
        self.l * self.l
    }

    /// Total number of states counted with multiplicity.
    pub fn dimension(&self) -> usize {
        self.sectors.iter().map(|s| s.multiplicity as usize * s.eigenvalues.len()).sum()
    }

    fn weighted(&self, beta: f64) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        self.sectors.iter().flat_map(move |s| {
            let lm = (s.multiplicity as f64).ln();
            let n = s.mean_particles;
            s.eigenvalues.iter().map(move |&e| (-beta * e + lm, n))
        })
    }

    /// `f = -(beta |Lambda|)^{-1} log Tr e^{-beta H}`.
    pub fn free_energy(&self, beta: f64) -> f64 {
        -log_sum_exp(self.weighted(beta).map(|(x, _)| x)) / (beta * self.n_cells() as f64)
    }

    /// `<N> / (2 |Lambda|)`.
    pub fn density(&self, beta: f64) -> f64 {
        let lz = log_sum_exp(self.weighted(beta).map(|(x, _)| x));
        let num: f64 = self.weighted(beta).map(|(x, n)| n * (x - lz).exp()).sum();
        num / (2.0 * self.n_cells() as f64)
    }

    pub fn ground_energy(&self) -> f64 {
        self.sectors.iter().flat_map(|s| s.eigenvalues.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    /// Sorted spectrum of sector `(a, b)` if it was computed explicitly.
    pub fn sector(&self, a: u32, b: u32) -> Option<&SectorSpectrum> {
        self.sectors.iter().find(|s| s.n_up == a && s.n_dn == b)
    }
}

/// Sector spectrum via translation blocks.
pub fn sector_spectrum(geom: &HoneycombGeometry, u: f64, n_up: u32, n_dn: u32) -> Result<Vec<f64>> {
    let fock = FockSpace::new(geom.l())?;
    let l = fock.l;
    let states = fock.sector_states(n_up, n_dn);
    if states.is_empty() {
        return Ok(Vec::new());
    }
    let group: Vec<(usize, usize)> = (0..l).flat_map(|a| (0..l).map(move |b| (a, b))).collect();
    let perms: Vec<Vec<usize>> = group.iter().map(|&g| fock.translation(g)).collect();
    let index: BTreeMap<u64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // Representative (smallest image), group element and sign for every state.
    let mut rep_of = vec![(0usize, 0usize, 0.0f64); states.len()];
    let mut reps = Vec::new();
    let mut rep_index = BTreeMap::new();
    for (i, &s) in states.iter().enumerate() {
        let (mut best, mut bg, mut bs) = (u64::MAX, 0, 0.0);
        for (gi, p) in perms.iter().enumerate() {
            let (img, sign) = permute_state(s, p);
            if img < best {
                best = img;
                bg = gi;
                bs = sign;
            }
        }
        let r = *rep_index.entry(best).or_insert_with(|| {
            reps.push(best);
            reps.len() - 1
        });
        rep_of[i] = (r, bg, bs);
    }
    let hopping = hopping_matrix(geom);
    let bonds: Vec<(usize, usize, f64)> = (0..fock.n_orbitals)
        .flat_map(|i| (0..fock.n_orbitals).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && hopping[i][j] != 0.0)
        .map(|(i, j)| (i, j, hopping[i][j]))
        .collect();
    let interaction = |s: u64| -> f64 {
        let mut e = 0.0;
        for c in 0..l * l {
            for rho in 0..2 {
                let nu = (s >> orbital(c, rho, 0) & 1) as f64;
                let nd = (s >> orbital(c, rho, 1) & 1) as f64;
                e += (nu - 0.5) * (nd - 0.5);
            }
        }
        u * e
    };
    let character = |q: (usize, usize), g: (usize, usize)| -> f64 {
        // Real characters for L <= 2.
        if (q.0 * g.0 + q.1 * g.1) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut all = Vec::with_capacity(states.len());
    for &q in &group {
        // Valid representatives and their norms N_r^2 = |Stab| / |G|.
        let mut block_of = vec![usize::MAX; reps.len()];
        let mut norms = Vec::new();
        let mut members = Vec::new();
        for (ri, &r) in reps.iter().enumerate() {
            let mut stab = 0usize;
            let mut acc = 0.0;
            for (gi, p) in perms.iter().enumerate() {
                let (img, sign) = permute_state(r, p);
                if img == r {
                    stab += 1;
                    acc += sign * character(q, group[gi]);
                }
            }
            if acc.abs() > 0.5 {
                block_of[ri] = members.len();
                members.push(r);
                norms.push((stab as f64 / group.len() as f64).sqrt());
            }
        }
        let n = members.len();
        if n == 0 {
            continue;
        }
        let mut m = vec![0.0; n * n];
        for (a, &r) in members.iter().enumerate() {
            m[a * n + a] += interaction(r);
            for &(i, j, amp) in &bonds {
                if let Some((s, sign)) = hop(r, i, j) {
                    let (rp, gi, gs) = rep_of[index[&s]];
                    let b = block_of[rp];
                    if b != usize::MAX {
                        m[b * n + a] += amp * sign * gs * character(q, group[gi]) * norms[b] / norms[a];
                    }
                }
            }
        }
        all.extend(eigvalsh(&mut m, n)?);
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// Full spectrum at coupling `u`. With `reduce`, sectors related by spin flip or
/// hole-particle exchange are computed once and weighted by multiplicity.
pub fn diagonalize(geom: &HoneycombGeometry, u: f64, reduce: bool) -> Result<SpectralData> {
    let fock = FockSpace::new(geom.l())?;
    let half = (fock.n_orbitals / 2) as u32;
    let mut sectors = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for a in 0..=half {
        for b in 0..=half {
            if seen.contains(&(a, b)) {
                continue;
            }
            let orbit: std::collections::BTreeSet<(u32, u32)> = if reduce {
                [(a, b), (b, a), (half - a, half - b), (half - b, half - a)].into_iter().collect()
            } else {
                [(a, b)].into_iter().collect()
            };
            seen.extend(orbit.iter().copied());
            sectors.push(SectorSpectrum {
                n_up: a,
                n_dn: b,
                multiplicity: orbit.len() as u32,
                mean_particles: orbit.iter().map(|&(x, y)| (x + y) as f64).sum::<f64>() / orbit.len() as f64,
                eigenvalues: sector_spectrum(geom, u, a, b)?,
            });
        }
    }
    Ok(SpectralData { l: geom.l(), u, sectors })
}

/// Ground-state energy of the free model from the single-particle spectrum:
/// twice (spin) the sum of the negative hopping eigenvalues.
pub fn diagonalize_free(geom: &HoneycombGeometry) -> Result<f64> {
    let h = hopping_matrix(geom);
    // One spin species: orbitals with spin 0.
    let idx: Vec<usize> = (0..h.len()).filter(|o| o % 2 == 0).collect();
    let n = idx.len();
    let mut m = vec![0.0; n * n];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m[a * n + b] = h[i][j];
        }
    }
    let w = eigvalsh(&mut m, n)?;
    Ok(2.0 * w.iter().filter(|&&e| e < 0.0).sum::<f64>())
}

/// Free energy per cell at coupling `u`.
pub fn free_energy_at(geom: &HoneycombGeometry, beta: f64, u: f64) -> Result<f64> {
    Ok(diagonalize(geom, u, true)?.free_energy(beta))
}

/// Taylor coefficients of `f_beta(U)` at `U = 0` up to `max_order <= 2`, by
/// Richardson-extrapolated central differences over `{+-u, +-2u}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeCoefficients {
    pub coefficients: Vec<f64>,
    pub step: f64,
    /// Largest relative spread across the plateau steps `{u, 2u, 4u}`.
    pub plateau_spread: f64,
}

pub fn perturbative_coefficients(geom: &HoneycombGeometry, beta: f64, max_order: usize, step: f64) -> Result<PerturbativeCoefficients> {
    if max_order > 2 {
        return Err(CrgError::InvalidArgument("orders above 2 are not supported".into()));
    }
    let f = |u: f64| free_energy_at(geom, beta, u);
    let f0 = f(0.0)?;
    let estimate = |h: f64| -> Result<(f64, f64)> {
        let (p1, m1, p2, m2) = (f(h)?, f(-h)?, f(2.0 * h)?, f(-2.0 * h)?);
        let d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
        Ok((d1, d2 / 2.0))
    };
    let runs: Vec<(f64, f64)> = [step, 2.0 * step, 4.0 * step].iter().map(|&h| estimate(h)).collect::<Result<_>>()?;
    let spread = |sel: fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = runs.iter().map(sel).collect();
        // Coefficients that vanish identically are pure rounding noise; measure them
        // against the size of f itself.
        let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-9 * (1.0 + f0.abs()));
        v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max) / scale
    };
    let plateau_spread = spread(|r| r.0).max(spread(|r| r.1));
    if plateau_spread > 1e-4 {
        return Err(CrgError::DifferentiationUnstable);
    }
    let mut coefficients = vec![f0];
    if max_order >= 1 {
        coefficients.push(runs[0].0);
    }
    if max_order >= 2 {
        coefficients.push(runs[0].1);
    }
    Ok(PerturbativeCoefficients { coefficients, step, plateau_spread })
}

/// Function of the 2x2 hermitian matrix `H_k = -v0 [[0, Omega*], [Omega, 0]]`.
fn band_function(v0: f64, omega: Complex64, f: impl Fn(f64) -> f64) -> Mat2 {
    let a = v0 * omega.norm();
    let one = Mat2::identity();
    if a < 1e-14 {
        return one * Complex64::new(f(0.0), 0.0);
    }
    let z = Complex64::default();
    let h = Mat2::new(z, -v0 * omega.conj(), -v0 * omega, z);
    // Projectors on the eigenvalues -a and +a.
    let p_minus = (one * Complex64::new(a, 0.0) - h) / Complex64::new(2.0 * a, 0.0);
    let p_plus = (h + one * Complex64::new(a, 0.0)) / Complex64::new(2.0 * a, 0.0);
    p_minus * Complex64::new(f(-a), 0.0) + p_plus * Complex64::new(f(a), 0.0)
}

/// Free time-ordered two-point function `<T psi^-_x psi^+_0>` from the band formulas,
/// for `x0` in `(-beta, beta)`; at `x0 = 0` it returns the `0^-` limit.
pub fn free_schwinger_2pt(geom: &HoneycombGeometry, beta: f64, x: Spacetime) -> Mat2 {
    let tau = x.x0;
    let mut acc = Mat2::zeros();
    for kp in geom.momenta() {
        let om = crate::honeycomb::dispersion(kp.cartesian);
        let m = if tau > 0.0 {
            band_function(geom.v0(), om, |e| (-tau * e).exp() / (1.0 + (-beta * e).exp()))
        } else {
            band_function(geom.v0(), om, |e| -(-tau * e).exp() / (1.0 + (beta * e).exp()))
        };
        acc += m * crate::propagators::spatial_phase(geom.l(), kp.m1, kp.m2, x.n);
    }
    acc / Complex64::new(geom.n_cells() as f64, 0.0)
}

/// Free two-point function at `x = (x0, 0)` on `L = 1` by a many-body thermal trace,
/// `Tr[e^{-beta H} e^{x0 H} c_r e^{-x0 H} c+_r'] / Z` (time-ordered, spin up).
pub fn thermal_schwinger_l1(beta: f64, t: f64, x0: f64) -> Mat2 {
    let dim = 16usize;
    let geom = HoneycombGeometry::with_hopping(1, t).expect("valid hopping");
    let hop_m = hopping_matrix(&geom);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim as u64 {
        for i in 0..4 {
            for j in 0..4 {
                if i != j && hop_m[i][j] != 0.0 {
                    if let Some((s2, sign)) = hop(s, i, j) {
                        h[(s2 as usize, s as usize)] += hop_m[i][j] * sign;
                    }
                }
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let evol = |tau: f64| {
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-tau * e).exp()));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let annihilate = |o: usize| {
        let mut c = DMatrix::<f64>::zeros(dim, dim);
        for s in 0..dim as u64 {
            if let Some((s2, sign)) = hop_annihilate(s, o) {
                c[(s2 as usize, s as usize)] = sign;
            }
        }
        c
    };
    let rho = evol(beta);
    let z = rho.trace();
    let mut out = Mat2::zeros();
    for r in 0..2 {
        for rp in 0..2 {
            let (c, cd) = (annihilate(orbital(0, r, 0)), annihilate(orbital(0, rp, 0)).transpose());
            let val = if x0 > 0.0 {
                (&rho * evol(-x0) * &c * evol(x0) * &cd).trace()
            } else {
                -(&rho * &cd * evol(-x0) * &c * evol(x0)).trace()
            };
            out[(r, rp)] = Complex64::new(val / z, 0.0);
        }
    }
    out
}

fn hop_annihilate(state: u64, o: usize) -> Option<(u64, f64)> {
    if state >> o & 1 == 0 {
        return None;
    }
    let n = (state & ((1u64 << o) - 1)).count_ones();
    Some((state & !(1u64 << o), if n % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Largest mismatch between the spectra of sectors `(a, b)` and `(n-a, n-b)`.
pub fn hole_particle_residual(geom: &HoneycombGeometry, u: f64, pairs: &[(u32, u32)]) -> Result<f64> {
    let half = 2 * geom.n_cells() as u32;
    let mut worst = 0.0_f64;
    for &(a, b) in pairs {
        let s1 = sector_spectrum(geom, u, a, b)?;
        let s2 = sector_spectrum(geom, u, half - a, half - b)?;
        if s1.len() != s2.len() {
            return Ok(f64::INFINITY);
        }
        for (x, y) in s1.iter().zip(&s2) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Momentum of a point, exposed for reports.
pub fn cartesian(geom: &HoneycombGeometry, m1: usize, m2: usize) -> Vec2 {
    geom.momentum(m1, m2).cartesian
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::honeycomb::HoneycombGeometry;

    #[test]
    fn hop_signs() {
        // c+_0 c_2 on |1,2> (orbitals 1 and 2 occupied): one fermion (orbital 1) between.
        assert_eq!(hop(0b110, 0, 2), Some((0b011, -1.0)));
        assert_eq!(hop(0b100, 0, 2), Some((0b001, 1.0)));
        assert_eq!(hop(0b001, 0, 2), None);
    }

    #[test]
    fn sector_dimensions_sum() {
        let g = HoneycombGeometry::new(1).unwrap();
        let spec = diagonalize(&g, 0.7, false).unwrap();
        assert_eq!(spec.dimension(), 16);
        let red = diagonalize(&g, 0.7, true).unwrap();
        assert_eq!(red.dimension(), 16);
        assert!((spec.free_energy(1.3) - red.free_energy(1.3)).abs() < 1e-13);
    }

    #[test]
    fn l1_matches_dense_trace() {
        let g = HoneycombGeometry::new(1).unwrap();
        let u = 0.9;
        let mut h = DMatrix::<f64>::zeros(16, 16);
        let hm = hopping_matrix(&g);
        for s in 0..16u64 {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j && hm[i][j] != 0.0 {
                        if let Some((s2, sign)) = hop(s, i, j) {
                            h[(s2 as usize, s as usize)] += hm[i][j] * sign;
                        }
                    }
                }
            }
            let nu = |o: usize| (s >> o & 1) as f64;
            h[(s as usize, s as usize)] += u * ((nu(0) - 0.5) * (nu(1) - 0.5) + (nu(2) - 0.5) * (nu(3) - 0.5));
        }
        let beta = 2.0;
        let z: f64 = SymmetricEigen::new(h).eigenvalues.iter().map(|e| (-beta * e).exp()).sum();
        let f = diagonalize(&g, u, false).unwrap().free_energy(beta);
        assert!((f + z.ln() / beta).abs() < 1e-13);
    }

    #[test]
    fn free_l2_spectrum_matches_band_sums() {
        let g = HoneycombGeometry::new(2).unwrap();
        let spec = diagonalize(&g, 0.0, true).unwrap();
        assert_eq!(spec.dimension(), 1 << 16);
        for beta in [1.0, 5.0] {
            let f = spec.free_energy(beta);
            let want = g.free_specific_free_energy(beta).unwrap();
            assert!((f - want).abs() <= 1e-10 * want.abs());
        }
        let e0 = diagonalize_free(&g).unwrap();
        assert!((e0 / 4.0 - g.free_specific_energy()).abs() < 1e-12);
        assert!((spec.ground_energy() - e0).abs() < 1e-10);
    }

    #[test]
    fn half_filling_and_hole_particle() {
        let g = HoneycombGeometry::new(1).unwrap();
        let spec = diagonalize(&g, 1.7, false).unwrap();
        let reduced = diagonalize(&g, 1.7, true).unwrap();
        for beta in [0.5, 3.0] {
            assert!((spec.density(beta) - 1.0).abs() < 1e-12);
            assert!((reduced.density(beta) - 1.0).abs() < 1e-12);
        }
        assert!(hole_particle_residual(&g, 1.7, &[(0, 1), (1, 1), (2, 0)]).unwrap() < 1e-12);
        let g2 = HoneycombGeometry::new(2).unwrap();
        assert!(hole_particle_residual(&g2, 1.1, &[(1, 2), (3, 2)]).unwrap() < 1e-11);
    }

    #[test]
    fn lattice_cap() {
        let g = HoneycombGeometry::new(3).unwrap();
        assert_eq!(diagonalize(&g, 0.0, true), Err(CrgError::LatticeTooLarge { l: 3, cap: 2 }));
    }

    #[test]
    fn schwinger_band_vs_thermal_trace() {
        let g = HoneycombGeometry::new(1).unwrap();
        let beta = 1.7;
        for &x0 in &[0.3, 1.1, -0.4, -1.6] {
            let a = free_schwinger_2pt(&g, beta, Spacetime::new(x0, 0, 0));
            let b = thermal_schwinger_l1(beta, 1.0, x0);
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn schwinger_antiperiodic_and_jump() {
        let g = HoneycombGeometry::new(2).unwrap();
        let beta = 2.0;
        let a = free_schwinger_2pt(&g, beta, Spacetime::new(0.5, 1, 0));
        let b = free_schwinger_2pt(&g, beta, Spacetime::new(0.5 - beta, 1, 0));
        assert!((a + b).norm() < 1e-13);
        let up = free_schwinger_2pt(&g, beta, Spacetime::new(1e-12, 0, 0));
        let dn = free_schwinger_2pt(&g, beta, Spacetime::new(0.0, 0, 0));
        let jump = up - dn;
        assert!((jump - Mat2::identity()).norm() < 1e-9);
        let far = free_schwinger_2pt(&g, beta, Spacetime::new(1e-12, 1, 1)) - free_schwinger_2pt(&g, beta, Spacetime::new(0.0, 1, 1));
        assert!(far.norm() < 1e-9);
    }
}
