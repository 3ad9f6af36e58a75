//! Honeycomb lattice geometry, momentum grids, the complex dispersion and
//! the free (U = 0) thermodynamics.
//!
//! Lengths are in units of the nearest-neighbour distance. Fields live on
//! the A-sublattice cells `x = n1 l1 + n2 l2`; the B site of cell `x` sits at
//! `x + d1`. Momentum phases therefore only ever see cell coordinates.

use crate::error::{CrgError, Result};
use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

pub type Vec2 = [f64; 2];

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Below this modulus the band basis is considered undefined.
pub const DEGENERACY_TOL: f64 = 1e-12;

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// `Omega(k) = (2/3) [1 + 2 e^{-i (3/2) k1} cos((sqrt3/2) k2)]`.
pub fn dispersion(k: Vec2) -> Complex64 {
    let phase = Complex64::from_polar(1.0, -1.5 * k[0]);
    (2.0 / 3.0) * (1.0 + 2.0 * phase * (0.5 * SQRT3 * k[1]).cos())
}

/// `log(2 + 2 cosh x)` without overflow.
pub fn log_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + 2.0 * (-a).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumPoint {
    pub m1: usize,
    pub m2: usize,
    pub cartesian: Vec2,
}

/// Band data at a momentum away from the Fermi points.
#[derive(Debug, Clone, PartialEq)]
pub struct BandData {
    pub omega: Complex64,
    /// `(-v0 |Omega|, +v0 |Omega|)`: the filled band first.
    pub energies: (f64, f64),
    /// `U_k`, with `U_k H_k U_k^dagger = diag(energies)`.
    pub unitary: Matrix2<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoneycombGeometry {
    l: usize,
    t: f64,
    v0: f64,
    pub l1: Vec2,
    pub l2: Vec2,
    pub d: [Vec2; 3],
    pub g1: Vec2,
    pub g2: Vec2,
}

impl HoneycombGeometry {
    pub fn new(l: usize) -> Result<Self> {
        Self::with_hopping(l, 1.0)
    }

    pub fn with_hopping(l: usize, t: f64) -> Result<Self> {
        if l == 0 {
            return Err(CrgError::InvalidArgument("lattice size L must be >= 1".into()));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(CrgError::InvalidArgument(format!("hopping t must be positive, got {t}")));
        }
        let c = 2.0 * PI / 3.0;
        Ok(Self {
            l,
            t,
            v0: 1.5 * t,
            l1: [1.5, 0.5 * SQRT3],
            l2: [1.5, -0.5 * SQRT3],
            d: [[1.0, 0.0], [-0.5, 0.5 * SQRT3], [-0.5, -0.5 * SQRT3]],
            g1: [c, c * SQRT3],
            g2: [c, -c * SQRT3],
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn hopping(&self) -> f64 {
        self.t
    }

    /// Fermi velocity `v0 = 3t/2`.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// `|Lambda| = L^2`.
    pub fn n_cells(&self) -> usize {
        self.l * self.l
    }

    /// Area of the Brillouin zone, `8 pi^2 / (3 sqrt3)`.
    pub fn bz_area(&self) -> f64 {
        (self.g1[0] * self.g2[1] - self.g1[1] * self.g2[0]).abs()
    }

    pub fn momentum(&self, m1: usize, m2: usize) -> MomentumPoint {
        let (a, b) = (m1 as f64 / self.l as f64, m2 as f64 / self.l as f64);
        MomentumPoint {
            m1,
            m2,
            cartesian: [a * self.g1[0] + b * self.g2[0], a * self.g1[1] + b * self.g2[1]],
        }
    }

    /// The grid `B_L`, ordered by `m1 * L + m2`.
    pub fn momenta(&self) -> Vec<MomentumPoint> {
        let mut out = Vec::with_capacity(self.n_cells());
        for m1 in 0..self.l {
            for m2 in 0..self.l {
                out.push(self.momentum(m1, m2));
            }
        }
        out
    }

    /// Cartesian position of cell `(n1, n2)`.
    pub fn cell_position(&self, n1: i64, n2: i64) -> Vec2 {
        let (a, b) = (n1 as f64, n2 as f64);
        [a * self.l1[0] + b * self.l2[0], a * self.l1[1] + b * self.l2[1]]
    }

    /// Fractional coordinates of `k` with respect to `(G1, G2)`, reduced to `[0,1)^2`
    /// with 1e-9 snapping.
    pub fn reduce(&self, k: Vec2) -> Vec2 {
        // G_i . l_j = 2 pi delta_ij, so the coordinates are k . l_j / 2 pi.
        let mut c = [dot(k, self.l1) / (2.0 * PI), dot(k, self.l2) / (2.0 * PI)];
        for x in c.iter_mut() {
            *x -= x.floor();
            if *x > 1.0 - 1e-9 || *x < 1e-9 {
                *x = 0.0;
            }
        }
        c
    }

    pub fn congruent(&self, a: Vec2, b: Vec2) -> bool {
        let (ra, rb) = (self.reduce(a), self.reduce(b));
        let diff = |x: f64, y: f64| {
            let d = (x - y).abs();
            d.min(1.0 - d)
        };
        diff(ra[0], rb[0]) < 1e-9 && diff(ra[1], rb[1]) < 1e-9
    }

    /// Grid indices of `k` if it lies on `B_L`.
    pub fn grid_index(&self, k: Vec2) -> Result<(usize, usize)> {
        let r = self.reduce(k);
        let lf = self.l as f64;
        let (a, b) = (r[0] * lf, r[1] * lf);
        let (ia, ib) = (a.round(), b.round());
        if (a - ia).abs() > 1e-7 || (b - ib).abs() > 1e-7 {
            return Err(CrgError::MomentumNotOnGrid);
        }
        Ok((ia as usize % self.l, ib as usize % self.l))
    }

    /// Minimal-image distance from `k` to `p` modulo the reciprocal lattice.
    pub fn torus_distance(&self, k: Vec2, p: Vec2) -> f64 {
        self.minimal_image([k[0] - p[0], k[1] - p[1]]).1
    }

    /// Shortest representative of `q` modulo the reciprocal lattice, and its length.
    pub fn minimal_image(&self, q: Vec2) -> (Vec2, f64) {
        let r = self.reduce(q);
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for a in -1..=1 {
            for b in -1..=1 {
                let (x, y) = (r[0] + a as f64, r[1] + b as f64);
                let v = [x * self.g1[0] + y * self.g2[0], x * self.g1[1] + y * self.g2[1]];
                let n = norm(v);
                if n < best.1 {
                    best = (v, n);
                }
            }
        }
        best
    }

    pub fn dispersion(&self, k: &MomentumPoint) -> Complex64 {
        dispersion(k.cartesian)
    }

    /// Hopping block `H_k = -v0 [[0, Omega*], [Omega, 0]]`.
    pub fn hopping_block(&self, k: Vec2) -> Matrix2<Complex64> {
        let w = dispersion(k);
        let z = Complex64::new(0.0, 0.0);
        Matrix2::new(z, -self.v0 * w.conj(), -self.v0 * w, z)
    }

    pub fn band_transform(&self, k: Vec2) -> Result<BandData> {
        let w = dispersion(k);
        let a = w.norm();
        if a < DEGENERACY_TOL {
            return Err(CrgError::DegenerateFermiPoint(k[0], k[1]));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ph = w / a;
        let unitary = Matrix2::new(
            Complex64::new(s, 0.0),
            s * ph.conj(),
            -s * ph,
            Complex64::new(s, 0.0),
        );
        Ok(BandData { omega: w, energies: (-self.v0 * a, self.v0 * a), unitary })
    }

    /// Ground-state energy per cell of the free model on the finite lattice.
    pub fn free_specific_energy(&self) -> f64 {
        let s: f64 = self.momenta().iter().map(|k| self.dispersion(k).norm()).sum();
        -2.0 * self.v0 * s / self.n_cells() as f64
    }

    /// Free energy per cell of the free model on the finite lattice.
    pub fn free_specific_free_energy(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let s: f64 = self
            .momenta()
            .iter()
            .map(|k| log_two_cosh(beta * self.v0 * self.dispersion(k).norm()))
            .sum();
        Ok(-2.0 * s / (beta * self.n_cells() as f64))
    }

    /// Thermodynamic-limit ground-state energy per cell, by an `n x n` midpoint
    /// rule over the Brillouin-zone parallelogram.
    pub fn free_specific_energy_tl(&self, n: usize) -> f64 {
        -2.0 * self.v0 * self.bz_average(n, |w| w)
    }

    /// Thermodynamic-limit free energy per cell.
    pub fn free_specific_free_energy_tl(&self, beta: f64, n: usize) -> Result<f64> {
        check_beta(beta)?;
        let v0 = self.v0;
        Ok(-2.0 / beta * self.bz_average(n, |w| log_two_cosh(beta * v0 * w)))
    }

    /// `(1/|B|) int_B f(|Omega|)`, midpoint rule on an n x n grid.
    fn bz_average(&self, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let n = n.max(1);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                let k = [a * self.g1[0] + b * self.g2[0], a * self.g1[1] + b * self.g2[1]];
                s += f(dispersion(k).norm());
            }
        }
        s / (n * n) as f64
    }

    /// Smallest and largest `v0 |Omega|` over the grid.
    pub fn band_minmax(&self) -> (f64, f64) {
        self.momenta().iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), k| {
            let e = self.v0 * self.dispersion(k).norm();
            (lo.min(e), hi.max(e))
        })
    }
}

pub fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(CrgError::InvalidArgument(format!("beta must be positive, got {beta}")))
    }
}

/// `p_F^+` and `p_F^-`, in that order.
pub fn fermi_points() -> [Vec2; 2] {
    let a = 2.0 * PI / 3.0;
    let b = 2.0 * PI / (3.0 * SQRT3);
    [[a, b], [a, -b]]
}

/// Valley sign: `+1` for `p_F^+`, `-1` for `p_F^-`.
pub fn valley_sign(omega: usize) -> f64 {
    if omega == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Linearization residual `|Omega(p_F + k') - (i k1' + omega k2')|`.
pub fn linearization_residual(omega: usize, kp: Vec2) -> f64 {
    let p = fermi_points()[omega];
    let w = dispersion([p[0] + kp[0], p[1] + kp[1]]);
    (w - Complex64::new(kp[1] * valley_sign(omega), kp[0])).norm()
}

/// Least-squares slope of `y` against `x`, plus the coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lattice_vectors() {
        let g = HoneycombGeometry::new(3).unwrap();
        for d in g.d {
            assert!(close(norm(d), 1.0, 1e-15));
        }
        for (i, gi) in [g.g1, g.g2].iter().enumerate() {
            for (j, lj) in [g.l1, g.l2].iter().enumerate() {
                let want = if i == j { 2.0 * PI } else { 0.0 };
                assert!(close(dot(*gi, *lj), want, 1e-12));
            }
        }
        assert!(close(norm(g.l1), SQRT3, 1e-15));
        // B-site offsets: d2 - d1 = -l2 and d3 - d1 = -l1.
        assert!(close(g.d[1][0] - g.d[0][0], -g.l2[0], 1e-15));
        assert!(close(g.d[2][1] - g.d[0][1], -g.l1[1], 1e-15));
    }

    #[test]
    fn momenta_distinct_and_on_grid() {
        let g = HoneycombGeometry::new(4).unwrap();
        let ks = g.momenta();
        for (i, a) in ks.iter().enumerate() {
            assert_eq!(g.grid_index(a.cartesian).unwrap(), (a.m1, a.m2));
            for b in &ks[i + 1..] {
                assert!(!g.congruent(a.cartesian, b.cartesian));
            }
        }
    }

    #[test]
    fn dispersion_values() {
        let w = dispersion([0.0, 0.0]);
        assert!(close(w.re, 2.0, 1e-15) && w.im == 0.0);
        for p in fermi_points() {
            assert!(dispersion(p).norm() < 1e-12);
        }
    }

    #[test]
    fn slope_near_minus_point() {
        let p = fermi_points()[1];
        let eps = 1e-6;
        let w = dispersion([p[0] + eps, p[1]]);
        assert!(close(w.re / eps, 0.0, 1e-5));
        assert!(close(w.im / eps, 1.0, 1e-5));
    }

    #[test]
    fn fermi_points_inequivalent() {
        let g = HoneycombGeometry::new(3).unwrap();
        let [a, b] = fermi_points();
        assert!(!g.congruent(a, b));
        assert!(g.congruent(a, [a[0] + g.g1[0], a[1] + g.g1[1]]));
        // On L = 3 both points are grid momenta.
        assert!(g.grid_index(a).is_ok() && g.grid_index(b).is_ok());
        assert_eq!(HoneycombGeometry::new(2).unwrap().grid_index(a), Err(CrgError::MomentumNotOnGrid));
    }

    #[test]
    fn band_transform_origin() {
        let g = HoneycombGeometry::new(1).unwrap();
        let b = g.band_transform([0.0, 0.0]).unwrap();
        assert!(close(b.energies.0, -3.0, 1e-14) && close(b.energies.1, 3.0, 1e-14));
        let d = b.unitary * g.hopping_block([0.0, 0.0]) * b.unitary.adjoint();
        assert!(close(d[(0, 0)].re, -3.0, 1e-14) && d[(0, 1)].norm() < 1e-14);
        assert!(matches!(
            g.band_transform(fermi_points()[0]),
            Err(CrgError::DegenerateFermiPoint(..))
        ));
    }

    #[test]
    fn bz_area_constant() {
        let g = HoneycombGeometry::new(1).unwrap();
        assert!(close(g.bz_area(), 8.0 * PI * PI / (3.0 * SQRT3), 1e-12));
    }

    #[test]
    fn free_energy_low_temperature_limit() {
        let g = HoneycombGeometry::new(2).unwrap();
        let e0 = g.free_specific_energy();
        let beta = 40.0;
        let f = g.free_specific_free_energy(beta).unwrap();
        let (emin, _) = g.band_minmax();
        // Each of the 2|Lambda| modes contributes at most 2 e^{-beta E}/beta per cell.
        let bound = 4.0 * (-beta * emin).exp() / beta;
        assert!(f <= e0 && e0 - f <= bound + 1e-15);
    }

    #[test]
    fn log_two_cosh_stable() {
        assert!(close(log_two_cosh(0.0), 4f64.ln(), 1e-15));
        assert!(close(log_two_cosh(1000.0), 1000.0, 1e-12));
        assert!(close(log_two_cosh(-3.0), (2.0 + 2.0 * 3f64.cosh()).ln(), 1e-14));
    }
}
