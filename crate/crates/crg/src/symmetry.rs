//! The discrete and continuous symmetries of the free measure and of the
//! interaction, checked as exact identities of finite momentum sums, and the
//! structural consequences for two-legged kernels.
//!
//! The invariance of the Gaussian measure is the invariance of
//!
//! `(*)  = sum_{k, tau} psi+_{k tau} [[i k0, v0 Omega*], [v0 Omega, i k0]] psi-_{k tau}`,
//!
//! and that of the interaction is the invariance of
//!
//! `(**) = sum_rho sum_{k1 - k2 + k3 - k4 = 0} psi+_{k1 up rho} psi-_{k2 up rho} psi+_{k3 dn rho} psi-_{k4 dn rho}`,
//!
//! with frequencies restricted to a symmetric Matsubara set and momenta to `B_L`.
//!
//! The rotation acts on `psi-_k` with `e^{-i k.(d3 - d1) sigma3 / 2}`; on the grid we
//! multiply it by the global phase `e^{i k.(d3 - d1) / 2}`, which turns it into
//! `diag(1, e^{i k.(d3 - d1)})`. Because `d3 - d1` is a lattice vector the result is
//! periodic in `k`, so it is well defined on grid labels; the extra phase is linear in
//! `k` and therefore drops out of every momentum-conserving monomial.

use crate::error::{CrgError, Result};
use crate::grassmann::Eps;
use crate::honeycomb::{dispersion, fermi_points, HoneycombGeometry, Vec2, SQRT3};
use crate::kernel::KernelTable;
use crate::momentum_poly::{MGen, MomentumPoly};
use crate::propagators::Mat2;
use num_complex::Complex64;
use std::collections::HashMap;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `d3 - d1`.
pub const D31: Vec2 = [-1.5, -SQRT3 / 2.0];
/// `d1 - d2`.
pub const D12: Vec2 = [1.5, -SQRT3 / 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetryOp {
    SpinFlip,
    GlobalU1 { alpha: [f64; 2] },
    SpinSo2 { theta: f64 },
    Rotation,
    ComplexConjugation,
    HorizontalReflection,
    VerticalReflection,
    ParticleHole,
    Inversion,
}

pub fn pauli() -> [Mat2; 3] {
    [
        Mat2::new(ZERO, ONE, ONE, ZERO),
        Mat2::new(ZERO, -I, I, ZERO),
        Mat2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// `n_alpha = (1 + alpha sigma3) / 2`.
pub fn n_alpha(alpha: i32) -> Mat2 {
    (Mat2::identity() + pauli()[2] * Complex64::new(alpha as f64, 0.0)) * Complex64::new(0.5, 0.0)
}

/// `sigma1 n_alpha sigma1 = n_{-alpha}` and `sigma3 n_alpha sigma3 = n_alpha`, checked for both signs.
pub fn pauli_identities_hold() -> bool {
    let [s1, _, s3] = pauli();
    [1, -1].iter().all(|&a| s1 * n_alpha(a) * s1 == n_alpha(-a) && s3 * n_alpha(a) * s3 == n_alpha(a))
}

/// Counterclockwise rotation by `2 pi / 3`, the matrix `e^{-i (2 pi / 3) sigma2}`.
pub fn rotate(k: Vec2) -> Vec2 {
    let (c, s) = (-0.5, SQRT3 / 2.0);
    [c * k[0] - s * k[1], s * k[0] + c * k[1]]
}

/// Clockwise rotation by `2 pi / 3`, the matrix `e^{+i (2 pi / 3) sigma2}`.
pub fn rotate_back(k: Vec2) -> Vec2 {
    let (c, s) = (-0.5, SQRT3 / 2.0);
    [c * k[0] + s * k[1], -s * k[0] + c * k[1]]
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Largest `|Omega(k) e^{-ik.(d3 - d1)} - Omega(R k)|` over the points.
pub fn omega_rotation_residual(points: &[Vec2]) -> f64 {
    points
        .iter()
        .map(|&k| (dispersion(k) * Complex64::from_polar(1.0, -dot(k, D31)) - dispersion(rotate(k))).norm())
        .fold(0.0, f64::max)
}

fn max_over(points: &[Vec2], f: impl Fn(Vec2) -> f64) -> f64 {
    points.iter().map(|&k| f(k)).fold(0.0, f64::max)
}

/// Largest `|Omega*(k) - Omega(-k1, k2)|`: the identity behind the horizontal reflection.
pub fn omega_h_reflection_residual(points: &[Vec2]) -> f64 {
    max_over(points, |k| (dispersion(k).conj() - dispersion([-k[0], k[1]])).norm())
}

/// Largest `|Omega(k) - Omega(k1, -k2)|`: the identity behind the vertical reflection.
pub fn omega_v_reflection_residual(points: &[Vec2]) -> f64 {
    max_over(points, |k| (dispersion(k) - dispersion([k[0], -k[1]])).norm())
}

/// Largest `|Omega*(k) - Omega(k1, -k2)|`. This conjugated variant is *not* an identity
/// (it fails wherever `Omega` is not real); it is reported so the distinction stays visible.
pub fn omega_conjugate_v_reflection_residual(points: &[Vec2]) -> f64 {
    max_over(points, |k| (dispersion(k).conj() - dispersion([k[0], -k[1]])).norm())
}

/// Brute-force orbit check: does the rotation map every grid momentum onto the grid?
pub fn rotation_maps_grid(geom: &HoneycombGeometry) -> bool {
    geom.momenta().iter().all(|p| geom.grid_index(rotate(p.cartesian)).is_ok())
}

fn require_rotation_grid(geom: &HoneycombGeometry) -> Result<()> {
    if geom.l() % 3 != 0 {
        return Err(CrgError::InvalidArgument(format!("rotation checks need L divisible by 3, got L = {}", geom.l())));
    }
    Ok(())
}

impl SymmetryOp {
    /// The nine generators with the given continuous parameters.
    pub fn all(alpha: [f64; 2], theta: f64) -> Vec<Self> {
        use SymmetryOp::*;
        vec![
            SpinFlip,
            GlobalU1 { alpha },
            SpinSo2 { theta },
            Rotation,
            ComplexConjugation,
            HorizontalReflection,
            VerticalReflection,
            ParticleHole,
            Inversion,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SpinFlip => "spin-flip",
            Self::GlobalU1 { .. } => "global-U1",
            Self::SpinSo2 { .. } => "spin-SO2",
            Self::Rotation => "discrete-rotation",
            Self::ComplexConjugation => "complex-conjugation",
            Self::HorizontalReflection => "h-reflection",
            Self::VerticalReflection => "v-reflection",
            Self::ParticleHole => "particle-hole",
            Self::Inversion => "inversion",
        }
    }

    /// Whether constants are conjugated (`c -> c*`).
    pub fn conjugates(&self) -> bool {
        matches!(self, Self::ComplexConjugation)
    }

    /// Whether `psi-` and `psi+` are exchanged (the spinor is transposed).
    pub fn transposes(&self) -> bool {
        matches!(self, Self::ParticleHole)
    }

    /// Whether the op needs a rotation-invariant grid.
    pub fn needs_rotation_grid(&self) -> bool {
        matches!(self, Self::Rotation)
    }

    /// Image `(n', m')` of the momentum `(n, m)`; frequency reversal is `n -> -n - 1`.
    pub fn momentum_map(&self, geom: &HoneycombGeometry, n: i64, m: [usize; 2]) -> Result<(i64, [usize; 2])> {
        let k = geom.momentum(m[0], m[1]).cartesian;
        let (flip_k0, kk) = match self {
            Self::SpinFlip | Self::GlobalU1 { .. } | Self::SpinSo2 { .. } => return Ok((n, m)),
            Self::Rotation => (false, rotate(k)),
            Self::ComplexConjugation => (true, [-k[0], -k[1]]),
            Self::HorizontalReflection => (false, [-k[0], k[1]]),
            Self::VerticalReflection => (false, [k[0], -k[1]]),
            Self::ParticleHole => (false, [-k[0], -k[1]]),
            Self::Inversion => return Ok((-n - 1, m)),
        };
        let (a, b) = geom.grid_index(kk)?;
        Ok((if flip_k0 { -n - 1 } else { n }, [a, b]))
    }

    /// Sublattice matrix `S(k)`: `psi-_rho -> sum_rho' S_{rho rho'} psi-_rho'` for `eps = -`, and
    /// `psi+_rho -> sum_rho' psi+_rho' S_{rho' rho}` for `eps = +`.
    pub fn spinor_matrix(&self, geom: &HoneycombGeometry, m: [usize; 2], eps: Eps) -> Mat2 {
        let [s1, _, s3] = pauli();
        match self {
            Self::Rotation => {
                let phi = dot(geom.momentum(m[0], m[1]).cartesian, D31);
                let sgn = if eps == Eps::Minus { 1.0 } else { -1.0 };
                Mat2::new(ONE, ZERO, ZERO, Complex64::from_polar(1.0, sgn * phi))
            }
            Self::HorizontalReflection => s1,
            Self::ParticleHole => Mat2::identity() * I,
            Self::Inversion => s3 * (-I),
            _ => Mat2::identity(),
        }
    }

    fn spin_image(&self, spin: u8, eps: Eps) -> Vec<(Complex64, u8)> {
        match *self {
            Self::SpinFlip => vec![(ONE, 1 - spin)],
            Self::GlobalU1 { alpha } => {
                let e = if eps == Eps::Plus { 1.0 } else { -1.0 };
                vec![(Complex64::from_polar(1.0, e * alpha[spin as usize]), spin)]
            }
            Self::SpinSo2 { theta } => {
                let (s, c) = theta.sin_cos();
                // e^{-i theta sigma2} = [[c, -s], [s, c]] acting on (up, down).
                if spin == 0 {
                    vec![(Complex64::new(c, 0.0), 0), (Complex64::new(-s, 0.0), 1)]
                } else {
                    vec![(Complex64::new(s, 0.0), 0), (Complex64::new(c, 0.0), 1)]
                }
            }
            _ => vec![(ONE, spin)],
        }
    }

    /// The image of one generator as a linear combination.
    pub fn image(&self, geom: &HoneycombGeometry, g: &MGen) -> Result<Vec<(Complex64, MGen)>> {
        if self.needs_rotation_grid() {
            require_rotation_grid(geom)?;
        }
        let (n, m) = self.momentum_map(geom, g.n, g.m())?;
        let s = self.spinor_matrix(geom, g.m(), g.eps);
        let eps = if self.transposes() {
            match g.eps {
                Eps::Minus => Eps::Plus,
                Eps::Plus => Eps::Minus,
            }
        } else {
            g.eps
        };
        let mut out = Vec::new();
        for (cs, spin) in self.spin_image(g.spin, g.eps) {
            for rho in 0..2u8 {
                let c = match g.eps {
                    Eps::Minus => s[(g.rho as usize, rho as usize)],
                    Eps::Plus => s[(rho as usize, g.rho as usize)],
                };
                if c != ZERO {
                    out.push((cs * c, MGen::new(n, m, spin, rho, eps)));
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, geom: &HoneycombGeometry, poly: &MomentumPoly) -> Result<MomentumPoly> {
        poly.substitute(self.conjugates(), |g| self.image(geom, g))
    }
}

/// The combination `(*)` on the grid `n_values x B_L`.
pub fn quadratic_form(geom: &HoneycombGeometry, beta: f64, n_values: &[i64]) -> MomentumPoly {
    let v0 = geom.v0();
    let mut p = MomentumPoly::zero();
    for &n in n_values {
        let k0 = (2 * n + 1) as f64 * std::f64::consts::PI / beta;
        for kp in geom.momenta() {
            let om = dispersion(kp.cartesian);
            let a = Mat2::new(Complex64::new(0.0, k0), v0 * om.conj(), v0 * om, Complex64::new(0.0, k0));
            let m = [kp.m1, kp.m2];
            for spin in 0..2u8 {
                for r in 0..2u8 {
                    for c in 0..2u8 {
                        let gens = vec![MGen::new(n, m, spin, r, Eps::Plus), MGen::new(n, m, spin, c, Eps::Minus)];
                        p.add_product(gens, a[(r as usize, c as usize)]);
                    }
                }
            }
        }
    }
    p
}

/// The combination `(**)` on the grid `n_values x B_L`, with exact frequency conservation.
pub fn quartic_form(geom: &HoneycombGeometry, n_values: &[i64]) -> MomentumPoly {
    let l = geom.l();
    let li = l as i64;
    let idx: HashMap<i64, ()> = n_values.iter().map(|&n| (n, ())).collect();
    let cells: Vec<[usize; 2]> = (0..l).flat_map(|a| (0..l).map(move |b| [a, b])).collect();
    let mut p = MomentumPoly::zero();
    for &n1 in n_values {
        for &n2 in n_values {
            for &n3 in n_values {
                let n4 = n1 - n2 + n3;
                if !idx.contains_key(&n4) {
                    continue;
                }
                for m1 in &cells {
                    for m2 in &cells {
                        for m3 in &cells {
                            let m4 = [
                                (m1[0] as i64 - m2[0] as i64 + m3[0] as i64).rem_euclid(li) as usize,
                                (m1[1] as i64 - m2[1] as i64 + m3[1] as i64).rem_euclid(li) as usize,
                            ];
                            for rho in 0..2u8 {
                                let gens = vec![
                                    MGen::new(n1, *m1, 0, rho, Eps::Plus),
                                    MGen::new(n2, *m2, 0, rho, Eps::Minus),
                                    MGen::new(n3, *m3, 1, rho, Eps::Plus),
                                    MGen::new(n4, m4, 1, rho, Eps::Minus),
                                ];
                                p.add_product(gens, ONE);
                            }
                        }
                    }
                }
            }
        }
    }
    p
}

/// `max |coefficient of op(X) - X|` for `X = (*)`.
pub fn check_quadratic_invariance(op: SymmetryOp, geom: &HoneycombGeometry, beta: f64, n_values: &[i64]) -> Result<f64> {
    let x = quadratic_form(geom, beta, n_values);
    Ok(op.apply(geom, &x)?.max_abs_diff(&x))
}

/// `max |coefficient of op(X) - X|` for `X = (**)`.
pub fn check_quartic_invariance(op: SymmetryOp, geom: &HoneycombGeometry, n_values: &[i64]) -> Result<f64> {
    let x = quartic_form(geom, n_values);
    Ok(op.apply(geom, &x)?.max_abs_diff(&x))
}

/// Outcome of the two-legged kernel structure check.
#[derive(Debug, Clone, PartialEq)]
pub struct W2Structure {
    /// `(relation, max residual)` for each kernel relation; the rotation relation is
    /// only present when `3 | L`.
    pub relations: Vec<(&'static str, f64)>,
    /// Fitted `z0` and `delta0` (present when the Fermi points lie on the grid).
    pub z0: Option<Complex64>,
    pub delta0: Option<Complex64>,
    /// Spread of `delta0` between the two lattice directions and valleys.
    pub delta_spread: Option<f64>,
    /// `||W(pi/beta, p_F)||` summed over both valleys.
    pub fermi_residual: Option<f64>,
}

impl W2Structure {
    pub fn max_relation_residual(&self) -> f64 {
        self.relations.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    /// `|Im z0| <= 1e-6 |z0| + 1e-10`, and the same for `delta0`.
    pub fn constants_real(&self) -> bool {
        let ok = |z: Option<Complex64>| z.map_or(true, |z| z.im.abs() <= 1e-6 * z.norm() + 1e-10);
        ok(self.z0) && ok(self.delta0)
    }
}

fn mat_max_diff(a: &Mat2, b: &Mat2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks the relabelling identities
///
/// `W(k) = e^{ik.(d1-d2) s3/2} W(k0, R^{-1} k) e^{-ik.(d1-d2) s3/2} = W*(-k) = W(k0, k1, -k2)
///       = s1 W(k0, -k1, k2) s1 = W^T(k0, -k) = -s3 W(-k0, k) s3`
///
/// on every grid point and fits `W ~ -[[i z0 k0, delta0 Omega*], [delta0 Omega, i z0 k0]]`
/// near the Fermi points by symmetric differences.
pub fn check_w2_structure(kernel: &KernelTable, geom: &HoneycombGeometry) -> Result<W2Structure> {
    if kernel.l != geom.l() {
        return Err(CrgError::InvalidArgument("kernel and geometry disagree on L".into()));
    }
    let l = geom.l();
    let nf = kernel.nf();
    let [s1, _, s3] = pauli();
    let at = |i: usize, k: Vec2| -> Result<Mat2> {
        let (a, b) = geom.grid_index(k)?;
        Ok(kernel.get(i, a, b))
    };
    let mut res: Vec<(&'static str, f64)> = Vec::new();
    let mut worst = [0.0_f64; 6];
    let rot = l % 3 == 0;
    for i in 0..nf {
        let ir = nf - 1 - i;
        for kp in geom.momenta() {
            let k = kp.cartesian;
            let w = kernel.get(i, kp.m1, kp.m2);
            if rot {
                let a = dot(k, D12);
                let mut r = at(i, rotate_back(k))?;
                r[(0, 1)] *= Complex64::from_polar(1.0, a);
                r[(1, 0)] *= Complex64::from_polar(1.0, -a);
                worst[0] = worst[0].max(mat_max_diff(&w, &r));
            }
            let conj = at(ir, [-k[0], -k[1]])?.map(|z| z.conj());
            worst[1] = worst[1].max(mat_max_diff(&w, &conj));
            worst[2] = worst[2].max(mat_max_diff(&w, &at(i, [k[0], -k[1]])?));
            worst[3] = worst[3].max(mat_max_diff(&w, &(s1 * at(i, [-k[0], k[1]])? * s1)));
            worst[4] = worst[4].max(mat_max_diff(&w, &at(i, [-k[0], -k[1]])?.transpose()));
            worst[5] = worst[5].max(mat_max_diff(&w, &(-(s3 * kernel.get(ir, kp.m1, kp.m2) * s3))));
        }
    }
    let names = ["rotation", "conjugation", "v-reflection", "h-reflection", "transpose", "inversion"];
    for (j, name) in names.iter().enumerate() {
        if j > 0 || rot {
            res.push((name, worst[j]));
        }
    }
    let mut out = W2Structure { relations: res, z0: None, delta0: None, delta_spread: None, fermi_residual: None };
    if !rot {
        return Ok(out);
    }
    let i0 = kernel.freq_index(0).ok_or_else(|| CrgError::InvalidArgument("grid lacks n = 0".into()))?;
    let i1 = nf - 1 - i0;
    let k0 = kernel.k0(i0);
    let g = [geom.momentum(1, 0).cartesian, geom.momentum(0, 1).cartesian];
    let mut zs = Vec::new();
    let mut ds = Vec::new();
    let mut fermi = 0.0;
    for pf in fermi_points() {
        let wp = at(i0, pf)?;
        let wm = at(i1, pf)?;
        fermi += crate::propagators::op_norm(&wp);
        // W11(k0) - W11(-k0) = -2 i z0 k0.
        zs.push(I * (wp[(0, 0)] - wm[(0, 0)]) / (2.0 * k0));
        for e in g {
            let (kp, km) = ([pf[0] + e[0], pf[1] + e[1]], [pf[0] - e[0], pf[1] - e[1]]);
            let dw = at(i0, kp)?[(0, 1)] - at(i0, km)?[(0, 1)];
            let dom = dispersion(kp).conj() - dispersion(km).conj();
            ds.push(-dw / dom);
        }
    }
    let mean = |v: &[Complex64]| v.iter().sum::<Complex64>() / v.len() as f64;
    let dm = mean(&ds);
    out.z0 = Some(mean(&zs));
    out.delta0 = Some(dm);
    out.delta_spread = Some(ds.iter().map(|d| (d - dm).norm()).fold(0.0, f64::max));
    out.fermi_residual = Some(fermi);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::MatsubaraGrid;

    fn freqs() -> Vec<i64> {
        vec![-2, -1, 0, 1]
    }

    #[test]
    fn pauli_algebra() {
        assert!(pauli_identities_hold());
    }

    #[test]
    fn dispersion_identities() {
        let geom = HoneycombGeometry::new(6).unwrap();
        let mut pts: Vec<Vec2> = geom.momenta().iter().map(|p| p.cartesian).collect();
        pts.push([0.37, -1.21]);
        pts.push([2.9, 0.4]);
        assert!(omega_rotation_residual(&pts) < 1e-14);
        assert!(omega_h_reflection_residual(&pts) < 1e-14);
        assert!(omega_v_reflection_residual(&pts) < 1e-14);
        assert!(omega_conjugate_v_reflection_residual(&pts) > 0.1);
    }

    #[test]
    fn rotation_orbits() {
        assert!(rotation_maps_grid(&HoneycombGeometry::new(3).unwrap()));
        let g2 = HoneycombGeometry::new(2).unwrap();
        let q = quadratic_form(&g2, 1.0, &freqs());
        assert!(SymmetryOp::Rotation.apply(&g2, &q).is_err());
    }

    #[test]
    fn involutions_and_identity_parameters() {
        let geom = HoneycombGeometry::new(2).unwrap();
        let q = quadratic_form(&geom, 1.3, &freqs());
        let twice = SymmetryOp::SpinFlip.apply(&geom, &SymmetryOp::SpinFlip.apply(&geom, &q).unwrap()).unwrap();
        assert_eq!(twice.max_abs_diff(&q), 0.0);
        let id = SymmetryOp::GlobalU1 { alpha: [0.0, 0.0] }.apply(&geom, &q).unwrap();
        assert_eq!(id.max_abs_diff(&q), 0.0);
    }

    #[test]
    fn all_ops_leave_both_forms_invariant() {
        for l in [2usize, 3] {
            let geom = HoneycombGeometry::new(l).unwrap();
            for op in SymmetryOp::all([0.7, -1.9], 0.43) {
                if op.needs_rotation_grid() && l % 3 != 0 {
                    continue;
                }
                let r2 = check_quadratic_invariance(op, &geom, 1.7, &freqs()).unwrap();
                let r4 = check_quartic_invariance(op, &geom, &[-1, 0]).unwrap();
                assert!(r2 < 1e-12, "{} quadratic residual {r2} at L={l}", op.name());
                assert!(r4 < 1e-12, "{} quartic residual {r4} at L={l}", op.name());
            }
        }
    }

    #[test]
    fn a_broken_form_is_detected() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let mut q = quadratic_form(&geom, 1.0, &freqs());
        q.add_product(vec![MGen::new(0, [1, 0], 0, 0, Eps::Plus), MGen::new(0, [1, 0], 0, 1, Eps::Minus)], ONE);
        let r = check_quadratic_invariance(SymmetryOp::Rotation, &geom, 1.0, &freqs());
        assert!(r.is_ok());
        let r = SymmetryOp::Rotation.apply(&geom, &q).unwrap().max_abs_diff(&q);
        assert!(r > 0.5);
    }

    #[test]
    fn free_inverse_propagator_obeys_kernel_relations() {
        // -g_hat^{-1} has the structure -[[i k0 ..]] ; check the relations on it.
        let geom = HoneycombGeometry::new(6).unwrap();
        let grid = MatsubaraGrid::new(3.0, 2).unwrap();
        let mut k = KernelTable::zeros(&grid, 6, 0, 0);
        for i in 0..grid.len() {
            let k0 = k.k0(i);
            for p in geom.momenta() {
                let om = dispersion(p.cartesian);
                k.data[i * 36 + p.m1 * 6 + p.m2] = -Mat2::new(Complex64::new(0.0, 0.8 * k0), 0.3 * om.conj(), 0.3 * om, Complex64::new(0.0, 0.8 * k0));
            }
        }
        let rep = check_w2_structure(&k, &geom).unwrap();
        assert_eq!(rep.relations.len(), 6);
        assert!(rep.max_relation_residual() < 1e-12, "{:?}", rep.relations);
        assert!((rep.z0.unwrap() - 0.8).norm() < 1e-12);
        assert!((rep.delta0.unwrap() - 0.3).norm() < 1e-12);
        assert!(rep.constants_real());
    }
}
