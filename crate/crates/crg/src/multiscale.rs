//! Multiscale integration at order `U^2`.
//!
//! Two independent routes are provided:
//!
//! * [`uv_effective_potential`] integrates single-scale fields one at a time with the
//!   exact Grassmann engine on a tiny grid, keeping the effective potential as a
//!   polynomial. It is the reference for everything else.
//! * [`ScaleConstants`] and [`run_flow`] use closed-form order-`U^2` expressions (sunset
//!   kernels and four-line bubbles, see [`crate::kernel`]) on grids of any size.
//!
//! In the infrared the two-legged kernel produced at each scale is moved into the
//! Gaussian of the lower scales; its normalization is `e_h`. At order `U^2` the
//! dressing of the propagators feeds back only at order `U^4`, so the propagators
//! used for the scale constants are the undressed ones.

use crate::error::{CrgError, Result};
use crate::grassmann::{interaction, Covariance, Eps, GrassmannPoly, Universe};
use crate::honeycomb::{linear_fit, HoneycombGeometry};
use crate::kernel::{bubble, exact_slices, sunset, trace_log, KernelTable};
use crate::momentum_poly::{MGen, MomentumPoly};
use crate::propagators::{h_beta, Cutoff, MatsubaraGrid, PositionTable, ScalePropagator};
use crate::symmetry::check_w2_structure;
use num_complex::Complex64;

/// Largest single-copy universe for the engine route (the doubled `psi + phi` universe
/// must fit in 64 bits).
pub const TINY_LIMIT: usize = 32;

/// Effective potential `V^(h)` at orders `1..=max_order` in `U`, as polynomials in the
/// remaining field, with the free-energy constants produced at every integrated scale.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    pub h: i32,
    pub l: usize,
    pub beta: f64,
    pub n_values: Vec<i64>,
    /// `by_order[k]` is the order-`(k+1)` part, constants removed.
    pub by_order: Vec<GrassmannPoly>,
    /// `(s, ebar_s)`: order-`U^2` free-energy density generated by integrating scale `s`.
    pub constants: Vec<(i32, f64)>,
}

/// `sum over choices psi/phi` of a polynomial in the doubled universe (phi bits shifted by `n`).
fn split_fields(p: &GrassmannPoly, n: usize) -> GrassmannPoly {
    let mut out = GrassmannPoly::zero(2 * n);
    for (&mask, &c) in p.terms() {
        let bits: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        for choice in 0u32..(1 << bits.len()) {
            let sel: Vec<usize> = bits.iter().enumerate().map(|(i, &b)| if choice >> i & 1 == 1 { b + n } else { b }).collect();
            for (&m, &s) in GrassmannPoly::ordered_product(2 * n, &sel).terms() {
                out.add_term(m, c * s);
            }
        }
    }
    out
}

/// Integrates out the low half of the doubled universe; `psi` bits come first in the
/// canonical order, so no reordering sign appears.
fn integrate_psi(p: &GrassmannPoly, cov: &Covariance, n: usize) -> GrassmannPoly {
    let low = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = GrassmannPoly::zero(n);
    for (&mask, &c) in p.terms() {
        let e = cov.monomial_expectation(mask & low);
        if e != Complex64::default() {
            out.add_term(mask >> n, c * e);
        }
    }
    out
}

fn drop_constant(p: &mut GrassmannPoly) -> Complex64 {
    let c = p.coefficient(0);
    p.add_term(0, -c);
    c
}

/// Integrates scales `M, M-1, ..., h+1` one at a time on a tiny grid, truncating at
/// order `max_order <= 2` in `U`:
/// `V^(s-1) = E_s(V1) + E_s(V2) - (1/2) [E_s(V1 V1) - E_s(V1)^2]`.
pub fn uv_effective_potential(geom: &HoneycombGeometry, grid: &MatsubaraGrid, u: f64, h: i32, max_order: usize) -> Result<EffectivePotential> {
    if !(1..=2).contains(&max_order) {
        return Err(CrgError::InvalidArgument(format!("max_order must be 1 or 2, got {max_order}")));
    }
    let m = grid.m() as i32;
    let hb = h_beta(grid.beta());
    if h < hb - 1 || h > m {
        return Err(CrgError::ScaleOutOfRange { h, lo: hb - 1, hi: m });
    }
    let n_modes = grid.len() * geom.n_cells();
    let n = 8 * n_modes;
    if n > TINY_LIMIT {
        return Err(CrgError::UniverseTooLarge { size: n, limit: TINY_LIMIT });
    }
    let universe = Universe::momentum(n_modes)?;
    let vol = grid.beta() * geom.n_cells() as f64;
    let mut v1 = interaction(geom, grid, u)?;
    let mut v2 = GrassmannPoly::zero(n);
    let mut constants = Vec::new();
    for s in (h + 1..=m).rev() {
        let table = ScalePropagator::new(geom, grid, Cutoff::Shell(s))?.momentum_table();
        let cov = Covariance::momentum(&universe, &table);
        let d1 = split_fields(&v1, n);
        let mut a1 = integrate_psi(&d1, &cov, n);
        let c1 = drop_constant(&mut a1);
        let mut next2 = GrassmannPoly::zero(n);
        if max_order == 2 {
            let a2 = integrate_psi(&split_fields(&v2, n), &cov, n);
            let q = integrate_psi(&d1.multiply(&d1)?, &cov, n);
            let full1 = {
                let mut t = a1.clone();
                t.add_term(0, c1);
                t
            };
            let conn = q.add(&full1.multiply(&full1)?.scale(Complex64::new(-1.0, 0.0)))?;
            next2 = a2.add(&conn.scale(Complex64::new(-0.5, 0.0)))?;
            let c2 = drop_constant(&mut next2);
            // e^{-V} carries e^{-c}, so the constant adds c / (beta |Lambda|) to f.
            constants.push((s, c2.re / vol));
        }
        v1 = a1;
        v2 = next2;
    }
    let mut by_order = vec![v1];
    if max_order == 2 {
        by_order.push(v2);
    }
    Ok(EffectivePotential { h, l: geom.l(), beta: grid.beta(), n_values: grid.n_values().to_vec(), by_order, constants })
}

fn bit_to_mgen(bit: usize, n_values: &[i64], l: usize) -> MGen {
    let eps = if bit & 1 == 1 { Eps::Plus } else { Eps::Minus };
    let rho = (bit >> 1 & 1) as u8;
    let spin = (bit >> 2 & 1) as u8;
    let mode = bit >> 3;
    let (i, m) = (mode / (l * l), mode % (l * l));
    MGen::new(n_values[i], [m / l, m % l], spin, rho, eps)
}

impl EffectivePotential {
    fn poly(&self, order: usize) -> Result<&GrassmannPoly> {
        self.by_order
            .get(order.wrapping_sub(1))
            .ok_or_else(|| CrgError::InvalidArgument(format!("order {order} not computed")))
    }

    /// The two-legged kernel at a given order for one spin: the coefficient of
    /// `(1/(beta|Lambda|)) phi+_{k,rho} W_{rho rho'}(k) phi-_{k,rho'}`.
    pub fn two_legged(&self, order: usize, spin: u8) -> Result<KernelTable> {
        let p = self.poly(order)?;
        let nk = self.l * self.l;
        let nf = self.n_values.len();
        let vol = self.beta * nk as f64;
        let mut data = Vec::with_capacity(nf * nk);
        for mode in 0..nf * nk {
            let mut w = crate::propagators::Mat2::zeros();
            for r in 0..2u8 {
                for c in 0..2u8 {
                    let bits = [Universe::momentum_bit(mode, spin, r, Eps::Plus), Universe::momentum_bit(mode, spin, c, Eps::Minus)];
                    let ord = GrassmannPoly::ordered_product(p.n_gen(), &bits);
                    let (&mask, &sign) = ord.terms().iter().next().expect("distinct generators");
                    w[(r as usize, c as usize)] = p.coefficient(mask) * sign * vol;
                }
            }
            data.push(w);
        }
        Ok(KernelTable { h: self.h, order, l: self.l, beta: self.beta, n_values: self.n_values.clone(), data })
    }

    /// The degree-4 part at a given order, relabelled by momenta.
    pub fn quartic(&self, order: usize) -> Result<MomentumPoly> {
        let p = self.poly(order)?;
        let mut out = MomentumPoly::zero();
        for (&mask, &c) in p.terms() {
            if mask.count_ones() != 4 {
                continue;
            }
            let gens = (0..64).filter(|b| mask >> b & 1 == 1).map(|b| bit_to_mgen(b, &self.n_values, self.l)).collect();
            out.add_product(gens, c);
        }
        Ok(out)
    }

    /// Largest coefficient of the degree-`d` part at a given order.
    pub fn degree_max(&self, order: usize, d: u32) -> Result<f64> {
        Ok(self.poly(order)?.terms().iter().filter(|(m, _)| m.count_ones() == d).map(|(_, c)| c.norm()).fold(0.0, f64::max))
    }
}

/// The interaction written over momentum generators, for comparison with quartic kernels.
pub fn interaction_poly(geom: &HoneycombGeometry, grid: &MatsubaraGrid, u: f64) -> Result<MomentumPoly> {
    let v = interaction(geom, grid, u)?;
    let mut out = MomentumPoly::zero();
    for (&mask, &c) in v.terms() {
        let gens = (0..64).filter(|b| mask >> b & 1 == 1).map(|b| bit_to_mgen(b, grid.n_values(), geom.l())).collect();
        out.add_product(gens, c);
    }
    Ok(out)
}

/// A scale-`h` kernel split into its two-legged part and its quartic part.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleKernel {
    pub two: KernelTable,
    pub quartic: MomentumPoly,
}

/// `L` keeps the two-legged kernel (it is moved into the Gaussian of the lower scales),
/// `R` keeps every monomial of degree four or more.
pub fn localize(kernel: &ScaleKernel) -> (ScaleKernel, ScaleKernel) {
    let zero_two = KernelTable { data: vec![crate::propagators::Mat2::zeros(); kernel.two.data.len()], ..kernel.two.clone() };
    let l = ScaleKernel { two: kernel.two.clone(), quartic: MomentumPoly::zero() };
    let r = ScaleKernel { two: zero_two, quartic: kernel.quartic.clone() };
    (l, r)
}

/// Inverse of [`localize`].
pub fn reconstruct(l: &ScaleKernel, r: &ScaleKernel) -> Result<ScaleKernel> {
    let mut quartic = l.quartic.clone();
    quartic.add(&r.quartic);
    let mut two = l.two.clone();
    if two.data.len() != r.two.data.len() {
        return Err(CrgError::InvalidArgument("kernel tables live on different grids".into()));
    }
    for (a, b) in two.data.iter_mut().zip(&r.two.data) {
        *a += b;
    }
    Ok(ScaleKernel { two, quartic })
}

/// One row of the running couplings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FlowRow {
    pub h: i32,
    pub zeta: f64,
    pub v: f64,
    pub z: f64,
    pub delta: f64,
}

/// Running couplings `h -> (zeta_h, v_h, z_h, delta_h)` together with the accumulated
/// two-legged kernel already moved into the Gaussian (whose non-local part plays the
/// role of the remainders `s_h`, `t_h`).
#[derive(Debug, Clone)]
pub struct RunningCouplings {
    pub rows: Vec<FlowRow>,
    pub zeta: f64,
    pub v: f64,
    pub absorbed: Option<KernelTable>,
}

impl RunningCouplings {
    pub fn new(v0: f64) -> Self {
        Self { rows: Vec::new(), zeta: 1.0, v: v0, absorbed: None }
    }

    /// `|zeta_h - 1|` and `|v_h - v0|` over the computed range.
    pub fn max_deviation(&self, v0: f64) -> (f64, f64) {
        self.rows.iter().fold((0.0_f64, 0.0_f64), |(a, b), r| (a.max((r.zeta - 1.0).abs()), b.max((r.v - v0).abs())))
    }

    /// `A_h(k) = -[[i zeta k0, v Omega*], [v Omega, i zeta k0]] + absorbed(k)`, the
    /// dressed inverse covariance for the next single-scale propagator.
    pub fn dressed_inverse(&self, geom: &HoneycombGeometry, grid: &MatsubaraGrid) -> KernelTable {
        let mut t = KernelTable::zeros(grid, geom.l(), 0, 0);
        let l = geom.l();
        for i in 0..grid.len() {
            let k0 = grid.k0(grid.n_values()[i]);
            for kp in geom.momenta() {
                let om = crate::honeycomb::dispersion(kp.cartesian);
                let d = Complex64::new(0.0, self.zeta * k0);
                let mut a = -crate::propagators::Mat2::new(d, self.v * om.conj(), self.v * om, d);
                if let Some(w) = &self.absorbed {
                    a += w.get(i, kp.m1, kp.m2);
                }
                t.data[i * l * l + kp.m1 * l + kp.m2] = a;
            }
        }
        t
    }
}

/// Extracts `z_h`, `delta_h` from the scale-`h` two-legged kernel by symmetric finite
/// differences at the Fermi points and advances `zeta`, `v`. Needs `3 | L` for the
/// Fermi points to lie on the grid; otherwise `z_h = delta_h = 0` is recorded only for
/// an identically zero kernel.
pub fn flow_step(h: i32, couplings: &RunningCouplings, kernel2: &KernelTable, geom: &HoneycombGeometry) -> Result<RunningCouplings> {
    let (z, delta) = if kernel2.is_zero() {
        (0.0, 0.0)
    } else {
        if geom.l() % 3 != 0 {
            return Err(CrgError::InvalidArgument(format!("Fermi points are off the L = {} grid", geom.l())));
        }
        let s = check_w2_structure(kernel2, geom)?;
        (s.z0.map_or(0.0, |c| c.re), s.delta0.map_or(0.0, |c| c.re))
    };
    let mut next = couplings.clone();
    next.rows.push(FlowRow { h, zeta: couplings.zeta, v: couplings.v, z, delta });
    next.zeta += z;
    next.v += delta;
    next.absorbed = Some(match &couplings.absorbed {
        None => kernel2.clone(),
        Some(a) => {
            let mut t = a.clone();
            for (x, y) in t.data.iter_mut().zip(&kernel2.data) {
                *x += y;
            }
            t
        }
    });
    Ok(next)
}

fn add_position(a: &PositionTable, b: &PositionTable) -> PositionTable {
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    PositionTable { data, ..a.clone() }
}

fn zero_position(l: usize, nt: usize, beta: f64) -> PositionTable {
    PositionTable { nt, l, beta, data: vec![crate::propagators::Mat2::zeros(); nt * l * l] }
}

/// Free-energy bookkeeping per scale at order `U^2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScaleRow {
    pub h: i32,
    /// Normalization of the Gaussian dressing (infrared scales only).
    pub e: f64,
    /// Linear (order-`U^2`) part of `e`.
    pub e_linear: f64,
    pub ebar: f64,
}

/// Results of the order-`U^2` multiscale pipeline on one grid.
#[derive(Debug, Clone)]
pub struct ScaleConstants {
    pub u: f64,
    pub m: i32,
    pub h_beta: i32,
    /// Rows from `h = M` down to `h_beta`.
    pub rows: Vec<ScaleRow>,
    /// `-(U^2/2) B(g, g, g, g)`, the order-`U^2` free energy computed in one step.
    pub f2_direct: f64,
    pub flow: RunningCouplings,
}

impl ScaleConstants {
    /// `sum_h (e_h + ebar_h)` keeping only the order-`U^2` part of `e_h`.
    pub fn f2_assembled(&self) -> f64 {
        self.rows.iter().map(|r| r.e_linear + r.ebar).sum()
    }

    pub fn row(&self, h: i32) -> Option<&ScaleRow> {
        self.rows.iter().find(|r| r.h == h)
    }
}

/// Runs the order-`U^2` pipeline: UV scales `M..=1` then IR scales `0..=h_beta`, with
/// the couplings flow when `with_flow` is set (requires `3 | L`).
///
/// Memory: four position tables of `(2|B_beta| + 3) L^2` matrices are alive at once.
pub fn run_flow(geom: &HoneycombGeometry, grid: &MatsubaraGrid, u: f64, with_flow: bool) -> Result<ScaleConstants> {
    let m = grid.m() as i32;
    let hb = h_beta(grid.beta());
    let l = geom.l();
    let nt = exact_slices(grid);
    let u2 = u * u;
    let pos = |c: Cutoff| -> Result<PositionTable> { Ok(ScalePropagator::new(geom, grid, c)?.position_table(nt)) };
    let b4 = |t: &PositionTable| -> Result<f64> { Ok(bubble(t, t, t, t)?.re) };

    let mut rows = Vec::new();
    // G_{>= h+1}, starting from G_{>= M+1} = 0.
    let mut above = zero_position(l, nt, grid.beta());
    let mut b_above = 0.0;
    for h in (1..=m).rev() {
        let from_h = add_position(&above, &pos(Cutoff::Shell(h))?);
        let b = b4(&from_h)?;
        rows.push(ScaleRow { h, e: 0.0, e_linear: 0.0, ebar: -0.5 * u2 * (b - b_above) });
        above = from_h;
        b_above = b;
    }

    let full_mom = ScalePropagator::full(geom, grid).momentum_table();
    let mut flow = RunningCouplings::new(geom.v0());
    // Sunset of G_{>= h+1} as a kernel, for h = 0 first.
    let to_kernel = |w: &PositionTable, h: i32| KernelTable::from_momentum(w.to_momentum(grid.n_values()), grid, l, h, 2);
    let mut s_above = to_kernel(&sunset(&above, &above, &above, u)?, 0);
    let mut absorbed_prev: Option<KernelTable> = None;
    for h in (hb..=0).rev() {
        let shell = pos(Cutoff::Shell(h))?;
        let from_h = add_position(&above, &shell);
        let b = b4(&from_h)?;
        let mixed = bubble(&shell, &above, &above, &above)?.re;
        let ebar = -0.5 * u2 * (b - b_above) + 2.0 * u2 * mixed;

        // W^(h): the two-legged kernel produced since the last absorption.
        let w_h = match &absorbed_prev {
            None => s_above.clone(),
            Some(prev) => s_above.sub(prev)?,
        };
        let w_h = KernelTable { h, ..w_h };
        // G_{<= h} = full - G_{>= h+1}.
        let mut below_mom = full_mom.clone();
        for (x, y) in below_mom.data.iter_mut().zip(ScalePropagator::new(geom, grid, Cutoff::From(h + 1))?.momentum_table().data) {
            *x -= y;
        }
        let below = KernelTable::from_momentum(below_mom, grid, l, h, 0);
        let (e, e_linear) = trace_log(&below, &w_h)?;
        rows.push(ScaleRow { h, e, e_linear, ebar });
        if with_flow {
            flow = flow_step(h, &flow, &w_h, geom)?;
        }

        absorbed_prev = Some(s_above.clone());
        if h > hb {
            s_above = to_kernel(&sunset(&from_h, &from_h, &from_h, u)?, h - 1);
        }
        above = from_h;
        b_above = b;
    }
    let f2_direct = -0.5 * u2 * b_above;
    Ok(ScaleConstants { u, m, h_beta: hb, rows, f2_direct, flow })
}

/// Fitted log2-slope of `|value|` against `h` over the rows with `h` in `window`.
pub fn log2_slope(points: &[(i32, f64)], window: std::ops::RangeInclusive<i32>) -> Option<(f64, f64)> {
    let sel: Vec<(f64, f64)> = points.iter().filter(|(h, v)| window.contains(h) && v.abs() > 0.0).map(|&(h, v)| (h as f64, v.abs().log2())).collect();
    if sel.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = sel.into_iter().unzip();
    let (s, _, r2) = linear_fit(&x, &y);
    Some((s, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::DiagramEvaluator;
    use crate::kernel::sunset_kernel;

    fn tiny() -> (HoneycombGeometry, MatsubaraGrid) {
        let geom = HoneycombGeometry::new(1).unwrap();
        let grid = MatsubaraGrid::new(1.7, 3).unwrap();
        assert_eq!(grid.len(), 2);
        (geom, grid)
    }

    #[test]
    fn order_one_quartic_is_the_interaction() {
        let (geom, grid) = tiny();
        let ep = uv_effective_potential(&geom, &grid, 0.7, 0, 1).unwrap();
        let v = interaction_poly(&geom, &grid, 0.7).unwrap();
        assert!(ep.quartic(1).unwrap().max_abs_diff(&v) < 1e-14);
        // Tadpoles vanish: no quadratic part at order one.
        assert!(ep.degree_max(1, 2).unwrap() < 1e-15);
        assert!(ep.two_legged(1, 0).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn order_two_kernel_matches_sunset() {
        let (geom, grid) = tiny();
        let u = 0.9;
        for h in [0, 1, 2] {
            let ep = uv_effective_potential(&geom, &grid, u, h, 2).unwrap();
            let lines = ScalePropagator::new(&geom, &grid, Cutoff::From(h + 1)).unwrap().position_table(exact_slices(&grid));
            let w = sunset_kernel(&lines, &grid, u, h).unwrap();
            for spin in 0..2 {
                let e = ep.two_legged(2, spin).unwrap();
                let diff = e.max_abs_diff(&w).unwrap();
                assert!(diff < 1e-10 * (1.0 + w.sup_norm()), "h={h} spin={spin} diff={diff}");
            }
            assert!(w.sup_norm() > 1e-4 || h == 2);
        }
    }

    #[test]
    fn engine_constants_match_bubbles() {
        let (geom, grid) = tiny();
        let u = 1.3;
        let ep = uv_effective_potential(&geom, &grid, u, 0, 2).unwrap();
        let sc = run_flow(&geom, &grid, u, false).unwrap();
        for &(s, c) in &ep.constants {
            let r = sc.row(s).unwrap();
            assert!((c - r.ebar).abs() < 1e-10 * (1.0 + c.abs()), "scale {s}: {c} vs {}", r.ebar);
        }
        // L = 1 has no infrared momenta.
        let ir: f64 = sc.rows.iter().filter(|r| r.h <= 0).map(|r| r.e.abs() + r.ebar.abs()).sum();
        assert!(ir < 1e-14);
        let total: f64 = ep.constants.iter().map(|c| c.1).sum();
        assert!((total - sc.f2_direct).abs() < 1e-10 * total.abs());
    }

    #[test]
    fn bubble_matches_order_two_diagrams() {
        let geom = HoneycombGeometry::new(1).unwrap();
        let grid = MatsubaraGrid::new(2.0, 3).unwrap();
        let u = 1.0;
        let p = ScalePropagator::full(&geom, &grid);
        let ev = DiagramEvaluator::new(p.momentum_table(), &grid, 1, u);
        let d = ev.free_energy_order(2).unwrap();
        let sc = run_flow(&geom, &grid, u, false).unwrap();
        assert!((d.re - sc.f2_direct).abs() < 1e-10 * d.re.abs(), "{} vs {}", d.re, sc.f2_direct);
    }

    #[test]
    fn assembly_identity_with_infrared_scales() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(8.0, 2).unwrap();
        let sc = run_flow(&geom, &grid, 1.0, true).unwrap();
        assert!(sc.rows.iter().any(|r| r.h <= 0 && r.ebar.abs() > 1e-8));
        let rel = (sc.f2_assembled() - sc.f2_direct).abs() / sc.f2_direct.abs();
        assert!(rel < 1e-10, "rel {rel}");
        assert_eq!(sc.rows.last().unwrap().h, h_beta(8.0));
    }

    #[test]
    fn free_flow_is_fixed() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(4.0, 2).unwrap();
        let sc = run_flow(&geom, &grid, 0.0, true).unwrap();
        for r in &sc.flow.rows {
            assert_eq!((r.zeta, r.v, r.z, r.delta), (1.0, geom.v0(), 0.0, 0.0));
        }
        assert!(sc.rows.iter().all(|r| r.e == 0.0 && r.ebar == 0.0));
    }

    #[test]
    fn localization_partitions_terms() {
        let (geom, grid) = tiny();
        let ep = uv_effective_potential(&geom, &grid, 0.8, 0, 2).unwrap();
        let k = ScaleKernel { two: ep.two_legged(2, 0).unwrap(), quartic: ep.quartic(2).unwrap() };
        let (l, r) = localize(&k);
        assert!(l.quartic.is_empty());
        assert!(r.two.is_zero());
        assert_eq!(reconstruct(&l, &r).unwrap(), k);
        let only_quartic = ScaleKernel { two: r.two.clone(), quartic: k.quartic.clone() };
        assert!(localize(&only_quartic).0.two.is_zero());
    }

    #[test]
    fn tiny_limit_enforced() {
        let geom = HoneycombGeometry::new(2).unwrap();
        let grid = MatsubaraGrid::new(1.7, 3).unwrap();
        assert!(matches!(uv_effective_potential(&geom, &grid, 1.0, 0, 2), Err(CrgError::UniverseTooLarge { .. })));
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(i32, f64)> = (0..5).map(|h| (h, 3.0 * 2f64.powi(-h))).collect();
        let (s, r2) = log2_slope(&pts, 0..=4).unwrap();
        assert!((s + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
