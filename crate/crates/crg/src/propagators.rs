//! Smooth cutoffs, the full and single-scale free propagators in momentum and
//! position space, Gram factorizations and decay-bound measurements.
//!
//! Every cutoff is expressed as a weight `w(k) in [0, 1]` multiplying the bare
//! matrix `[[i k0, -v0 Omega*], [-v0 Omega, i k0]] / (k0^2 + v0^2 |Omega|^2)`.
//! All weights depend on `k0` only through `|k0|`, so frequencies are summed in
//! `(k0, -k0)` pairs; the diagonal of every propagator then vanishes exactly at
//! `x0 = 0`.

use crate::error::{CrgError, Result};
use crate::honeycomb::{check_beta, dispersion, fermi_points, HoneycombGeometry, Vec2};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

pub type Mat2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// The cutoff `chi0`: 1 on `|t| <= 1/3`, 0 on `|t| >= 2/3`, smooth in between.
pub fn chi0(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 / 3.0 {
        return 1.0;
    }
    if a >= 2.0 / 3.0 {
        return 0.0;
    }
    let (p, q) = (bump(2.0 / 3.0 - a), bump(a - 1.0 / 3.0));
    p / (p + q)
}

/// `h_beta = floor(log2(3 pi / (4 beta)))`, the lowest infrared scale.
pub fn h_beta(beta: f64) -> i32 {
    (3.0 * PI / (4.0 * beta)).log2().floor() as i32
}

/// Fermionic Matsubara frequencies kept by the ultraviolet cutoff `chi0(2^-M |k0|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraGrid {
    beta: f64,
    m: u32,
    n_values: Vec<i64>,
}

impl MatsubaraGrid {
    pub fn new(beta: f64, m: u32) -> Result<Self> {
        check_beta(beta)?;
        if m == 0 || m > 40 {
            return Err(CrgError::InvalidArgument(format!("UV scale M must be in [1, 40], got {m}")));
        }
        let kmax = (2.0 / 3.0) * 2f64.powi(m as i32);
        let mut n_pos = 0i64;
        while chi0((2.0 * PI / beta) * (n_pos as f64 + 0.5) / 2f64.powi(m as i32)) > 0.0
            && (2.0 * PI / beta) * (n_pos as f64 + 0.5) < kmax
        {
            n_pos += 1;
        }
        let n_values = (-n_pos..n_pos).collect();
        Ok(Self { beta, m, n_values })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }

    /// Matsubara integers, ascending and symmetric under `n -> -n-1`.
    pub fn n_values(&self) -> &[i64] {
        &self.n_values
    }

    pub fn k0(&self, n: i64) -> f64 {
        (2.0 * PI / self.beta) * (n as f64 + 0.5)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.n_values.iter().map(|&n| self.k0(n)).collect()
    }

    /// Index of the frequency `-k0` partnering index `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.len() - 1 - i
    }
}

/// Which part of the scale decomposition a propagator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    /// `chi0(2^-M |k0|)`.
    Full,
    /// UV single scale `f_uv H_h`, `1 <= h <= M`.
    Uv(i32),
    /// `sum_{h' >= h} f_uv H_h'`, `1 <= h <= M`.
    UvFrom(i32),
    /// IR single scale of one valley, `f_h(k - p_F^omega)`, `h_beta <= h <= 0`.
    IrShell { h: i32, omega: usize },
    /// `sum_{h' >= h} f_h'(k - p_F^omega)` over IR scales.
    IrFrom { h: i32, omega: usize },
    /// Single scale `h` of the whole decomposition (UV for `h >= 1`, both valleys for `h <= 0`).
    Shell(i32),
    /// All scales `>= h`.
    From(i32),
}

/// Scale-window data shared by the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    m: i32,
    h_beta: i32,
}

impl Window {
    fn h_factor(&self, h: i32, k0: f64) -> f64 {
        let a = k0.abs();
        if h == 1 {
            chi0(a / 2.0)
        } else {
            chi0(a / 2f64.powi(h)) - chi0(a / 2f64.powi(h - 1))
        }
    }

    /// `sum_{h'=h}^{M} H_h'(k0)`.
    fn h_from(&self, h: i32, k0: f64) -> f64 {
        let top = chi0(k0.abs() / 2f64.powi(self.m));
        if h <= 1 {
            top
        } else {
            top - chi0(k0.abs() / 2f64.powi(h - 1))
        }
    }

    /// `sum_{h'=h}^{0} f_h'(k')` for `|k'| = r`.
    fn ir_from(&self, h: i32, r: f64) -> f64 {
        if h > 0 {
            0.0
        } else if h <= self.h_beta {
            chi0(r)
        } else {
            chi0(r) - chi0(r * 2f64.powi(1 - h))
        }
    }
}

/// Spacetime distance `|(k0, k - p)|` with the spatial part taken modulo the reciprocal lattice.
pub fn valley_distance(geom: &HoneycombGeometry, k0: f64, k: Vec2, omega: usize) -> f64 {
    let d = geom.torus_distance(k, fermi_points()[omega]);
    (k0 * k0 + d * d).sqrt()
}

/// `f_uv(k) = 1 - sum_omega chi0(|k - p_F^omega|)`.
pub fn f_uv(geom: &HoneycombGeometry, k0: f64, k: Vec2) -> f64 {
    1.0 - chi0(valley_distance(geom, k0, k, 0)) - chi0(valley_distance(geom, k0, k, 1))
}

/// The uncut matrix `g0(k)`.
pub fn bare_matrix(v0: f64, k0: f64, omega: Complex64) -> Mat2 {
    let den = k0 * k0 + v0 * v0 * omega.norm_sqr();
    let d = Complex64::new(0.0, k0 / den);
    Mat2::new(d, -v0 * omega.conj() / den, -v0 * omega / den, d)
}

/// Spectral norm of a 2x2 complex matrix.
pub fn op_norm(m: &Mat2) -> f64 {
    let a = m.adjoint() * m;
    let (p, q) = (a[(0, 0)].re, a[(1, 1)].re);
    let r = a[(0, 1)].norm();
    let lam = 0.5 * (p + q) + (0.25 * (p - q).powi(2) + r * r).sqrt();
    lam.max(0.0).sqrt()
}

/// A spacetime point: imaginary time and cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacetime {
    pub x0: f64,
    pub n: [i64; 2],
}

impl Spacetime {
    pub fn new(x0: f64, n1: i64, n2: i64) -> Self {
        Self { x0, n: [n1, n2] }
    }
}

/// A free propagator restricted to part of the scale decomposition.
#[derive(Debug, Clone)]
pub struct ScalePropagator {
    geom: HoneycombGeometry,
    grid: MatsubaraGrid,
    cutoff: Cutoff,
    window: Window,
}

impl ScalePropagator {
    pub fn new(geom: &HoneycombGeometry, grid: &MatsubaraGrid, cutoff: Cutoff) -> Result<Self> {
        let window = Window { m: grid.m() as i32, h_beta: h_beta(grid.beta()) };
        let check = |h: i32, lo: i32, hi: i32| {
            if h < lo || h > hi {
                Err(CrgError::ScaleOutOfRange { h, lo, hi })
            } else {
                Ok(())
            }
        };
        match cutoff {
            Cutoff::Full => {}
            Cutoff::Uv(h) | Cutoff::UvFrom(h) => check(h, 1, window.m)?,
            Cutoff::IrShell { h, omega } | Cutoff::IrFrom { h, omega } => {
                check(h, window.h_beta, 0)?;
                if omega > 1 {
                    return Err(CrgError::InvalidArgument(format!("valley index {omega} not in {{0, 1}}")));
                }
            }
            Cutoff::Shell(h) | Cutoff::From(h) => check(h, window.h_beta, window.m)?,
        }
        Ok(Self { geom: geom.clone(), grid: grid.clone(), cutoff, window })
    }

    /// Full cutoff propagator `chi0(2^-M |k0|) g0`.
    pub fn full(geom: &HoneycombGeometry, grid: &MatsubaraGrid) -> Self {
        Self::new(geom, grid, Cutoff::Full).expect("full cutoff is always in range")
    }

    pub fn geometry(&self) -> &HoneycombGeometry {
        &self.geom
    }

    pub fn grid(&self) -> &MatsubaraGrid {
        &self.grid
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// The cutoff weight at `(k0, k)`.
    pub fn weight(&self, k0: f64, k: Vec2) -> f64 {
        let w = &self.window;
        let g = &self.geom;
        let ir = |h: i32| {
            w.ir_from(h, valley_distance(g, k0, k, 0)) + w.ir_from(h, valley_distance(g, k0, k, 1))
        };
        match self.cutoff {
            Cutoff::Full => chi0(k0.abs() / 2f64.powi(w.m)),
            Cutoff::Uv(h) => f_uv(g, k0, k) * w.h_factor(h, k0),
            Cutoff::UvFrom(h) => f_uv(g, k0, k) * w.h_from(h, k0),
            Cutoff::IrShell { h, omega } => {
                let r = valley_distance(g, k0, k, omega);
                w.ir_from(h, r) - w.ir_from(h + 1, r)
            }
            Cutoff::IrFrom { h, omega } => w.ir_from(h, valley_distance(g, k0, k, omega)),
            Cutoff::Shell(h) if h >= 1 => f_uv(g, k0, k) * w.h_factor(h, k0),
            Cutoff::Shell(h) => ir(h) - ir(h + 1),
            Cutoff::From(h) if h >= 1 => f_uv(g, k0, k) * w.h_from(h, k0),
            Cutoff::From(h) => f_uv(g, k0, k) * w.h_from(1, k0) + ir(h),
        }
    }

    /// `g_hat(k)` at frequency index `i` and grid momentum `(m1, m2)`.
    pub fn momentum(&self, i: usize, m1: usize, m2: usize) -> Mat2 {
        let k0 = self.grid.k0(self.grid.n_values()[i]);
        let k = self.geom.momentum(m1, m2).cartesian;
        let w = self.weight(k0, k);
        if w == 0.0 {
            return Mat2::zeros();
        }
        bare_matrix(self.geom.v0(), k0, dispersion(k)) * Complex64::new(w, 0.0)
    }

    /// Momentum-space table indexed `[i * L^2 + m1 * L + m2]`.
    pub fn momentum_table(&self) -> MomentumTable {
        let l = self.geom.l();
        let mut data = Vec::with_capacity(self.grid.len() * l * l);
        for i in 0..self.grid.len() {
            for m1 in 0..l {
                for m2 in 0..l {
                    data.push(self.momentum(i, m1, m2));
                }
            }
        }
        MomentumTable { nf: self.grid.len(), nk: l * l, beta: self.grid.beta(), data }
    }

    /// Direct evaluation of `g(x) = (1/(beta |Lambda|)) sum_k e^{-ik.x} g_hat(k)`.
    pub fn at(&self, x: Spacetime) -> Mat2 {
        let l = self.geom.l();
        let v0 = self.geom.v0();
        let nf = self.grid.len();
        let mut acc = Mat2::zeros();
        for m1 in 0..l {
            for m2 in 0..l {
                let kp = self.geom.momentum(m1, m2);
                let phase = spatial_phase(l, m1, m2, x.n);
                let om = dispersion(kp.cartesian);
                let mut diag = 0.0;
                let mut off = 0.0;
                for i in nf / 2..nf {
                    let k0 = self.grid.k0(self.grid.n_values()[i]);
                    let w = self.weight(k0, kp.cartesian);
                    if w == 0.0 {
                        continue;
                    }
                    let c = w / (k0 * k0 + v0 * v0 * om.norm_sqr());
                    let (s, co) = (k0 * x.x0).sin_cos();
                    diag += 2.0 * k0 * c * s;
                    off += 2.0 * c * co;
                }
                let d = Complex64::new(diag, 0.0) * phase;
                acc[(0, 0)] += d;
                acc[(1, 1)] += d;
                acc[(0, 1)] += -v0 * om.conj() * off * phase;
                acc[(1, 0)] += -v0 * om * off * phase;
            }
        }
        acc / Complex64::new(self.grid.beta() * (l * l) as f64, 0.0)
    }

    /// Valley-shifted infrared propagator
    /// `gbar(x) = (1/(beta |Lambda|)) sum_{k'} e^{-ik'.x} w(k') g0(k' + p_F)`, summing over
    /// the shifted grid `k' = k - p_F^omega`.
    pub fn valley_at(&self, omega: usize, x: Spacetime) -> Mat2 {
        let l = self.geom.l();
        let v0 = self.geom.v0();
        let nf = self.grid.len();
        let pf = fermi_points()[omega];
        let xv = self.geom.cell_position(x.n[0], x.n[1]);
        let mut acc = Mat2::zeros();
        for kp in self.geom.momenta() {
            let k = kp.cartesian;
            let q = [k[0] - pf[0], k[1] - pf[1]];
            let phase = Complex64::from_polar(1.0, -(q[0] * xv[0] + q[1] * xv[1]));
            let om = dispersion(k);
            for i in 0..nf {
                let k0 = self.grid.k0(self.grid.n_values()[i]);
                let w = self.weight(k0, k);
                if w == 0.0 {
                    continue;
                }
                let t = Complex64::from_polar(1.0, -k0 * x.x0) * phase * w;
                acc += bare_matrix(v0, k0, om) * t;
            }
        }
        acc / Complex64::new(self.grid.beta() * (l * l) as f64, 0.0)
    }

    /// Position table on `x0 = beta j / nt`, `j in [0, nt)`, and all cells, by FFT.
    pub fn position_table(&self, nt: usize) -> PositionTable {
        self.momentum_table().to_position(self.grid.n_values(), self.geom.l(), nt)
    }

    /// Gram representation `g(x - y) = <A_x, B_y>` on the given points.
    pub fn gram_factorize(&self, points: &[Spacetime]) -> GramFactor {
        let l = self.geom.l();
        let norm = 1.0 / (self.grid.beta() * (l * l) as f64);
        let v0 = self.geom.v0();
        let mut modes = Vec::new();
        for kp in self.geom.momenta() {
            let om = dispersion(kp.cartesian);
            for &n in self.grid.n_values() {
                let k0 = self.grid.k0(n);
                let w = self.weight(k0, kp.cartesian);
                if w > 0.0 {
                    modes.push((k0, kp, om, w));
                }
            }
        }
        let dim = 2 * modes.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in points {
            for rho in 0..2 {
                let mut va = vec![ZERO; dim];
                let mut vb = vec![ZERO; dim];
                for (j, (k0, kp, om, w)) in modes.iter().enumerate() {
                    let den = k0 * k0 + v0 * v0 * om.norm_sqr();
                    let sa = (norm * w).sqrt() / den.powf(0.25);
                    let sb = (norm * w).sqrt() / den.powf(0.75);
                    let ph = Complex64::from_polar(1.0, k0 * p.x0) * spatial_phase(l, kp.m1, kp.m2, p.n).conj();
                    // <A_x, B_y> = sum conj(A) B: A carries e^{+ikx}, B carries e^{+iky} M.
                    va[2 * j + rho] = ph * sa;
                    let mm = bare_matrix(v0, *k0, *om) * Complex64::new(den, 0.0);
                    for r in 0..2 {
                        vb[2 * j + r] = ph * sb * mm[(r, rho)];
                    }
                }
                a.push(va);
                b.push(vb);
            }
        }
        GramFactor { a, b }
    }
}

/// `e^{-i k.x}` for grid momentum `(m1, m2)` and cell `n`.
pub fn spatial_phase(l: usize, m1: usize, m2: usize, n: [i64; 2]) -> Complex64 {
    let li = l as i64;
    let s = ((m1 as i64 * n[0] + m2 as i64 * n[1]).rem_euclid(li)) as f64;
    Complex64::from_polar(1.0, -2.0 * PI * s / l as f64)
}

/// Momentum-space values of a propagator on the `B_beta^(M) x B_L` grid.
#[derive(Debug, Clone)]
pub struct MomentumTable {
    pub nf: usize,
    pub nk: usize,
    pub beta: f64,
    pub data: Vec<Mat2>,
}

impl MomentumTable {
    pub fn get(&self, i: usize, m: usize) -> &Mat2 {
        &self.data[i * self.nk + m]
    }

    /// FFT to position space on `nt` equally spaced times in `[0, beta)`.
    pub fn to_position(&self, n_values: &[i64], l: usize, nt: usize) -> PositionTable {
        let nk = l * l;
        let scale = 1.0 / (self.beta * nk as f64);
        let mut entries: Vec<Vec<Complex64>> = vec![vec![ZERO; nt * nk]; 4];
        for (i, &n) in n_values.iter().enumerate() {
            let bin = n.rem_euclid(nt as i64) as usize;
            for m in 0..nk {
                let g = self.get(i, m);
                for (e, (r, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    entries[e][bin * nk + m] += g[(*r, *c)] * scale;
                }
            }
        }
        for buf in entries.iter_mut() {
            fft_3d(buf, nt, l, false);
            for j in 0..nt {
                let tw = Complex64::from_polar(1.0, -PI * j as f64 / nt as f64);
                for v in &mut buf[j * nk..(j + 1) * nk] {
                    *v *= tw;
                }
            }
        }
        let mut data = Vec::with_capacity(nt * nk);
        for idx in 0..nt * nk {
            data.push(Mat2::new(entries[0][idx], entries[1][idx], entries[2][idx], entries[3][idx]));
        }
        PositionTable { nt, l, beta: self.beta, data }
    }
}

/// In-place unnormalized 3D FFT of a `(nt, l, l)` row-major array; `inverse`
/// selects the `e^{+2 pi i ...}` direction.
fn fft_3d(buf: &mut [Complex64], nt: usize, l: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = |p: &mut FftPlanner<f64>, n: usize| if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) };
    let nk = l * l;
    if l > 1 {
        let f = plan(&mut planner, l);
        // Last axis is contiguous.
        f.process(buf);
        let mut line = vec![ZERO; l];
        for t in 0..nt {
            for m2 in 0..l {
                for m1 in 0..l {
                    line[m1] = buf[t * nk + m1 * l + m2];
                }
                f.process(&mut line);
                for m1 in 0..l {
                    buf[t * nk + m1 * l + m2] = line[m1];
                }
            }
        }
    }
    if nt > 1 {
        let f = plan(&mut planner, nt);
        let mut line = vec![ZERO; nt];
        for m in 0..nk {
            for t in 0..nt {
                line[t] = buf[t * nk + m];
            }
            f.process(&mut line);
            for t in 0..nt {
                buf[t * nk + m] = line[t];
            }
        }
    }
}

/// Position-space values on a uniform time grid, extended antiperiodically.
#[derive(Debug, Clone)]
pub struct PositionTable {
    pub nt: usize,
    pub l: usize,
    pub beta: f64,
    pub data: Vec<Mat2>,
}

impl PositionTable {
    /// `g(beta j / nt, n)` for any integer `j`, using `g(x0 + beta) = -g(x0)`.
    pub fn get(&self, j: i64, n1: i64, n2: i64) -> Mat2 {
        let nt = self.nt as i64;
        let wraps = j.div_euclid(nt);
        let jj = j.rem_euclid(nt) as usize;
        let li = self.l as i64;
        let m = (n1.rem_euclid(li) * li + n2.rem_euclid(li)) as usize;
        let v = self.data[jj * self.l * self.l + m];
        if wraps % 2 == 0 {
            v
        } else {
            -v
        }
    }

    /// `f_hat(k) = int dz e^{ikz} f(z)` on the given fermionic frequencies, as a Riemann
    /// sum over the table; exact for trigonometric polynomials of degree below `nt`.
    pub fn to_momentum(&self, n_values: &[i64]) -> MomentumTable {
        let (nt, l) = (self.nt, self.l);
        let nk = l * l;
        let dt = self.beta / nt as f64;
        let mut entries: Vec<Vec<Complex64>> = vec![vec![ZERO; nt * nk]; 4];
        for j in 0..nt {
            let tw = Complex64::from_polar(dt, PI * j as f64 / nt as f64);
            for m in 0..nk {
                let v = self.data[j * nk + m];
                for (e, (r, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    entries[e][j * nk + m] = v[(*r, *c)] * tw;
                }
            }
        }
        for buf in entries.iter_mut() {
            fft_3d(buf, nt, l, true);
        }
        let mut data = Vec::with_capacity(n_values.len() * nk);
        for &n in n_values {
            let bin = n.rem_euclid(nt as i64) as usize;
            for m in 0..nk {
                let idx = bin * nk + m;
                data.push(Mat2::new(entries[0][idx], entries[1][idx], entries[2][idx], entries[3][idx]));
            }
        }
        MomentumTable { nf: n_values.len(), nk, beta: self.beta, data }
    }

    pub fn time(&self, j: i64) -> f64 {
        self.beta * j as f64 / self.nt as f64
    }

    /// Sup over the table of the spectral norm.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(op_norm).fold(0.0, f64::max)
    }

    /// Riemann-sum approximation of `int dx ||g(x)||`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(op_norm).sum::<f64>() * self.beta / self.nt as f64
    }

    /// `sup_x (1 + (2^h |x0|_beta + |x|_Lambda)^K) ||g(x)||`.
    pub fn weighted_sup(&self, geom: &HoneycombGeometry, h: i32, k: i32) -> f64 {
        let nk = self.l * self.l;
        let mut best = 0.0_f64;
        for j in 0..self.nt {
            let t = self.time(j as i64);
            let t_torus = t.min(self.beta - t);
            for m in 0..nk {
                let (n1, n2) = ((m / self.l) as i64, (m % self.l) as i64);
                let dx = lattice_torus_distance(geom, n1, n2);
                let w = 1.0 + (2f64.powi(h) * t_torus + dx).powi(k);
                best = best.max(w * op_norm(&self.data[j * nk + m]));
            }
        }
        best
    }
}

/// `|x|_Lambda`: Euclidean distance of cell `(n1, n2)` from the origin on the periodic lattice.
pub fn lattice_torus_distance(geom: &HoneycombGeometry, n1: i64, n2: i64) -> f64 {
    let li = geom.l() as i64;
    let mut best = f64::INFINITY;
    for a in -1..=1 {
        for b in -1..=1 {
            let p = geom.cell_position(n1.rem_euclid(li) + a * li, n2.rem_euclid(li) + b * li);
            best = best.min(p[0].hypot(p[1]));
        }
    }
    best
}

/// Vectors realizing `M_ij = <A_i, B_j> = sum conj(A_i) B_j`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub a: Vec<Vec<Complex64>>,
    pub b: Vec<Vec<Complex64>>,
}

impl GramFactor {
    pub fn inner(&self, i: usize, j: usize) -> Complex64 {
        self.a[i].iter().zip(&self.b[j]).map(|(x, y)| x.conj() * y).sum()
    }

    pub fn norm_a_sq(&self, i: usize) -> f64 {
        self.a[i].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm_b_sq(&self, j: usize) -> f64 {
        self.b[j].iter().map(|z| z.norm_sqr()).sum()
    }
}

/// One row of the decay-bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub regime: &'static str,
    pub h: i32,
    pub k: i32,
    pub value: f64,
}

/// Weighted sup norms `sup_x (1 + (2^h |x0| + |x|)^K) ||g^(h)(x)||` for UV scales.
pub fn decay_bound_report(geom: &HoneycombGeometry, grid: &MatsubaraGrid, h_range: &[i32], k_list: &[i32]) -> Result<Vec<DecayRow>> {
    let nt = (4 * grid.len() + 8).next_power_of_two();
    let mut rows = Vec::new();
    for &h in h_range {
        let table = ScalePropagator::new(geom, grid, Cutoff::Uv(h))?.position_table(nt);
        for &k in k_list {
            rows.push(DecayRow { regime: "uv", h, k, value: table.weighted_sup(geom, h, k) });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi0_support() {
        assert_eq!(chi0(0.2), 1.0);
        assert_eq!(chi0(0.8), 0.0);
        let v = chi0(0.5);
        assert!(v > 0.0 && v < 1.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let t = 1.0 / 3.0 + i as f64 / 300.0;
            let c = chi0(t);
            assert!(c <= prev + 1e-15);
            prev = c;
        }
        assert!((chi0(0.5) - 0.5).abs() < 1e-15, "symmetric profile crosses 1/2 at the midpoint");
    }

    #[test]
    fn chi0_smooth_derivatives() {
        // Finite-difference derivatives up to order 4 stay bounded across the edges.
        let h = 1e-3;
        for &t0 in &[1.0 / 3.0, 2.0 / 3.0] {
            for s in -5..=5 {
                let t = t0 + s as f64 * h;
                let d4 = (chi0(t + 2.0 * h) - 4.0 * chi0(t + h) + 6.0 * chi0(t) - 4.0 * chi0(t - h) + chi0(t - 2.0 * h)) / h.powi(4);
                assert!(d4.abs() < 1e5);
            }
        }
    }

    #[test]
    fn h_beta_example() {
        assert_eq!(h_beta(10.0), -3);
    }

    #[test]
    fn matsubara_grid_retains_support() {
        let g = MatsubaraGrid::new(2.0, 6).unwrap();
        for (i, &n) in g.n_values().iter().enumerate() {
            let k0 = g.k0(n);
            assert!(chi0(k0.abs() / 64.0) > 0.0);
            assert_eq!(g.k0(g.n_values()[g.partner(i)]), -k0);
        }
        let next = g.k0(*g.n_values().last().unwrap() + 1);
        assert_eq!(chi0(next / 64.0), 0.0);
        assert!(MatsubaraGrid::new(-1.0, 3).is_err());
    }

    #[test]
    fn telescoping_weights() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(8.0, 5).unwrap();
        let full = ScalePropagator::full(&geom, &grid);
        let hb = h_beta(8.0);
        let shells: Vec<_> = (hb..=5).map(|h| ScalePropagator::new(&geom, &grid, Cutoff::Shell(h)).unwrap()).collect();
        for kp in geom.momenta() {
            for k0 in grid.frequencies() {
                let s: f64 = shells.iter().map(|p| p.weight(k0, kp.cartesian)).sum();
                assert!((s - full.weight(k0, kp.cartesian)).abs() < 1e-12);
                for h in hb..=5 {
                    let from = ScalePropagator::new(&geom, &grid, Cutoff::From(h)).unwrap().weight(k0, kp.cartesian);
                    let part: f64 = shells[(h - hb) as usize..].iter().map(|p| p.weight(k0, kp.cartesian)).sum();
                    assert!((from - part).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn uv_tadpole_vanishes() {
        let geom = HoneycombGeometry::new(2).unwrap();
        let grid = MatsubaraGrid::new(4.0, 6).unwrap();
        for h in 1..=6 {
            let g = ScalePropagator::new(&geom, &grid, Cutoff::Uv(h)).unwrap().at(Spacetime::new(0.0, 0, 0));
            assert_eq!(g[(0, 0)], ZERO);
            assert_eq!(g[(1, 1)], ZERO);
        }
        assert!(ScalePropagator::new(&geom, &grid, Cutoff::Uv(7)).is_err());
    }

    #[test]
    fn fft_table_matches_direct_sum() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(3.0, 3).unwrap();
        let p = ScalePropagator::full(&geom, &grid);
        let nt = 16;
        let table = p.position_table(nt);
        for j in [-20i64, -3, 0, 5, 15] {
            for (n1, n2) in [(0, 0), (1, 2), (2, 1)] {
                let d = p.at(Spacetime::new(table.time(j), n1, n2));
                assert!((table.get(j, n1, n2) - d).norm() < 1e-12);
            }
        }
        // Antiperiodicity on the extended table.
        assert!((table.get(3 + nt as i64, 1, 0) + table.get(3, 1, 0)).norm() < 1e-15);
    }

    #[test]
    fn momentum_round_trip() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(2.0, 3).unwrap();
        let p = ScalePropagator::new(&geom, &grid, Cutoff::Uv(2)).unwrap();
        let mt = p.momentum_table();
        let back = mt.to_position(grid.n_values(), 3, 2 * grid.len() + 1).to_momentum(grid.n_values());
        for (a, b) in mt.data.iter().zip(&back.data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn valley_decomposition() {
        let geom = HoneycombGeometry::new(3).unwrap();
        let grid = MatsubaraGrid::new(10.0, 2).unwrap();
        let hb = h_beta(10.0);
        for h in hb..=0 {
            let both = ScalePropagator::new(&geom, &grid, Cutoff::Shell(h)).unwrap();
            for x in [Spacetime::new(0.3, 1, 2), Spacetime::new(-1.7, 0, 1)] {
                let mut sum = Mat2::zeros();
                for omega in 0..2 {
                    let v = ScalePropagator::new(&geom, &grid, Cutoff::IrShell { h, omega }).unwrap();
                    let pf = fermi_points()[omega];
                    let xv = geom.cell_position(x.n[0], x.n[1]);
                    sum += v.valley_at(omega, x) * Complex64::from_polar(1.0, -(pf[0] * xv[0] + pf[1] * xv[1]));
                }
                assert!((sum - both.at(x)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_reproduces_entries() {
        let geom = HoneycombGeometry::new(2).unwrap();
        let grid = MatsubaraGrid::new(2.0, 3).unwrap();
        let p = ScalePropagator::new(&geom, &grid, Cutoff::Uv(2)).unwrap();
        let pts = [Spacetime::new(0.0, 0, 0), Spacetime::new(0.4, 1, 0), Spacetime::new(-0.3, 1, 1)];
        let gf = p.gram_factorize(&pts);
        for (i, x) in pts.iter().enumerate() {
            for (j, y) in pts.iter().enumerate() {
                let g = p.at(Spacetime::new(x.x0 - y.x0, x.n[0] - y.n[0], x.n[1] - y.n[1]));
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((gf.inner(2 * i + r, 2 * j + c) - g[(r, c)]).norm() < 1e-10);
                    }
                }
            }
        }
        assert!((gf.norm_a_sq(0) - gf.norm_b_sq(0)).abs() < 1e-12 * gf.norm_a_sq(0));
    }

    #[test]
    fn op_norm_matches_definition() {
        let m = Mat2::new(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), ZERO, Complex64::new(0.0, 1.0));
        let s = m.singular_values();
        assert!((op_norm(&m) - s.max()).abs() < 1e-12);
    }
}
