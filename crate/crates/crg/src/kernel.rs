//! Two-legged kernels on the momentum grid and the order-`U^2` building blocks:
//! the sunset kernel and the four-line vacuum bubble.
//!
//! With `V = U sum_rho int dx psi+_up psi-_up psi+_dn psi-_dn` and the effective
//! potential defined by `e^{-V_eff(phi)} = int P(dpsi) e^{-V(psi + phi)}`, the
//! order-`U^2` quadratic part is `int dx dy phi+_x W(x - y) phi-_y` with
//!
//! `W_{rho rho'}(z) = U^2 g_{rho rho'}(z)^2 g_{rho' rho}(-z)`,
//!
//! and `W_hat(k) = int dz e^{ikz} W(z)` enters as `(1/(beta|Lambda|)) sum_k psi+_k W_hat(k) psi-_k`.
//! The order-`U^2` free energy is `-(U^2/2) B(g, g, g, g)` with
//!
//! `B(a, b, c, d) = sum_{rho rho'} int dz a_{rho rho'}(z) b_{rho' rho}(-z) c_{rho rho'}(z) d_{rho' rho}(-z)`.
//!
//! All `z` integrals are Riemann sums over `nt` time slices, exact when `nt`
//! exceeds the total frequency range of the integrand (`nt >= 2|B_beta| + 3`).

use crate::error::{CrgError, Result};
use crate::propagators::{op_norm, Mat2, MatsubaraGrid, MomentumTable, PositionTable};
use num_complex::Complex64;

/// Time slices that make every order-`U^2` integral over `z` exact.
pub fn exact_slices(grid: &MatsubaraGrid) -> usize {
    2 * grid.len() + 3
}

/// A two-legged kernel `W_hat(k)` (2x2 in the sublattice index) on `B_beta x B_L`,
/// spin independent, indexed `[i * L^2 + m1 * L + m2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    /// Scale label of the kernel (the scale of the effective potential it belongs to).
    pub h: i32,
    /// Order in `U`.
    pub order: usize,
    pub l: usize,
    pub beta: f64,
    pub n_values: Vec<i64>,
    pub data: Vec<Mat2>,
}

impl KernelTable {
    pub fn zeros(grid: &MatsubaraGrid, l: usize, h: i32, order: usize) -> Self {
        let n = grid.len() * l * l;
        Self { h, order, l, beta: grid.beta(), n_values: grid.n_values().to_vec(), data: vec![Mat2::zeros(); n] }
    }

    pub fn from_momentum(table: MomentumTable, grid: &MatsubaraGrid, l: usize, h: i32, order: usize) -> Self {
        Self { h, order, l, beta: grid.beta(), n_values: grid.n_values().to_vec(), data: table.data }
    }

    pub fn nf(&self) -> usize {
        self.n_values.len()
    }

    pub fn nk(&self) -> usize {
        self.l * self.l
    }

    pub fn get(&self, i: usize, m1: usize, m2: usize) -> Mat2 {
        self.data[i * self.nk() + m1 * self.l + m2]
    }

    /// Index of Matsubara label `n`, if kept.
    pub fn freq_index(&self, n: i64) -> Option<usize> {
        let i = n - self.n_values.first().copied()?;
        (0..self.nf() as i64).contains(&i).then_some(i as usize)
    }

    pub fn k0(&self, i: usize) -> f64 {
        (2 * self.n_values[i] + 1) as f64 * std::f64::consts::PI / self.beta
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(op_norm).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|m| m.iter().all(|z| *z == Complex64::default()))
    }

    /// Position-space kernel on `nt` slices.
    pub fn to_position(&self, nt: usize) -> PositionTable {
        let mt = MomentumTable { nf: self.nf(), nk: self.nk(), beta: self.beta, data: self.data.clone() };
        mt.to_position(&self.n_values, self.l, nt)
    }

    /// Riemann sum of `int dz ||W(z)||` on `nt` slices.
    pub fn l1_norm(&self, nt: usize) -> f64 {
        self.to_position(nt).l1_norm()
    }

    /// Entrywise `self - other` on a shared grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..self.clone() })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)).fold(0.0, f64::max))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.l != other.l || self.n_values != other.n_values || self.beta != other.beta {
            return Err(CrgError::InvalidArgument("kernel tables live on different grids".into()));
        }
        Ok(())
    }
}

/// Index and sign of `f(-z)` for the table entry at slice `j`, cell index `m`.
fn reflected(t: &PositionTable, j: usize, m: usize) -> (usize, f64) {
    let l = t.l;
    let (n1, n2) = (m / l, m % l);
    let mr = ((l - n1) % l) * l + (l - n2) % l;
    if j == 0 {
        (mr, 1.0)
    } else {
        ((t.nt - j) * l * l + mr, -1.0)
    }
}

fn check_tables(ts: &[&PositionTable]) -> Result<()> {
    let (nt, l) = (ts[0].nt, ts[0].l);
    if ts.iter().any(|t| t.nt != nt || t.l != l) {
        return Err(CrgError::InvalidArgument("position tables must share nt and L".into()));
    }
    Ok(())
}

/// The sunset kernel `W_{rho rho'}(z) = U^2 a_{rho rho'}(z) b_{rho rho'}(z) c_{rho' rho}(-z)`.
pub fn sunset(a: &PositionTable, b: &PositionTable, c: &PositionTable, u: f64) -> Result<PositionTable> {
    check_tables(&[a, b, c])?;
    let nk = a.l * a.l;
    let u2 = u * u;
    let mut data = Vec::with_capacity(a.data.len());
    for j in 0..a.nt {
        for m in 0..nk {
            let idx = j * nk + m;
            let (ri, s) = reflected(c, j, m);
            let (x, y, z) = (&a.data[idx], &b.data[idx], &c.data[ri]);
            let mut w = Mat2::zeros();
            for r in 0..2 {
                for q in 0..2 {
                    w[(r, q)] = x[(r, q)] * y[(r, q)] * z[(q, r)] * (s * u2);
                }
            }
            data.push(w);
        }
    }
    Ok(PositionTable { nt: a.nt, l: a.l, beta: a.beta, data })
}

/// `B(a, b, c, d)`, see the module documentation.
pub fn bubble(a: &PositionTable, b: &PositionTable, c: &PositionTable, d: &PositionTable) -> Result<Complex64> {
    check_tables(&[a, b, c, d])?;
    let nk = a.l * a.l;
    let mut acc = Complex64::default();
    for j in 0..a.nt {
        for m in 0..nk {
            let idx = j * nk + m;
            // Both reflected factors carry the same antiperiodicity sign, which squares away.
            let (ri, _) = reflected(b, j, m);
            let (x, y, z, w) = (&a.data[idx], &b.data[ri], &c.data[idx], &d.data[ri]);
            for r in 0..2 {
                for q in 0..2 {
                    acc += x[(r, q)] * y[(q, r)] * z[(r, q)] * w[(q, r)];
                }
            }
        }
    }
    Ok(acc * (a.beta / a.nt as f64))
}

/// Sunset kernel of three identical lines, as a momentum-grid table.
pub fn sunset_kernel(lines: &PositionTable, grid: &MatsubaraGrid, u: f64, h: i32) -> Result<KernelTable> {
    let w = sunset(lines, lines, lines, u)?;
    Ok(KernelTable::from_momentum(w.to_momentum(grid.n_values()), grid, lines.l, h, 2))
}

/// `(1/(beta|Lambda|)) sum_{spin} sum_k sum_{n>=1} ((-1)^n / n) Tr[(G(k) W(k))^n]`, truncated
/// once a term drops below `1e-14` (or after 200 terms). Returns the value and the linear term.
pub fn trace_log(g: &KernelTable, w: &KernelTable) -> Result<(f64, f64)> {
    g.check_same(w)?;
    let vol = g.beta * g.nk() as f64;
    let mut total = 0.0;
    let mut linear = 0.0;
    for (a, b) in g.data.iter().zip(&w.data) {
        let x = a * b;
        let mut p = x;
        for n in 1..=200 {
            let term = p.trace() * (if n % 2 == 0 { 1.0 } else { -1.0 } / n as f64);
            total += term.re;
            if n == 1 {
                linear += term.re;
            }
            if term.norm() < 1e-14 {
                break;
            }
            p *= x;
        }
    }
    Ok((2.0 * total / vol, 2.0 * linear / vol))
}
