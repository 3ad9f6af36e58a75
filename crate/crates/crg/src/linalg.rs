//! Thin wrappers over LAPACK and small numerical helpers.

use crate::error::{CrgError, Result};
use gauss_quad::GaussLegendre;
use lapack_sys::dsyevd_;
use std::os::raw::c_char;

/// Eigenvalues (ascending) of a real symmetric `n x n` matrix stored densely.
/// Only the upper triangle in column-major order (equivalently the lower
/// triangle in row-major order) is read; the buffer is overwritten.
pub fn eigvalsh(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix buffer has the wrong size");
    if n == 0 {
        return Ok(Vec::new());
    }
    let jobz = b'N' as c_char;
    let uplo = b'U' as c_char;
    let nn = n as i32;
    let mut w = vec![0.0; n];
    let mut info = 0i32;
    let mut work_q = 0.0f64;
    let mut iwork_q = 0i32;
    let query = -1i32;
    unsafe {
        dsyevd_(&jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(), &mut work_q, &query, &mut iwork_q, &query, &mut info);
    }
    if info != 0 {
        return Err(CrgError::Lapack { routine: "dsyevd", info });
    }
    let lwork = work_q as i32;
    let liwork = iwork_q;
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        dsyevd_(&jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(), work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info);
    }
    if info != 0 {
        return Err(CrgError::Lapack { routine: "dsyevd", info });
    }
    Ok(w)
}

/// Gauss-Legendre nodes and weights on `[0, 1]` exact for polynomials of degree `< 2q`.
pub fn gauss_legendre_unit(q: usize) -> Vec<(f64, f64)> {
    if q <= 1 {
        return vec![(0.5, 1.0)];
    }
    let rule = GaussLegendre::new(q).expect("degree >= 2");
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// `log(sum exp(x_i))` computed stably.
pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigvalsh_small() {
        let mut a = vec![2.0, 1.0, 1.0, 2.0];
        let w = eigvalsh(&mut a, 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for q in 1..6usize {
            let rule = gauss_legendre_unit(q);
            for d in 0..(2 * q) {
                let s: f64 = rule.iter().map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "q={q} d={d}");
            }
        }
    }

    #[test]
    fn lse() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(v.iter().copied()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
