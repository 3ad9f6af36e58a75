//! Feynman-graph expansion of `E(V^N)` and `E^T(V; N)` for the Hubbard vertex.
//!
//! A graph of order `N` is a pair of permutations `(pi_up, pi_down)` of the
//! vertices: the `psi^-` of spin `s` at vertex `i` is contracted with the
//! `psi^+` of spin `s` at vertex `pi_s(i)`. Its sign is
//! `sgn(pi_up) sgn(pi_down)`.

use crate::error::{CrgError, Result};
use crate::propagators::{MatsubaraGrid, MomentumTable};
use num_complex::Complex64;
use std::collections::HashMap;

/// One interaction vertex: `psi+_up psi-_up psi+_dn psi-_dn` at `(x, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphElement {
    pub vertex_id: usize,
    pub rho: u8,
}

/// A contraction line from the `psi^+` at `plus_vertex` to the `psi^-` at `minus_vertex`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Line {
    pub spin: u8,
    pub minus_vertex: usize,
    pub plus_vertex: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeynmanGraph {
    pub perm_up: Vec<usize>,
    pub perm_down: Vec<usize>,
    pub sign: i32,
}

impl FeynmanGraph {
    pub fn new(perm_up: Vec<usize>, perm_down: Vec<usize>) -> Self {
        let sign = perm_sign(&perm_up) * perm_sign(&perm_down);
        Self { perm_up, perm_down, sign }
    }

    pub fn order(&self) -> usize {
        self.perm_up.len()
    }

    pub fn lines(&self) -> Vec<Line> {
        let mut out = Vec::with_capacity(2 * self.order());
        for (spin, p) in [(0u8, &self.perm_up), (1u8, &self.perm_down)] {
            for (i, &j) in p.iter().enumerate() {
                out.push(Line { spin, minus_vertex: i, plus_vertex: j });
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.order();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut comps = n;
        for l in self.lines() {
            let (a, b) = (find(&mut parent, l.minus_vertex), find(&mut parent, l.plus_vertex));
            if a != b {
                parent[a] = b;
                comps -= 1;
            }
        }
        comps == 1
    }

    /// Vertices relabelled by `tau`: vertex `i` becomes `tau[i]`.
    pub fn relabel(&self, tau: &[usize]) -> Self {
        let n = self.order();
        let mut up = vec![0; n];
        let mut dn = vec![0; n];
        for i in 0..n {
            up[tau[i]] = tau[self.perm_up[i]];
            dn[tau[i]] = tau[self.perm_down[i]];
        }
        Self::new(up, dn)
    }
}

pub fn perm_sign(p: &[usize]) -> i32 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1;
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut j = s;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Next permutation in lexicographic order; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Streams all `(N!)^2` graphs of order `N` without materializing them.
pub struct PairingIter {
    up: Vec<usize>,
    down: Vec<usize>,
    done: bool,
}

impl Iterator for PairingIter {
    type Item = FeynmanGraph;

    fn next(&mut self) -> Option<FeynmanGraph> {
        if self.done {
            return None;
        }
        let g = FeynmanGraph::new(self.up.clone(), self.down.clone());
        if !next_permutation(&mut self.down) {
            self.down.sort_unstable();
            if !next_permutation(&mut self.up) {
                self.done = true;
            }
        }
        Some(g)
    }
}

pub fn enumerate_pairings(n: usize) -> Result<PairingIter> {
    if n == 0 {
        return Err(CrgError::InvalidArgument("graphs need at least one vertex".into()));
    }
    Ok(PairingIter { up: (0..n).collect(), down: (0..n).collect(), done: false })
}

pub fn connected_only(graphs: impl Iterator<Item = FeynmanGraph>) -> impl Iterator<Item = FeynmanGraph> {
    graphs.filter(FeynmanGraph::is_connected)
}

/// Number of connected graphs from `(N!)^2` by the labelled exponential formula
/// `a_N = sum_k C(N-1, k-1) c_k a_{N-k}`.
pub fn connected_count_formula(n: usize) -> u128 {
    let fact = |k: usize| (1..=k as u128).product::<u128>();
    let binom = |a: usize, b: usize| fact(a) / (fact(b) * fact(a - b));
    let a: Vec<u128> = (0..=n).map(|k| fact(k) * fact(k)).collect();
    let mut c = vec![0u128; n + 1];
    for m in 1..=n {
        let mut rest = a[m];
        for k in 1..m {
            rest -= binom(m - 1, k - 1) * c[k] * a[m - k];
        }
        c[m] = rest;
    }
    c[n]
}

/// Momentum-space graph valuation on a Matsubara-truncated grid.
///
/// `Val = sigma U^N (beta|Lambda|)^{-N} sum_rho sum_{line momenta} prod g_hat prod delta`,
/// with time integrals done exactly through frequency conservation.
pub struct DiagramEvaluator {
    table: MomentumTable,
    n_values: Vec<i64>,
    n_index: HashMap<i64, usize>,
    l: usize,
    u: f64,
}

/// A momentum `(n, m1, m2)` with `n` the Matsubara integer.
type Mom = (i64, i64, i64);

impl DiagramEvaluator {
    pub fn new(table: MomentumTable, grid: &MatsubaraGrid, l: usize, u: f64) -> Self {
        let n_values = grid.n_values().to_vec();
        let n_index = n_values.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        Self { table, n_values, n_index, l, u }
    }

    pub fn volume(&self) -> f64 {
        self.table.beta * (self.l * self.l) as f64
    }

    fn ghat(&self, k: Mom, r: u8, c: u8) -> Complex64 {
        let Some(&i) = self.n_index.get(&k.0) else { return Complex64::default() };
        let li = self.l as i64;
        let m = (k.1.rem_euclid(li) * li + k.2.rem_euclid(li)) as usize;
        self.table.get(i, m)[(r as usize, c as usize)]
    }

    pub fn value(&self, graph: &FeynmanGraph) -> Complex64 {
        let n = graph.order();
        let lines = graph.lines();
        // Lowest-index DFS spanning forest over the vertices.
        let mut in_tree = vec![false; lines.len()];
        let mut visited = vec![false; n];
        let mut parent_line: Vec<Option<usize>> = vec![None; n];
        let mut order = Vec::with_capacity(n);
        for root in 0..n {
            if visited[root] {
                continue;
            }
            let mut stack = vec![root];
            visited[root] = true;
            while let Some(v) = stack.pop() {
                order.push(v);
                for (li, l) in lines.iter().enumerate() {
                    let other = if l.minus_vertex == v {
                        l.plus_vertex
                    } else if l.plus_vertex == v {
                        l.minus_vertex
                    } else {
                        continue;
                    };
                    if !visited[other] {
                        visited[other] = true;
                        in_tree[li] = true;
                        parent_line[other] = Some(li);
                        stack.push(other);
                    }
                }
            }
        }
        let free: Vec<usize> = (0..lines.len()).filter(|&i| !in_tree[i]).collect();
        let modes: Vec<Mom> = {
            let li = self.l as i64;
            let mut v = Vec::new();
            for &nn in &self.n_values {
                for a in 0..li {
                    for b in 0..li {
                        v.push((nn, a, b));
                    }
                }
            }
            v
        };
        let nm = modes.len();
        let mut counter = vec![0usize; free.len()];
        let mut total = Complex64::default();
        let mut k = vec![(0i64, 0i64, 0i64); lines.len()];
        loop {
            for (slot, &li) in free.iter().enumerate() {
                k[li] = modes[counter[slot]];
            }
            // Net outflow at each vertex from free lines, then fix tree lines leaf-first.
            let mut net = vec![(0i64, 0i64, 0i64); n];
            for &li in &free {
                let l = lines[li];
                add(&mut net[l.minus_vertex], k[li], 1);
                add(&mut net[l.plus_vertex], k[li], -1);
            }
            for &v in order.iter().rev() {
                if let Some(li) = parent_line[v] {
                    let l = lines[li];
                    // The subtree of v must balance; its net flows into the tree line.
                    let (sign, other) = if l.minus_vertex == v { (-1, l.plus_vertex) } else { (1, l.minus_vertex) };
                    let s = net[v];
                    k[li] = (sign * s.0, sign * s.1, sign * s.2);
                    add(&mut net[v], k[li], if l.minus_vertex == v { 1 } else { -1 });
                    add(&mut net[other], k[li], if l.minus_vertex == v { -1 } else { 1 });
                }
            }
            total += self.rho_sum(&lines, &k, n);
            // Odometer over free-line momenta.
            let mut pos = 0;
            loop {
                if pos == counter.len() {
                    return total * self.prefactor(graph);
                }
                counter[pos] += 1;
                if counter[pos] < nm {
                    break;
                }
                counter[pos] = 0;
                pos += 1;
            }
        }
    }

    fn prefactor(&self, graph: &FeynmanGraph) -> Complex64 {
        let n = graph.order() as i32;
        Complex64::new(graph.sign as f64 * self.u.powi(n) / self.volume().powi(n), 0.0)
    }

    fn rho_sum(&self, lines: &[Line], k: &[Mom], n: usize) -> Complex64 {
        let mut total = Complex64::default();
        for rmask in 0..(1u32 << n) {
            let rho = |v: usize| (rmask >> v & 1) as u8;
            let mut p = Complex64::new(1.0, 0.0);
            for (li, l) in lines.iter().enumerate() {
                p *= self.ghat(k[li], rho(l.minus_vertex), rho(l.plus_vertex));
                if p == Complex64::default() {
                    break;
                }
            }
            total += p;
        }
        total
    }

    /// `sum over connected graphs of order N` = `E^T(V; N)`.
    pub fn sum_connected(&self, n: usize) -> Result<Complex64> {
        Ok(connected_only(enumerate_pairings(n)?).map(|g| self.value(&g)).sum())
    }

    /// `sum over all graphs of order N` = `E(V^N)`.
    pub fn sum_all(&self, n: usize) -> Result<Complex64> {
        Ok(enumerate_pairings(n)?.map(|g| self.value(&g)).sum())
    }

    /// `F^{(M;N)} = -(1/(beta|Lambda|)) ((-1)^N / N!) E^T(V; N)`.
    pub fn free_energy_order(&self, n: usize) -> Result<Complex64> {
        let et = self.sum_connected(n)?;
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(-et * (sign / fact) / self.volume())
    }
}

fn add(acc: &mut Mom, k: Mom, s: i64) {
    acc.0 += s * k.0;
    acc.1 += s * k.1;
    acc.2 += s * k.2;
}

/// The pessimistic order-N bound and its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBound {
    /// `(|Gamma^T_N| / N!) 2^N |U|^N ||g||_inf^{N+1} ||g||_1^{N-1}`.
    pub spanning_tree_form: f64,
    /// Smallest `C` with `|Gamma^T_N| <= C^N (N!)^2`, `||g||_inf <= C M`, `||g||_1 <= C beta`.
    pub constant: f64,
    /// `(2 C^3 |U|)^N N! M^{N+1} beta^{N-1}`.
    pub factorial_form: f64,
}

pub fn naive_bound(n: usize, g_inf: f64, g_1: f64, u: f64, m: u32, beta: f64) -> NaiveBound {
    let nf = n as i32;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let count = connected_count_formula(n) as f64;
    let spanning_tree_form = count / fact * 2f64.powi(nf) * u.abs().powi(nf) * g_inf.powi(nf + 1) * g_1.powi(nf - 1);
    let c = (count / (fact * fact)).powf(1.0 / n as f64).max(g_inf / m as f64).max(g_1 / beta);
    let factorial_form = (2.0 * c.powi(3) * u.abs()).powi(nf) * fact * (m as f64).powi(nf + 1) * beta.powi(nf - 1);
    NaiveBound { spanning_tree_form, constant: c, factorial_form }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{interaction, Covariance, Universe};
    use crate::honeycomb::HoneycombGeometry;
    use crate::propagators::{Cutoff, ScalePropagator};

    #[test]
    fn counts() {
        assert!(enumerate_pairings(0).is_err());
        for n in 1..=4usize {
            let all = enumerate_pairings(n).unwrap().count() as u128;
            let fact: u128 = (1..=n as u128).product();
            assert_eq!(all, fact * fact);
            let conn = connected_only(enumerate_pairings(n).unwrap()).count() as u128;
            assert_eq!(conn, connected_count_formula(n));
        }
        assert_eq!(connected_count_formula(2), 3);
    }

    #[test]
    fn order_one_is_a_single_self_contraction() {
        let g: Vec<_> = enumerate_pairings(1).unwrap().collect();
        assert_eq!(g.len(), 1);
        assert!(g[0].is_connected() && g[0].sign == 1);
        let lines = g[0].lines();
        assert!(lines.iter().all(|l| l.minus_vertex == 0 && l.plus_vertex == 0));
    }

    #[test]
    fn disconnected_self_contractions() {
        let g = FeynmanGraph::new(vec![0, 1], vec![0, 1]);
        assert!(!g.is_connected());
    }

    fn setup(m: u32, cutoff: Cutoff) -> (DiagramEvaluator, Covariance, crate::grassmann::GrassmannPoly) {
        let geom = HoneycombGeometry::new(1).unwrap();
        let grid = MatsubaraGrid::new(4.0, m).unwrap();
        let prop = ScalePropagator::new(&geom, &grid, cutoff).unwrap();
        let table = prop.momentum_table();
        let univ = Universe::momentum(grid.len()).unwrap();
        let cov = Covariance::momentum(&univ, &table);
        let v = interaction(&geom, &grid, 1.3).unwrap();
        (DiagramEvaluator::new(table, &grid, 1, 1.3), cov, v)
    }

    #[test]
    fn first_and_second_order_match_engine() {
        let (ev, cov, v) = setup(2, Cutoff::Full);
        let e1 = cov.expectation(&v).unwrap();
        assert!((ev.sum_connected(1).unwrap() - e1).norm() < 1e-12);
        let et2 = cov.truncated_expectation(&[v.clone(), v.clone()]).unwrap();
        let d2 = ev.sum_connected(2).unwrap();
        assert!((d2 - et2).norm() <= 1e-9 * et2.norm());
        let all2 = ev.sum_all(2).unwrap();
        let m2 = cov.expectation(&v.multiply(&v).unwrap()).unwrap();
        assert!((all2 - m2).norm() <= 1e-9 * m2.norm().max(1e-300));
    }

    #[test]
    fn uv_tadpole_graph_vanishes() {
        let (ev, _, _) = setup(3, Cutoff::Uv(2));
        let g = FeynmanGraph::new(vec![0], vec![0]);
        assert_eq!(ev.value(&g), Complex64::default());
    }

    #[test]
    fn relabelling_preserves_values() {
        let (ev, _, _) = setup(2, Cutoff::Full);
        for g in enumerate_pairings(3).unwrap().step_by(5) {
            let h = g.relabel(&[2, 0, 1]);
            let (a, b) = (ev.value(&g), ev.value(&h));
            assert!((a - b).norm() <= 1e-12 * a.norm() + 1e-16, "{a} vs {b}");
        }
    }

    #[test]
    fn naive_bound_ratio() {
        // ||g||_inf / M dominates the fitted constant for both orders.
        let a = naive_bound(2, 100.0, 2.0, 0.5, 4, 2.0);
        let b = naive_bound(3, 100.0, 2.0, 0.5, 4, 2.0);
        assert_eq!(a.constant, 25.0);
        assert_eq!(b.constant, 25.0);
        let want = 3.0 * (2.0 * 25f64.powi(3) * 0.5) * 4.0 * 2.0;
        assert!((b.factorial_form / a.factorial_form - want).abs() < 1e-9 * want);
    }
}
