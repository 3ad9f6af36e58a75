//! Determinant (Battle-Brydges-Federbush) representation of fermionic truncated
//! expectations:
//!
//! `E^T(psi_P1, ..., psi_Ps) = sum_T alpha_T prod_{l in T} g_l int dP_T(t) det G^T(t)`.
//!
//! Sign convention. Let `m_1..m_n` and `p_1..p_n` be the `psi^-` and `psi^+`
//! fields in order of appearance in `psi_P1 ... psi_Ps`, and `s_0` the parity of
//! the reordering to `m_1 p_1 m_2 p_2 ... m_n p_n`. Then `E(prod psi) =
//! s_0 det[g(m_i, p_j)]`. For an anchored tree with lines `(m_r, p_c)`,
//! `alpha_T = s_0 sgn(pi)` where `pi` sends every tree row to its column and the
//! remaining rows, ascending, to the remaining columns, ascending; `G^T(t)` is
//! the complementary minor with rows and columns kept in ascending order.

use crate::diagrams::perm_sign;
use crate::error::{CrgError, Result};
use crate::grassmann::Eps;
use crate::honeycomb::HoneycombGeometry;
use crate::linalg::gauss_legendre_unit;
use crate::propagators::{GramFactor, MatsubaraGrid, PositionTable, ScalePropagator};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    /// Opaque label passed back to the covariance (a generator index or a vertex).
    pub label: usize,
    pub spin: u8,
    pub rho: u8,
    pub eps: Eps,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldCluster {
    pub id: usize,
    pub fields: Vec<Field>,
}

impl FieldCluster {
    pub fn new(id: usize, fields: Vec<Field>) -> Self {
        Self { id, fields }
    }

    pub fn n_plus(&self) -> usize {
        self.fields.iter().filter(|f| f.eps == Eps::Plus).count()
    }

    pub fn n_minus(&self) -> usize {
        self.fields.len() - self.n_plus()
    }

    /// The quartic Hubbard vertex `psi+_up psi-_up psi+_dn psi-_dn` at `label` on sublattice `rho`.
    pub fn hubbard_vertex(id: usize, label: usize, rho: u8) -> Self {
        let f = |spin, eps| Field { label, spin, rho, eps };
        Self::new(id, vec![f(0, Eps::Plus), f(0, Eps::Minus), f(1, Eps::Plus), f(1, Eps::Minus)])
    }
}

/// A set of `s - 1` contraction lines that becomes a tree once clusters are collapsed.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredTree {
    /// `(row, column)`: indices into the ordered `psi^-` and `psi^+` field lists.
    pub lines: Vec<(usize, usize)>,
    /// Cluster-level edges, parallel to `lines`.
    pub edges: Vec<(usize, usize)>,
    pub alpha: f64,
}

/// Ordered field bookkeeping of a cluster system.
#[derive(Debug, Clone)]
pub struct ClusterSystem {
    pub s: usize,
    pub minus: Vec<Field>,
    pub plus: Vec<Field>,
    pub minus_cluster: Vec<usize>,
    pub plus_cluster: Vec<usize>,
    /// Parity of the reordering to alternating `psi^- psi^+` pairs.
    pub s0: f64,
}

impl ClusterSystem {
    pub fn new(clusters: &[FieldCluster]) -> Result<Self> {
        if clusters.is_empty() {
            return Err(CrgError::InvalidArgument("at least one cluster is required".into()));
        }
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        let mut minus_cluster = Vec::new();
        let mut plus_cluster = Vec::new();
        // Target slot of every field in the alternating order.
        let mut target = Vec::new();
        for (j, c) in clusters.iter().enumerate() {
            for f in &c.fields {
                match f.eps {
                    Eps::Minus => {
                        target.push(2 * minus.len());
                        minus.push(*f);
                        minus_cluster.push(j);
                    }
                    Eps::Plus => {
                        target.push(2 * plus.len() + 1);
                        plus.push(*f);
                        plus_cluster.push(j);
                    }
                }
            }
        }
        if minus.len() != plus.len() {
            return Err(CrgError::InvalidArgument("clusters must carry as many psi+ as psi- fields".into()));
        }
        let s0 = perm_sign(&target) as f64;
        Ok(Self { s: clusters.len(), minus, plus, minus_cluster, plus_cluster, s0 })
    }

    pub fn n(&self) -> usize {
        self.minus.len()
    }

    /// `G[r][c] = cov(m_r, p_c)`, zero across spins.
    pub fn matrix(&self, cov: &impl Fn(&Field, &Field) -> Complex64) -> Vec<Complex64> {
        let n = self.n();
        let mut g = vec![ZERO; n * n];
        for (r, fm) in self.minus.iter().enumerate() {
            for (c, fp) in self.plus.iter().enumerate() {
                if fm.spin == fp.spin {
                    g[r * n + c] = cov(fm, fp);
                }
            }
        }
        g
    }
}

/// All labelled trees on `s` vertices, via Pruefer sequences.
pub fn labelled_trees(s: usize) -> Vec<Vec<(usize, usize)>> {
    match s {
        0 | 1 => return vec![Vec::new()],
        2 => return vec![vec![(0, 1)]],
        _ => {}
    }
    let len = s - 2;
    let total = s.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len {
            seq.push(c % s);
            c /= s;
        }
        let mut degree = vec![1usize; s];
        for &v in &seq {
            degree[v] += 1;
        }
        let mut edges = Vec::with_capacity(s - 1);
        for &v in &seq {
            let leaf = (0..s).find(|&u| degree[u] == 1).expect("a leaf exists");
            edges.push((leaf.min(v), leaf.max(v)));
            degree[leaf] -= 1;
            degree[v] -= 1;
        }
        let rest: Vec<usize> = (0..s).filter(|&u| degree[u] == 1).collect();
        edges.push((rest[0], rest[1]));
        edges.sort_unstable();
        out.push(edges);
    }
    out
}

/// Field-level realizations of one cluster tree: each edge becomes a line from a
/// `psi^-` of one endpoint to an equal-spin `psi^+` of the other, no field used twice.
fn realize(sys: &ClusterSystem, edges: &[(usize, usize)], out: &mut Vec<AnchoredTree>) {
    fn rec(sys: &ClusterSystem, edges: &[(usize, usize)], k: usize, used_r: &mut Vec<bool>, used_c: &mut Vec<bool>, lines: &mut Vec<(usize, usize)>, out: &mut Vec<AnchoredTree>) {
        if k == edges.len() {
            out.push(AnchoredTree { lines: lines.clone(), edges: edges.to_vec(), alpha: sys.s0 * tree_sign(sys.n(), lines) });
            return;
        }
        let (a, b) = edges[k];
        for (from, to) in [(a, b), (b, a)] {
            let rows: Vec<usize> = (0..sys.n()).filter(|&r| sys.minus_cluster[r] == from && !used_r[r]).collect();
            let cols: Vec<usize> = (0..sys.n()).filter(|&c| sys.plus_cluster[c] == to && !used_c[c]).collect();
            for &r in &rows {
                for &c in &cols {
                    if used_r[r] || used_c[c] || sys.minus[r].spin != sys.plus[c].spin {
                        continue;
                    }
                    used_r[r] = true;
                    used_c[c] = true;
                    lines.push((r, c));
                    rec(sys, edges, k + 1, used_r, used_c, lines, out);
                    lines.pop();
                    used_r[r] = false;
                    used_c[c] = false;
                }
            }
        }
    }
    let n = sys.n();
    rec(sys, edges, 0, &mut vec![false; n], &mut vec![false; n], &mut Vec::new(), out);
}

fn tree_sign(n: usize, lines: &[(usize, usize)]) -> f64 {
    let mut pi = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for &(r, c) in lines {
        pi[r] = c;
        used[c] = true;
    }
    let mut cols = (0..n).filter(|&c| !used[c]);
    for p in pi.iter_mut().filter(|p| **p == usize::MAX) {
        *p = cols.next().expect("square system");
    }
    perm_sign(&pi) as f64
}

/// Every anchored tree between the clusters; for `s = 1` the single empty tree.
pub fn enumerate_anchored_trees(clusters: &[FieldCluster]) -> Result<Vec<AnchoredTree>> {
    let sys = ClusterSystem::new(clusters)?;
    Ok(anchored_trees(&sys))
}

fn anchored_trees(sys: &ClusterSystem) -> Vec<AnchoredTree> {
    let mut out = Vec::new();
    for edges in labelled_trees(sys.s) {
        realize(sys, &edges, &mut out);
    }
    out
}

/// Chain orders `X_1 = {0} < X_2 < ... < X_s` compatible with a cluster tree:
/// each new cluster is a tree neighbour of the current set.
pub fn compatible_chains(s: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    fn rec(s: usize, edges: &[(usize, usize)], order: &mut Vec<usize>, inside: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if order.len() == s {
            out.push(order.clone());
            return;
        }
        for v in 0..s {
            if inside[v] {
                continue;
            }
            let adjacent = edges.iter().any(|&(a, b)| (a == v && inside[b]) || (b == v && inside[a]));
            if adjacent {
                inside[v] = true;
                order.push(v);
                rec(s, edges, order, inside, out);
                order.pop();
                inside[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut inside = vec![false; s];
    inside[0] = true;
    rec(s, edges, &mut vec![0], &mut inside, &mut out);
    out
}

/// The monomial `prod_k t_k^{b_k - 1}` attached to a tree and a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainWeight {
    /// `b_k`: tree lines crossing the boundary of `X_k`, `k = 1..s-1`.
    pub b: Vec<u32>,
}

impl ChainWeight {
    pub fn exponents(&self) -> Vec<u32> {
        self.b.iter().map(|b| b - 1).collect()
    }

    /// `int_{[0,1]^{s-1}} prod t_k^{b_k-1} = prod 1/b_k`.
    pub fn integral(&self) -> f64 {
        self.b.iter().map(|&b| 1.0 / b as f64).product()
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.b.iter().zip(t).map(|(&b, &x)| x.powi(b as i32 - 1)).product()
    }
}

fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    pos
}

pub fn interpolation_weight(s: usize, edges: &[(usize, usize)], order: &[usize]) -> Result<ChainWeight> {
    let mut seen = vec![false; s];
    if order.len() != s || order.first() != Some(&0) || edges.len() + 1 != s {
        return Err(CrgError::IncompatibleChain);
    }
    for (k, &v) in order.iter().enumerate() {
        if v >= s || seen[v] {
            return Err(CrgError::IncompatibleChain);
        }
        if k > 0 && !edges.iter().any(|&(a, b)| (a == v && seen[b]) || (b == v && seen[a])) {
            return Err(CrgError::IncompatibleChain);
        }
        seen[v] = true;
    }
    let pos = positions(order);
    let b = (0..s.saturating_sub(1))
        .map(|k| edges.iter().filter(|&&(a, c)| pos[a].min(pos[c]) <= k && k < pos[a].max(pos[c])).count() as u32)
        .collect();
    Ok(ChainWeight { b })
}

/// `t_{j,j'} = prod_{k} t_k` over the boundaries separating `j` and `j'`.
pub fn interpolation_matrix(order: &[usize], t: &[f64]) -> Vec<Vec<f64>> {
    let s = order.len();
    let pos = positions(order);
    let mut m = vec![vec![1.0; s]; s];
    for i in 0..s {
        for j in 0..s {
            let (lo, hi) = (pos[i].min(pos[j]), pos[i].max(pos[j]));
            m[i][j] = t[lo..hi].iter().product();
        }
    }
    m
}

/// Unit vectors `u_j` with `u_j . u_j' = t_{j,j'}`, indexed by cluster.
pub fn unit_vectors(order: &[usize], t: &[f64]) -> Vec<Vec<f64>> {
    let s = order.len();
    let mut by_pos: Vec<Vec<f64>> = Vec::with_capacity(s);
    for k in 0..s {
        let mut u = vec![0.0; s];
        if k == 0 {
            u[0] = 1.0;
        } else {
            let tk = t[k - 1];
            for (x, y) in u.iter_mut().zip(&by_pos[k - 1]) {
                *x = tk * y;
            }
            u[k] = (1.0 - tk * tk).max(0.0).sqrt();
        }
        by_pos.push(u);
    }
    let pos = positions(order);
    (0..s).map(|j| by_pos[pos[j]].clone()).collect()
}

/// Determinant by LU with partial pivoting; the buffer is overwritten.
pub fn det_in_place(a: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm_sqr().total_cmp(&a[j * n + col].norm_sqr())).expect("nonempty");
        let p = a[piv * n + col];
        if p == ZERO {
            return ZERO;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f != ZERO {
                for k in col + 1..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
            }
        }
    }
    det
}

/// One anchored tree with its precomputed complement rows and columns.
#[derive(Debug, Clone)]
struct PlannedTree {
    lines: Vec<(usize, usize)>,
    alpha: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// Quadrature nodes of one chain: `(weight * prod t^{b-1}, t_{j,j'})`.
#[derive(Debug, Clone)]
struct PlannedChain {
    nodes: Vec<(f64, Vec<Vec<f64>>)>,
}

#[derive(Debug, Clone)]
struct PlannedClusterTree {
    trees: Vec<PlannedTree>,
    chains: Vec<PlannedChain>,
}

/// Everything in the determinant expansion that depends only on the cluster shapes.
#[derive(Debug, Clone)]
pub struct BbfPlan {
    sys: ClusterSystem,
    groups: Vec<PlannedClusterTree>,
    n_trees: usize,
}

impl BbfPlan {
    pub fn new(clusters: &[FieldCluster]) -> Result<Self> {
        let sys = ClusterSystem::new(clusters)?;
        let n = sys.n();
        let s = sys.s;
        let minor = (n + 1).saturating_sub(s);
        let mut groups = Vec::new();
        let mut n_trees = 0;
        for edges in labelled_trees(s) {
            let mut raw = Vec::new();
            realize(&sys, &edges, &mut raw);
            if raw.is_empty() {
                continue;
            }
            n_trees += raw.len();
            let trees = raw
                .into_iter()
                .map(|t| {
                    let rows = (0..n).filter(|r| !t.lines.iter().any(|l| l.0 == *r)).collect();
                    let cols = (0..n).filter(|c| !t.lines.iter().any(|l| l.1 == *c)).collect();
                    PlannedTree { lines: t.lines, alpha: t.alpha, rows, cols }
                })
                .collect();
            let mut chains = Vec::new();
            for order in compatible_chains(s, &edges) {
                let w = interpolation_weight(s, &edges, &order)?;
                // Degree in t_k is at most (b_k - 1) + minor size.
                let rules: Vec<Vec<(f64, f64)>> = w.b.iter().map(|&b| gauss_legendre_unit((b as usize - 1 + minor) / 2 + 1)).collect();
                let mut nodes = Vec::new();
                let mut idx = vec![0usize; rules.len()];
                loop {
                    let t: Vec<f64> = idx.iter().zip(&rules).map(|(&i, r)| r[i].0).collect();
                    let q: f64 = idx.iter().zip(&rules).map(|(&i, r)| r[i].1).product();
                    nodes.push((q * w.eval(&t), interpolation_matrix(&order, &t)));
                    let mut k = 0;
                    while k < idx.len() {
                        idx[k] += 1;
                        if idx[k] < rules[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == idx.len() {
                        break;
                    }
                }
                chains.push(PlannedChain { nodes });
            }
            groups.push(PlannedClusterTree { trees, chains });
        }
        Ok(Self { sys, groups, n_trees })
    }

    pub fn system(&self) -> &ClusterSystem {
        &self.sys
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    /// Evaluate the expansion on a covariance matrix `g[r * n + c] = cov(m_r, p_c)`.
    pub fn evaluate(&self, g: &[Complex64]) -> Complex64 {
        let n = self.sys.n();
        if self.sys.s == 1 {
            let mut a = g.to_vec();
            return self.sys.s0 * det_in_place(&mut a, n);
        }
        let mut buf = Vec::with_capacity(n * n);
        let mut total = ZERO;
        for group in &self.groups {
            for tree in &group.trees {
                let lines: Complex64 = tree.lines.iter().map(|&(r, c)| g[r * n + c]).product();
                if lines == ZERO {
                    continue;
                }
                let d = tree.rows.len();
                let mut integral = ZERO;
                for chain in &group.chains {
                    for (w, tm) in &chain.nodes {
                        buf.clear();
                        for &r in &tree.rows {
                            let cr = self.sys.minus_cluster[r];
                            for &c in &tree.cols {
                                buf.push(g[r * n + c] * tm[cr][self.sys.plus_cluster[c]]);
                            }
                        }
                        integral += *w * det_in_place(&mut buf, d);
                    }
                }
                total += tree.alpha * lines * integral;
            }
        }
        total
    }
}

/// The determinant expansion of `E^T(psi_P1, ..., psi_Ps)`.
pub fn det_expansion(clusters: &[FieldCluster], cov: impl Fn(&Field, &Field) -> Complex64) -> Result<Complex64> {
    let plan = BbfPlan::new(clusters)?;
    let g = plan.sys.matrix(&cov);
    Ok(plan.evaluate(&g))
}

/// Outcome of a Gram-Hadamard check.
#[derive(Debug, Clone, PartialEq)]
pub struct GramHadamard {
    pub det: Complex64,
    pub bound: f64,
}

impl GramHadamard {
    pub fn holds(&self) -> bool {
        self.det.norm() <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

/// `|det M| <= prod_i ||A_i|| ||B_i||` for `M_ij = <A_i, B_j>`; the entries of
/// `matrix` (row-major, `n x n`) must agree with the factorization.
pub fn gram_hadamard_bound(matrix: &[Complex64], factor: &GramFactor) -> Result<GramHadamard> {
    let n = factor.a.len();
    if factor.b.len() != n || matrix.len() != n * n {
        return Err(CrgError::NotGramFactored);
    }
    let scale = matrix.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(1e-300);
    for i in 0..n {
        for j in 0..n {
            if (factor.inner(i, j) - matrix[i * n + j]).norm() > 1e-10 * scale {
                return Err(CrgError::NotGramFactored);
            }
        }
    }
    let bound = (0..n).map(|i| (factor.norm_a_sq(i) * factor.norm_b_sq(i)).sqrt()).product();
    let mut a = matrix.to_vec();
    Ok(GramHadamard { det: det_in_place(&mut a, n), bound })
}

/// Number of time slices making the vertex time sums exact: every vertex carries
/// four fields, so its total frequency stays below `4 n_max + 2` in units of `2 pi / beta`.
pub fn exact_time_slices(grid: &MatsubaraGrid) -> usize {
    2 * grid.len() + 3
}

/// `F^{(M;N)}` from the determinant expansion on position space.
#[derive(Debug, Clone, PartialEq)]
pub struct BbfFreeEnergy {
    pub order: usize,
    pub value: Complex64,
    /// Anchored trees between `N` Hubbard vertices.
    pub n_trees: usize,
    /// Time slices of the exact vertex grid.
    pub time_slices: usize,
}

/// `F^{(M;N)} = -(1/(beta|Lambda|)) ((-1)^N / N!) E^T(V; N)` with
/// `V = U sum_rho int dx psi+_up psi-_up psi+_dn psi-_dn`. Vertex 1 is pinned at the
/// origin and the remaining `N - 1` vertices run over an exact time grid.
pub fn free_energy_order_n_bbf(n: usize, geom: &HoneycombGeometry, grid: &MatsubaraGrid, u: f64) -> Result<BbfFreeEnergy> {
    if n == 0 || n > 4 {
        return Err(CrgError::InvalidArgument(format!("BBF free-energy order must be in 1..=4, got {n}")));
    }
    let nt = exact_time_slices(grid);
    let table = ScalePropagator::full(geom, grid).position_table(nt);
    let l = geom.l();
    let sites = nt * l * l;
    let configs = sites.pow(n as u32 - 1);
    let rho_masks = 1usize << n;
    let plans: Vec<BbfPlan> = (0..rho_masks)
        .map(|mask| {
            let cl: Vec<FieldCluster> = (0..n).map(|j| FieldCluster::hubbard_vertex(j, j, (mask >> j & 1) as u8)).collect();
            BbfPlan::new(&cl)
        })
        .collect::<Result<_>>()?;
    let n_trees = plans[0].n_trees();
    let work = |range: std::ops::Range<usize>| -> Complex64 {
        let mut acc = ZERO;
        let mut place = vec![(0i64, 0i64, 0i64); n];
        for cfg in range {
            let mut c = cfg;
            for p in place.iter_mut().skip(1) {
                let site = c % sites;
                c /= sites;
                *p = ((site / (l * l)) as i64, ((site % (l * l)) / l) as i64, (site % l) as i64);
            }
            for plan in &plans {
                let g = plan.sys.matrix(&|fm: &Field, fp: &Field| vertex_cov(&table, &place, fm, fp));
                acc += plan.evaluate(&g);
            }
        }
        acc
    };
    let threads = std::thread::available_parallelism().map(|t| t.get()).unwrap_or(1).min(configs.max(1));
    let chunk = configs.div_ceil(threads);
    let parts: Vec<Complex64> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..threads).map(|i| {
            let work = &work;
            sc.spawn(move || work(i * chunk..((i + 1) * chunk).min(configs)))
        }).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let sum: Complex64 = parts.into_iter().sum();
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let dt = grid.beta() / nt as f64;
    let value = -sum * (sign / fact) * u.powi(n as i32) * dt.powi(n as i32 - 1);
    Ok(BbfFreeEnergy { order: n, value, n_trees, time_slices: nt })
}

fn vertex_cov(table: &PositionTable, place: &[(i64, i64, i64)], fm: &Field, fp: &Field) -> Complex64 {
    let (a, b) = (place[fm.label], place[fp.label]);
    table.get(a.0 - b.0, a.1 - b.1, a.2 - b.2)[(fm.rho as usize, fp.rho as usize)]
}

/// Anchored trees between `n` Hubbard vertices.
pub fn hubbard_tree_count(n: usize) -> Result<usize> {
    let cl: Vec<FieldCluster> = (0..n).map(|j| FieldCluster::hubbard_vertex(j, j, 0)).collect();
    Ok(anchored_trees(&ClusterSystem::new(&cl)?).len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{Covariance, Generator, GrassmannPoly, Universe};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abstract_universe(modes: usize) -> Universe {
        let mut gens = Vec::new();
        for mode in 0..modes {
            for spin in 0..2 {
                for eps in [Eps::Minus, Eps::Plus] {
                    gens.push(Generator { mode, spin, rho: 0, eps });
                }
            }
        }
        Universe::from_generators(gens).unwrap()
    }

    fn random_cov(u: &Universe, rng: &mut ChaCha8Rng) -> Covariance {
        let mut cov = Covariance::new(u);
        for (a, ga) in u.generators().iter().enumerate() {
            for (b, gb) in u.generators().iter().enumerate() {
                if ga.eps == Eps::Minus && gb.eps == Eps::Plus && ga.spin == gb.spin {
                    cov.set(a, b, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
        }
        cov
    }

    fn field_of(u: &Universe, bit: usize) -> Field {
        let g = u.generator(bit);
        Field { label: bit, spin: g.spin, rho: g.rho, eps: g.eps }
    }

    fn compare(u: &Universe, cov: &Covariance, shapes: &[Vec<usize>]) -> (Complex64, Complex64) {
        let clusters: Vec<FieldCluster> = shapes.iter().enumerate().map(|(j, b)| FieldCluster::new(j, b.iter().map(|&x| field_of(u, x)).collect())).collect();
        let bbf = det_expansion(&clusters, |m, p| cov.get(m.label, p.label)).unwrap();
        let polys: Vec<GrassmannPoly> = shapes.iter().map(|b| GrassmannPoly::ordered_product(u.len(), b)).collect();
        let eng = cov.truncated_expectation(&polys).unwrap();
        (bbf, eng)
    }

    #[test]
    fn two_point_and_two_clusters() {
        let u = abstract_universe(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cov = random_cov(&u, &mut rng);
        let (a, b) = compare(&u, &cov, &[vec![0, 1]]);
        assert!((a - cov.get(0, 1)).norm() < 1e-14 && (a - b).norm() < 1e-14);
        // Clusters psi-_a psi+_b and psi+_d psi-_c (reversed order inside the second).
        let (a, b) = compare(&u, &cov, &[vec![0, 5], vec![9, 4]]);
        assert!((a - b).norm() < 1e-12, "{a} {b}");
    }

    #[test]
    fn matches_engine_on_random_systems() {
        let u = abstract_universe(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cov = random_cov(&u, &mut rng);
            // Three quartic clusters with random field choices, 12 fields in all, balanced per cluster.
            let mut bits: Vec<usize> = (0..u.len()).collect();
            for i in (1..bits.len()).rev() {
                bits.swap(i, rng.gen_range(0..=i));
            }
            let minus: Vec<usize> = bits.iter().copied().filter(|b| u.generator(*b).eps == Eps::Minus).take(6).collect();
            let plus: Vec<usize> = bits.iter().copied().filter(|b| u.generator(*b).eps == Eps::Plus).take(6).collect();
            let mut shapes = Vec::new();
            for j in 0..3 {
                let mut c = vec![minus[2 * j], plus[2 * j], minus[2 * j + 1], plus[2 * j + 1]];
                for i in (1..4).rev() {
                    c.swap(i, rng.gen_range(0..=i));
                }
                shapes.push(c);
            }
            let (a, b) = compare(&u, &cov, &shapes);
            assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn chain_weights_normalize() {
        for s in 2..=6 {
            for edges in labelled_trees(s) {
                let total: f64 = compatible_chains(s, &edges).iter().map(|o| interpolation_weight(s, &edges, o).unwrap().integral()).sum();
                assert!((total - 1.0).abs() < 1e-13, "s={s} {edges:?}");
            }
        }
        assert_eq!(labelled_trees(5).len(), 125);
    }

    #[test]
    fn six_cluster_example() {
        let edges = [(0, 1), (0, 2), (2, 3), (2, 4), (2, 5)];
        let w = interpolation_weight(6, &edges, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(w.b, vec![2, 1, 3, 2, 1]);
        assert!((w.integral() - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(interpolation_weight(6, &edges, &[0, 3, 1, 2, 4, 5]), Err(CrgError::IncompatibleChain));
    }

    #[test]
    fn unit_vectors_reproduce_t() {
        let order = [0, 2, 1, 3];
        let t = [0.3, 0.8, 0.55];
        let u = unit_vectors(&order, &t);
        let m = interpolation_matrix(&order, &t);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).sum();
                assert!((d - m[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_hadamard_cases() {
        let id = GramFactor { a: vec![vec![Complex64::new(1.0, 0.0), ZERO], vec![ZERO, Complex64::new(1.0, 0.0)]], b: vec![vec![Complex64::new(1.0, 0.0), ZERO], vec![ZERO, Complex64::new(1.0, 0.0)]] };
        let m = vec![Complex64::new(1.0, 0.0), ZERO, ZERO, Complex64::new(1.0, 0.0)];
        let r = gram_hadamard_bound(&m, &id).unwrap();
        assert!((r.det - 1.0).norm() < 1e-15 && (r.bound - 1.0).abs() < 1e-15);
        let v = vec![Complex64::new(0.5, 0.2), Complex64::new(-1.0, 0.3)];
        let rank1 = GramFactor { a: vec![v.clone(), v.clone()], b: vec![v.clone(), v.clone()] };
        let m1: Vec<Complex64> = (0..4).map(|k| rank1.inner(k / 2, k % 2)).collect();
        let r1 = gram_hadamard_bound(&m1, &rank1).unwrap();
        assert!(r1.det.norm() < 1e-14 && r1.holds());
        assert_eq!(gram_hadamard_bound(&m, &rank1), Err(CrgError::NotGramFactored));
    }

    #[test]
    fn tree_counts_two_vertices() {
        // Two quartic vertices: up and down lines in each direction.
        assert_eq!(hubbard_tree_count(2).unwrap(), 4);
        assert_eq!(hubbard_tree_count(1).unwrap(), 1);
    }
}

#[cfg(test)]
mod free_energy_tests {
    use super::*;
    use crate::diagrams::DiagramEvaluator;

    #[test]
    fn orders_match_diagrams() {
        let geom = HoneycombGeometry::new(1).unwrap();
        let u = 0.7;
        for (m, orders) in [(3u32, vec![1usize, 2, 3]), (6, vec![2])] {
            let grid = MatsubaraGrid::new(2.0, m).unwrap();
            let ev = DiagramEvaluator::new(ScalePropagator::full(&geom, &grid).momentum_table(), &grid, 1, u);
            for n in orders {
                let b = free_energy_order_n_bbf(n, &geom, &grid, u).unwrap().value;
                let d = ev.free_energy_order(n).unwrap();
                eprintln!("M={m} N={n} bbf={b} diag={d}");
                assert!((b - d).norm() <= 1e-9 * d.norm() + 1e-15, "M={m} N={n}: {b} vs {d}");
            }
        }
    }
}
