//! Gallavotti-Nicolo trees: enumeration, the telescoping identities used in the
//! power counting, and the tree-sum bound skeleton.
//!
//! A tree is stored with *every* vertex explicit: between two branching points
//! (or between the root and the first vertex) there is one trivial vertex per
//! intermediate scale. Vertex 0 is `v0`, the vertex on scale `h + 1` right after
//! the root.

use crate::error::{CrgError, Result};
use rand::Rng;

/// Which family of trees to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeRegime {
    /// Ultraviolet trees with shrunk endpoint branches: endpoints sit right after a
    /// branching vertex, on any scale up to `M + 1`.
    UvModified,
    /// Infrared trees: vertices on scales `h + 1 ..= 0`, endpoints on scale 1.
    Infrared,
}

/// Plane tree shape: endpoints are leaves, internal nodes branch at least twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf,
    Node(Vec<Shape>),
}

impl Shape {
    pub fn leaves(&self) -> usize {
        match self {
            Shape::Leaf => 1,
            Shape::Node(c) => c.iter().map(Shape::leaves).sum(),
        }
    }
}

/// All ordered sequences of at least `min_parts` positive integers summing to `n`.
fn compositions(n: usize, min_parts: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for first in 1..=rest {
            cur.push(first);
            rec(rest - first, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out.retain(|c| c.len() >= min_parts);
    out
}

/// All unlabeled trees with `n` ordered endpoints (root not a branching point).
pub fn shapes(n: usize) -> Vec<Shape> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Shape::Leaf];
    }
    let mut out = Vec::new();
    for comp in compositions(n, 2) {
        let mut partial: Vec<Vec<Shape>> = vec![Vec::new()];
        for &part in &comp {
            let subs = shapes(part);
            let mut next = Vec::with_capacity(partial.len() * subs.len());
            for p in &partial {
                for s in &subs {
                    let mut q = p.clone();
                    q.push(s.clone());
                    next.push(q);
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(Shape::Node));
    }
    out
}

pub fn unlabeled_tree_count(n: usize) -> usize {
    shapes(n).len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnVertex {
    pub scale: i32,
    /// `None` for `v0`, whose predecessor is the root.
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub endpoint: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnTree {
    pub root_scale: i32,
    pub vertices: Vec<GnVertex>,
}

/// A shape with scales attached to its branching nodes and endpoints.
#[derive(Debug, Clone)]
enum Scaled {
    Leaf(i32),
    Node(i32, Vec<Scaled>),
}

impl Scaled {
    fn scale(&self) -> i32 {
        match self {
            Scaled::Leaf(s) | Scaled::Node(s, _) => *s,
        }
    }
}

fn assign(shape: &Shape, lo: i32, regime: TreeRegime, top: i32) -> Vec<Scaled> {
    match shape {
        Shape::Leaf => Vec::new(),
        Shape::Node(children) => {
            let mut out = Vec::new();
            for s in lo..=top {
                let mut partial: Vec<Vec<Scaled>> = vec![Vec::new()];
                for c in children {
                    let options = match c {
                        Shape::Leaf => vec![Scaled::Leaf(match regime {
                            TreeRegime::UvModified => s + 1,
                            TreeRegime::Infrared => 1,
                        })],
                        _ => assign(c, s + 1, regime, top),
                    };
                    let mut next = Vec::new();
                    for p in &partial {
                        for o in &options {
                            let mut q = p.clone();
                            q.push(o.clone());
                            next.push(q);
                        }
                    }
                    partial = next;
                }
                out.extend(partial.into_iter().map(|c| Scaled::Node(s, c)));
            }
            out
        }
    }
}

impl GnTree {
    fn from_scaled(root_scale: i32, top: &Scaled) -> Self {
        let mut t = GnTree { root_scale, vertices: Vec::new() };
        t.attach(None, root_scale, top);
        t
    }

    /// Appends the chain of trivial vertices from `from + 1` to the node, then the node.
    fn attach(&mut self, mut parent: Option<usize>, from: i32, node: &Scaled) {
        for s in from + 1..node.scale() {
            let id = self.push(parent, s, false);
            parent = Some(id);
        }
        match node {
            Scaled::Leaf(s) => {
                self.push(parent, *s, true);
            }
            Scaled::Node(s, children) => {
                let id = self.push(parent, *s, false);
                for c in children {
                    self.attach(Some(id), *s, c);
                }
            }
        }
    }

    fn push(&mut self, parent: Option<usize>, scale: i32, endpoint: bool) -> usize {
        let id = self.vertices.len();
        self.vertices.push(GnVertex { scale, parent, children: Vec::new(), endpoint });
        if let Some(p) = parent {
            self.vertices[p].children.push(id);
        }
        id
    }

    pub fn n_endpoints(&self) -> usize {
        self.vertices.iter().filter(|v| v.endpoint).count()
    }

    /// `s_v`, the number of vertices immediately following `v`.
    pub fn s(&self, v: usize) -> usize {
        self.vertices[v].children.len()
    }

    /// `n(v)`, the number of endpoints following `v` (1 for an endpoint).
    pub fn n_below(&self, v: usize) -> usize {
        if self.vertices[v].endpoint {
            1
        } else {
            self.vertices[v].children.iter().map(|&c| self.n_below(c)).sum()
        }
    }

    /// Scale of the vertex immediately preceding `v` (the root for `v0`).
    pub fn prev_scale(&self, v: usize) -> i32 {
        self.vertices[v].parent.map_or(self.root_scale, |p| self.vertices[p].scale)
    }

    fn inner(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| !self.vertices[v].endpoint)
    }

    fn endpoints(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].endpoint)
    }

    /// Structural invariants: scales increase by one along every edge, v0 sits on
    /// `h + 1`, and (UV) no non-endpoint vertex has a single endpoint below it.
    pub fn is_valid(&self, regime: TreeRegime) -> bool {
        if self.vertices.is_empty() || self.vertices[0].scale != self.root_scale + 1 {
            return false;
        }
        let edges_ok = (1..self.vertices.len()).all(|v| self.vertices[v].scale == self.prev_scale(v) + 1);
        let uv_ok = regime != TreeRegime::UvModified || self.n_endpoints() == 1 || self.inner().all(|v| self.n_below(v) > 1);
        let ir_ok = regime != TreeRegime::Infrared || self.endpoints().all(|v| self.vertices[v].scale == 1);
        edges_ok && uv_ok && ir_ok
    }

    /// `sum_{v not e.p.} h_v (s_v - 1) = h (n - 1) + sum_{v not e.p.} (h_v - h_v') (n(v) - 1)`.
    pub fn scale_sum_identity(&self) -> (i64, i64) {
        let lhs: i64 = self.inner().map(|v| self.vertices[v].scale as i64 * (self.s(v) as i64 - 1)).sum();
        let n = self.n_endpoints() as i64;
        let rhs = self.root_scale as i64 * (n - 1)
            + self
                .inner()
                .map(|v| (self.vertices[v].scale - self.prev_scale(v)) as i64 * (self.n_below(v) as i64 - 1))
                .sum::<i64>();
        (lhs, rhs)
    }

    /// The same identity with `(s_v - 1)` in place of `(n(v) - 1)` on the right.
    pub fn scale_sum_variant_with_s(&self) -> (i64, i64) {
        let (lhs, _) = self.scale_sum_identity();
        let n = self.n_endpoints() as i64;
        let rhs = self.root_scale as i64 * (n - 1)
            + self.inner().map(|v| (self.vertices[v].scale - self.prev_scale(v)) as i64 * (self.s(v) as i64 - 1)).sum::<i64>();
        (lhs, rhs)
    }

    /// `|I_v| = 4 n(v)`.
    pub fn i_size(&self, v: usize) -> usize {
        4 * self.n_below(v)
    }

    /// `sum_v h_v [sum_i |P_vi| - |P_v|] = h (|I_v0| - |P_v0|) + sum_v (h_v - h_v') (|I_v| - |P_v|)`
    /// for external-field sizes `p` (indexed by vertex).
    pub fn field_sum_identity(&self, p: &[usize]) -> (i64, i64) {
        let lhs: i64 = self
            .inner()
            .map(|v| {
                let below: i64 = self.vertices[v].children.iter().map(|&c| p[c] as i64).sum();
                self.vertices[v].scale as i64 * (below - p[v] as i64)
            })
            .sum();
        let rhs = self.root_scale as i64 * (self.i_size(0) as i64 - p[0] as i64)
            + self
                .inner()
                .map(|v| (self.vertices[v].scale - self.prev_scale(v)) as i64 * (self.i_size(v) as i64 - p[v] as i64))
                .sum::<i64>();
        (lhs, rhs)
    }

    /// Exponents of `2^{h n} prod_v 2^{(h_v - h_v') n(v)}` and of `prod_{e.p.} 2^{h_v'}`.
    pub fn endpoint_identity(&self) -> (i64, i64) {
        let lhs = self.root_scale as i64 * self.n_endpoints() as i64
            + self.inner().map(|v| (self.vertices[v].scale - self.prev_scale(v)) as i64 * self.n_below(v) as i64).sum::<i64>();
        let rhs = self.endpoints().map(|v| self.prev_scale(v) as i64).sum();
        (lhs, rhs)
    }

    /// Exponents of `2^{h |I_v0|} prod_v 2^{(h_v - h_v') |I_v|}` and of `prod_{e.p.} 2^{h_v' |I_v|}`.
    pub fn endpoint_field_identity(&self) -> (i64, i64) {
        let lhs = self.root_scale as i64 * self.i_size(0) as i64
            + self.inner().map(|v| (self.vertices[v].scale - self.prev_scale(v)) as i64 * self.i_size(v) as i64).sum::<i64>();
        let rhs = self.endpoints().map(|v| self.prev_scale(v) as i64 * self.i_size(v) as i64).sum();
        (lhs, rhs)
    }

    /// `prod_{v not e.p.} 2^{-(h_v - h_v')(n(v) - 1)}`.
    pub fn geometric_factor(&self) -> f64 {
        self.inner()
            .map(|v| 2f64.powf(-((self.vertices[v].scale - self.prev_scale(v)) as f64) * (self.n_below(v) as f64 - 1.0)))
            .product()
    }

    /// `prod_{v not e.p.} 2^{-a (h_v - h_v')}`.
    pub fn scale_weight(&self, a: f64) -> f64 {
        self.inner().map(|v| 2f64.powf(-a * (self.vertices[v].scale - self.prev_scale(v)) as f64)).product()
    }

    /// `sum_P prod_{v not e.p.} y^{|P_v|}` with `P_v` ranging over all subsets of the
    /// union of the children's external fields, `P_e = I_e` (4 fields) at endpoints.
    /// Evaluated exactly: each endpoint contributes `(sum_{k=0}^{d} y^k)^4`, `d` the
    /// number of non-endpoint vertices above it.
    pub fn sigma_p(&self, y: f64) -> f64 {
        let mut total = 1.0;
        for e in self.endpoints() {
            let mut d = 0;
            let mut cur = self.vertices[e].parent;
            while let Some(p) = cur {
                d += 1;
                cur = self.vertices[p].parent;
            }
            let w: f64 = (0..=d).map(|k| y.powi(k)).sum();
            total *= w.powi(4);
        }
        total
    }

    /// Random external-field sizes: `p_e = 4`, `p_v <= sum_i p_vi`, and `p_v >= 4` on
    /// non-endpoint vertices of infrared trees (the renormalization operator removes the
    /// two-legged terms); `p_v` is even.
    pub fn sample_p_sizes(&self, regime: TreeRegime, rng: &mut impl Rng) -> Vec<usize> {
        let mut p = vec![0usize; self.vertices.len()];
        // Children are created after their parent, so a reverse sweep is bottom-up.
        for v in (0..self.vertices.len()).rev() {
            if self.vertices[v].endpoint {
                p[v] = 4;
                continue;
            }
            let below: usize = self.vertices[v].children.iter().map(|&c| p[c]).sum();
            let lo = if regime == TreeRegime::Infrared { 4 } else { 0 };
            let choices: Vec<usize> = (lo..=below).step_by(2).collect();
            p[v] = choices[rng.gen_range(0..choices.len())];
        }
        p
    }
}

/// All trees of the family with root scale `h` and `n` endpoints.
pub fn enumerate_gn_trees(h: i32, n: usize, m: i32, regime: TreeRegime) -> Result<Vec<GnTree>> {
    if n == 0 {
        return Err(CrgError::InvalidArgument("trees need at least one endpoint".into()));
    }
    let top = match regime {
        TreeRegime::UvModified => {
            if h < 0 || h >= m {
                return Err(CrgError::ScaleOutOfRange { h, lo: 0, hi: m - 1 });
            }
            m
        }
        TreeRegime::Infrared => {
            if h > -1 {
                return Err(CrgError::ScaleOutOfRange { h, lo: i32::MIN, hi: -1 });
            }
            0
        }
    };
    if n == 1 {
        let leaf = match regime {
            TreeRegime::UvModified => Scaled::Leaf(h + 1),
            TreeRegime::Infrared => Scaled::Leaf(1),
        };
        return Ok(vec![GnTree::from_scaled(h, &leaf)]);
    }
    let mut out = Vec::new();
    for shape in shapes(n) {
        for scaled in assign(&shape, h + 1, regime, top) {
            out.push(GnTree::from_scaled(h, &scaled));
        }
    }
    Ok(out)
}

/// `(1/(2^{1/16} - 1))^n`.
pub fn sigma_p_bound_stated(n: usize) -> f64 {
    (1.0 / (2f64.powf(1.0 / 16.0) - 1.0)).powi(n as i32)
}

/// `(1/(1 - 2^{-1/16}))^{4n}`, the value of the geometric series per endpoint field.
pub fn sigma_p_bound_corrected(n: usize) -> f64 {
    (1.0 / (1.0 - 2f64.powf(-1.0 / 16.0))).powi(4 * n as i32)
}

/// `(4 / (2^{1/2} - 1))^n`.
pub fn tree_class_bound(n: usize) -> f64 {
    (4.0 / (2f64.sqrt() - 1.0)).powi(n as i32)
}

/// One line of the bound skeleton for a given order and root scale.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundRow {
    pub regime: &'static str,
    pub n: usize,
    pub h: i32,
    pub n_trees: usize,
    /// `sum_tau prod_v 2^{-(h_v - h_v')(n(v) - 1)}`.
    pub geometric_sum: f64,
    /// `sum_tau prod_v 2^{-a (h_v - h_v')}` with `a = 1/2` (UV) or `theta + (1 - theta)/2` (IR).
    pub tree_class_sum: f64,
    pub tree_class_bound: f64,
    /// Largest `sum_P prod_v 2^{-|P_v| c}` over the trees (`c = 1/16` UV, `(1 - theta)/8` IR).
    pub sigma_p_max: f64,
    pub sigma_p_bound_stated: f64,
    pub sigma_p_bound_corrected: f64,
    /// `tree_class_sum * sigma_p_max`: the per-order constant multiplying `|U|^n 2^{-h(n-1)}`
    /// (UV) or `2^{h(3 - |P_v0| + theta)}` (IR) before the `C^n` factors.
    pub per_order_constant: f64,
}

/// Evaluates the tree-sum bound skeleton for orders `1..=max_n` and the given root scales.
/// UV rows use root scales `h >= 0` below `m`; IR rows use `h <= -1`.
pub fn kernel_bound_report(theta: f64, m: i32, h_range: &[i32], max_n: usize) -> Result<Vec<BoundRow>> {
    if !(0.0..1.0).contains(&theta) {
        return Err(CrgError::InvalidArgument(format!("theta must lie in [0, 1), got {theta}")));
    }
    let mut rows = Vec::new();
    for &h in h_range {
        let regime = if h >= 0 { TreeRegime::UvModified } else { TreeRegime::Infrared };
        let (a, y) = match regime {
            TreeRegime::UvModified => (0.5, 2f64.powf(-1.0 / 16.0)),
            TreeRegime::Infrared => (theta + (1.0 - theta) / 2.0, 2f64.powf(-(1.0 - theta) / 8.0)),
        };
        for n in 1..=max_n {
            let trees = enumerate_gn_trees(h, n, m, regime)?;
            let geometric_sum = trees.iter().map(GnTree::geometric_factor).sum();
            let tree_class_sum: f64 = trees.iter().map(|t| t.scale_weight(a)).sum();
            let sigma_p_max = trees.iter().map(|t| t.sigma_p(y)).fold(0.0, f64::max);
            rows.push(BoundRow {
                regime: if regime == TreeRegime::UvModified { "uv" } else { "ir" },
                n,
                h,
                n_trees: trees.len(),
                geometric_sum,
                tree_class_sum,
                tree_class_bound: tree_class_bound(n),
                sigma_p_max,
                sigma_p_bound_stated: sigma_p_bound_stated(n),
                sigma_p_bound_corrected: (1.0 / (1.0 - y)).powi(4 * n as i32),
                per_order_constant: tree_class_sum * sigma_p_max,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Little Schroeder numbers from the recurrence
    /// `(n + 1) s_n = 3 (2n - 1) s_{n-1} - (n - 2) s_{n-2}`, `s_1 = s_2 = 1`.
    fn schroeder(n: usize) -> usize {
        let mut s = vec![0i64, 1, 1];
        for k in 3..=n as i64 {
            let v = (3 * (2 * k - 3) * s[k as usize - 1] - (k - 3) * s[k as usize - 2]) / k;
            s.push(v);
        }
        s[n] as usize
    }

    #[test]
    fn shape_counts() {
        let expect = [1, 1, 3, 11, 45, 197, 903, 4279];
        for n in 1..=8 {
            let c = unlabeled_tree_count(n);
            assert_eq!(c, expect[n - 1]);
            assert_eq!(c, schroeder(n));
            assert!(c <= 4usize.pow(n as u32));
        }
    }

    #[test]
    fn single_endpoint_uv_tree_is_trivial() {
        for h in 0..4 {
            let t = enumerate_gn_trees(h, 1, 4, TreeRegime::UvModified).unwrap();
            assert_eq!(t.len(), 1);
            assert_eq!(t[0].vertices.len(), 1);
            assert!(t[0].vertices[0].endpoint);
        }
    }

    #[test]
    fn two_endpoint_count() {
        // One branching point on scales h+1..=M.
        let t = enumerate_gn_trees(1, 2, 5, TreeRegime::UvModified).unwrap();
        assert_eq!(t.len(), 4);
        let ir = enumerate_gn_trees(-3, 2, 0, TreeRegime::Infrared).unwrap();
        assert_eq!(ir.len(), 3);
    }

    #[test]
    fn identities_on_every_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (regime, h, m) in [(TreeRegime::UvModified, 0, 5), (TreeRegime::UvModified, 2, 6), (TreeRegime::Infrared, -4, 0)] {
            for n in 1..=4 {
                for t in enumerate_gn_trees(h, n, m, regime).unwrap() {
                    assert!(t.is_valid(regime));
                    let (a, b) = t.scale_sum_identity();
                    assert_eq!(a, b);
                    let (a, b) = t.endpoint_identity();
                    assert_eq!(a, b);
                    let (a, b) = t.endpoint_field_identity();
                    assert_eq!(a, b);
                    let p = t.sample_p_sizes(regime, &mut rng);
                    let (a, b) = t.field_sum_identity(&p);
                    assert_eq!(a, b);
                    if regime == TreeRegime::Infrared {
                        // All endpoints on scale 1 after a vertex on scale 0.
                        assert_eq!(t.endpoint_identity().1, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn variant_with_branching_number_fails_somewhere() {
        let trees = enumerate_gn_trees(0, 3, 4, TreeRegime::UvModified).unwrap();
        assert!(trees.iter().any(|t| {
            let (a, b) = t.scale_sum_variant_with_s();
            a != b
        }));
    }

    #[test]
    fn sigma_p_matches_brute_force() {
        // Brute-force sum over subset sizes with binomial multiplicities.
        fn binom(n: usize, k: usize) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        fn rec(t: &GnTree, v: usize, y: f64) -> Vec<f64> {
            // Returns weights indexed by p_v: sum over sub-assignments.
            if t.vertices[v].endpoint {
                let mut w = vec![0.0; 5];
                w[4] = 1.0;
                return w;
            }
            let mut acc = vec![1.0];
            for &c in &t.vertices[v].children {
                let wc = rec(t, c, y);
                let mut next = vec![0.0; acc.len() + wc.len() - 1];
                for (i, a) in acc.iter().enumerate() {
                    for (j, b) in wc.iter().enumerate() {
                        next[i + j] += a * b;
                    }
                }
                acc = next;
            }
            let mut out = vec![0.0; acc.len()];
            for (nb, wb) in acc.iter().enumerate() {
                for p in 0..=nb {
                    out[p] += wb * binom(nb, p) * y.powi(p as i32);
                }
            }
            out
        }
        let y = 2f64.powf(-1.0 / 16.0);
        for t in enumerate_gn_trees(0, 3, 3, TreeRegime::UvModified).unwrap() {
            let brute: f64 = rec(&t, 0, y).iter().sum();
            assert!((brute - t.sigma_p(y)).abs() < 1e-9 * brute);
        }
    }

    #[test]
    fn corrected_sigma_p_bound_holds() {
        let y = 2f64.powf(-1.0 / 16.0);
        for n in 1..=4 {
            for t in enumerate_gn_trees(0, n, 6, TreeRegime::UvModified).unwrap() {
                assert!(t.sigma_p(y) <= sigma_p_bound_corrected(n));
            }
        }
    }

    #[test]
    fn tree_class_sum_is_bounded() {
        let rows = kernel_bound_report(0.5, 8, &[0, -4], 4).unwrap();
        for r in &rows {
            assert!(r.tree_class_sum <= r.tree_class_bound, "{r:?}");
        }
        assert!(kernel_bound_report(1.0, 8, &[0], 2).is_err());
    }
}
