//! One function per subcommand. Each returns an [`Outcome`]; rendering and file output
//! happen in `main`.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, Outcome, Table};
use crg::acceptance::{self, bbf_equality_draw, CriterionResult, KNOWN_UNATTAINABLE};
use crg::bbf::free_energy_order_n_bbf;
use crg::diagrams::{connected_count_formula, naive_bound, DiagramEvaluator};
use crg::ed::{diagonalize, hole_particle_residual, perturbative_coefficients};
use crg::gn_trees::kernel_bound_report;
use crg::grassmann::{interaction, Covariance, Universe};
use crg::honeycomb::{fermi_points, HoneycombGeometry};
use crg::kernel::{exact_slices, sunset_kernel};
use crg::multiscale::{log2_slope, run_flow, ScaleConstants};
use crg::propagators::{h_beta, Cutoff, MatsubaraGrid, ScalePropagator};
use crg::symmetry::{check_quadratic_invariance, check_quartic_invariance, check_w2_structure, SymmetryOp};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

type Res = Result<Outcome, CliError>;

fn cplx(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn free_theory(c: &RunConfig) -> Res {
    let geom = HoneycombGeometry::new(c.l)?;
    let f = geom.free_specific_free_energy(c.beta)?;
    let e0 = geom.free_specific_energy();
    let (lo, hi) = geom.band_minmax();
    let fps: Vec<Value> = fermi_points().iter().map(|p| json!({ "k": p, "on_grid": geom.grid_index(*p).is_ok() })).collect();
    let mut band = Table::new("band", &["m1", "m2", "kx", "ky", "e_minus", "e_plus"]);
    for k in geom.momenta() {
        let e = geom.v0() * geom.dispersion(&k).norm();
        band.push([k.m1.to_string(), k.m2.to_string(), num(k.cartesian[0]), num(k.cartesian[1]), num(-e), num(e)]);
    }
    let result = json!({ "L": c.l, "beta": c.beta, "e0": e0, "f_beta": f, "fermi_points": fps, "band_minmax": [lo, hi] });
    Ok(Outcome::new(true, result, vec![format!("f_beta = {f:.15e}"), format!("e0 = {e0:.15e}")]).with_table(band))
}

/// Default scale list: every valid single-scale label from `h_beta` to `M`.
fn default_scales(c: &RunConfig) -> Vec<i32> {
    (h_beta(c.beta)..=c.m as i32).collect()
}

pub fn propagators(c: &RunConfig, scales: Option<Vec<i32>>, ks: Vec<i32>) -> Res {
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    let scales = scales.unwrap_or_else(|| default_scales(c));
    let nt = (4 * grid.len() + 8).next_power_of_two();
    let mut table = Table::new("propagators", &["scale", "regime", "supnorm", "l1norm"]);
    table.header.extend(ks.iter().map(|k| format!("weighted_sup_k{k}")));
    let mut ck: Vec<(i32, f64, f64)> = ks.iter().map(|&k| (k, 0.0, 0.0)).collect();
    let mut uv_tail: Vec<Vec<(i32, f64)>> = vec![Vec::new(); ks.len()];
    for &h in &scales {
        let t = ScalePropagator::new(&geom, &grid, Cutoff::Shell(h))?.position_table(nt);
        let regime = if h >= 1 { "uv" } else { "ir" };
        let mut row = vec![h.to_string(), regime.to_string(), num(t.sup_norm()), num(t.l1_norm())];
        for (i, &k) in ks.iter().enumerate() {
            let w = t.weighted_sup(&geom, h, k);
            row.push(num(w));
            if h >= 1 {
                ck[i].1 = ck[i].1.max(w);
                uv_tail[i].push((h, w));
            }
        }
        table.push(row);
    }
    let full = ScalePropagator::full(&geom, &grid).position_table(nt);
    // Uniformity is read off the upper half of the UV scales.
    let lo = (c.m as i32 + 1) / 2;
    let fits: Vec<Value> = ks
        .iter()
        .zip(&mut ck)
        .zip(&uv_tail)
        .map(|((&k, ck), pts)| {
            let drift = log2_slope(pts, lo.max(1)..=c.m as i32).map(|s| s.0);
            ck.2 = drift.unwrap_or(f64::NAN);
            json!({ "K": k, "C_K": ck.1, "tail_log2_drift": drift, "uniform": drift.map(|d| d.abs() <= 0.05) })
        })
        .collect();
    let pass = fits.iter().all(|f| f["uniform"].as_bool().unwrap_or(true));
    let result = json!({
        "scales": scales,
        "fitted_constants": fits,
        "full_supnorm": full.sup_norm(),
        "full_l1norm": full.l1_norm(),
        "time_slices": nt,
    });
    let summary = ck.iter().map(|(k, c, d)| format!("C_{k} = {c:.4e} (tail log2 drift {d:+.4})")).collect();
    Ok(Outcome::new(pass, result, summary).with_table(table))
}

pub fn diagrams(c: &RunConfig, n: usize) -> Res {
    if !(1..=4).contains(&n) {
        return Err(CliError::ConfigInvalid(format!("diagram order N must lie in 1..=4, got {n}")));
    }
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    let prop = ScalePropagator::full(&geom, &grid);
    let table = prop.momentum_table();
    let ev = DiagramEvaluator::new(table.clone(), &grid, c.l, c.u);
    let diagrams = ev.sum_connected(n)?;
    // The symbolic engine only covers the one-cell lattice with a small frequency set.
    let engine = if c.l == 1 {
        Universe::momentum(grid.len()).ok().and_then(|univ| {
            let cov = Covariance::momentum(&univ, &table);
            let v = interaction(&geom, &grid, c.u).ok()?;
            cov.truncated_expectation(&vec![v; n]).ok()
        })
    } else {
        None
    };
    let pos = prop.position_table((4 * grid.len() + 8).next_power_of_two());
    let nb = naive_bound(n, pos.sup_norm(), pos.l1_norm(), c.u, c.m, c.beta);
    let count_all: u128 = (1..=n as u128).product::<u128>().pow(2);
    let err = engine.map(|e| (diagrams - e).norm() / e.norm().max(1e-6));
    let pass = err.map_or(true, |e| e <= c.tol_quad);
    let result = json!({
        "N": n,
        "count_all": count_all.to_string(),
        "count_connected": connected_count_formula(n).to_string(),
        "E_T_diagrams": cplx(diagrams),
        "E_T_engine": engine.map(cplx),
        "abs_err": engine.map(|e| (diagrams - e).norm()),
        "naive_bound": { "spanning_tree_form": nb.spanning_tree_form, "constant": nb.constant, "factorial_form": nb.factorial_form },
    });
    let mut summary = vec![format!("E^T(V;{n}) from diagrams = {:.12e}", diagrams.re)];
    if let Some(e) = engine {
        summary.push(format!("E^T(V;{n}) from engine   = {:.12e}", e.re));
    }
    Ok(Outcome::new(pass, result, summary))
}

pub fn bbf_equality(c: &RunConfig, s: usize, shape: &[usize], draws: usize) -> Res {
    let sizes: Vec<usize> = match shape.len() {
        0 => vec![4; s],
        1 => vec![shape[0]; s],
        n if n == s => shape.to_vec(),
        n => return Err(CliError::ConfigInvalid(format!("cluster shape lists {n} sizes for s = {s} clusters"))),
    };
    if s == 0 || sizes.iter().sum::<usize>() > 12 || sizes.iter().any(|&x| x == 0 || x % 2 == 1) {
        return Err(CliError::ConfigInvalid(format!("clusters {sizes:?}: need s >= 1, even sizes, total fields <= 12")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    for _ in 0..draws {
        let (b, e) = bbf_equality_draw(&sizes, &mut rng)?;
        let abs = (b - e).norm();
        worst = worst.max(abs / (1.0 + e.norm()));
        rows.push(json!({ "det_expansion": cplx(b), "engine": cplx(e), "abs_err": abs, "rel_err": rel_err(b, e) }));
    }
    let pass = worst <= 1e-8;
    let result = json!({ "cluster_sizes": sizes, "draws": rows, "max_scaled_err": worst });
    Ok(Outcome::new(pass, result, vec![format!("{draws} draws with clusters {sizes:?}: max error {worst:.2e}")]))
}

pub fn bbf_free_energy(c: &RunConfig, n: usize) -> Res {
    if !(1..=3).contains(&n) {
        return Err(CliError::ConfigInvalid(format!("BBF free-energy order N must lie in 1..=3, got {n}")));
    }
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    let b = free_energy_order_n_bbf(n, &geom, &grid, c.u)?.value;
    let ev = DiagramEvaluator::new(ScalePropagator::full(&geom, &grid).momentum_table(), &grid, c.l, c.u);
    let d = ev.free_energy_order(n)?;
    let abs = (b - d).norm();
    let pass = abs <= c.tol_quad * d.norm().max(1e-6);
    let result = json!({ "N": n, "F_bbf": cplx(b), "F_diagrams": cplx(d), "abs_err": abs, "rel_err": rel_err(b, d) });
    Ok(Outcome::new(pass, result, vec![format!("F^(M;{n}): BBF {:.12e}, diagrams {:.12e}", b.re, d.re)]))
}

fn flow_table(sc: &ScaleConstants, v0: f64, keep: impl Fn(i32) -> bool) -> Table {
    let mut t = Table::new("flow", &["h", "zeta", "v", "z", "delta", "e", "ebar"]);
    for r in sc.rows.iter().filter(|r| keep(r.h)) {
        let f = sc.flow.rows.iter().find(|f| f.h == r.h);
        let (zeta, v, z, d) = f.map_or((1.0, v0, 0.0, 0.0), |f| (f.zeta, f.v, f.z, f.delta));
        t.push([r.h.to_string(), num(zeta), num(v), num(z), num(d), num(r.e), num(r.ebar)]);
    }
    t
}

fn check_max_order(max_order: usize) -> Result<(), CliError> {
    if !(1..=4).contains(&max_order) {
        return Err(CliError::ConfigInvalid(format!("max-order must lie in 1..=4, got {max_order}")));
    }
    Ok(())
}

pub fn uv_flow(c: &RunConfig, max_order: usize) -> Res {
    check_max_order(max_order)?;
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    let sc = run_flow(&geom, &grid, c.u, false)?;
    let m = c.m as i32;
    let pts: Vec<(i32, f64)> = sc.rows.iter().filter(|r| r.h >= 1).map(|r| (r.h, r.ebar)).collect();
    // The lowest shells hold few frequencies and the top two feel the cutoff edge.
    let window = if m >= 7 { 5..=m - 2 } else { 1..=m };
    let fit = log2_slope(&pts, window.clone());
    let roots: Vec<i32> = ((m - 6).max(0)..m).collect();
    let bounds = kernel_bound_report(c.theta, m, &roots, max_order)?;
    let result = json!({
        "order": 2,
        "f2_direct": sc.f2_direct,
        "f2_assembled": sc.f2_assembled(),
        "ebar_log2_slope": fit.map(|f| f.0),
        "ebar_fit_r2": fit.map(|f| f.1),
        "slope_window": [window.start(), window.end()],
        "slope_target": -1.0,
        "tree_bounds": bounds,
    });
    let summary = vec![
        format!("order-U^2 free energy: direct {:.12e}, assembled {:.12e}", sc.f2_direct, sc.f2_assembled()),
        format!("ebar_h log2-slope over [{}, {}]: {}", window.start(), window.end(), fit.map_or("n/a".into(), |f| format!("{:.4}", f.0))),
    ];
    Ok(Outcome::new(true, result, summary).with_table(flow_table(&sc, geom.v0(), |h| h >= 1)))
}

pub fn ir_flow(c: &RunConfig, max_order: usize) -> Res {
    check_max_order(max_order)?;
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    // Running couplings need the Fermi points on the grid.
    let with_flow = c.l % 3 == 0;
    let sc = run_flow(&geom, &grid, c.u, with_flow)?;
    let pts: Vec<(i32, f64)> = sc.rows.iter().filter(|r| r.h <= 0).map(|r| (r.h, r.e.abs() + r.ebar.abs())).collect();
    let fit = log2_slope(&pts, sc.h_beta..=0);
    let roots: Vec<i32> = (-3..=-1).collect();
    let bounds = kernel_bound_report(c.theta, c.m as i32, &roots, max_order)?;
    let result = json!({
        "order": 2,
        "h_beta": sc.h_beta,
        "running_couplings": with_flow,
        "max_coupling_deviation": with_flow.then(|| sc.flow.max_deviation(geom.v0())),
        "energy_log2_slope": fit.map(|f| f.0),
        "energy_fit_r2": fit.map(|f| f.1),
        "envelope_slope": 3.0 + c.theta,
        "f2_direct": sc.f2_direct,
        "f2_assembled": sc.f2_assembled(),
        "tree_bounds": bounds,
    });
    let summary = vec![
        format!("IR scales 0..{}; running couplings tracked: {with_flow}", sc.h_beta),
        format!("|e_h|+|ebar_h| log2-slope: {} (envelope {})", fit.map_or("n/a".into(), |f| format!("{:.4}", f.0)), 3.0 + c.theta),
    ];
    Ok(Outcome::new(true, result, summary).with_table(flow_table(&sc, geom.v0(), |h| h <= 0)))
}

pub fn symmetry(c: &RunConfig) -> Res {
    let geom = HoneycombGeometry::new(c.l)?;
    let grid = MatsubaraGrid::new(c.beta, c.m)?;
    let nv = grid.n_values();
    // The quartic form has |B|^4 terms; the two central frequencies suffice for it.
    let quartic_nv: Vec<i64> = vec![-1, 0];
    let mut rows = Vec::new();
    let mut pass = true;
    let mut summary = Vec::new();
    for op in SymmetryOp::all([0.4, -1.1], 0.7) {
        if op.needs_rotation_grid() && c.l % 3 != 0 {
            rows.push(json!({ "op": op.name(), "skipped": "grid is not rotation invariant (3 does not divide L)" }));
            continue;
        }
        let q2 = check_quadratic_invariance(op, &geom, c.beta, nv)?;
        let q4 = check_quartic_invariance(op, &geom, &quartic_nv)?;
        let ok = q2 <= c.tol_exact && q4 <= c.tol_exact;
        pass &= ok;
        summary.push(format!("{:<20} quadratic {q2:.1e} quartic {q4:.1e} {}", op.name(), if ok { "ok" } else { "FAIL" }));
        rows.push(json!({ "op": op.name(), "quadratic_residual": q2, "quartic_residual": q4, "pass": ok }));
    }
    let lines = ScalePropagator::full(&geom, &grid).position_table(exact_slices(&grid));
    let w = sunset_kernel(&lines, &grid, c.u, 0)?;
    let s = check_w2_structure(&w, &geom)?;
    let scale = w.sup_norm().max(1e-300);
    let rel: Vec<Value> = s.relations.iter().map(|(name, r)| json!({ "relation": name, "residual": r, "relative": r / scale })).collect();
    pass &= s.max_relation_residual() <= c.tol_exact * scale.max(1.0) && s.constants_real();
    summary.push(format!("order-U^2 kernel relations: max residual {:.1e}", s.max_relation_residual()));
    let result = json!({
        "ops": rows,
        "quadratic_n_values": nv,
        "quartic_n_values": quartic_nv,
        "kernel_relations": rel,
        "z0": s.z0.map(cplx),
        "delta0": s.delta0.map(cplx),
        "constants_real": s.constants_real(),
    });
    Ok(Outcome::new(pass, result, summary))
}

pub fn oracle(c: &RunConfig, orders: usize) -> Res {
    let geom = HoneycombGeometry::new(c.l)?;
    // Unreduced, so the density is not forced to one by the sector bookkeeping.
    let spec = diagonalize(&geom, c.u, false)?;
    let f = spec.free_energy(c.beta);
    let density = spec.density(c.beta);
    let coeffs = if orders > 0 { Some(perturbative_coefficients(&geom, c.beta, orders, 1e-3)?) } else { None };
    // Hole-particle pairs restricted to sectors small enough for a quick dense solve.
    let half = 2 * geom.n_cells() as u32;
    let binom = |n: u32, k: u32| (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64);
    let pairs: Vec<(u32, u32)> = (0..=half).flat_map(|a| (0..=half).map(move |b| (a, b))).filter(|&(a, b)| binom(half, a) * binom(half, b) <= 1000).collect();
    let hp = hole_particle_residual(&geom, c.u, &pairs)?;
    let pass = (density - 1.0).abs() <= c.tol_exact.max(1e-12) && hp <= 1e-9;
    let result = json!({
        "f_beta": f,
        "coefficients": coeffs.as_ref().map(|p| &p.coefficients),
        "plateau_spread": coeffs.as_ref().map(|p| p.plateau_spread),
        "density": density,
        "hp_symmetry_residual": hp,
        "hp_sectors_checked": pairs.len(),
    });
    let mut summary = vec![format!("f_beta = {f:.15e}"), format!("density = {density:.15}")];
    if let Some(p) = &coeffs {
        summary.push(format!("Taylor coefficients: {:?}", p.coefficients));
    }
    Ok(Outcome::new(pass, result, summary))
}

/// Preset names accepted by `check`, in criterion order.
pub const PRESETS: [&str; 14] = [
    "free-theory",
    "fermi-points",
    "wick",
    "cumulant",
    "connected-diagrams",
    "bbf",
    "gram-hadamard",
    "factorial-removal",
    "perturbative",
    "propagator-bounds",
    "tadpoles",
    "symmetry",
    "trees",
    "flow",
];

/// Criterion ids for a preset: a name from [`PRESETS`], `criterion-N`, `N`, or `all`.
pub fn resolve_preset(name: &str) -> Result<Vec<u32>, CliError> {
    if name == "all" {
        return Ok((1..=14).collect());
    }
    if let Some(i) = PRESETS.iter().position(|p| *p == name) {
        return Ok(vec![i as u32 + 1]);
    }
    let digits = name.strip_prefix("criterion-").unwrap_or(name);
    match digits.parse::<u32>() {
        Ok(i) if (1..=14).contains(&i) => Ok(vec![i]),
        _ => Err(CliError::PresetUnknown(name.to_string())),
    }
}

/// Runs the given criteria on up to `threads` workers; results come back in id order.
pub fn check(ids: &[u32], threads: usize) -> Res {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<CriterionResult>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads.min(ids.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&id) = ids.get(i) else { break };
                let r = acceptance::run(id);
                out.lock().expect("worker panicked").push(r);
            });
        }
    });
    let mut results = out.into_inner().expect("worker panicked");
    results.sort_by_key(|r| r.id);
    let unexpected: Vec<u32> = results.iter().filter(|r| !r.pass && !acceptance::is_known_unattainable(r.id)).map(|r| r.id).collect();
    let known: Vec<Value> = KNOWN_UNATTAINABLE.iter().map(|(id, why)| json!({ "id": id, "reason": why })).collect();
    let summary = results.iter().map(CriterionResult::line).collect();
    let result = json!({ "criteria": results, "known_unattainable": known, "unexpected_failures": unexpected });
    Ok(Outcome::new(unexpected.is_empty(), result, summary))
}
