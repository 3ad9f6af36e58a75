mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::CliError;
use output::{write_artifacts, Outcome, Report, SCHEMA_VERSION};
use std::path::PathBuf;
use std::process::ExitCode;

/// Constructive-RG workbench for the half-filled honeycomb Hubbard model.
///
/// Settings are layered: built-in defaults, then the `--config` file (plain
/// `key = value` lines with keys L, beta, M, U, theta, tol_exact, tol_quad, seed,
/// threads, out_dir, preset), then flags. Every JSON report carries
/// `schema_version` and the resolved config.
///
/// Exit status: 0 when every checked invariant holds, 1 when one fails or a
/// computation errors, 2 for invalid configuration or an unknown preset.
#[derive(Debug, Parser)]
#[command(name = "fermi-crg", version)]
struct Cli {
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for `check` (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for the JSON report and CSV tables.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print the full JSON report instead of a text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Model {
    /// Linear lattice size.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Inverse temperature.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Ultraviolet scale index.
    #[arg(long = "M")]
    m: Option<u32>,
    /// Hubbard coupling.
    #[arg(long = "U", allow_hyphen_values = true)]
    u: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Free-theory free energy, band extrema and Fermi points.
    ///
    /// CSV band.csv: m1, m2 (grid labels), kx, ky, e_minus, e_plus (band energies).
    FreeTheory {
        #[command(flatten)]
        model: Model,
    },
    /// Single-scale propagator norms and fitted decay constants.
    ///
    /// CSV propagators.csv: scale, regime (uv/ir), supnorm, l1norm, then
    /// weighted_sup_k<K> = sup_x (1 + (2^h |x0| + |x|)^K) ||g^(h)(x)|| for each K.
    Propagators {
        #[command(flatten)]
        model: Model,
        /// Scales to tabulate (comma separated); default all from h_beta to M.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        scales: Option<Vec<i32>>,
        /// Decay weights K (comma separated).
        #[arg(long = "K", value_delimiter = ',', default_value = "0,2,4")]
        k: Vec<i32>,
    },
    /// Connected-diagram sum against the truncated expectation of the Grassmann engine.
    Diagrams {
        #[command(flatten)]
        model: Model,
        /// Perturbative order.
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
    },
    /// Determinant expansion against the engine on random covariances.
    Bbf {
        #[command(subcommand)]
        action: Option<BbfAction>,
        /// Number of clusters.
        #[arg(long, default_value_t = 3)]
        s: usize,
        /// Fields per cluster: one size for all, or one per cluster (comma separated).
        #[arg(long, value_delimiter = ',')]
        cluster_shape: Vec<usize>,
        /// Random covariance draws.
        #[arg(long, default_value_t = 10)]
        draws: usize,
    },
    /// Ultraviolet integration at order U^2.
    ///
    /// CSV flow.csv: h, zeta, v, z, delta, e, ebar (one row per scale h >= 1).
    UvFlow(FlowArgs),
    /// Infrared integration at order U^2 with running couplings (when 3 divides L).
    ///
    /// CSV flow.csv: h, zeta, v, z, delta, e, ebar (one row per scale h <= 0).
    IrFlow(FlowArgs),
    /// Invariance of the quadratic and quartic forms and the order-U^2 kernel relations.
    Symmetry {
        #[command(flatten)]
        model: Model,
    },
    /// Exact diagonalization: free energy, Taylor coefficients, density.
    Oracle {
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long = "U", allow_hyphen_values = true)]
        u: Option<f64>,
        /// Highest Taylor order in U (at most 2).
        #[arg(long, default_value_t = 2)]
        orders: usize,
    },
    /// Acceptance checks.
    ///
    /// Presets: all, free-theory, fermi-points, wick, cumulant, connected-diagrams,
    /// bbf, gram-hadamard, factorial-removal, perturbative, propagator-bounds,
    /// tadpoles, symmetry, trees, flow; or a criterion number 1..14.
    Check {
        /// Run every criterion.
        #[arg(long)]
        all: bool,
        /// Preset name (overrides the config file's preset).
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum BbfAction {
    /// Order-N free energy through the determinant expansion against the diagram sum.
    FreeEnergy {
        #[command(flatten)]
        model: Model,
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
    },
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[command(flatten)]
    model: Model,
    /// Exponent in the infrared envelope 2^{h(3+theta)}.
    #[arg(long)]
    theta: Option<f64>,
    /// Highest order of the tree-bound report.
    #[arg(long, default_value_t = 2)]
    max_order: usize,
}

fn resolve(cli: &Cli, model: Option<&Model>, theta: Option<f64>, preset: Option<String>) -> Result<RunConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let empty = Model::default();
    let m = model.unwrap_or(&empty);
    c.apply(Overrides { l: m.l, beta: m.beta, m: m.m, u: m.u, theta, seed: cli.seed, threads: cli.threads, out_dir: cli.out_dir.clone(), preset });
    c.validate()?;
    Ok(c)
}

fn execute(cli: &Cli) -> Result<(String, RunConfig, Outcome), CliError> {
    use Command::*;
    let (name, c, outcome) = match &cli.command {
        FreeTheory { model } => {
            let c = resolve(cli, Some(model), None, None)?;
            ("free-theory", c.clone(), commands::free_theory(&c)?)
        }
        Propagators { model, scales, k } => {
            let c = resolve(cli, Some(model), None, None)?;
            ("propagators", c.clone(), commands::propagators(&c, scales.clone(), k.clone())?)
        }
        Diagrams { model, n } => {
            let c = resolve(cli, Some(model), None, None)?;
            ("diagrams", c.clone(), commands::diagrams(&c, *n)?)
        }
        Bbf { action: Some(BbfAction::FreeEnergy { model, n }), .. } => {
            let c = resolve(cli, Some(model), None, None)?;
            ("bbf-free-energy", c.clone(), commands::bbf_free_energy(&c, *n)?)
        }
        Bbf { action: None, s, cluster_shape, draws } => {
            let c = resolve(cli, None, None, None)?;
            ("bbf", c.clone(), commands::bbf_equality(&c, *s, cluster_shape, *draws)?)
        }
        UvFlow(a) => {
            let c = resolve(cli, Some(&a.model), a.theta, None)?;
            ("uv-flow", c.clone(), commands::uv_flow(&c, a.max_order)?)
        }
        IrFlow(a) => {
            let c = resolve(cli, Some(&a.model), a.theta, None)?;
            ("ir-flow", c.clone(), commands::ir_flow(&c, a.max_order)?)
        }
        Symmetry { model } => {
            let c = resolve(cli, Some(model), None, None)?;
            ("symmetry", c.clone(), commands::symmetry(&c)?)
        }
        Oracle { l, beta, u, orders } => {
            let model = Model { l: *l, beta: *beta, m: None, u: *u };
            let c = resolve(cli, Some(&model), None, None)?;
            ("oracle", c.clone(), commands::oracle(&c, *orders)?)
        }
        Check { all, preset } => {
            let preset = if *all { Some("all".to_string()) } else { preset.clone() };
            let c = resolve(cli, None, None, preset)?;
            let name = c.preset.clone().ok_or_else(|| CliError::ConfigInvalid("check needs --all or --preset".into()))?;
            let ids = commands::resolve_preset(&name)?;
            ("check", c.clone(), commands::check(&ids, c.threads)?)
        }
    };
    Ok((name.to_string(), c, outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, config, outcome) = match execute(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("fermi-crg: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let report = Report { schema_version: SCHEMA_VERSION, command, config, pass: outcome.pass, result: outcome.result };
    if let Some(dir) = &report.config.out_dir {
        if let Err(e) = write_artifacts(dir, &report, &outcome.tables) {
            eprintln!("fermi-crg: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for line in &outcome.summary {
            println!("{line}");
        }
        println!("{}: {}", report.command, if report.pass { "ok" } else { "FAILED" });
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
