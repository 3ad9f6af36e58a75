//! Run configuration: defaults, a plain `key = value` file, then command-line flags.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "U")]
    pub u: f64,
    pub theta: f64,
    /// Tolerance for identities that hold exactly in floating point.
    pub tol_exact: f64,
    /// Tolerance for quantities that go through quadrature or differencing.
    pub tol_quad: f64,
    pub seed: u64,
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { l: 1, beta: 2.0, m: 6, u: 1.0, theta: 0.5, tol_exact: 1e-12, tol_quad: 1e-9, seed: 0, threads: 1, out_dir: None, preset: None }
    }
}

/// Every key optional, for layering a file over the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    #[serde(rename = "L")]
    l: Option<usize>,
    beta: Option<f64>,
    #[serde(rename = "M")]
    m: Option<u32>,
    #[serde(rename = "U")]
    u: Option<f64>,
    theta: Option<f64>,
    tol_exact: Option<f64>,
    tol_quad: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
    out_dir: Option<PathBuf>,
    preset: Option<String>,
}

/// Overrides coming from flags; `None` leaves the current value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub l: Option<usize>,
    pub beta: Option<f64>,
    pub m: Option<u32>,
    pub u: Option<f64>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub preset: Option<String>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let p: PartialConfig = toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        let mut c = Self::default();
        c.apply(Overrides { l: p.l, beta: p.beta, m: p.m, u: p.u, theta: p.theta, seed: p.seed, threads: p.threads, out_dir: p.out_dir, preset: p.preset });
        if let Some(t) = p.tol_exact {
            c.tol_exact = t;
        }
        if let Some(t) = p.tol_quad {
            c.tol_quad = t;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(l, beta, m, u, theta, seed, threads);
        if o.out_dir.is_some() {
            self.out_dir = o.out_dir;
        }
        if o.preset.is_some() {
            self.preset = o.preset;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::ConfigInvalid(msg));
        if self.l < 1 {
            return bad(format!("L must be >= 1, got {}", self.l));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive and finite, got {}", self.beta));
        }
        if self.m < 1 {
            return bad(format!("M must be >= 1, got {}", self.m));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !self.u.is_finite() {
            return bad(format!("U must be finite, got {}", self.u));
        }
        if !(self.tol_exact > 0.0 && self.tol_quad > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.threads < 1 {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let c = RunConfig { l: 3, beta: 0.1 + 0.2, m: 9, u: -1.0 / 3.0, theta: 0.25, seed: 7, out_dir: Some("out".into()), preset: Some("wick".into()), ..RunConfig::default() };
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml_str("beta = 5.0\nL = 2\n").unwrap();
        assert_eq!((c.l, c.beta, c.m), (2, 5.0, RunConfig::default().m));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(RunConfig::from_toml_str("gamma = 1.0"), Err(CliError::ConfigInvalid(_))));
    }

    #[test]
    fn flags_win() {
        let mut c = RunConfig::from_toml_str("beta = 5.0").unwrap();
        c.apply(Overrides { beta: Some(1.5), ..Overrides::default() });
        assert_eq!(c.beta, 1.5);
    }

    #[test]
    fn validation_ranges() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        for c in [
            RunConfig { l: 0, ..ok.clone() },
            RunConfig { beta: 0.0, ..ok.clone() },
            RunConfig { beta: f64::NAN, ..ok.clone() },
            RunConfig { m: 0, ..ok.clone() },
            RunConfig { theta: 1.0, ..ok.clone() },
            RunConfig { theta: 0.0, ..ok.clone() },
            RunConfig { threads: 0, ..ok.clone() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
