//! TOML run configuration. Every key is optional; command-line flags take
//! precedence over the file, and the file over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub protocol: Option<String>,
    pub p: Option<usize>,
    #[serde(alias = "K")]
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub sample_seed: Option<u64>,
    pub seeds: Option<usize>,
    pub hub_fraction: Option<f64>,
    pub distance: Option<PathBuf>,
    pub data: Option<Vec<PathBuf>>,
    pub truth: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub knowledge: Option<String>,
    pub compare_knowledge: Option<String>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_step: Option<usize>,
    pub lambda_steps: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub v_grid: Option<Vec<f64>>,
    pub edge_tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

pub const DEFAULT_P: usize = 50;
pub const DEFAULT_K: usize = 2;
pub const DEFAULT_N: usize = 50;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_LAMBDA_STEPS: usize = 30;

/// Sampling seed used when none is given, kept apart from the truth seed.
pub fn default_sample_seed(seed: u64) -> u64 {
    seed.wrapping_add(1_000_000)
}

/// Parses `"0.1,0.2"` into numbers.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {:?}", t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let c: FileConfig = toml::from_str("protocol = \"cohub\"\nK = 3\nlambdas = [0.1, 0.2]\n").unwrap();
        assert_eq!(c.protocol.as_deref(), Some("cohub"));
        assert_eq!(c.k, Some(3));
        assert_eq!(c.lambdas, Some(vec![0.1, 0.2]));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_f64_list("0.5, 1,2e-3").unwrap(), vec![0.5, 1.0, 0.002]);
        assert!(parse_f64_list("1,,2").is_err());
    }
}
