use std::path::Path;

use anyhow::Context;
use bdfd::problems::{
    build_biot_problem, build_spectral_problem, BiotParameters, EllipticParabolicSystem, Profile, BIOT_AMPLITUDE,
    BIOT_RATE,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::usage;

pub const BIOT_KEYS: &str = "lambda, mu, kappa_over_nu, M, alpha";

/// Spectral problem parameters; every key is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub mu: Vec<f64>,
    pub b: Option<Vec<f64>>,
    /// Decay rate of the exact pressure `e^{−rate·t}`.
    pub rate: f64,
    pub t_final: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            mu: vec![0.03, 0.07, 0.11],
            b: None,
            rate: 0.5,
            t_final: 10.0,
        }
    }
}

impl SpectralConfig {
    pub fn build(&self) -> anyhow::Result<EllipticParabolicSystem> {
        let b = self
            .b
            .clone()
            .unwrap_or_else(|| (0..self.mu.len()).map(|i| 1.0 + i as f64).collect());
        Ok(build_spectral_problem(&self.mu, &b, Profile::Exponential { rate: self.rate })?)
    }
}

/// Biot material parameters plus the final time.
#[derive(Debug, Clone, Deserialize)]
pub struct BiotConfig {
    #[serde(flatten)]
    pub params: BiotParameters,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
}

fn default_t_final() -> f64 {
    10.0
}

impl BiotConfig {
    pub fn build(&self, mesh: usize) -> anyhow::Result<EllipticParabolicSystem> {
        Ok(build_biot_problem(mesh, &self.params, BIOT_AMPLITUDE, BIOT_RATE)?)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, expected: &str) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e} (expected keys: {expected})", path.display())))
}

pub fn spectral(path: Option<&Path>) -> anyhow::Result<SpectralConfig> {
    match path {
        Some(p) => read_json(p, "mu, b, rate, t_final"),
        None => Ok(SpectralConfig::default()),
    }
}

pub fn biot(path: Option<&Path>) -> anyhow::Result<BiotConfig> {
    let path = path.ok_or_else(|| {
        usage(format!(
            "the biot problem needs --config <file.json> with keys {BIOT_KEYS} (optional: t_final)"
        ))
    })?;
    let cfg: BiotConfig = read_json(path, BIOT_KEYS)?;
    cfg.params.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Parses `"start:count"` into `count` halving step sizes.
pub fn parse_taus(raw: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || usage(format!("--taus expects \"start:count\", got {raw:?}"));
    let (start, count) = raw.split_once(':').ok_or_else(bad)?;
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let count: u32 = count.trim().parse().map_err(|_| bad())?;
    if !(start > 0.0 && start.is_finite()) || count == 0 {
        return Err(bad());
    }
    Ok((0..count).map(|j| start / 2f64.powi(j as i32)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taus_halve() {
        assert_eq!(parse_taus("0.5:3").unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(parse_taus("0.5").is_err());
        assert!(parse_taus("-1:3").is_err());
        assert!(parse_taus("0.5:0").is_err());
    }

    #[test]
    fn biot_config_keys() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        std::fs::write(&good, r#"{"lambda":0.5,"mu":0.125,"kappa_over_nu":0.05,"M":0.27,"alpha":0.5}"#).unwrap();
        let cfg = biot(Some(&good)).unwrap();
        assert_eq!(cfg.params, BiotParameters::reference());
        assert_eq!(cfg.t_final, 10.0);

        let partial = dir.path().join("partial.json");
        std::fs::write(&partial, r#"{"lambda":0.5}"#).unwrap();
        let msg = biot(Some(&partial)).unwrap_err().to_string();
        assert!(msg.contains("kappa_over_nu") && msg.contains("alpha"), "{msg}");

        let msg = biot(None).unwrap_err().to_string();
        assert!(msg.contains(BIOT_KEYS));
    }

    #[test]
    fn spectral_defaults() {
        let cfg = spectral(None).unwrap();
        assert_eq!(cfg.mu, vec![0.03, 0.07, 0.11]);
        assert_eq!(cfg.build().unwrap().dim_p(), 3);
    }
}
