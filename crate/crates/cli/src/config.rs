//! Flat `key = value` settings shared by the config file and the flags.
//!
//! Keys use the flag names with `_` or `-` interchangeably; `#` starts a
//! comment. Flags given on the command line override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use tci_core::centrality::WeightScheme;
use tci_core::predict::PredictConfig;
use tci_core::sem::FitConfig;
use tci_core::synth::{default_truth, GenConfig};

use crate::error::{CliError, CliResult};

/// Every key the tool understands.
const KEYS: &[&str] = &[
    // estimator
    "iterations",
    "mh_steps",
    "retain",
    "lambda",
    "irls_tol",
    "irls_max_iter",
    "averaging_window",
    "early_stop",
    "latent_effects",
    "se_draws",
    // prediction
    "pred_draws",
    "pred_sweeps",
    // generator
    "n_entities",
    "n_policies",
    "n_connections",
    "years",
    "origin",
    "multiple_buyer_share",
    "attachment",
    "policy_days",
    "target_claim_rate",
    "target_truncated_share",
    "beta",
    "nu",
    "psi",
    "rho",
    // shared
    "seed",
    "threads",
    "weight_scheme",
    "tau",
];

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines. Duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value'", n + 1))?;
        let key = normalize(k);
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key '{key}'", n + 1));
        }
    }
    Ok(out)
}

/// Merged settings of one invocation.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let map = parse_kv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("{}: unknown key '{k}'", path.display())));
        }
        Ok(Self { map })
    }

    /// Overrides `key` when a flag was given.
    pub fn set(&mut self, key: &str, value: Option<String>) {
        debug_assert!(KEYS.contains(&key), "undeclared key {key}");
        if let Some(v) = value {
            self.map.insert(key.to_string(), v);
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key} = '{v}': {e}")))
            })
            .transpose()
    }

    /// Comma-separated list.
    fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<T>()
                            .map_err(|e| CliError::Config(format!("{key} = '{v}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// A number, or `none` to switch the setting off.
    fn optional(&self, key: &str) -> CliResult<Option<Option<f64>>> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(None),
            Some("none") => Ok(Some(None)),
            Some(_) => Ok(Some(self.get(key)?)),
        }
    }

    fn triple(&self, key: &str) -> CliResult<Option<[f64; 3]>> {
        self.list::<f64>(key)?
            .map(|v| {
                <[f64; 3]>::try_from(v)
                    .map_err(|v| CliError::Config(format!("{key} needs 3 values, got {}", v.len())))
            })
            .transpose()
    }

    pub fn seed(&self) -> CliResult<u64> {
        Ok(self.get("seed")?.unwrap_or(1))
    }

    pub fn threads(&self) -> CliResult<Option<usize>> {
        match self.get::<usize>("threads")? {
            Some(0) => Err(CliError::Config("threads must be positive".into())),
            t => Ok(t),
        }
    }

    pub fn weight_scheme(&self) -> CliResult<WeightScheme> {
        Ok(self.get("weight_scheme")?.unwrap_or_default())
    }

    /// Evaluation date override.
    pub fn tau(&self) -> CliResult<Option<NaiveDate>> {
        self.get("tau")
    }

    pub fn fit_config(&self) -> CliResult<FitConfig> {
        let mut c = FitConfig {
            seed: self.seed()?,
            ..FitConfig::default()
        };
        if let Some(v) = self.get("iterations")? {
            c.iterations = v;
        }
        if let Some(v) = self.get("mh_steps")? {
            c.mh_steps = v;
        }
        if let Some(v) = self.list("retain")? {
            c.retain = v;
        }
        if let Some(v) = self.get("lambda")? {
            c.lambda = v;
        }
        if let Some(v) = self.get("irls_tol")? {
            c.irls_tol = v;
        }
        if let Some(v) = self.get("irls_max_iter")? {
            c.irls_max_iter = v;
        }
        if let Some(v) = self.get("averaging_window")? {
            c.averaging_window = v;
        }
        if let Some(v) = self.optional("early_stop")? {
            c.early_stop = v;
        }
        if let Some(v) = self.get("latent_effects")? {
            c.latent_effects = v;
        }
        if let Some(v) = self.get("se_draws")? {
            c.se_draws = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn predict_config(&self) -> CliResult<PredictConfig> {
        let mut c = PredictConfig {
            seed: self.seed()?,
            ..PredictConfig::default()
        };
        if let Some(v) = self.get("pred_draws")? {
            c.draws = v;
            c.sweeps = 2 * v;
        }
        if let Some(v) = self.get("pred_sweeps")? {
            c.sweeps = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn gen_config(&self) -> CliResult<GenConfig> {
        let mut c = GenConfig {
            seed: self.seed()?,
            weight_scheme: self.weight_scheme()?,
            ..GenConfig::default()
        };
        if let Some(v) = self.get("n_entities")? {
            c.n_entities = v;
        }
        if let Some(v) = self.get("n_policies")? {
            c.n_policies = v;
        }
        if let Some(v) = self.get("n_connections")? {
            c.n_connections = v;
        }
        if let Some(v) = self.get("years")? {
            c.years = v;
        }
        if let Some(v) = self.get("origin")? {
            c.origin = v;
        }
        if let Some(v) = self.get("multiple_buyer_share")? {
            c.multiple_buyer_share = v;
        }
        if let Some(v) = self.get("attachment")? {
            c.attachment = v;
        }
        if let Some(v) = self.get("policy_days")? {
            c.policy_days = v;
        }
        if let Some(v) = self.optional("target_claim_rate")? {
            c.target_claim_rate = v;
        }
        if let Some(v) = self.optional("target_truncated_share")? {
            c.target_truncated_share = v;
        }
        if let Some(date) = self.tau()? {
            c.tau = Some((date - c.origin).num_days() as f64 / tci_core::graph::DAYS_PER_YEAR);
        }
        let mut truth = default_truth();
        if let Some(v) = self.triple("beta")? {
            truth.beta = v;
        }
        if let Some(v) = self.triple("nu")? {
            truth.nu = v;
        }
        if let Some(v) = self.get("psi")? {
            truth.psi = v;
        }
        if let Some(v) = self.get("rho")? {
            truth.rho = v;
        }
        if self.get::<bool>("latent_effects")? == Some(false) {
            truth.beta = [0.0; 3];
            truth.nu = [0.0; 3];
            truth.rho = 0.0;
        }
        truth.validate()?;
        c.params = Some(truth);
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let m = parse_kv("# fit\niterations = 50\nmh-steps=4 # inline\n\nretain = 3, 4\n").unwrap();
        assert_eq!(m["iterations"], "50");
        assert_eq!(m["mh_steps"], "4");
        assert_eq!(m["retain"], "3, 4");
        assert!(parse_kv("a = 1\na = 2").is_err());
        assert!(parse_kv("no equals sign").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.cfg");
        std::fs::write(&path, "iterations = 50\nretain = 3,4\nmh_steps = 4\naveraging_window = 5\nearly_stop = 1e-4\n").unwrap();
        let mut s = Settings::load(Some(&path)).unwrap();
        s.set("iterations", Some("7".into()));
        s.set("lambda", None);
        let c = s.fit_config().unwrap();
        assert_eq!(c.iterations, 7);
        assert_eq!(c.retain, vec![3, 4]);
        assert_eq!(c.averaging_window, 5);
        assert_eq!(c.early_stop, Some(1e-4));
        assert_eq!(c.lambda, FitConfig::default().lambda);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "iteratons = 5\n").unwrap();
        assert!(matches!(Settings::load(Some(&path)), Err(CliError::Config(_))));
        let mut s = Settings::default();
        s.set("iterations", Some("many".into()));
        assert!(matches!(s.fit_config(), Err(CliError::Config(_))));
        let mut s = Settings::default();
        s.set("beta", Some("0.1,0.2".into()));
        assert!(matches!(s.gen_config(), Err(CliError::Config(_))));
    }

    #[test]
    fn generator_settings() {
        let mut s = Settings::default();
        s.set("target_claim_rate", Some("none".into()));
        s.set("tau", Some("2018-01-01".into()));
        s.set("latent_effects", Some("false".into()));
        let c = s.gen_config().unwrap();
        assert_eq!(c.target_claim_rate, None);
        assert!((c.tau.unwrap() - 3.0).abs() < 0.01);
        assert!(c.params.unwrap().is_glm());
    }
}
