//! Fitted-model file: a versioned JSON document holding the estimate, its
//! standard errors, the covariate scaling and a fingerprint of the data it
//! was fitted on.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tci_core::centrality::{covariate_names, Scaling, WeightScheme};
use tci_core::graph::NetworkGraph;
use tci_core::likelihood::{LatentState, ParameterSet};
use tci_core::sem::stderr::StdErrors;
use tci_core::sem::{FitConfig, FitResult};

use crate::error::{CliError, CliResult};
use crate::io::fingerprint;

pub const SCHEMA_VERSION: u32 = 1;

/// Identity of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingData {
    pub origin: NaiveDate,
    pub evaluation_date: NaiveDate,
    pub connections: usize,
    /// SHA-256 of the canonical dataset files.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    /// Names of the `alpha` and `gamma` entries.
    pub coefficient_names: Vec<String>,
    pub params: ParameterSet,
    pub std_errors: StdErrors,
    pub initial: ParameterSet,
    pub scaling: Scaling,
    pub weight_scheme: WeightScheme,
    pub fit_config: FitConfig,
    pub seed: u64,
    pub training: TrainingData,
    /// Final latent state of the fit; starts the prediction sampler.
    pub latents: LatentState,
}

impl ModelArtifact {
    pub fn new(fit: FitResult, train: &NetworkGraph) -> CliResult<Self> {
        let est = fit.estimate;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            coefficient_names: fit.scaling.names.clone(),
            params: est.params,
            std_errors: est.std_errors,
            initial: est.initial,
            scaling: fit.scaling,
            weight_scheme: fit.weight_scheme,
            seed: est.config.seed,
            fit_config: est.config,
            training: TrainingData {
                origin: train.origin(),
                evaluation_date: train.date_at(train.tau()),
                connections: train.connections().len(),
                fingerprint: fingerprint(train)?,
            },
            latents: est.latents,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Schema(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let a: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "{}: model schema version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                a.schema_version
            )));
        }
        a.check_layout()?;
        Ok(a)
    }

    /// The coefficient layout must be the one this build featurizes.
    fn check_layout(&self) -> CliResult<()> {
        let names = covariate_names();
        let p = self.params.p();
        if self.coefficient_names != names || self.scaling.names != names || self.params.gamma.len() != p || p != names.len() {
            return Err(CliError::Mismatch(format!(
                "model covariate layout ({} columns) differs from this build's ({} columns)",
                self.coefficient_names.len(),
                names.len()
            )));
        }
        Ok(())
    }

    /// The training portfolio inside `g`, which must extend it: `g` as of
    /// the training evaluation date must reproduce the training fingerprint.
    pub fn training_graph(&self, g: &NetworkGraph) -> CliResult<NetworkGraph> {
        if g.origin() != self.training.origin {
            return Err(CliError::Mismatch(format!(
                "dataset origin {} differs from the model's {}",
                g.origin(),
                self.training.origin
            )));
        }
        let tau = g.time_of(self.training.evaluation_date);
        if tau > g.tau() + 1e-12 {
            return Err(CliError::Mismatch(format!(
                "dataset ends on {}, before the model's evaluation date {}",
                g.date_at(g.tau()),
                self.training.evaluation_date
            )));
        }
        let train = g.censor_at(tau)?;
        if fingerprint(&train)? != self.training.fingerprint {
            return Err(CliError::Mismatch(
                "dataset does not contain the portfolio the model was fitted on".into(),
            ));
        }
        Ok(train)
    }
}
