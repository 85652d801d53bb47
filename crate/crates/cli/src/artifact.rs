//! The serialized model artifact: spec by column names, coefficients at
//! full precision, fit metadata. Round-trips losslessly through JSON.

use crate::io::Table;
use crate::CliError;
use compresid::regression::{CoefficientVector, ModelSpec, TermList};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub(crate) const ARTIFACT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct SubmodelSpec {
    pub component: String,
    pub intercept: bool,
    pub covariates: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct CoefBlock {
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct ZeroReplacement {
    pub epsilon: f64,
    pub rows_affected: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct ModelArtifact {
    pub version: u32,
    pub components: Vec<String>,
    pub reference_component: String,
    pub mean_submodels: Vec<SubmodelSpec>,
    pub precision_intercept: bool,
    pub precision_covariates: Vec<String>,
    pub coefficients: CoefBlock,
    pub std_errors: Option<CoefBlock>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub preprocessing: Option<ZeroReplacement>,
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::data(format!("serializing artifact: {e}")))?;
        crate::io::write_atomic(path, &(json + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let artifact: Self = serde_json::from_str(&raw)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(CliError::data(format!(
                "unsupported artifact version {} in {}",
                artifact.version,
                path.display()
            )));
        }
        Ok(artifact)
    }

    /// Rebuild the core spec and coefficients against a data file by
    /// resolving covariate names to column indices.
    pub fn resolve(&self, table: &Table) -> Result<(ModelSpec, CoefficientVector), CliError> {
        let k = self.components.len();
        let reference_component = self
            .components
            .iter()
            .position(|c| c == &self.reference_component)
            .ok_or_else(|| {
                CliError::data(format!(
                    "reference component '{}' not among the artifact components",
                    self.reference_component
                ))
            })?;
        let mut mean_terms = Vec::with_capacity(k - 1);
        for sub in &self.mean_submodels {
            let columns = sub
                .covariates
                .iter()
                .map(|c| table.column_index(c))
                .collect::<Result<Vec<_>, _>>()?;
            mean_terms.push(TermList::with_columns(sub.intercept, columns));
        }
        let precision_terms = TermList::with_columns(
            self.precision_intercept,
            self.precision_covariates
                .iter()
                .map(|c| table.column_index(c))
                .collect::<Result<Vec<_>, _>>()?,
        );
        let spec = ModelSpec {
            k,
            mean_terms,
            precision_terms,
            reference_component,
        };
        let coef = CoefficientVector {
            beta: self.coefficients.beta.clone(),
            gamma: self.coefficients.gamma.clone(),
        };
        Ok((spec, coef))
    }
}
