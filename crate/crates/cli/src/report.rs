//! The JSON fit report written by `sweep` and `fit`.

use std::fs;
use std::path::Path;

use rkmix::selection::{loglik, ModelRow, SelectionReport, Sweep};
use rkmix::{AmplitudePopulation, EmConfig, KConvention, RKMixture};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::input::{InputRecord, Prepared, Preprocessing};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub model_name: String,
    pub m: usize,
    pub k: usize,
    pub theta: Option<RKMixture>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    #[serde(default)]
    pub degenerate_components: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selections {
    pub by_aic: Option<usize>,
    pub by_bic: Option<usize>,
    pub by_ll: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReportFile {
    pub version: u32,
    pub input: InputRecord,
    pub preprocessing: Preprocessing,
    pub em_config: EmConfig,
    pub k_convention: KConvention,
    pub models: Vec<ModelEntry>,
    pub selections: Selections,
}

impl FitReportFile {
    pub fn new(prepared: &Prepared, config: &EmConfig, sweep: &Sweep) -> Self {
        let report = &sweep.report;
        let models = report
            .rows
            .iter()
            .map(|row| {
                let fit = sweep.fits.iter().find(|(m, _)| *m == row.m).and_then(|(_, f)| f.as_ref().ok());
                ModelEntry {
                    model_name: row.model_name.clone(),
                    m: row.m,
                    k: row.k,
                    theta: fit.map(|f| f.theta.clone()),
                    loglik: row.loglik,
                    aic: row.aic,
                    bic: row.bic,
                    iterations: fit.map(|f| f.iterations),
                    converged: fit.map(|f| f.converged),
                    degenerate_components: fit.map(|f| f.degenerate_components.clone()).unwrap_or_default(),
                    failure: row.failure.clone(),
                }
            })
            .collect();
        Self {
            version: REPORT_VERSION,
            input: prepared.input.clone(),
            preprocessing: prepared.preprocessing.clone(),
            em_config: config.clone(),
            k_convention: report.k_convention,
            models,
            selections: Selections {
                by_aic: report.selected_by_aic,
                by_bic: report.selected_by_bic,
                by_ll: report.selected_by_ll,
            },
        }
    }

    pub fn model(&self, m: usize) -> Option<&ModelEntry> {
        self.models.iter().find(|e| e.m == m)
    }

    /// The selection table view of the stored rows.
    pub fn selection_report(&self) -> SelectionReport {
        let rows = self
            .models
            .iter()
            .map(|e| ModelRow {
                model_name: e.model_name.clone(),
                m: e.m,
                k: e.k,
                loglik: e.loglik,
                aic: e.aic,
                bic: e.bic,
                failure: e.failure.clone(),
            })
            .collect();
        SelectionReport::from_rows(rows, self.input.n_samples, self.k_convention)
    }

    /// Recomputes each stored log-likelihood from its θ and returns the
    /// largest relative discrepancy.
    pub fn max_loglik_discrepancy(&self, data: &AmplitudePopulation) -> Result<f64, CliError> {
        let mut worst: f64 = 0.0;
        for e in &self.models {
            if let (Some(theta), Some(stored)) = (&e.theta, e.loglik) {
                let recomputed = loglik(data, theta)?;
                worst = worst.max(((recomputed - stored) / stored).abs());
            }
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let report: Self =
            serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if report.version != REPORT_VERSION {
            return Err(CliError::data(format!(
                "{}: unsupported report version {}",
                path.display(),
                report.version
            )));
        }
        Ok(report)
    }
}
