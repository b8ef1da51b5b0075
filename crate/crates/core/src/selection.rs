//! Model-order selection by penalized likelihood.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::em::{em_fit, EmConfig, EmError, FitResult};
use crate::mixture::{mixture_log_pdf, mixture_pfa, RKMixture};
use crate::population::AmplitudePopulation;

/// Two criteria values closer than this count as a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("log-likelihood is not finite: sample {index} (a = {value}) has zero density")]
    NonFiniteLikelihood { index: usize, value: f64 },
    #[error("population is empty")]
    Empty,
    #[error("thresholds must be finite and ascending")]
    UnsortedThresholds,
    #[error("component range {0:?} is empty or starts at 0")]
    EmptyRange(RangeInclusive<usize>),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// How mixture weights enter the parameter count k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KConvention {
    /// All M weights counted: k = 3M − 1.
    #[default]
    #[serde(rename = "3M-1")]
    AllWeights,
    /// M − 1 free weights: k = 3M − 2.
    #[serde(rename = "3M-2")]
    FreeWeights,
}

impl fmt::Display for KConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KConvention::AllWeights => "3M-1",
            KConvention::FreeWeights => "3M-2",
        })
    }
}

impl FromStr for KConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('\u{2212}', "-").as_str() {
            "3M-1" | "all-weights" => Ok(KConvention::AllWeights),
            "3M-2" | "free-weights" => Ok(KConvention::FreeWeights),
            other => Err(format!("unknown k convention '{other}' (expected 3M-1 or 3M-2)")),
        }
    }
}

/// Number of free parameters k of an M-component model; 1 for pure Rayleigh.
pub fn param_count(m: usize, convention: KConvention) -> usize {
    match (m, convention) {
        (0 | 1, _) => 1,
        (m, KConvention::AllWeights) => 3 * m - 1,
        (m, KConvention::FreeWeights) => 3 * m - 2,
    }
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    -2.0 * loglik + 2.0 * k as f64
}

/// Natural-log BIC.
pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    -2.0 * loglik + (n as f64).ln() * k as f64
}

/// Σ ln p(a_n | θ).
pub fn loglik(data: &AmplitudePopulation, theta: &RKMixture) -> Result<f64, SelectionError> {
    if data.is_empty() {
        return Err(SelectionError::Empty);
    }
    let mut total = 0.0;
    for (index, &value) in data.as_slice().iter().enumerate() {
        let lp = mixture_log_pdf(value, theta)
            .map_err(|_| SelectionError::NonFiniteLikelihood { index, value })?;
        if !lp.is_finite() {
            return Err(SelectionError::NonFiniteLikelihood { index, value });
        }
        total += lp;
    }
    Ok(total)
}

/// "R-K{M-1}", or "R" for the Rayleigh-only model.
pub fn model_name(m: usize) -> String {
    if m <= 1 {
        "R".to_string()
    } else {
        format!("R-K{}", m - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model_name: String,
    pub m: usize,
    pub k: usize,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ModelRow {
    pub fn fitted(m: usize, ll: f64, n: usize, convention: KConvention) -> Self {
        let k = param_count(m, convention);
        Self {
            model_name: model_name(m),
            m,
            k,
            loglik: Some(ll),
            aic: Some(aic(ll, k)),
            bic: Some(bic(ll, k, n)),
            failure: None,
        }
    }

    pub fn failed(m: usize, reason: impl Into<String>, convention: KConvention) -> Self {
        Self {
            model_name: model_name(m),
            m,
            k: param_count(m, convention),
            loglik: None,
            aic: None,
            bic: None,
            failure: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rows: Vec<ModelRow>,
    pub n_samples: usize,
    pub k_convention: KConvention,
    pub selected_by_aic: Option<usize>,
    pub selected_by_bic: Option<usize>,
    pub selected_by_ll: Option<usize>,
}

impl SelectionReport {
    /// Builds the report from rows sorted into ascending M.
    pub fn from_rows(mut rows: Vec<ModelRow>, n_samples: usize, k_convention: KConvention) -> Self {
        rows.sort_by_key(|r| r.m);
        let pick = |key: &dyn Fn(&ModelRow) -> Option<f64>| {
            let mut best: Option<(usize, f64)> = None;
            for row in &rows {
                if let Some(v) = key(row) {
                    // Rows are in ascending M, so only a clear win replaces.
                    if best.is_none_or(|(_, b)| v < b - TIE_TOL) {
                        best = Some((row.m, v));
                    }
                }
            }
            best.map(|(m, _)| m)
        };
        let selected_by_aic = pick(&|r| r.aic);
        let selected_by_bic = pick(&|r| r.bic);
        let selected_by_ll = pick(&|r| r.loglik.map(|l| -l));
        Self {
            rows,
            n_samples,
            k_convention,
            selected_by_aic,
            selected_by_bic,
            selected_by_ll,
        }
    }

    /// Report for known log-likelihoods, e.g. a published table.
    pub fn from_logliks(logliks: &[(usize, f64)], n_samples: usize, convention: KConvention) -> Self {
        let rows = logliks
            .iter()
            .map(|&(m, ll)| ModelRow::fitted(m, ll, n_samples, convention))
            .collect();
        Self::from_rows(rows, n_samples, convention)
    }

    pub fn row(&self, m: usize) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.m == m)
    }

    /// Aligned plain-text table: Model | LL | AIC | BIC, values rounded to
    /// integers.
    pub fn render_table(&self) -> String {
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let fmt = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |v| format!("{v:.0}"));
                [r.model_name.clone(), fmt(r.loglik), fmt(r.aic), fmt(r.bic)]
            })
            .collect();
        let header = ["Model", "LL", "AIC", "BIC"];
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cols: [&str; 4]| {
            out.push_str(&format!("{:<w0$}", cols[0], w0 = widths[0]));
            for (c, w) in cols[1..].iter().zip(&widths[1..]) {
                out.push_str(&format!("  {c:>w$}"));
            }
            out.push('\n');
        };
        line(&mut out, header);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}

/// Outcome of a sweep: the report plus each M's fit (or its error).
#[derive(Debug, Clone)]
pub struct Sweep {
    pub report: SelectionReport,
    pub fits: Vec<(usize, Result<FitResult, EmError>)>,
}

/// Fits every M in the range and tabulates the criteria. Fits run on a
/// worker pool of `jobs` threads (default: available parallelism); results
/// are keyed by M, so the output does not depend on scheduling.
pub fn sweep(
    data: &AmplitudePopulation,
    m_range: RangeInclusive<usize>,
    config: &EmConfig,
    convention: KConvention,
    jobs: Option<usize>,
) -> Result<Sweep, SelectionError> {
    use rayon::prelude::*;
    if m_range.is_empty() || *m_range.start() == 0 {
        return Err(SelectionError::EmptyRange(m_range));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| SelectionError::Pool(e.to_string()))?;
    let ms: Vec<usize> = m_range.collect();
    let fits: Vec<(usize, Result<FitResult, EmError>)> =
        pool.install(|| ms.par_iter().map(|&m| (m, em_fit(data, m, config))).collect());
    let rows = fits
        .iter()
        .map(|(m, fit)| match fit {
            Ok(f) => ModelRow::fitted(*m, f.loglik, data.len(), convention),
            Err(e) => ModelRow::failed(*m, e.to_string(), convention),
        })
        .collect();
    Ok(Sweep {
        report: SelectionReport::from_rows(rows, data.len(), convention),
        fits,
    })
}

/// Exceedance curve: the empirical fraction above each threshold, with an
/// optional model column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfaCurve {
    pub thresholds: Vec<f64>,
    pub empirical: Vec<f64>,
    pub model: Option<Vec<f64>>,
}

impl PfaCurve {
    pub fn with_model(mut self, theta: &RKMixture) -> Self {
        self.model = Some(model_pfa(&self.thresholds, theta));
        self
    }
}

/// mixture_pfa over a threshold grid; negative thresholds map to 1.
pub fn model_pfa(thresholds: &[f64], theta: &RKMixture) -> Vec<f64> {
    thresholds
        .iter()
        .map(|&t| mixture_pfa(t.max(0.0), theta).unwrap_or(f64::NAN))
        .collect()
}

/// PFÂ(t) = #{a_n > t} / N for ascending thresholds t.
pub fn empirical_pfa(data: &AmplitudePopulation, thresholds: &[f64]) -> Result<PfaCurve, SelectionError> {
    if data.is_empty() {
        return Err(SelectionError::Empty);
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(SelectionError::UnsortedThresholds);
    }
    let mut sorted = data.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let empirical = thresholds
        .iter()
        .map(|&t| (n - sorted.partition_point(|&a| a <= t)) as f64 / n as f64)
        .collect();
    Ok(PfaCurve {
        thresholds: thresholds.to_vec(),
        empirical,
        model: None,
    })
}
