//! The Rayleigh + K mixture
//!
//! p(a | θ) = w₀ p_R(a | λ₀) + Σ_{m=1}^{M-1} w_m p_K(a | σ_m, α_m)
//!
//! with Σ w = 1. Component 0 is always the Rayleigh term; K components are
//! kept sorted by ascending σ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    draw_k, draw_rayleigh, gamma_for, k_pfa_unchecked, rng_for, DistributionError, KLogDensity,
    KParams, RayleighParams,
};
use crate::population::AmplitudePopulation;

/// Tolerance on Σ w = 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("weight {index} is invalid: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("amplitude {0} is negative")]
    NegativeAmplitude(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("grid width {width} does not divide {len} pixels")]
    GridShape { width: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KComponent {
    pub weight: f64,
    pub params: KParams,
}

/// Parameter vector θ of an M-component Rayleigh + K mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct RKMixture {
    w0: f64,
    rayleigh: RayleighParams,
    components: Vec<KComponent>,
}

impl RKMixture {
    pub fn new(
        w0: f64,
        rayleigh: RayleighParams,
        mut components: Vec<KComponent>,
    ) -> Result<Self, MixtureError> {
        let weights = std::iter::once(w0).chain(components.iter().map(|c| c.weight));
        let mut sum = 0.0;
        for (index, value) in weights.enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(MixtureError::InvalidWeight { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MixtureError::WeightSum(sum));
        }
        sort_components(&mut components);
        Ok(Self {
            w0,
            rayleigh,
            components,
        })
    }

    /// Single-component (M = 1) model.
    pub fn rayleigh_only(lambda0: f64) -> Result<Self, MixtureError> {
        Ok(Self {
            w0: 1.0,
            rayleigh: RayleighParams::new(lambda0)?,
            components: Vec::new(),
        })
    }

    pub(crate) fn from_parts(w0: f64, rayleigh: RayleighParams, mut components: Vec<KComponent>) -> Self {
        sort_components(&mut components);
        Self {
            w0,
            rayleigh,
            components,
        }
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn rayleigh(&self) -> &RayleighParams {
        &self.rayleigh
    }

    pub fn components(&self) -> &[KComponent] {
        &self.components
    }

    /// Total component count M, Rayleigh included.
    pub fn num_components(&self) -> usize {
        1 + self.components.len()
    }

    /// Weights in component order, w₀ first.
    pub fn weights(&self) -> Vec<f64> {
        std::iter::once(self.w0)
            .chain(self.components.iter().map(|c| c.weight))
            .collect()
    }

    /// Model mean intensity w₀ λ₀ + Σ w_m σ_m.
    pub fn mean_intensity(&self) -> f64 {
        self.w0 * self.rayleigh.lambda0()
            + self
                .components
                .iter()
                .map(|c| c.weight * c.params.sigma())
                .sum::<f64>()
    }

    /// The model for amplitudes multiplied by `c`: intensity scales by c².
    pub fn rescaled(&self, c: f64) -> Result<Self, MixtureError> {
        let c2 = c * c;
        let components = self
            .components
            .iter()
            .map(|k| {
                Ok(KComponent {
                    weight: k.weight,
                    params: KParams::new(k.params.sigma() * c2, k.params.alpha())?,
                })
            })
            .collect::<Result<Vec<_>, MixtureError>>()?;
        Ok(Self::from_parts(
            self.w0,
            RayleighParams::new(self.rayleigh.lambda0() * c2)?,
            components,
        ))
    }

    pub(crate) fn densities(&self) -> Vec<ComponentDensity> {
        std::iter::once(ComponentDensity::Rayleigh(self.rayleigh))
            .chain(
                self.components
                    .iter()
                    .map(|c| ComponentDensity::K(c.params.log_density())),
            )
            .collect()
    }

    /// ln w_j + ln p_j(a) for every component.
    fn weighted_log_densities(&self, a: f64, out: &mut Vec<f64>) {
        out.clear();
        let ln_a = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
        for (w, d) in self.weights().into_iter().zip(self.densities()) {
            out.push(w.ln() + d.ln_pdf(a, ln_a));
        }
    }
}

fn sort_components(components: &mut [KComponent]) {
    components.sort_by(|a, b| a.params.sigma().total_cmp(&b.params.sigma()));
}

/// Component log-density with any per-parameter constants precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ComponentDensity {
    Rayleigh(RayleighParams),
    K(KLogDensity),
}

impl ComponentDensity {
    #[inline]
    pub(crate) fn ln_pdf(&self, a: f64, ln_a: f64) -> f64 {
        match self {
            ComponentDensity::Rayleigh(r) => r.log_pdf_unchecked(a),
            ComponentDensity::K(k) if a > 0.0 => k.eval_with_ln(a, ln_a),
            ComponentDensity::K(k) => k.eval(a),
        }
    }
}

/// Plain serialized form: `{w0, lambda0, components: [{w, sigma, alpha}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub w0: f64,
    pub lambda0: f64,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub w: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl TryFrom<MixtureSpec> for RKMixture {
    type Error = MixtureError;

    fn try_from(s: MixtureSpec) -> Result<Self, Self::Error> {
        let components = s
            .components
            .iter()
            .map(|c| {
                Ok(KComponent {
                    weight: c.w,
                    params: KParams::new(c.sigma, c.alpha)?,
                })
            })
            .collect::<Result<Vec<_>, MixtureError>>()?;
        RKMixture::new(s.w0, RayleighParams::new(s.lambda0)?, components)
    }
}

impl From<RKMixture> for MixtureSpec {
    fn from(m: RKMixture) -> Self {
        MixtureSpec {
            w0: m.w0,
            lambda0: m.rayleigh.lambda0(),
            components: m
                .components
                .iter()
                .map(|c| ComponentSpec {
                    w: c.weight,
                    sigma: c.params.sigma(),
                    alpha: c.params.alpha(),
                })
                .collect(),
        }
    }
}

/// ln Σ exp(x_i), with -∞ for an empty or all -∞ input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_amplitude(a: f64) -> Result<(), MixtureError> {
    if a.is_nan() || a < 0.0 {
        Err(MixtureError::NegativeAmplitude(a))
    } else {
        Ok(())
    }
}

/// ln p(a | θ) by log-sum-exp over the weighted component log-densities.
pub fn mixture_log_pdf(a: f64, theta: &RKMixture) -> Result<f64, MixtureError> {
    check_amplitude(a)?;
    let mut buf = Vec::with_capacity(theta.num_components());
    theta.weighted_log_densities(a, &mut buf);
    Ok(log_sum_exp(&buf))
}

/// Mixture exceedance probability w₀ PFA_R(a) + Σ w_m PFA_K,m(a).
pub fn mixture_pfa(a: f64, theta: &RKMixture) -> Result<f64, MixtureError> {
    check_amplitude(a)?;
    if a == 0.0 {
        return Ok(1.0);
    }
    let rayleigh = theta.w0 * (-a * a / theta.rayleigh.lambda0()).exp();
    let k: f64 = theta
        .components
        .iter()
        .map(|c| c.weight * k_pfa_unchecked(a, &c.params))
        .sum();
    Ok((rayleigh + k).clamp(0.0, 1.0))
}

/// Posterior component probabilities, N rows × M columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    num_components: usize,
    values: Vec<f64>,
    /// Rows where every component density is zero. These rows are set
    /// uniform so that they still sum to one.
    pub degenerate_rows: Vec<usize>,
}

impl Responsibilities {
    pub fn num_samples(&self) -> usize {
        self.values.len() / self.num_components
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.num_components..(n + 1) * self.num_components]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.num_components)
    }
}

/// E-step: r[n][j] = w_j p_j(a_n) / Σ_i w_i p_i(a_n).
pub fn responsibilities(
    data: &AmplitudePopulation,
    theta: &RKMixture,
) -> Result<Responsibilities, MixtureError> {
    let m = theta.num_components();
    let weights = theta.weights();
    let densities = theta.densities();
    let mut values = Vec::with_capacity(data.len() * m);
    let mut degenerate_rows = Vec::new();
    let mut buf = vec![0.0; m];
    for (n, &a) in data.as_slice().iter().enumerate() {
        check_amplitude(a)?;
        let ln_a = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
        for j in 0..m {
            buf[j] = weights[j].ln() + densities[j].ln_pdf(a, ln_a);
        }
        let lse = log_sum_exp(&buf);
        if lse == f64::NEG_INFINITY || lse.is_nan() {
            degenerate_rows.push(n);
            values.extend(std::iter::repeat_n(1.0 / m as f64, m));
        } else if lse == f64::INFINITY {
            // Density diverges (a = 0 with α < ½): split among divergent terms.
            let count = buf.iter().filter(|v| **v == f64::INFINITY).count() as f64;
            values.extend(buf.iter().map(|v| if *v == f64::INFINITY { 1.0 / count } else { 0.0 }));
        } else {
            values.extend(buf.iter().map(|v| (v - lse).exp()));
        }
    }
    Ok(Responsibilities {
        num_components: m,
        values,
        degenerate_rows,
    })
}

/// Composition sampling: draw a component index by weight, then a value from
/// that component. Returns the samples and their component labels.
pub fn sample_mixture(
    theta: &RKMixture,
    n: usize,
    seed: u64,
) -> Result<(AmplitudePopulation, Vec<usize>), MixtureError> {
    if n == 0 {
        return Err(MixtureError::EmptySample);
    }
    let mut rng = rng_for(seed, 0);
    let weights = theta.weights();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let gammas: Vec<_> = theta.components.iter().map(|c| gamma_for(&c.params)).collect();
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rand::Rng::random(&mut rng);
        let u = u * cumulative[cumulative.len() - 1];
        let label = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(weights.len() - 1);
        let a = if label == 0 {
            draw_rayleigh(&mut rng, theta.rayleigh.lambda0())
        } else {
            draw_k(&mut rng, &gammas[label - 1])
        };
        samples.push(a);
        labels.push(label);
    }
    Ok((AmplitudePopulation::from_vec_unchecked(samples), labels))
}

/// Per-pixel component labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelGrid {
    /// Fraction of pixels per label 0..num_labels.
    pub fn histogram(&self, num_labels: usize) -> Vec<f64> {
        let mut counts = vec![0usize; num_labels];
        for &l in &self.labels {
            if (l as usize) < num_labels {
                counts[l as usize] += 1;
            }
        }
        let total = self.labels.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

/// Assigns each pixel of a row-major amplitude grid to the component with
/// the largest responsibility, ties going to the lower index.
pub fn segment(amplitudes: &[f64], width: usize, theta: &RKMixture) -> Result<LabelGrid, MixtureError> {
    if width == 0 || !amplitudes.len().is_multiple_of(width) {
        return Err(MixtureError::GridShape {
            width,
            len: amplitudes.len(),
        });
    }
    let weights = theta.weights();
    let densities = theta.densities();
    let mut labels = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        check_amplitude(a)?;
        let ln_a = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
        let mut best = 0u32;
        let mut best_v = f64::NEG_INFINITY;
        for (j, (w, d)) in weights.iter().zip(&densities).enumerate() {
            let v = w.ln() + d.ln_pdf(a, ln_a);
            if v > best_v {
                best_v = v;
                best = j as u32;
            }
        }
        labels.push(best);
    }
    Ok(LabelGrid {
        width,
        height: amplitudes.len() / width,
        labels,
    })
}
