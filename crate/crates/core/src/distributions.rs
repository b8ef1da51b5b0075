//! Rayleigh and K amplitude distributions.
//!
//! | Distribution | Parameters | pdf p(a) | PFA = 1 - CDF |
//! |---|---|---|---|
//! | Rayleigh | λ₀ (mean square) | (2a/λ₀) e^{-a²/λ₀} | e^{-a²/λ₀} |
//! | K | σ (mean intensity), α (shape) | 4/(√λ Γ(α)) y^α K_{α-1}(2y) | (2/Γ(α)) y^α K_α(2y) |
//!
//! with λ = σ/α and y = a/√λ. The K density is only ever evaluated in the
//! log domain; `k_pdf` is `exp(k_log_pdf)`.
//!
//! Sampling draws from a ChaCha20 generator addressed by `(seed, stream)`.
//! K variates use the compound representation: intensity scale
//! s ~ Gamma(α, λ), then a ~ Rayleigh(s).

use std::f64::consts::LN_2;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Open01};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::AmplitudePopulation;
use crate::specfun::{ln_gamma_unchecked, BesselKOrder};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("amplitude {0} outside the support")]
    Domain(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, DistributionError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DistributionError::InvalidParameter { name, value })
    }
}

/// Rayleigh amplitude distribution parameterized by its mean square λ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighParams {
    lambda0: f64,
}

impl RayleighParams {
    pub fn new(lambda0: f64) -> Result<Self, DistributionError> {
        Ok(Self {
            lambda0: check_positive("lambda0", lambda0)?,
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub(crate) fn log_pdf_unchecked(&self, a: f64) -> f64 {
        if a == 0.0 {
            return f64::NEG_INFINITY;
        }
        LN_2 + a.ln() - self.lambda0.ln() - a * a / self.lambda0
    }
}

/// K amplitude distribution in the (mean intensity σ, shape α) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KParams {
    sigma: f64,
    alpha: f64,
}

impl KParams {
    pub fn new(sigma: f64, alpha: f64) -> Result<Self, DistributionError> {
        Ok(Self {
            sigma: check_positive("sigma", sigma)?,
            alpha: check_positive("alpha", alpha)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Scale parameter λ = σ/α.
    pub fn scale(&self) -> f64 {
        self.sigma / self.alpha
    }

    pub fn log_density(&self) -> KLogDensity {
        KLogDensity::new(*self)
    }
}

/// Precomputed log-density of one K distribution, for evaluating many
/// amplitudes at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct KLogDensity {
    order: BesselKOrder,
    alpha: f64,
    constant: f64,
    two_over_sqrt_scale: f64,
}

impl KLogDensity {
    pub fn new(p: KParams) -> Self {
        let lambda = p.scale();
        let ln_lambda = lambda.ln();
        Self {
            order: BesselKOrder::new_unchecked(p.alpha - 1.0),
            alpha: p.alpha,
            constant: 2.0 * LN_2 - 0.5 * (p.alpha + 1.0) * ln_lambda - ln_gamma_unchecked(p.alpha),
            two_over_sqrt_scale: 2.0 / lambda.sqrt(),
        }
    }

    /// ln p_K(a) given a > 0 and its logarithm.
    #[inline]
    pub fn eval_with_ln(&self, a: f64, ln_a: f64) -> f64 {
        self.constant + self.alpha * ln_a + self.order.ln_k(a * self.two_over_sqrt_scale)
    }

    /// ln p_K(a) for a ≥ 0, using the a → 0 limit at zero.
    pub fn eval(&self, a: f64) -> f64 {
        if a > 0.0 {
            return self.eval_with_ln(a, a.ln());
        }
        // p_K(a) ~ a^{2α-1} for α < 1 and ~ a for α > 1 as a → 0.
        if self.alpha > 0.5 {
            f64::NEG_INFINITY
        } else if self.alpha < 0.5 {
            f64::INFINITY
        } else {
            // α = 1/2: p_K(0) = 2/√λ.
            LN_2 + (0.5 * self.two_over_sqrt_scale).ln()
        }
    }
}

fn check_amplitude(a: f64) -> Result<(), DistributionError> {
    if a.is_nan() || a < 0.0 {
        Err(DistributionError::Domain(a))
    } else {
        Ok(())
    }
}

/// ln p_R(a | λ₀). Returns `f64::NEG_INFINITY` at a = 0, the log-zero
/// sentinel used throughout the crate.
pub fn rayleigh_log_pdf(a: f64, p: &RayleighParams) -> Result<f64, DistributionError> {
    check_amplitude(a)?;
    Ok(p.log_pdf_unchecked(a))
}

pub fn rayleigh_pdf(a: f64, p: &RayleighParams) -> Result<f64, DistributionError> {
    rayleigh_log_pdf(a, p).map(f64::exp)
}

/// Probability of false alarm (exceedance) e^{-a²/λ₀}.
pub fn rayleigh_pfa(a: f64, p: &RayleighParams) -> Result<f64, DistributionError> {
    check_amplitude(a)?;
    Ok((-a * a / p.lambda0).exp())
}

/// ln p_K(a | σ, α), finite for a/√λ up to well past 350.
pub fn k_log_pdf(a: f64, p: &KParams) -> Result<f64, DistributionError> {
    if a.is_nan() || a <= 0.0 {
        return Err(DistributionError::Domain(a));
    }
    Ok(KLogDensity::new(*p).eval_with_ln(a, a.ln()))
}

pub fn k_pdf(a: f64, p: &KParams) -> Result<f64, DistributionError> {
    k_log_pdf(a, p).map(f64::exp)
}

pub(crate) fn k_pfa_unchecked(a: f64, p: &KParams) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    let y = a / p.scale().sqrt();
    let order = BesselKOrder::new_unchecked(p.alpha);
    let ln_pfa = LN_2 - ln_gamma_unchecked(p.alpha) + p.alpha * y.ln() + order.ln_k(2.0 * y);
    ln_pfa.exp().clamp(0.0, 1.0)
}

/// Probability of false alarm 1 - CDF_K(a), evaluated in the log domain and
/// clamped to [0, 1].
pub fn k_pfa(a: f64, p: &KParams) -> Result<f64, DistributionError> {
    check_amplitude(a)?;
    Ok(k_pfa_unchecked(a, p))
}

/// Generator for `(seed, stream)`. Distinct streams under one seed are
/// independent ChaCha20 sequences.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub(crate) fn draw_rayleigh<R: Rng + ?Sized>(rng: &mut R, mean_square: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    (-mean_square * u.ln()).sqrt()
}

#[inline]
pub(crate) fn draw_k<R: Rng + ?Sized>(rng: &mut R, gamma: &Gamma<f64>) -> f64 {
    let s = gamma.sample(rng);
    draw_rayleigh(rng, s)
}

pub(crate) fn gamma_for(p: &KParams) -> Gamma<f64> {
    Gamma::new(p.alpha, p.scale()).expect("validated K parameters")
}

/// n i.i.d. Rayleigh draws a = √(-λ₀ ln u).
pub fn rayleigh_sample(
    p: &RayleighParams,
    n: usize,
    seed: u64,
) -> Result<AmplitudePopulation, DistributionError> {
    if n == 0 {
        return Err(DistributionError::EmptySample);
    }
    let mut rng = rng_for(seed, 0);
    let v = (0..n).map(|_| draw_rayleigh(&mut rng, p.lambda0)).collect();
    Ok(AmplitudePopulation::from_vec_unchecked(v))
}

/// n i.i.d. K draws via Gamma-distributed mean square and Rayleigh speckle.
pub fn k_sample(p: &KParams, n: usize, seed: u64) -> Result<AmplitudePopulation, DistributionError> {
    if n == 0 {
        return Err(DistributionError::EmptySample);
    }
    let mut rng = rng_for(seed, 0);
    let gamma = gamma_for(p);
    let v = (0..n).map(|_| draw_k(&mut rng, &gamma)).collect();
    Ok(AmplitudePopulation::from_vec_unchecked(v))
}
