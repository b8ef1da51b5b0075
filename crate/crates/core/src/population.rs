use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopulationError {
    #[error("sample {index} is not a finite non-negative amplitude: {value}")]
    InvalidSample { index: usize, value: f64 },
    #[error("population is empty")]
    Empty,
    #[error("population has zero mean-square amplitude")]
    AllZero,
}

/// A 1-D vector of amplitude samples a_1..a_N, all finite and ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AmplitudePopulation {
    samples: Vec<f64>,
}

impl AmplitudePopulation {
    pub fn new(samples: Vec<f64>) -> Result<Self, PopulationError> {
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(PopulationError::InvalidSample { index, value });
        }
        Ok(Self { samples })
    }

    /// Keeps strictly positive finite samples; returns the population and the
    /// number of values dropped.
    pub fn from_raw_positive(values: impl IntoIterator<Item = f64>) -> (Self, usize) {
        let mut dropped = 0;
        let samples = values
            .into_iter()
            .filter(|v| {
                let keep = v.is_finite() && *v > 0.0;
                if !keep {
                    dropped += 1;
                }
                keep
            })
            .collect();
        (Self { samples }, dropped)
    }

    pub(crate) fn from_vec_unchecked(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.samples
    }

    pub fn all_positive(&self) -> bool {
        self.samples.iter().all(|&a| a > 0.0)
    }

    /// Mean of a², the sample mean intensity.
    pub fn mean_square(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|a| a * a).sum::<f64>() / self.samples.len() as f64
    }

    /// SHA-256 over the little-endian f64 bytes, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.samples {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Divides by the root-mean-square amplitude so the result has unit
    /// mean-square. Returns the scale needed to map back.
    pub fn normalize_rms(&self) -> Result<(AmplitudePopulation, f64), PopulationError> {
        if self.samples.is_empty() {
            return Err(PopulationError::Empty);
        }
        let scale = self.mean_square().sqrt();
        if scale == 0.0 {
            return Err(PopulationError::AllZero);
        }
        let samples = self.samples.iter().map(|a| a / scale).collect();
        Ok((Self { samples }, scale))
    }

    /// Applies a previously computed normalization scale.
    pub fn scaled_by_inverse(&self, scale: f64) -> AmplitudePopulation {
        Self {
            samples: self.samples.iter().map(|a| a / scale).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for AmplitudePopulation {
    type Error = PopulationError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AmplitudePopulation> for Vec<f64> {
    fn from(p: AmplitudePopulation) -> Self {
        p.samples
    }
}

impl AsRef<[f64]> for AmplitudePopulation {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}
