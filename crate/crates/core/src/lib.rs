//! Rayleigh + K-distribution mixture models for sonar image amplitude
//! statistics: special functions, component distributions, EM fitting,
//! information-criterion model selection and the tile preprocessing
//! pipeline.

pub mod distributions;
pub mod em;
pub mod mixture;
pub mod population;
pub mod selection;
pub mod specfun;
pub mod tiles;

pub use em::{em_fit, em_fit_from, EmConfig, EmError, FitResult};
pub use mixture::{KComponent, RKMixture};
pub use population::AmplitudePopulation;
pub use selection::{KConvention, SelectionReport};
