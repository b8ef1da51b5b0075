//! Turning an input file into the sample vector a fit sees.

use std::path::Path;

use rkmix::tiles::{extract_and_decimate, grid_paths, load_grid, read_population, tile_amplitudes, ImageGrid, TileSpec};
use rkmix::AmplitudePopulation;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// An image grid, tiled and decimated.
    Grid,
    /// A text file of amplitudes, one per line.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRecord {
    /// File name of the input as given on the command line.
    pub source: String,
    pub kind: InputKind,
    /// SHA-256 of the preprocessed sample vector.
    pub sample_hash: String,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessing {
    /// Tile and decimation applied to a grid input; absent for sample files.
    pub tile: Option<TileSpec>,
    pub normalized: bool,
    /// Amplitudes were divided by this (1 when not normalized).
    pub normalization_scale: f64,
    /// Non-positive values removed before fitting.
    pub dropped: usize,
}

/// How to cut a tile out of a grid input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileFlags {
    pub origin: (usize, usize),
    /// Defaults to the rest of the grid from `origin`.
    pub extent: Option<(usize, usize)>,
    pub factor: usize,
    pub phase: (usize, usize),
}

impl Default for TileFlags {
    fn default() -> Self {
        Self {
            origin: (0, 0),
            extent: None,
            factor: 6,
            phase: (0, 0),
        }
    }
}

impl TileFlags {
    fn spec_for(&self, grid: &ImageGrid) -> TileSpec {
        TileSpec {
            origin: self.origin,
            extent: self.extent.unwrap_or((
                grid.height().saturating_sub(self.origin.0),
                grid.width().saturating_sub(self.origin.1),
            )),
            factor: self.factor,
            phase: self.phase,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub population: AmplitudePopulation,
    pub input: InputRecord,
    pub preprocessing: Preprocessing,
}

pub fn is_grid(path: &Path) -> bool {
    let (data, header) = grid_paths(path);
    header.is_file() || path == data
}

fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn finish(
    path: &Path,
    kind: InputKind,
    tile: Option<TileSpec>,
    raw: impl IntoIterator<Item = f64>,
    scale: Option<f64>,
    normalize: bool,
) -> Result<Prepared, CliError> {
    let (population, dropped) = AmplitudePopulation::from_raw_positive(raw);
    if population.is_empty() {
        return Err(CliError::data(format!("{}: no positive samples", path.display())));
    }
    let (population, normalization_scale) = match (normalize, scale) {
        (false, _) => (population, 1.0),
        (true, Some(s)) => (population.scaled_by_inverse(s), s),
        (true, None) => population
            .normalize_rms()
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
    };
    Ok(Prepared {
        input: InputRecord {
            source: source_name(path),
            kind,
            sample_hash: population.content_hash(),
            n_samples: population.len(),
        },
        preprocessing: Preprocessing {
            tile,
            normalized: normalize,
            normalization_scale,
            dropped,
        },
        population,
    })
}

/// Loads and preprocesses an input: grids are tiled, decimated and turned
/// into amplitudes; sample files are read as they are. Both are optionally
/// RMS-normalized.
pub fn prepare(path: &Path, tile: &TileFlags, normalize: bool) -> Result<Prepared, CliError> {
    if is_grid(path) {
        let grid = load_grid(path)?;
        let spec = tile.spec_for(&grid);
        let d = extract_and_decimate(&grid, &spec)?;
        finish(path, InputKind::Grid, Some(spec), d.population.into_vec(), None, normalize)
    } else {
        let samples = read_population(path)?;
        finish(path, InputKind::Samples, None, samples.into_vec(), None, normalize)
    }
}

/// Repeats the preprocessing recorded in a report and checks that the
/// result is the sample vector the report was fitted on.
pub fn reprepare(path: &Path, record: &Preprocessing, expected_hash: &str) -> Result<Prepared, CliError> {
    let prepared = match record.tile {
        Some(spec) => {
            if !is_grid(path) {
                return Err(CliError::data(format!("{}: report was fitted on a grid input", path.display())));
            }
            let grid = load_grid(path)?;
            let d = extract_and_decimate(&grid, &spec)?;
            finish(
                path,
                InputKind::Grid,
                Some(spec),
                d.population.into_vec(),
                Some(record.normalization_scale),
                record.normalized,
            )?
        }
        None => {
            let samples = read_population(path)?;
            finish(
                path,
                InputKind::Samples,
                None,
                samples.into_vec(),
                Some(record.normalization_scale),
                record.normalized,
            )?
        }
    };
    if prepared.input.sample_hash != expected_hash {
        return Err(CliError::data(format!(
            "{}: preprocessed samples hash to {} but the report was fitted on {}",
            path.display(),
            prepared.input.sample_hash,
            expected_hash
        )));
    }
    Ok(prepared)
}

/// Every pixel of the recorded tile as a normalized amplitude, row-major,
/// with the tile's (rows, cols).
pub fn full_tile(path: &Path, record: &Preprocessing) -> Result<(Vec<f64>, (usize, usize), [f64; 2]), CliError> {
    let spec = record
        .tile
        .ok_or_else(|| CliError::data("segmentation needs a report fitted on a grid input"))?;
    let grid = load_grid(path)?;
    let amps = tile_amplitudes(&grid, &spec)?
        .into_iter()
        .map(|a| a / record.normalization_scale)
        .collect();
    Ok((amps, spec.extent, grid.pixel_size_m()))
}
