//! Image grids on disk and the tile preprocessing pipeline: dB to linear,
//! tile extraction, decimation by subsampling, intensity to amplitude.
//!
//! A grid is stored as two files sharing a stem: `<name>.f32` holds raw
//! little-endian 32-bit floats in row-major order and `<name>.json` holds
//! the header `{width, height, pixel_size_m, quantity}`.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::AmplitudePopulation;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("missing grid header {0}")]
    MissingHeader(PathBuf),
    #[error("malformed grid header {path}: {message}")]
    BadHeader { path: PathBuf, message: String },
    #[error("header declares {width}x{height} ({expected} bytes) but payload has {actual} bytes")]
    ShapeMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid quantity: {0}")]
    InvalidQuantity(String),
    #[error("{quantity} grid holds invalid value {value} at index {index}")]
    InvalidValue { quantity: Quantity, index: usize, value: f32 },
    #[error("expected a {expected} grid, found {found}")]
    WrongQuantity { expected: &'static str, found: Quantity },
    #[error("invalid pixel size {0:?}")]
    PixelSize([f64; 2]),
    #[error("tile {spec} does not fit a {width}x{height} grid")]
    OutOfBounds { spec: String, width: usize, height: usize },
    #[error("invalid tile: {0}")]
    InvalidTile(String),
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TileError + '_ {
    move |source| TileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What the grid values measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Intensity,
    Amplitude,
    Decibel,
    /// Per-pixel component indices written by segmentation.
    Label,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Intensity => "intensity",
            Quantity::Amplitude => "amplitude",
            Quantity::Decibel => "decibel",
            Quantity::Label => "label",
        })
    }
}

impl FromStr for Quantity {
    type Err = TileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intensity" => Ok(Quantity::Intensity),
            "amplitude" => Ok(Quantity::Amplitude),
            "decibel" => Ok(Quantity::Decibel),
            "label" => Ok(Quantity::Label),
            other => Err(TileError::InvalidQuantity(other.to_string())),
        }
    }
}

/// Sidecar header of a grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: [f64; 2],
    pub quantity: String,
}

/// A row-major 2-D image of one physical quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    pixel_size_m: [f64; 2],
    quantity: Quantity,
    values: Vec<f32>,
}

impl ImageGrid {
    pub fn new(
        width: usize,
        height: usize,
        pixel_size_m: [f64; 2],
        quantity: Quantity,
        values: Vec<f32>,
    ) -> Result<Self, TileError> {
        let expected = width * height;
        if values.len() != expected {
            return Err(TileError::ShapeMismatch {
                width,
                height,
                expected: expected * 4,
                actual: values.len() * 4,
            });
        }
        if !pixel_size_m.iter().all(|&p| p.is_finite() && p > 0.0) {
            return Err(TileError::PixelSize(pixel_size_m));
        }
        let bad = |v: f32| match quantity {
            Quantity::Intensity | Quantity::Amplitude => !v.is_finite() || v < 0.0,
            Quantity::Decibel => v.is_nan(),
            Quantity::Label => !v.is_finite() || v < 0.0 || v.fract() != 0.0,
        };
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| bad(v)) {
            return Err(TileError::InvalidValue { quantity, index, value });
        }
        Ok(Self {
            width,
            height,
            pixel_size_m,
            quantity,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size_m(&self) -> [f64; 2] {
        self.pixel_size_m
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    fn header(&self) -> GridHeader {
        GridHeader {
            width: self.width,
            height: self.height,
            pixel_size_m: self.pixel_size_m,
            quantity: self.quantity.to_string(),
        }
    }
}

/// The `.f32` and `.json` paths for a grid given either file or the bare stem.
pub fn grid_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("f32") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("f32"), with("json"))
}

pub fn load_grid(path: &Path) -> Result<ImageGrid, TileError> {
    let (data_path, header_path) = grid_paths(path);
    let header_text = match fs::read_to_string(&header_path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(TileError::MissingHeader(header_path)),
        Err(e) => return Err(io_err(&header_path)(e)),
    };
    let header: GridHeader = serde_json::from_str(&header_text).map_err(|e| TileError::BadHeader {
        path: header_path.clone(),
        message: e.to_string(),
    })?;
    let quantity: Quantity = header.quantity.parse()?;
    let bytes = fs::read(&data_path).map_err(io_err(&data_path))?;
    let expected = header.width * header.height * 4;
    if bytes.len() != expected {
        return Err(TileError::ShapeMismatch {
            width: header.width,
            height: header.height,
            expected,
            actual: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ImageGrid::new(header.width, header.height, header.pixel_size_m, quantity, values)
}

pub fn save_grid(grid: &ImageGrid, path: &Path) -> Result<(), TileError> {
    let (data_path, header_path) = grid_paths(path);
    let mut bytes = Vec::with_capacity(grid.values.len() * 4);
    for v in &grid.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&data_path, bytes).map_err(io_err(&data_path))?;
    let mut header = serde_json::to_string_pretty(&grid.header()).expect("header serializes");
    header.push('\n');
    fs::write(&header_path, header).map_err(io_err(&header_path))
}

/// I = 10^(dB/10).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// 10·log10(I).
pub fn linear_to_db(intensity: f64) -> f64 {
    10.0 * intensity.log10()
}

/// Converts a decibel grid to intensity in the same relative units as the
/// dB reference. Values are computed in f64 and stored as f32.
pub fn db_to_intensity(grid: &ImageGrid) -> Result<ImageGrid, TileError> {
    if grid.quantity != Quantity::Decibel {
        return Err(TileError::WrongQuantity {
            expected: "decibel",
            found: grid.quantity,
        });
    }
    let values = grid
        .values
        .iter()
        .map(|&db| db_to_linear(f64::from(db)) as f32)
        .collect();
    ImageGrid::new(grid.width, grid.height, grid.pixel_size_m, Quantity::Intensity, values)
}

/// A rectangular tile of a grid and how to decimate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSpec {
    /// (row, col) of the top-left pixel.
    pub origin: (usize, usize),
    /// (rows, cols).
    pub extent: (usize, usize),
    pub factor: usize,
    /// (row, col) offset of the first kept pixel, each below `factor`.
    pub phase: (usize, usize),
}

impl fmt::Display for TileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "origin ({}, {}) extent {}x{} factor {} phase ({}, {})",
            self.origin.0, self.origin.1, self.extent.0, self.extent.1, self.factor, self.phase.0, self.phase.1
        )
    }
}

impl TileSpec {
    /// The whole grid as one tile.
    pub fn whole(grid: &ImageGrid, factor: usize, phase: (usize, usize)) -> Self {
        Self {
            origin: (0, 0),
            extent: (grid.height, grid.width),
            factor,
            phase,
        }
    }

    pub fn validate(&self, grid: &ImageGrid) -> Result<(), TileError> {
        if self.factor == 0 {
            return Err(TileError::InvalidTile("decimation factor must be at least 1".into()));
        }
        if self.phase.0 >= self.factor || self.phase.1 >= self.factor {
            return Err(TileError::InvalidTile(format!(
                "decimation phase ({}, {}) must be below the factor {}",
                self.phase.0, self.phase.1, self.factor
            )));
        }
        if self.extent.0 == 0 || self.extent.1 == 0 {
            return Err(TileError::InvalidTile("tile extent must be non-empty".into()));
        }
        let fits = |o: usize, e: usize, limit: usize| o.checked_add(e).is_some_and(|end| end <= limit);
        if !fits(self.origin.0, self.extent.0, grid.height) || !fits(self.origin.1, self.extent.1, grid.width) {
            return Err(TileError::OutOfBounds {
                spec: self.to_string(),
                width: grid.width,
                height: grid.height,
            });
        }
        Ok(())
    }

    /// Rows and columns kept by decimation.
    pub fn decimated_shape(&self) -> (usize, usize) {
        let kept = |extent: usize, phase: usize| (extent.saturating_sub(phase)).div_ceil(self.factor);
        (kept(self.extent.0, self.phase.0), kept(self.extent.1, self.phase.1))
    }
}

/// Output of [`extract_and_decimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub population: AmplitudePopulation,
    /// Non-positive pixels removed before fitting.
    pub dropped: usize,
    /// (rows, cols) of the subsampled lattice before dropping.
    pub shape: (usize, usize),
}

fn amplitude_of(quantity: Quantity) -> Result<fn(f32) -> f64, TileError> {
    match quantity {
        Quantity::Intensity => Ok(|v| f64::from(v).sqrt()),
        Quantity::Amplitude => Ok(f64::from),
        found => Err(TileError::WrongQuantity {
            expected: "intensity or amplitude",
            found,
        }),
    }
}

/// Keeps every `factor`-th pixel of the tile starting at `phase`, converts
/// to amplitude and drops non-positive values.
pub fn extract_and_decimate(grid: &ImageGrid, spec: &TileSpec) -> Result<Decimated, TileError> {
    spec.validate(grid)?;
    let to_amp = amplitude_of(grid.quantity)?;
    let (r0, c0) = spec.origin;
    let (rows, cols) = spec.extent;
    let mut kept = Vec::with_capacity(spec.decimated_shape().0 * spec.decimated_shape().1);
    for r in (spec.phase.0..rows).step_by(spec.factor) {
        for c in (spec.phase.1..cols).step_by(spec.factor) {
            kept.push(to_amp(grid.get(r0 + r, c0 + c)));
        }
    }
    let (population, dropped) = AmplitudePopulation::from_raw_positive(kept);
    Ok(Decimated {
        population,
        dropped,
        shape: spec.decimated_shape(),
    })
}

/// Every pixel of the tile as an amplitude, row-major, zeros kept.
pub fn tile_amplitudes(grid: &ImageGrid, spec: &TileSpec) -> Result<Vec<f64>, TileError> {
    spec.validate(grid)?;
    let to_amp = amplitude_of(grid.quantity)?;
    let (r0, c0) = spec.origin;
    let mut out = Vec::with_capacity(spec.extent.0 * spec.extent.1);
    for r in r0..r0 + spec.extent.0 {
        out.extend(grid.values[r * grid.width + c0..r * grid.width + c0 + spec.extent.1].iter().map(|&v| to_amp(v)));
    }
    Ok(out)
}

/// Writes one value per line with 17 significant digits.
pub fn write_population(population: &AmplitudePopulation, path: &Path) -> Result<(), TileError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for a in population.as_slice() {
        writeln!(w, "{a:.16e}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one amplitude per line; blank lines and `#` comments are skipped.
pub fn read_population(path: &Path) -> Result<AmplitudePopulation, TileError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| TileError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let v: f64 = text.parse().map_err(|e| parse_err(format!("{text:?}: {e}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(parse_err(format!("{v} is not a finite non-negative amplitude")));
        }
        values.push(v);
    }
    Ok(AmplitudePopulation::new(values).expect("validated per line"))
}

/// Writes one non-negative integer per line.
pub fn write_labels(labels: &[usize], path: &Path) -> Result<(), TileError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
