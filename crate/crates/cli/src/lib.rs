//! Command-line front end for rkmix: synthesize data, preprocess image
//! tiles, sweep model orders, export PFA curves and segment images.

pub mod error;
pub mod input;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rkmix::mixture::{sample_mixture, segment, MixtureSpec};
use rkmix::selection::{empirical_pfa, model_name, model_pfa, sweep};
use rkmix::tiles::{save_grid, write_labels, write_population, ImageGrid, Quantity};
use rkmix::{EmConfig, KConvention, RKMixture};

pub use error::CliError;
use input::{full_tile, prepare, reprepare, TileFlags};
use report::FitReportFile;

#[derive(Debug, Parser)]
#[command(name = "rkmix", version, about = "Rayleigh + K mixture models for sonar image amplitude statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw amplitudes and their component labels from a mixture spec.
    Synth(SynthArgs),
    /// Fit every M in a range and select by AIC/BIC.
    Sweep(SweepArgs),
    /// Fit a single M (a one-row sweep).
    Fit(FitArgs),
    /// Export empirical and model exceedance curves as CSV.
    Pfa(PfaArgs),
    /// Label each pixel of a tile with its most likely component.
    Segment(SegmentArgs),
    /// Preprocess only: tile, decimate, normalize and write the samples.
    Decimate(DecimateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Mixture spec JSON: {w0, lambda0, components: [{w, sigma, alpha}]}.
    #[arg(long)]
    pub spec: PathBuf,
    /// Number of samples (implied by --grid when given).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write an intensity grid of this shape instead of a sample list.
    #[arg(long, value_name = "WIDTHxHEIGHT", value_parser = parse_shape)]
    pub grid: Option<(usize, usize)>,
    /// Pixel size in meters for --grid output.
    #[arg(long, value_name = "DX,DY", default_value = "0.02,0.02", value_parser = parse_f64_pair)]
    pub pixel_size: (f64, f64),
    /// Samples file, or grid stem with --grid.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth labels [default: <out>.labels, or <out>-labels grid].
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Grid (stem, .f32 or .json) or a text file of amplitudes.
    #[arg(long)]
    pub input: PathBuf,
    /// Top-left pixel of the tile.
    #[arg(long, value_name = "ROW,COL", default_value = "0,0", value_parser = parse_usize_pair)]
    pub tile_origin: (usize, usize),
    /// Tile size [default: rest of the grid].
    #[arg(long, value_name = "ROWS,COLS", value_parser = parse_usize_pair)]
    pub tile_extent: Option<(usize, usize)>,
    #[arg(long, default_value_t = 6)]
    pub decimation_factor: usize,
    #[arg(long, value_name = "ROW,COL", default_value = "0,0", value_parser = parse_usize_pair)]
    pub decimation_phase: (usize, usize),
    /// Fit raw amplitudes instead of unit mean-square ones.
    #[arg(long)]
    pub no_normalize: bool,
}

impl PrepArgs {
    fn tile_flags(&self) -> TileFlags {
        TileFlags {
            origin: self.tile_origin,
            extent: self.tile_extent,
            factor: self.decimation_factor,
            phase: self.decimation_phase,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Relative log-likelihood change that ends EM.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// First seed of the jittered restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Jittered restarts on top of the deterministic start.
    #[arg(long, default_value_t = 0)]
    pub restarts: u64,
    /// Parameter count convention for AIC/BIC: 3M-1 or 3M-2.
    #[arg(long, default_value = "3M-1")]
    pub k_convention: KConvention,
}

impl EmArgs {
    fn config(&self) -> Result<EmConfig, CliError> {
        let config = EmConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            restart_seeds: (0..self.restarts).map(|i| self.seed.wrapping_add(i)).collect(),
            ..EmConfig::default()
        };
        config.validate().map_err(CliError::from)?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = 2)]
    pub min_components: usize,
    #[arg(long, default_value_t = 5)]
    pub max_components: usize,
    /// Worker threads for the per-M fits [default: available parallelism].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Number of mixture components M.
    #[arg(long, short = 'm')]
    pub components: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PfaArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// The input the report was fitted on.
    #[arg(long)]
    pub input: PathBuf,
    /// Thresholds in fitted (normalized) amplitude units.
    #[arg(long, value_name = "START:STOP:STEP", default_value = "0:15:0.05", value_parser = parse_threshold_grid)]
    pub grid: ThresholdGrid,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// The grid the report was fitted on.
    #[arg(long)]
    pub input: PathBuf,
    /// Which fitted model to use.
    #[arg(long, short = 'm')]
    pub components: usize,
    /// Label grid stem.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecimateArgs {
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Samples text file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Evenly spaced thresholds start, start + step, … up to stop inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ThresholdGrid {
    pub fn thresholds(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

pub fn parse_threshold_grid(s: &str) -> Result<ThresholdGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected START:STOP:STEP, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let grid = ThresholdGrid {
        start: num(start)?,
        stop: num(stop)?,
        step: num(step)?,
    };
    if !(grid.start.is_finite() && grid.stop.is_finite() && grid.step.is_finite()) {
        return Err("grid bounds must be finite".into());
    }
    if grid.step <= 0.0 || grid.stop < grid.start {
        return Err("grid needs STEP > 0 and STOP ≥ START".into());
    }
    if (grid.stop - grid.start) / grid.step > 1e8 {
        return Err("grid has more than 10^8 points".into());
    }
    Ok(grid)
}

fn pair<T: std::str::FromStr>(s: &str, sep: char) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s.split_once(sep).ok_or_else(|| format!("expected two values separated by '{sep}'"))?;
    let parse = |t: &str| t.trim().parse::<T>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_usize_pair(s: &str) -> Result<(usize, usize), String> {
    pair(s, ',')
}

fn parse_f64_pair(s: &str) -> Result<(f64, f64), String> {
    pair(s, ',')
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    pair(s, 'x')
}

fn read_spec(path: &Path) -> Result<RKMixture, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let spec: MixtureSpec = serde_json::from_str(&text).map_err(|e| {
        CliError::data(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    RKMixture::try_from(spec).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::data(format!("{}: {e}", path.display()))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let theta = read_spec(&args.spec)?;
    let n = match (args.n, args.grid) {
        (Some(n), Some((w, h))) if n != w * h => {
            return Err(CliError::Usage(format!("--n {n} disagrees with --grid {w}x{h}")))
        }
        (_, Some((w, h))) => w * h,
        (Some(n), None) => n,
        (None, None) => return Err(CliError::Usage("one of --n or --grid is required".into())),
    };
    if n == 0 {
        return Err(CliError::Usage("sample count must be positive".into()));
    }
    let (samples, labels) = sample_mixture(&theta, n, args.seed)?;
    match args.grid {
        Some((w, h)) => {
            let pixel = [args.pixel_size.0, args.pixel_size.1];
            let intensity = samples.as_slice().iter().map(|a| (a * a) as f32).collect();
            save_grid(&ImageGrid::new(w, h, pixel, Quantity::Intensity, intensity)?, &args.out)?;
            let label_path = args.labels.clone().unwrap_or_else(|| with_suffix(&args.out, "-labels"));
            let label_values = labels.iter().map(|&l| l as f32).collect();
            save_grid(&ImageGrid::new(w, h, pixel, Quantity::Label, label_values)?, &label_path)?;
        }
        None => {
            write_population(&samples, &args.out)?;
            let label_path = args.labels.clone().unwrap_or_else(|| with_suffix(&args.out, ".labels"));
            write_labels(&labels, &label_path)?;
        }
    }
    writeln!(out, "wrote {n} samples (seed {})", args.seed).map_err(write_err(&args.out))
}

fn run_sweep(
    prep: &PrepArgs,
    em: &EmArgs,
    range: std::ops::RangeInclusive<usize>,
    jobs: Option<usize>,
    report_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let config = em.config()?;
    let prepared = prepare(&prep.input, &prep.tile_flags(), !prep.no_normalize)?;
    let result = sweep(&prepared.population, range, &config, em.k_convention, jobs)?;
    let report = FitReportFile::new(&prepared, &config, &result);
    report.write(report_path)?;

    let table = report.selection_report();
    write!(out, "{}", table.render_table()).map_err(write_err(report_path))?;
    let name = |m: Option<usize>| m.map_or_else(|| "none".to_string(), |m| format!("{} (M = {m})", model_name(m)));
    writeln!(
        out,
        "N = {}, k = {}: AIC selects {}, BIC selects {}",
        prepared.population.len(),
        em.k_convention,
        name(table.selected_by_aic),
        name(table.selected_by_bic)
    )
    .map_err(write_err(report_path))?;

    if result.fits.iter().all(|(_, f)| f.is_err()) {
        let errors: Vec<CliError> = result.fits.into_iter().filter_map(|(_, f)| f.err()).map(CliError::from).collect();
        let numerical = errors.iter().any(|e| matches!(e, CliError::Numerical(_)));
        let message = format!(
            "every fit failed: {}",
            errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        );
        return Err(if numerical {
            CliError::Numerical(message)
        } else {
            CliError::Data(message)
        });
    }
    for (m, fit) in &result.fits {
        if let Err(e) = fit {
            eprintln!("warning: M = {m} failed: {e}");
        }
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.min_components == 0 {
        return Err(CliError::Usage("--min-components must be at least 1".into()));
    }
    if args.max_components < args.min_components {
        return Err(CliError::Usage(format!(
            "--max-components {} is below --min-components {}",
            args.max_components, args.min_components
        )));
    }
    if args.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    run_sweep(&args.prep, &args.em, args.min_components..=args.max_components, args.jobs, &args.out, out)
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.components == 0 {
        return Err(CliError::Usage("--components must be at least 1".into()));
    }
    run_sweep(&args.prep, &args.em, args.components..=args.components, Some(1), &args.out, out)
}

pub fn cmd_pfa(args: &PfaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = FitReportFile::read(&args.report)?;
    if !report.models.iter().any(|e| e.converged == Some(true)) {
        return Err(CliError::data(format!("{}: no converged model", args.report.display())));
    }
    let prepared = reprepare(&args.input, &report.preprocessing, &report.input.sample_hash)?;
    let thresholds = args.grid.thresholds();
    let curve = empirical_pfa(&prepared.population, &thresholds)?;
    let models: Vec<(usize, Vec<f64>)> = report
        .models
        .iter()
        .filter_map(|e| e.theta.as_ref().map(|t| (e.m, model_pfa(&thresholds, t))))
        .collect();

    let mut csv = String::from("threshold,empirical_pfa");
    for (m, _) in &models {
        csv.push_str(&format!(",model_pfa_M{m}"));
    }
    csv.push('\n');
    for (i, t) in thresholds.iter().enumerate() {
        csv.push_str(&format!("{t:.16e},{:.16e}", curve.empirical[i]));
        for (_, col) in &models {
            csv.push_str(&format!(",{:.16e}", col[i]));
        }
        csv.push('\n');
    }
    fs::write(&args.out, csv).map_err(write_err(&args.out))?;
    writeln!(out, "wrote {} thresholds for {} models", thresholds.len(), models.len()).map_err(write_err(&args.out))
}

pub fn cmd_segment(args: &SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = FitReportFile::read(&args.report)?;
    let theta = report
        .model(args.components)
        .and_then(|e| e.theta.as_ref())
        .ok_or_else(|| CliError::data(format!("model M = {} is not in {}", args.components, args.report.display())))?;
    reprepare(&args.input, &report.preprocessing, &report.input.sample_hash)?;
    let (amps, (rows, cols), pixel) = full_tile(&args.input, &report.preprocessing)?;
    let labels = segment(&amps, cols, theta)?;
    let values = labels.labels.iter().map(|&l| l as f32).collect();
    save_grid(&ImageGrid::new(cols, rows, pixel, Quantity::Label, values)?, &args.out)?;
    let hist = labels.histogram(theta.num_components() + 1);
    let fractions: Vec<String> = hist.iter().map(|f| format!("{f:.4}")).collect();
    writeln!(out, "{rows}x{cols} labels, fractions per component: {}", fractions.join(" ")).map_err(write_err(&args.out))
}

pub fn cmd_decimate(args: &DecimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let prepared = prepare(&args.prep.input, &args.prep.tile_flags(), !args.prep.no_normalize)?;
    write_population(&prepared.population, &args.out)?;
    writeln!(
        out,
        "N = {}, dropped {}, normalization scale {:.16e}, sha256 {}",
        prepared.population.len(),
        prepared.preprocessing.dropped,
        prepared.preprocessing.normalization_scale,
        prepared.input.sample_hash
    )
    .map_err(write_err(&args.out))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::Pfa(a) => cmd_pfa(a, out),
        Command::Segment(a) => cmd_segment(a, out),
        Command::Decimate(a) => cmd_decimate(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
