//! Acceptance suite. Criteria run one after another inside a single test so
//! that each runtime budget is measured without competing for cores, and
//! every criterion prints one PASS/FAIL line whether or not an earlier one
//! failed.

#[path = "../../core/tests/common/quadrature.rs"]
mod quadrature;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use quadrature::{integrate_positive_axis, ln_bessel_k_oracle};
use rand::Rng;
use rkmix::distributions::{k_pdf, rayleigh_pdf, rayleigh_sample, rng_for, KParams, RayleighParams};
use rkmix::mixture::{mixture_log_pdf, mixture_pfa, sample_mixture};
use rkmix::selection::{empirical_pfa, sweep, SelectionReport};
use rkmix::specfun::{bessel_k, ln_bessel_k, log_gamma};
use rkmix::tiles::write_population;
use rkmix::{em_fit, EmConfig, FitResult, KComponent, KConvention, RKMixture};
use rkmix_cli::input::{prepare, TileFlags};
use rkmix_cli::report::FitReportFile;

/// Tolerances and budgets, pinned from the acceptance criteria.
mod tol {
    use std::time::Duration;

    /// Published table entries are printed from integer-rounded LL values.
    pub const TABLE_SLACK: f64 = 3.0;
    pub const TABLE_N: usize = 10_000;

    pub const BESSEL_CLOSED_FORM: f64 = 1e-10;
    pub const BESSEL_QUADRATURE: f64 = 1e-9;
    pub const BESSEL_RECURRENCE: f64 = 1e-8;
    pub const LOG_GAMMA: f64 = 1e-12;

    pub const NORMALIZATION: f64 = 1e-8;
    pub const MOMENT: f64 = 1e-6;
    pub const RAYLEIGH_LIMIT: f64 = 5e-3;

    pub const WEIGHT_RECOVERY: f64 = 0.05;
    pub const SIGMA_RECOVERY: f64 = 0.15;
    /// Allowed per-iteration LL drop relative to |LL|.
    pub const MONOTONE_SLACK: f64 = 1e-9;

    pub const PFA_QUADRATURE: f64 = 1e-7;
    pub const EMPIRICAL_PFA: f64 = 0.005;

    pub const SPECFUN_BUDGET: Duration = Duration::from_secs(10);
    pub const DISTRIBUTION_BUDGET: Duration = Duration::from_secs(60);
    pub const RECOVERY_BUDGET: Duration = Duration::from_secs(120);
    pub const SELECTION_BUDGET: Duration = Duration::from_secs(300);
    pub const PFA_BUDGET: Duration = Duration::from_secs(60);
    pub const TABLE_BUDGET: Duration = Duration::from_secs(1);
    pub const NO_BUDGET: Duration = Duration::MAX;
}

/// Number of the 10 seeds on which AIC must select M = 3, fixed from the
/// Monte-Carlo run in `order_selection_oracle` (30 of 30 disjoint seeds
/// selected M = 3; the one-sided 95% lower bound on the selection rate is
/// 0.905, and 6 is the largest k with P(Binomial(10, 0.905) ≥ k) ≥ 0.99).
const EXPECTED_AIC_MAJORITY: usize = 6;

struct Outcome {
    passed: bool,
    line: String,
}

fn criterion<T>(
    id: u32,
    title: &str,
    budget: Duration,
    check: impl FnOnce() -> (Result<String, String>, T),
) -> (Outcome, T) {
    let start = Instant::now();
    let (result, value) = check();
    let elapsed = start.elapsed();
    let over = elapsed > budget;
    let (passed, detail) = match result {
        Ok(d) if over => (false, format!("{d}; over the {:.0} s budget", budget.as_secs_f64())),
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    let line = format!(
        "criterion {id} [{}] {title} ({:.1} s): {detail}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    println!("{line}");
    (Outcome { passed, line }, value)
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn mixture(w0: f64, lambda0: f64, ks: &[(f64, f64, f64)]) -> RKMixture {
    RKMixture::new(
        w0,
        RayleighParams::new(lambda0).unwrap(),
        ks.iter()
            .map(|&(w, sigma, alpha)| KComponent {
                weight: w,
                params: KParams::new(sigma, alpha).unwrap(),
            })
            .collect(),
    )
    .unwrap()
}

fn two_component_truth() -> RKMixture {
    mixture(0.7, 1.0, &[(0.3, 20.0, 0.8)])
}

/// Well-separated 3-component truth: a Rayleigh floor, a moderately bright
/// K component and a much brighter heavy-tailed one, a decade apart each.
fn three_component_truth() -> RKMixture {
    mixture(0.5, 1.0, &[(0.3, 10.0, 3.0), (0.2, 100.0, 1.0)])
}

// Criterion 1.

/// Published (M, LL, AIC, BIC) rows for the two tiles.
const PUBLISHED_TABLE: [(&str, [(usize, f64, f64, f64); 4]); 2] = [
    (
        "Tile 1",
        [
            (2, -4321.0, 8652.0, 8688.0),
            (3, -4157.0, 8331.0, 8389.0),
            (4, -4137.0, 8297.0, 8377.0),
            (5, -4137.0, 8301.0, 8404.0),
        ],
    ),
    (
        "Tile 2",
        [
            (2, -885.0, 1780.0, 1810.0),
            (3, -847.0, 1711.0, 1759.0),
            (4, -839.0, 1700.0, 1766.0),
            (5, -840.0, 1709.0, 1793.0),
        ],
    ),
];

/// (AIC choice, BIC choice) stated for each tile.
const PUBLISHED_SELECTIONS: [(usize, usize); 2] = [(4, 4), (4, 3)];

fn table_regression() -> Result<String, String> {
    let mut misses = Vec::new();
    let mut within = 0;
    let mut implied_ln_n = Vec::new();
    for ((tile, rows), (want_aic, want_bic)) in PUBLISHED_TABLE.iter().zip(PUBLISHED_SELECTIONS) {
        let lls: Vec<(usize, f64)> = rows.iter().map(|&(m, ll, _, _)| (m, ll)).collect();
        let report = SelectionReport::from_logliks(&lls, tol::TABLE_N, KConvention::AllWeights);
        for &(m, ll, aic, bic) in rows {
            let row = report.row(m).unwrap();
            for (name, got, want) in [("AIC", row.aic.unwrap(), aic), ("BIC", row.bic.unwrap(), bic)] {
                if (got - want).abs() <= tol::TABLE_SLACK {
                    within += 1;
                } else {
                    misses.push(format!("{tile} {} {name} {got:.2} vs {want}", row.model_name));
                }
            }
            if *tile == "Tile 2" {
                implied_ln_n.push((bic + 2.0 * ll) / row.k as f64);
            }
        }
        if report.selected_by_aic != Some(want_aic) || report.selected_by_bic != Some(want_bic) {
            misses.push(format!(
                "{tile} selections AIC {:?} BIC {:?}, expected {want_aic} and {want_bic}",
                report.selected_by_aic, report.selected_by_bic
            ));
        }
    }
    let summary = format!("{within}/16 entries within ±{}, selections checked", tol::TABLE_SLACK);
    if misses.is_empty() {
        Ok(summary)
    } else {
        let ln_n: Vec<String> = implied_ln_n.iter().map(|v| format!("{v:.2}")).collect();
        Err(format!(
            "{summary}; off: {}; Tile 2 BIC rows imply ln N = [{}], i.e. N ≈ {:.0}, not 10⁴",
            misses.join(", "),
            ln_n.join(", "),
            (implied_ln_n.iter().sum::<f64>() / implied_ln_n.len() as f64).exp()
        ))
    }
}

// Criterion 2.

fn special_functions() -> Result<String, String> {
    let mut failures = Vec::new();
    // Half-integer closed forms: orders 1/2, 3/2 and 5/2 over x ∈ [1e-3, 50].
    let mut worst_closed: f64 = 0.0;
    for i in 0..51 {
        let x = 1e-3 * (5e4f64).powf((i / 3) as f64 / 16.0);
        let base = (PI / (2.0 * x)).sqrt() * (-x).exp();
        let (nu, want) = match i % 3 {
            0 => (0.5, base),
            1 => (1.5, base * (1.0 + 1.0 / x)),
            _ => (2.5, base * (1.0 + 3.0 / x + 3.0 / (x * x))),
        };
        worst_closed = worst_closed.max(rel(bessel_k(nu, x).unwrap(), want));
    }
    if worst_closed > tol::BESSEL_CLOSED_FORM {
        failures.push(format!("closed forms off by {worst_closed:e}"));
    }

    let mut rng = rng_for(0xACCE, 2);
    let mut worst_quad: f64 = 0.0;
    for _ in 0..200 {
        let nu: f64 = rng.random_range(-50.0..50.0);
        let x = 1e-6 * (30.0f64 / 1e-6).powf(rng.random::<f64>());
        let err = (ln_bessel_k(nu, x).unwrap() - ln_bessel_k_oracle(nu, x)).exp_m1().abs();
        worst_quad = worst_quad.max(err);
    }
    if worst_quad > tol::BESSEL_QUADRATURE {
        failures.push(format!("quadrature oracle off by {worst_quad:e}"));
    }

    let mut worst_rec: f64 = 0.0;
    for _ in 0..500 {
        let nu: f64 = rng.random_range(0.0..49.0);
        let x = 1e-6 * (30.0f64 / 1e-6).powf(rng.random::<f64>());
        // K_{ν+1} = K_{ν−1} + (2ν/x) K_ν, divided through by K_{ν+1}.
        let lb = ln_bessel_k(nu + 1.0, x).unwrap();
        let r = (ln_bessel_k(nu - 1.0, x).unwrap() - lb).exp() + 2.0 * nu / x * (ln_bessel_k(nu, x).unwrap() - lb).exp()
            - 1.0;
        worst_rec = worst_rec.max(r.abs());
    }
    if worst_rec > tol::BESSEL_RECURRENCE {
        failures.push(format!("recurrence residual {worst_rec:e}"));
    }

    let mut worst_gamma = rel(log_gamma(0.5).unwrap(), 0.5 * PI.ln());
    let mut ln_fact = 0.0;
    for n in 1..=170u32 {
        ln_fact += f64::from(n).ln();
        worst_gamma = worst_gamma.max(rel(log_gamma(f64::from(n) + 1.0).unwrap(), ln_fact));
    }
    if worst_gamma > tol::LOG_GAMMA {
        failures.push(format!("log_gamma off by {worst_gamma:e}"));
    }

    let summary = format!(
        "closed forms {worst_closed:.1e}, quadrature {worst_quad:.1e}, recurrence {worst_rec:.1e}, log_gamma {worst_gamma:.1e}"
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

// Criterion 3.

fn distributions() -> Result<String, String> {
    let mut failures = Vec::new();
    let mut worst_mass: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for &alpha in &[0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
        for &sigma in &[0.1, 1.0, 10.0] {
            let p = KParams::new(sigma, alpha).unwrap();
            let lo = p.scale().sqrt().min(sigma.sqrt()).ln() - 300.0;
            let hi = (sigma.sqrt() * 600.0).ln();
            let mass = integrate_positive_axis(|a| k_pdf(a, &p).unwrap(), lo, hi, 1e-13);
            let m2 = integrate_positive_axis(|a| a * a * k_pdf(a, &p).unwrap(), lo, hi, 1e-13 * sigma);
            worst_mass = worst_mass.max((mass - 1.0).abs());
            worst_moment = worst_moment.max(rel(m2, sigma));
        }
    }
    for &lambda0 in &[0.01, 0.1, 1.0, 10.0, 100.0] {
        let r = RayleighParams::new(lambda0).unwrap();
        let s = lambda0.sqrt();
        let mass = integrate_positive_axis(|a| rayleigh_pdf(a, &r).unwrap(), s.ln() - 300.0, (s * 600.0).ln(), 1e-13);
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    if worst_mass > tol::NORMALIZATION {
        failures.push(format!("mass off by {worst_mass:e}"));
    }
    if worst_moment > tol::MOMENT {
        failures.push(format!("E[I] off by {worst_moment:e}"));
    }
    let r = RayleighParams::new(1.0).unwrap();
    let sup = |alpha: f64| {
        let k = KParams::new(1.0, alpha).unwrap();
        // Both densities vanish at a = 0 for α > 1/2, so the grid starts just above it.
        (1..=5000)
            .map(|i| {
                let a = i as f64 * 1e-3;
                (k_pdf(a, &k).unwrap() - rayleigh_pdf(a, &r).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    };
    let gaps = [sup(10.0), sup(100.0), sup(1000.0)];
    if !(gaps[0] > gaps[1] && gaps[1] > gaps[2]) {
        failures.push(format!("Rayleigh-limit gaps not decreasing: {gaps:?}"));
    }
    if gaps[2] >= tol::RAYLEIGH_LIMIT {
        failures.push(format!("gap at α = 1000 is {:e}", gaps[2]));
    }
    let summary = format!(
        "mass {worst_mass:.1e}, moment {worst_moment:.1e}, sup gap at α=10/100/1000 = {:.1e}/{:.1e}/{:.1e}",
        gaps[0], gaps[1], gaps[2]
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

// Criterion 4.

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Returns the verdict, the serialized fits and the fitted models.
fn em_recovery() -> (Result<String, String>, (String, Vec<RKMixture>)) {
    let truth = two_component_truth();
    let config = EmConfig::default();
    let mut fits: Vec<FitResult> = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..10 {
        let (data, _) = sample_mixture(&truth, 10_000, seed).unwrap();
        match em_fit(&data, 2, &config) {
            Ok(fit) => {
                let drop = fit
                    .loglik_trace
                    .windows(2)
                    .map(|w| (w[0] - w[1]) / w[0].abs())
                    .fold(f64::NEG_INFINITY, f64::max);
                if drop > tol::MONOTONE_SLACK {
                    failures.push(format!("seed {seed}: trace drops by {drop:e} relative"));
                }
                fits.push(fit);
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let w1 = median(fits.iter().map(|f| f.theta.components()[0].weight).collect());
    let sigma = median(fits.iter().map(|f| f.theta.components()[0].params.sigma()).collect());
    if (w1 - 0.3).abs() > tol::WEIGHT_RECOVERY {
        failures.push(format!("median w1 {w1:.4}"));
    }
    if rel(sigma, 20.0) > tol::SIGMA_RECOVERY {
        failures.push(format!("median σ {sigma:.3}"));
    }
    let summary = format!("median w1 = {w1:.4} (0.3), median σ = {sigma:.3} (20), traces monotone");
    let verdict = if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    };
    let artifact = serde_json::to_string_pretty(&fits).unwrap();
    (verdict, (artifact, fits.into_iter().map(|f| f.theta).collect()))
}

// Criterion 5.

/// Sweeps M = 2..5 on one seed's samples through the same path the `sweep`
/// command takes, returning the report file.
fn sweep_report(dir: &Path, truth: &RKMixture, seed: u64) -> FitReportFile {
    let (data, _) = sample_mixture(truth, 10_000, seed).unwrap();
    let path = dir.join(format!("seed{seed}.txt"));
    write_population(&data, &path).unwrap();
    let prepared = prepare(&path, &TileFlags::default(), false).unwrap();
    let config = EmConfig::default();
    let result = sweep(&prepared.population, 2..=5, &config, KConvention::AllWeights, None).unwrap();
    FitReportFile::new(&prepared, &config, &result)
}

fn order_selection(dir: &Path) -> (Result<String, String>, (String, Vec<RKMixture>)) {
    let truth = three_component_truth();
    let mut picks = Vec::new();
    let mut artifact = String::new();
    let mut models = Vec::new();
    for seed in 0..10 {
        let report = sweep_report(dir, &truth, seed);
        picks.push(report.selections.by_aic);
        artifact.push_str(&report.to_json());
        if seed == 0 {
            models.extend(report.models.iter().filter_map(|e| e.theta.clone()));
        }
    }
    let hits = picks.iter().filter(|&&p| p == Some(3)).count();
    let summary = format!(
        "AIC picked M = 3 on {hits}/10 seeds (need ≥ {EXPECTED_AIC_MAJORITY}); picks {:?}",
        picks.iter().map(|p| p.unwrap_or(0)).collect::<Vec<_>>()
    );
    let verdict = if hits >= EXPECTED_AIC_MAJORITY { Ok(summary) } else { Err(summary) };
    (verdict, (artifact, models))
}

// Criterion 6.

fn pfa_consistency(models: &[RKMixture]) -> Result<String, String> {
    let mut failures = Vec::new();
    let mut worst_quad: f64 = 0.0;
    for (i, theta) in models.iter().enumerate() {
        if mixture_pfa(0.0, theta).unwrap() != 1.0 {
            failures.push(format!("model {i}: pfa(0) ≠ 1"));
        }
        let mut prev = 1.0;
        for j in 0..=4000 {
            let p = mixture_pfa(j as f64 * 0.01, theta).unwrap();
            if p > prev {
                failures.push(format!("model {i}: pfa rises at a = {}", j as f64 * 0.01));
                break;
            }
            prev = p;
        }
        let scale = theta.mean_intensity().sqrt();
        for j in 1..=20 {
            let a = scale * 0.2 * j as f64;
            let cdf = integrate_positive_axis(|u| mixture_log_pdf(u, theta).unwrap().exp(), a.ln() - 300.0, a.ln(), 1e-14);
            worst_quad = worst_quad.max((mixture_pfa(a, theta).unwrap() + cdf - 1.0).abs());
        }
    }
    if worst_quad > tol::PFA_QUADRATURE {
        failures.push(format!("pfa + cdf off by {worst_quad:e}"));
    }
    let draws = rayleigh_sample(&RayleighParams::new(1.0).unwrap(), 100_000, 6).unwrap();
    let curve = empirical_pfa(&draws, &[0.5, 1.0, 1.5]).unwrap();
    let mut worst_emp: f64 = 0.0;
    for (t, e) in curve.thresholds.iter().zip(&curve.empirical) {
        worst_emp = worst_emp.max((e - (-t * t).exp()).abs());
    }
    if worst_emp > tol::EMPIRICAL_PFA {
        failures.push(format!("empirical pfa off by {worst_emp:.4}"));
    }
    let summary = format!(
        "{} fitted models: pfa + cdf within {worst_quad:.1e}, empirical Rayleigh pfa within {worst_emp:.4}",
        models.len()
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

// Criterion 7.

fn rkmix(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rkmix")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

/// Synthesizes a 600×600 grid, decimates it and sweeps it with the CLI.
/// Returns the verdict and the report bytes.
fn pipeline_shape(dir: &Path, tag: &str) -> (Result<String, String>, Vec<u8>) {
    let run = || -> Result<(String, Vec<u8>), String> {
        let spec = dir.join("truth.json");
        fs::write(
            &spec,
            r#"{"w0": 0.5, "lambda0": 1.0, "components": [{"w": 0.3, "sigma": 10.0, "alpha": 3.0}, {"w": 0.2, "sigma": 100.0, "alpha": 1.0}]}"#,
        )
        .map_err(|e| e.to_string())?;
        let grid = dir.join("scene");
        let p = |p: &Path| p.to_str().unwrap().to_string();
        rkmix(&["synth", "--spec", &p(&spec), "--grid", "600x600", "--seed", "7", "--out", &p(&grid)])?;
        let samples = dir.join(format!("decimated-{tag}.txt"));
        rkmix(&["decimate", "--input", &p(&grid), "--decimation-factor", "6", "--out", &p(&samples)])?;
        let n = fs::read_to_string(&samples).map_err(|e| e.to_string())?.lines().count();
        let report_path = dir.join(format!("report-{tag}.json"));
        let table = rkmix(&["sweep", "--input", &p(&grid), "--out", &p(&report_path)])?;
        let report = FitReportFile::read(&report_path).map_err(|e| e.to_string())?;

        let mut problems = Vec::new();
        if n != 10_000 || report.input.n_samples != 10_000 {
            problems.push(format!("decimated to {n} samples, report N = {}", report.input.n_samples));
        }
        let mut lines = table.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if header != ["Model", "LL", "AIC", "BIC"] {
            problems.push(format!("table header {header:?}"));
        }
        let names: Vec<&str> = lines.take(4).filter_map(|l| l.split_whitespace().next()).collect();
        if names != ["R-K1", "R-K2", "R-K3", "R-K4"] {
            problems.push(format!("table rows {names:?}"));
        }
        let bytes = fs::read(&report_path).map_err(|e| e.to_string())?;
        if problems.is_empty() {
            Ok((format!("600×600 at factor 6 → {n} samples; table rows {}", names.join(", ")), bytes))
        } else {
            Err(problems.join("; "))
        }
    };
    match run() {
        Ok((summary, bytes)) => (Ok(summary), bytes),
        Err(e) => (Err(e), Vec::new()),
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut outcomes = Vec::new();

    let (o, ()) = criterion(1, "selection table arithmetic", tol::TABLE_BUDGET, || (table_regression(), ()));
    outcomes.push(o);
    let (o, ()) = criterion(2, "special functions", tol::SPECFUN_BUDGET, || (special_functions(), ()));
    outcomes.push(o);
    let (o, ()) = criterion(3, "distribution correctness", tol::DISTRIBUTION_BUDGET, || (distributions(), ()));
    outcomes.push(o);
    let (o, (fits4, mut models)) = criterion(4, "EM recovery", tol::RECOVERY_BUDGET, em_recovery);
    outcomes.push(o);
    let (o, (reports5, models5)) =
        criterion(5, "model-order selection", tol::SELECTION_BUDGET, || order_selection(dir.path()));
    outcomes.push(o);
    models.extend(models5);
    let (o, ()) = criterion(6, "PFA consistency", tol::PFA_BUDGET, || (pfa_consistency(&models), ()));
    outcomes.push(o);
    let (o, report7) = criterion(7, "pipeline shape", tol::NO_BUDGET, || pipeline_shape(dir.path(), "first"));
    outcomes.push(o);

    let (o, ()) = criterion(8, "determinism", tol::NO_BUDGET, || {
        let mut diffs = Vec::new();
        if em_recovery().1 .0 != fits4 {
            diffs.push("criterion 4 fits");
        }
        if order_selection(dir.path()).1 .0 != reports5 {
            diffs.push("criterion 5 reports");
        }
        let again = pipeline_shape(dir.path(), "second").1;
        if again.is_empty() || again != report7 {
            diffs.push("criterion 7 report");
        }
        let verdict = if diffs.is_empty() {
            Ok("repeated runs of criteria 4, 5 and 7 are byte-identical".to_string())
        } else {
            Err(format!("differs: {}", diffs.join(", ")))
        };
        (verdict, ())
    });
    outcomes.push(o);

    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.line.as_str()).collect();
    println!("{}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

/// Monte-Carlo run that fixed `EXPECTED_AIC_MAJORITY`: the criterion 5
/// sweep on 30 seeds disjoint from the acceptance seeds. Slow; run with
/// `cargo test --release --test acceptance -- --ignored --nocapture`.
#[test]
#[ignore]
fn order_selection_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let truth = three_component_truth();
    let (mut aic3, mut bic3) = (0, 0);
    let seeds = 1000..1030u64;
    let total = seeds.clone().count();
    for seed in seeds {
        let report = sweep_report(dir.path(), &truth, seed);
        aic3 += usize::from(report.selections.by_aic == Some(3));
        bic3 += usize::from(report.selections.by_bic == Some(3));
        println!("seed {seed}: AIC {:?} BIC {:?}", report.selections.by_aic, report.selections.by_bic);
    }
    // One-sided 95% Clopper-Pearson lower bound on the AIC rate.
    let lower = clopper_pearson_lower(aic3, total, 0.05);
    let expected = (0..=10).rev().find(|&k| binomial_tail(10, lower, k) >= 0.99).unwrap_or(0);
    println!("AIC chose 3 on {aic3}/{total}, BIC on {bic3}/{total}; rate ≥ {lower:.3}; expect ≥ {expected} of 10");
}

/// P(X ≥ k) for X ~ Binomial(n, p).
fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    let ln_choose = |n: u64, j: u64| {
        log_gamma(n as f64 + 1.0).unwrap() - log_gamma(j as f64 + 1.0).unwrap() - log_gamma((n - j) as f64 + 1.0).unwrap()
    };
    (k..=n)
        .map(|j| {
            let lp = if p >= 1.0 {
                if j == n { 0.0 } else { f64::NEG_INFINITY }
            } else {
                ln_choose(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()
            };
            lp.exp()
        })
        .sum()
}

/// Smallest p with P(X ≥ x | n, p) ≥ alpha, found by bisection.
fn clopper_pearson_lower(x: usize, n: usize, alpha: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail(n as u64, mid, x as u64) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
