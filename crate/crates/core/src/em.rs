//! Generalized EM for the Rayleigh + K mixture.
//!
//! The E-step is exact. The M-step updates the weights and λ₀ in closed form.
//! For each K component it sets σ to the responsibility-weighted mean
//! intensity and then maximizes the weighted log-likelihood over ln α with a
//! bracketed Brent search. A K update is kept only when the component's
//! objective does not decrease, so the log-likelihood trace is monotone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{rng_for, KParams, RayleighParams};
use crate::mixture::{ComponentDensity, KComponent, RKMixture};
use crate::population::AmplitudePopulation;
use crate::selection::{param_count, KConvention};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmConfig {
    /// Stop when |ΔLL| / |LL| falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub weight_floor: f64,
    /// Search interval for the K shape parameter.
    pub alpha_bounds: (f64, f64),
    /// Extra fits from jittered starting points, one per seed. The fit with
    /// the highest log-likelihood wins; the deterministic start is always run.
    #[serde(default)]
    pub restart_seeds: Vec<u64>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            weight_floor: 1e-6,
            alpha_bounds: (0.05, 500.0),
            restart_seeds: Vec::new(),
        }
    }
}

/// Scale bounds for σ and λ₀, relative to the sample mean intensity.
const SCALE_BOUNDS: (f64, f64) = (1e-12, 1e6);
/// Consecutive iterations at the weight floor before a component is flagged.
const DEGENERATE_AFTER: usize = 10;
/// Absolute tolerance of the ln α search.
const LN_ALPHA_TOL: f64 = 1e-4;
/// Opening bracket width of the ln α search, and the cap on later widths.
const INITIAL_LN_ALPHA_STEP: f64 = 0.1;
/// Responsibilities at or below this are left out of the K objectives.
const ACTIVE_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("{n} samples are too few for M = {m} (need at least {required})")]
    InsufficientData { n: usize, m: usize, required: usize },
    #[error("M must be at least 1")]
    NoComponents,
    #[error("sample {index} is not strictly positive: {value}")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("log-likelihood became non-finite ({value}) at iteration {iteration}")]
    NonFiniteLikelihood { iteration: usize, value: f64 },
    #[error("invalid EM configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: RKMixture,
    pub loglik: f64,
    /// Log-likelihood at the starting point followed by one entry per
    /// iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub n_samples: usize,
    /// Components whose weight sat at the floor for more than ten
    /// consecutive iterations.
    pub degenerate_components: Vec<usize>,
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), EmError> {
        let (lo, hi) = self.alpha_bounds;
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(EmError::InvalidConfig(format!("tol = {}", self.tol)));
        }
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(EmError::InvalidConfig(format!("alpha bounds ({lo}, {hi})")));
        }
        if !(self.weight_floor >= 0.0 && self.weight_floor < 1.0) {
            return Err(EmError::InvalidConfig(format!("weight floor {}", self.weight_floor)));
        }
        Ok(())
    }
}

/// Sample-derived quantities reused by every iteration.
struct Data {
    a: Vec<f64>,
    ln_a: Vec<f64>,
    intensity: Vec<f64>,
    sigma_bounds: (f64, f64),
}

impl Data {
    fn new(pop: &AmplitudePopulation) -> Result<Self, EmError> {
        let a = pop.as_slice().to_vec();
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(EmError::NonPositiveSample { index, value });
        }
        let ln_a = a.iter().map(|v| v.ln()).collect();
        let intensity: Vec<f64> = a.iter().map(|v| v * v).collect();
        let mean = intensity.iter().sum::<f64>() / a.len() as f64;
        Ok(Self {
            a,
            ln_a,
            intensity,
            sigma_bounds: (SCALE_BOUNDS.0 * mean, SCALE_BOUNDS.1 * mean),
        })
    }

    fn len(&self) -> usize {
        self.a.len()
    }
}

/// Fits an M-component mixture from the deterministic intensity-quantile
/// start (plus any configured restarts).
pub fn em_fit(data: &AmplitudePopulation, m: usize, config: &EmConfig) -> Result<FitResult, EmError> {
    check_size(data.len(), m)?;
    config.validate()?;
    let d = Data::new(data)?;
    let init = initial_theta(&d, m, config);
    let mut best = run(&d, init.clone(), config)?;
    for &seed in &config.restart_seeds {
        let start = jitter(&init, seed, &d, config);
        let fit = run(&d, start, config)?;
        if fit.loglik > best.loglik {
            best = fit;
        }
    }
    Ok(best)
}

/// Fits from a caller-supplied starting model.
pub fn em_fit_from(
    data: &AmplitudePopulation,
    init: &RKMixture,
    config: &EmConfig,
) -> Result<FitResult, EmError> {
    let m = init.num_components();
    check_size(data.len(), m)?;
    config.validate()?;
    let d = Data::new(data)?;
    run(&d, init.clone(), config)
}

fn check_size(n: usize, m: usize) -> Result<(), EmError> {
    if m == 0 {
        return Err(EmError::NoComponents);
    }
    let required = 10 * param_count(m, KConvention::AllWeights);
    if n < required {
        return Err(EmError::InsufficientData { n, m, required });
    }
    Ok(())
}

/// Intensity-sorted equal-count groups: the lowest group seeds the Rayleigh
/// term, the rest seed K components by group mean and moment-matched shape.
fn initial_theta(d: &Data, m: usize, config: &EmConfig) -> RKMixture {
    let mut sorted = d.intensity.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (alpha_lo, alpha_hi) = config.alpha_bounds;
    let mut groups = (0..m).map(|g| {
        let chunk = &sorted[g * n / m..(g + 1) * n / m];
        let len = chunk.len() as f64;
        let mean = chunk.iter().sum::<f64>() / len;
        let var = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
        (mean, var)
    });
    let clamp_scale = |s: f64| s.clamp(d.sigma_bounds.0, d.sigma_bounds.1);
    let (mean0, _) = groups.next().expect("m >= 1");
    let w = 1.0 / m as f64;
    let components = groups
        .map(|(mean, var)| {
            // K intensity: var / mean² = 1 + 2/α.
            let excess = var / (mean * mean) - 1.0;
            let alpha = if excess > 0.0 { 2.0 / excess } else { alpha_hi };
            KComponent {
                weight: w,
                params: KParams::new(clamp_scale(mean), alpha.clamp(alpha_lo, alpha_hi))
                    .expect("clamped parameters are valid"),
            }
        })
        .collect();
    RKMixture::from_parts(
        w,
        RayleighParams::new(clamp_scale(mean0)).expect("clamped scale is valid"),
        components,
    )
}

/// Log-normal perturbation of scales and shapes plus random weights.
fn jitter(init: &RKMixture, seed: u64, d: &Data, config: &EmConfig) -> RKMixture {
    use rand::Rng;
    let mut rng = rng_for(seed, 1);
    let mut factor = |spread: f64| (spread * (rng.random::<f64>() - 0.5) * 2.0).exp();
    let clamp_scale = |s: f64| s.clamp(d.sigma_bounds.0, d.sigma_bounds.1);
    let (alpha_lo, alpha_hi) = config.alpha_bounds;
    let mut weights: Vec<f64> = (0..init.num_components()).map(|_| factor(1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let lambda0 = clamp_scale(init.rayleigh().lambda0() * factor(1.0));
    let components = init
        .components()
        .iter()
        .zip(&weights[1..])
        .map(|(c, &w)| KComponent {
            weight: w,
            params: KParams::new(
                clamp_scale(c.params.sigma() * factor(1.0)),
                (c.params.alpha() * factor(1.5)).clamp(alpha_lo, alpha_hi),
            )
            .expect("clamped parameters are valid"),
        })
        .collect();
    RKMixture::from_parts(weights[0], RayleighParams::new(lambda0).expect("positive"), components)
}

/// Working parameter set. Components keep a fixed order for the whole run
/// so that successive iterates can be extrapolated coordinate-wise; the
/// canonical σ order is applied only to the returned model.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    weights: Vec<f64>,
    lambda0: f64,
    sigma: Vec<f64>,
    alpha: Vec<f64>,
}

impl Params {
    fn from_mixture(theta: &RKMixture) -> Self {
        Self {
            weights: theta.weights(),
            lambda0: theta.rayleigh().lambda0(),
            sigma: theta.components().iter().map(|c| c.params.sigma()).collect(),
            alpha: theta.components().iter().map(|c| c.params.alpha()).collect(),
        }
    }

    fn to_mixture(&self) -> RKMixture {
        let components = self
            .sigma
            .iter()
            .zip(&self.alpha)
            .zip(&self.weights[1..])
            .map(|((&s, &a), &w)| KComponent {
                weight: w,
                params: KParams::new(s, a).expect("parameters stay within bounds"),
            })
            .collect();
        RKMixture::from_parts(
            self.weights[0],
            RayleighParams::new(self.lambda0).expect("scale stays within bounds"),
            components,
        )
    }

    fn num_components(&self) -> usize {
        self.weights.len()
    }

    /// Unconstrained coordinates: log weights, log scales, log shapes.
    fn to_log_vector(&self) -> Vec<f64> {
        self.weights
            .iter()
            .chain(std::iter::once(&self.lambda0))
            .chain(&self.sigma)
            .chain(&self.alpha)
            .map(|v| v.ln())
            .collect()
    }

    fn from_log_vector(x: &[f64], d: &Data, config: &EmConfig) -> Self {
        let m = (x.len() + 1) / 3;
        let mut weights: Vec<f64> = x[..m].iter().map(|v| v.exp()).collect();
        normalize_weights(&mut weights, config.weight_floor);
        let scale = |v: &f64| v.exp().clamp(d.sigma_bounds.0, d.sigma_bounds.1);
        let (lo, hi) = config.alpha_bounds;
        Self {
            weights,
            lambda0: scale(&x[m]),
            sigma: x[m + 1..2 * m].iter().map(scale).collect(),
            alpha: x[2 * m..].iter().map(|v| v.exp().clamp(lo, hi)).collect(),
        }
    }
}

fn normalize_weights(weights: &mut [f64], floor: f64) {
    weights.iter_mut().for_each(|w| *w = w.max(floor));
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
}

/// E-step output: responsibilities (component-major) and each component's
/// current weighted log-likelihood Σ r ln p.
struct EStep {
    loglik: f64,
    resp: Vec<f64>,
    component_objective: Vec<f64>,
}

fn e_step(d: &Data, p: &Params, log_dens: &mut Vec<f64>) -> EStep {
    let n = d.len();
    let m = p.num_components();
    log_dens.resize(m * n, 0.0);
    let rayleigh = ComponentDensity::Rayleigh(RayleighParams::new(p.lambda0).expect("bounded"));
    let densities = std::iter::once(rayleigh).chain(p.sigma.iter().zip(&p.alpha).map(|(&s, &a)| {
        ComponentDensity::K(KParams::new(s, a).expect("bounded").log_density())
    }));
    for (j, dens) in densities.enumerate() {
        let row = &mut log_dens[j * n..(j + 1) * n];
        match dens {
            ComponentDensity::Rayleigh(r) => {
                for (out, &a) in row.iter_mut().zip(&d.a) {
                    *out = r.log_pdf_unchecked(a);
                }
            }
            ComponentDensity::K(k) => {
                for ((out, &a), &ln_a) in row.iter_mut().zip(&d.a).zip(&d.ln_a) {
                    *out = k.eval_with_ln(a, ln_a);
                }
            }
        }
    }
    let ln_w: Vec<f64> = p.weights.iter().map(|w| w.ln()).collect();
    let mut resp = vec![0.0; m * n];
    let mut loglik = 0.0;
    let mut objective = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..m {
            buf[j] = ln_w[j] + log_dens[j * n + i];
            max = max.max(buf[j]);
        }
        if !max.is_finite() {
            loglik = if max.is_nan() { f64::NAN } else { max };
            break;
        }
        let sum: f64 = buf.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loglik += lse;
        for j in 0..m {
            let r = (buf[j] - lse).exp();
            resp[j * n + i] = r;
            if r > ACTIVE_CUTOFF {
                objective[j] += r * log_dens[j * n + i];
            }
        }
    }
    EStep {
        loglik,
        resp,
        component_objective: objective,
    }
}

/// Samples with non-negligible responsibility for one component.
struct Active {
    a: Vec<f64>,
    ln_a: Vec<f64>,
    r: Vec<f64>,
}

impl Active {
    fn collect(d: &Data, r: &[f64]) -> Self {
        let mut out = Active {
            a: Vec::new(),
            ln_a: Vec::new(),
            r: Vec::new(),
        };
        for i in 0..r.len() {
            if r[i] > ACTIVE_CUTOFF {
                out.a.push(d.a[i]);
                out.ln_a.push(d.ln_a[i]);
                out.r.push(r[i]);
            }
        }
        out
    }

    /// Σ r ln p_K(a | σ, e^u).
    fn objective(&self, sigma: f64, u: f64) -> f64 {
        let density = match KParams::new(sigma, u.exp()) {
            Ok(p) => p.log_density(),
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut total = 0.0;
        for ((&a, &ln_a), &r) in self.a.iter().zip(&self.ln_a).zip(&self.r) {
            total += r * density.eval_with_ln(a, ln_a);
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

/// One generalized M-step. `alpha_steps` carries the last |Δ ln α| of each
/// K component to size the next search bracket.
fn m_step(d: &Data, p: &Params, e: &EStep, alpha_steps: &mut [f64], config: &EmConfig) -> Params {
    let n = d.len();
    let m = p.num_components();
    let resp = &e.resp;
    let totals: Vec<f64> = (0..m).map(|j| resp[j * n..(j + 1) * n].iter().sum()).collect();

    let mut weights: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    normalize_weights(&mut weights, config.weight_floor);

    let lambda0 = if totals[0] > 0.0 {
        let weighted: f64 = resp[..n].iter().zip(&d.intensity).map(|(r, i)| r * i).sum();
        (weighted / totals[0]).clamp(d.sigma_bounds.0, d.sigma_bounds.1)
    } else {
        p.lambda0
    };

    let ln_bounds = (config.alpha_bounds.0.ln(), config.alpha_bounds.1.ln());
    let mut sigma = p.sigma.clone();
    let mut alpha = p.alpha.clone();
    for idx in 0..m - 1 {
        let j = idx + 1;
        if totals[j] <= 0.0 {
            continue;
        }
        let old = KParams::new(p.sigma[idx], p.alpha[idx]).expect("bounded");
        let r = &resp[j * n..(j + 1) * n];
        let new = update_k(d, r, totals[j], &old, e.component_objective[j], ln_bounds, alpha_steps[idx]);
        let moved = (new.alpha().ln() - old.alpha().ln()).abs();
        alpha_steps[idx] = (2.0 * moved).clamp(10.0 * LN_ALPHA_TOL, INITIAL_LN_ALPHA_STEP);
        sigma[idx] = new.sigma();
        alpha[idx] = new.alpha();
    }
    Params {
        weights,
        lambda0,
        sigma,
        alpha,
    }
}

/// Bookkeeping shared by every accepted iterate.
struct Progress {
    trace: Vec<f64>,
    m_steps: usize,
    floor_streak: Vec<usize>,
    degenerate: Vec<bool>,
    converged: bool,
}

impl Progress {
    /// Records an accepted iterate; returns true once the relative change
    /// in log-likelihood falls below the tolerance.
    fn accept(&mut self, p: &Params, loglik: f64, config: &EmConfig) -> bool {
        let previous = *self.trace.last().expect("trace starts non-empty");
        self.trace.push(loglik);
        for (j, &w) in p.weights.iter().enumerate() {
            if w <= config.weight_floor * (1.0 + 1e-9) {
                self.floor_streak[j] += 1;
                if self.floor_streak[j] > DEGENERATE_AFTER {
                    self.degenerate[j] = true;
                }
            } else {
                self.floor_streak[j] = 0;
            }
        }
        let change = (loglik - previous).abs() / previous.abs().max(f64::MIN_POSITIVE);
        self.converged = change < config.tol;
        self.converged
    }

    fn budget_left(&self, config: &EmConfig) -> bool {
        self.m_steps < config.max_iter
    }
}

/// Generalized EM accelerated with squared extrapolation (SQUAREM): two
/// plain steps define a direction, the extrapolated point is stabilized by
/// one more step, and the result is kept only if its log-likelihood is at
/// least that of the plain two-step iterate.
fn run(d: &Data, init: RKMixture, config: &EmConfig) -> Result<FitResult, EmError> {
    let m = init.num_components();
    let mut p = Params::from_mixture(&init);
    let mut log_dens = Vec::new();
    let mut e = e_step(d, &p, &mut log_dens);
    check_finite(e.loglik, 0)?;
    let mut progress = Progress {
        trace: vec![e.loglik],
        m_steps: 0,
        floor_streak: vec![0; m],
        degenerate: vec![false; m],
        converged: false,
    };
    let mut alpha_steps = vec![INITIAL_LN_ALPHA_STEP; m - 1];
    let mut step_max = 4.0;

    'outer: while progress.budget_left(config) {
        let x0 = p.to_log_vector();
        let mut plain = Vec::with_capacity(2);
        for _ in 0..2 {
            let next = m_step(d, &p, &e, &mut alpha_steps, config);
            progress.m_steps += 1;
            let e_next = e_step(d, &next, &mut log_dens);
            check_finite(e_next.loglik, progress.m_steps)?;
            let done = progress.accept(&next, e_next.loglik, config);
            p = next;
            e = e_next;
            plain.push(p.to_log_vector());
            if done || !progress.budget_left(config) {
                break 'outer;
            }
        }
        if m == 1 {
            continue;
        }

        let (x1, x2) = (&plain[0], &plain[1]);
        let r: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = x2.iter().zip(x1).zip(&r).map(|((c, b), r)| c - b - r).collect();
        let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let (nr, nv) = (norm(&r), norm(&v));
        if !(nr > 0.0 && nv > 0.0) {
            continue;
        }
        let step = (nr / nv).min(step_max);
        if step <= 1.0 {
            continue;
        }
        // x0 + 2s r + s² v with s = -step in the usual sign convention.
        let xs: Vec<f64> = x0
            .iter()
            .zip(&r)
            .zip(&v)
            .map(|((x, r), v)| x + 2.0 * step * r + step * step * v)
            .collect();
        let jumped = Params::from_log_vector(&xs, d, config);
        let e_jumped = e_step(d, &jumped, &mut log_dens);
        if !e_jumped.loglik.is_finite() {
            step_max = (step_max / 4.0).max(1.0);
            continue;
        }
        let mut trial_steps = alpha_steps.clone();
        let stabilized = m_step(d, &jumped, &e_jumped, &mut trial_steps, config);
        progress.m_steps += 1;
        let e_stab = e_step(d, &stabilized, &mut log_dens);
        if e_stab.loglik.is_finite() && e_stab.loglik >= e.loglik {
            if step == step_max {
                step_max *= 4.0;
            }
            alpha_steps = trial_steps;
            let done = progress.accept(&stabilized, e_stab.loglik, config);
            p = stabilized;
            e = e_stab;
            if done {
                break;
            }
        } else {
            step_max = (step_max / 4.0).max(1.0);
        }
    }

    let theta = p.to_mixture();
    // Map internal component slots onto the canonical order.
    let mut slots: Vec<usize> = (1..m).collect();
    slots.sort_by(|&a, &b| p.sigma[a - 1].total_cmp(&p.sigma[b - 1]));
    let mut degenerate_components: Vec<usize> = (0..m)
        .filter(|&j| progress.degenerate[j])
        .map(|j| if j == 0 { 0 } else { 1 + slots.iter().position(|&s| s == j).expect("slot") })
        .collect();
    degenerate_components.sort_unstable();

    Ok(FitResult {
        loglik: e.loglik,
        theta,
        loglik_trace: progress.trace,
        iterations: progress.m_steps,
        converged: progress.converged,
        n_samples: d.len(),
        degenerate_components,
    })
}

fn check_finite(loglik: f64, iteration: usize) -> Result<(), EmError> {
    if loglik.is_finite() {
        Ok(())
    } else {
        Err(EmError::NonFiniteLikelihood {
            iteration,
            value: loglik,
        })
    }
}

/// Generalized M-step for one K component: try (σ̂, best α), then
/// (σ_old, best α), and otherwise keep the old parameters.
fn update_k(
    d: &Data,
    r: &[f64],
    total: f64,
    old: &KParams,
    old_objective: f64,
    ln_bounds: (f64, f64),
    step: f64,
) -> KParams {
    let active = Active::collect(d, r);
    let weighted: f64 = r.iter().zip(&d.intensity).map(|(r, i)| r * i).sum();
    let sigma_new = (weighted / total).clamp(d.sigma_bounds.0, d.sigma_bounds.1);
    let u_old = old.alpha().ln().clamp(ln_bounds.0, ln_bounds.1);

    let (u, value) = maximize_bracketed(|u| active.objective(sigma_new, u), u_old, ln_bounds, step, LN_ALPHA_TOL);
    if value >= old_objective {
        if let Ok(p) = KParams::new(sigma_new, u.exp()) {
            return p;
        }
    }

    if sigma_new != old.sigma() {
        let (u, value) = maximize_bracketed(|u| active.objective(old.sigma(), u), u_old, ln_bounds, step, LN_ALPHA_TOL);
        if value >= old_objective {
            if let Ok(p) = KParams::new(old.sigma(), u.exp()) {
                return p;
            }
        }
    }
    *old
}

/// Maximizes f on [lo, hi] starting from x0: steps outward in the uphill
/// direction, doubling the initial `step`, until the value drops, then
/// refines the bracket with Brent's method. Returns the best point seen and
/// its value.
fn maximize_bracketed<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    (lo, hi): (f64, f64),
    step: f64,
    tol: f64,
) -> (f64, f64) {
    let f0 = f(x0);
    // At a bound, a one-sided probe decides whether to move at all.
    if x0 <= lo || x0 >= hi {
        let inward = if x0 <= lo { 1.0 } else { -1.0 };
        let probe = x0 + inward * tol;
        if f(probe) <= f0 {
            return (x0, f0);
        }
    }
    let mut step = step;
    let up = (x0 + step).min(hi);
    let f_up = if up > x0 { f(up) } else { f64::NEG_INFINITY };
    let (dir, mut b, mut fb) = if f_up > f0 {
        (1.0, up, f_up)
    } else {
        let down = (x0 - step).max(lo);
        let f_down = if down < x0 { f(down) } else { f64::NEG_INFINITY };
        if f_down > f0 {
            (-1.0, down, f_down)
        } else {
            return brent_max(&mut f, down, up, x0, f0, tol);
        }
    };
    let mut a = x0;
    loop {
        step *= 2.0;
        let c = (b + dir * step).clamp(lo, hi);
        if c == b {
            return (b, fb);
        }
        let fc = f(c);
        if fc <= fb {
            return brent_max(&mut f, a.min(c), a.max(c), b, fb, tol);
        }
        a = b;
        b = c;
        fb = fc;
    }
}

/// Brent's parabolic-interpolation search for a maximum inside [a, b],
/// given an interior point x with known value fx.
fn brent_max<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, x: f64, fx: f64, tol: f64) -> (f64, f64) {
    const GOLDEN: f64 = 0.381_966_011_250_105;
    let (mut x, mut w, mut v) = (x, x, x);
    // Work with g = -f so the textbook minimization applies unchanged.
    let (mut gx, mut gw, mut gv) = (-fx, -fx, -fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        let tol2 = 2.0 * tol;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol {
            let r = (x - w) * (gx - gv);
            let mut q = (x - v) * (gx - gw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol.copysign(mid - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let gu = -f(u);
        if gu <= gx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, gv) = (w, gw);
            (w, gw) = (x, gx);
            (x, gx) = (u, gu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if gu <= gw || w == x {
                (v, gv) = (w, gw);
                (w, gw) = (u, gu);
            } else if gu <= gv || v == x || v == w {
                (v, gv) = (u, gu);
            }
        }
    }
    (x, -gx)
}
