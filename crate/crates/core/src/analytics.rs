//! Mean-field theory of a single flat's log-rent.
//!
//! The log-rent `x` is treated as a biased random walk that jumps up by
//! `n_o * n_r * a` at rate `q_up = raise_prob * density / n_o` and down by
//! `n_v * n_l * a` at rate `q_down(x) = (10^x / lower_scale) * (1 - density) / n_v`.
//! Here `n_o` and `n_v` are the mean number of raises per occupancy spell
//! and of cuts per vacancy spell.

use serde::{Deserialize, Serialize};

use crate::error::{AnalyticsError, ConfigError};
use crate::params::ModelParams;
use crate::rng::{RandomStream, SimRng};

/// Conditions under which the closed forms leave their regime of validity.
/// They are reported, never fatal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityWarning {
    /// `p_eq > search_scale`: the search probability is saturated.
    AboveSearchScale,
    /// `p_eq > lower_scale`: the lowering probability is saturated.
    AboveLowerScale,
    /// The per-step probability that a vacant flat is filled reaches 1.
    FillProbabilitySaturated,
}

impl ValidityWarning {
    pub fn label(&self) -> &'static str {
        match self {
            ValidityWarning::AboveSearchScale => "above_search_scale",
            ValidityWarning::AboveLowerScale => "above_lower_scale",
            ValidityWarning::FillProbabilitySaturated => "fill_probability_saturated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalPrediction {
    pub p_eq: f64,
    pub x_eq: f64,
    pub n_o: f64,
    pub n_v: f64,
    /// Per-step probability that a vacant flat gains a tenant.
    pub pi_v: f64,
    pub sigma_x: f64,
    pub warnings: Vec<ValidityWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpellLengths {
    pub n_o: f64,
    pub n_v: f64,
    pub pi_v: f64,
}

/// `p_eq = (n_r / n_l) * raise_prob * lower_scale * density / (1 - density)`.
pub fn equilibrium_rent(params: &ModelParams) -> Result<(f64, f64), ConfigError> {
    params.validate()?;
    let rho = params.density;
    let p_eq = params.raise_steps as f64 / params.lower_steps as f64
        * params.raise_prob
        * params.lower_scale
        * rho
        / (1.0 - rho);
    Ok((p_eq, p_eq.log10()))
}

pub fn occupancy_spell_lengths(params: &ModelParams) -> Result<SpellLengths, ConfigError> {
    let (p_eq, _) = equilibrium_rent(params)?;
    let rho = params.density;
    let vacancy_ratio = (1.0 - rho) / rho;
    let n_v = 2.0 * params.search_scale * vacancy_ratio / params.lower_scale;
    let n_o = n_v * params.lower_steps as f64 / params.raise_steps as f64;
    let pi_v = p_eq / (2.0 * params.search_scale * vacancy_ratio);
    Ok(SpellLengths { n_o, n_v, pi_v })
}

/// Probability that a tenant leaves after exactly `n >= 1` steps, with a
/// per-step departure probability `p_eq / (2 search_scale)`.
pub fn tenure_probability(params: &ModelParams, n: u64) -> Result<f64, ConfigError> {
    let (p_eq, _) = equilibrium_rent(params)?;
    let leave = p_eq / (2.0 * params.search_scale);
    if n == 0 {
        return Ok(0.0);
    }
    Ok(leave * (1.0 - leave).powf((n - 1) as f64))
}

/// Closed-form mean of the tenure distribution, `2 search_scale / p_eq`.
pub fn mean_tenure(params: &ModelParams) -> Result<f64, ConfigError> {
    let (p_eq, _) = equilibrium_rent(params)?;
    Ok(2.0 * params.search_scale / p_eq)
}

/// Width of the Gaussian approximation to the stationary log-rent density.
pub fn sigma_x(params: &ModelParams) -> Result<f64, ConfigError> {
    let s = occupancy_spell_lengths(params)?;
    Ok(sigma_from(params, &s))
}

fn sigma_from(params: &ModelParams, s: &SpellLengths) -> f64 {
    let spread = s.n_o * params.raise_steps as f64 + s.n_v * params.lower_steps as f64;
    (params.lattice_resolution * spread / (2.0 * std::f64::consts::LN_10)).sqrt()
}

pub fn predict(params: &ModelParams) -> Result<AnalyticalPrediction, ConfigError> {
    let (p_eq, x_eq) = equilibrium_rent(params)?;
    let spells = occupancy_spell_lengths(params)?;
    let mut warnings = Vec::new();
    if p_eq > params.search_scale {
        warnings.push(ValidityWarning::AboveSearchScale);
    }
    if p_eq > params.lower_scale {
        warnings.push(ValidityWarning::AboveLowerScale);
    }
    if spells.pi_v >= 1.0 {
        warnings.push(ValidityWarning::FillProbabilitySaturated);
    }
    Ok(AnalyticalPrediction {
        p_eq,
        x_eq,
        n_o: spells.n_o,
        n_v: spells.n_v,
        pi_v: spells.pi_v,
        sigma_x: sigma_from(params, &spells),
        warnings,
    })
}

/// Jump rates and sizes of the mean-field walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkRates {
    pub up_rate: f64,
    pub up_jump: f64,
    pub down_jump: f64,
    /// `q_down(x) = down_coeff * 10^x`.
    down_coeff: f64,
}

impl WalkRates {
    pub fn new(params: &ModelParams) -> Result<Self, ConfigError> {
        let s = occupancy_spell_lengths(params)?;
        let a = params.lattice_resolution;
        Ok(WalkRates {
            up_rate: params.raise_prob * params.density / s.n_o,
            up_jump: s.n_o * params.raise_steps as f64 * a,
            down_jump: s.n_v * params.lower_steps as f64 * a,
            down_coeff: (1.0 - params.density) / (s.n_v * params.lower_scale),
        })
    }

    #[inline]
    pub fn down_rate(&self, x: f64) -> f64 {
        self.down_coeff * 10f64.powf(x)
    }

    /// Fokker-Planck drift.
    pub fn drift(&self, x: f64) -> f64 {
        self.up_jump * self.up_rate - self.down_jump * self.down_rate(x)
    }

    /// Fokker-Planck diffusion coefficient, the prefactor of the second
    /// derivative.
    pub fn diffusion(&self, x: f64) -> f64 {
        0.5 * (self.up_jump * self.up_jump * self.up_rate
            + self.down_jump * self.down_jump * self.down_rate(x))
    }
}

fn check_grid(grid: &[f64]) -> Result<(), AnalyticsError> {
    if grid.is_empty() {
        return Err(AnalyticsError::EmptyGrid);
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalyticsError::UnsortedGrid);
    }
    Ok(())
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn normalize(grid: &[f64], mut values: Vec<f64>) -> Vec<(f64, f64)> {
    let z = trapezoid(grid, &values);
    if z > 0.0 {
        values.iter_mut().for_each(|v| *v /= z);
    }
    grid.iter().copied().zip(values).collect()
}

/// Uniform grid of `points` values spanning `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * step).collect()
}

/// Normal density centred on `x_eq` with width `sigma_x`, renormalized on
/// the grid by the trapezoid rule.
pub fn stationary_gaussian(
    params: &ModelParams,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    check_grid(grid)?;
    let pred = predict(params)?;
    let s = pred.sigma_x;
    let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid
        .iter()
        .map(|&x| {
            let z = (x - pred.x_eq) / s;
            norm * (-0.5 * z * z).exp()
        })
        .collect();
    if grid.len() < 2 {
        return Ok(grid.iter().copied().zip(values).collect());
    }
    Ok(normalize(grid, values))
}

/// Zero-flux stationary solution of the Fokker-Planck equation,
/// `phi(x) ∝ exp(∫ v/D dx) / D(x)`, integrated with the trapezoid rule.
///
/// The `1/D` prefactor moves the mode below `x_eq` by about
/// `a * n_v * n_l / 2`; see [`stationary_leading_order`] for the form
/// without it.
pub fn stationary_zero_flux(
    params: &ModelParams,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    zero_flux(params, grid, true)
}

/// Leading-order zero-flux solution `phi(x) ∝ exp(∫ v/D dx)`, whose
/// exponent is stationary exactly where the drift vanishes.
pub fn stationary_leading_order(
    params: &ModelParams,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    zero_flux(params, grid, false)
}

fn zero_flux(
    params: &ModelParams,
    grid: &[f64],
    with_prefactor: bool,
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    check_grid(grid)?;
    let rates = WalkRates::new(params)?;
    let mut ratio = Vec::with_capacity(grid.len());
    let mut log_d = Vec::with_capacity(grid.len());
    for &x in grid {
        let d = rates.diffusion(x);
        if !(d > 0.0) {
            return Err(AnalyticsError::NonPositiveDiffusion { x, value: d });
        }
        ratio.push(rates.drift(x) / d);
        log_d.push(if with_prefactor { d.ln() } else { 0.0 });
    }
    let mut exponent = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    exponent.push(0.0 - log_d[0]);
    for i in 1..grid.len() {
        acc += 0.5 * (grid[i] - grid[i - 1]) * (ratio[i] + ratio[i - 1]);
        exponent.push(acc - log_d[i]);
    }
    let peak = exponent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = exponent.iter().map(|e| (e - peak).exp()).collect();
    Ok(normalize(grid, values))
}

/// Mean and standard deviation of a density tabulated on a grid.
pub fn grid_moments(density: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = density.iter().map(|p| p.0).collect();
    let w: Vec<f64> = density.iter().map(|p| p.1).collect();
    let z = trapezoid(&xs, &w);
    let xw: Vec<f64> = density.iter().map(|p| p.0 * p.1).collect();
    let mean = trapezoid(&xs, &xw) / z;
    let vw: Vec<f64> = density.iter().map(|p| (p.0 - mean).powi(2) * p.1).collect();
    (mean, (trapezoid(&xs, &vw) / z).sqrt())
}

/// How the walk's down-jump probability is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DownRate {
    /// `q_down(x)`, rising with rent.
    RentDependent,
    /// A fixed probability, independent of `x`.
    Constant(f64),
}

/// A single mean-field walker. Each step tests the up-jump and then the
/// down-jump as independent events; both rates use the position at the
/// start of the step. `x` is floored at 0.
#[derive(Debug, Clone)]
pub struct MeanFieldWalk {
    rates: WalkRates,
    down: DownRate,
    x: f64,
}

impl MeanFieldWalk {
    pub fn new(params: &ModelParams, down: DownRate, start: f64) -> Result<Self, AnalyticsError> {
        let rates = WalkRates::new(params)?;
        if rates.up_rate > 1.0 {
            return Err(AnalyticsError::RateOutOfRange {
                name: "q_up",
                value: rates.up_rate,
                x: start,
            });
        }
        Ok(MeanFieldWalk {
            rates,
            down,
            x: start,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn rates(&self) -> &WalkRates {
        &self.rates
    }

    pub fn step<R: RandomStream + ?Sized>(&mut self, rng: &mut R) -> Result<f64, AnalyticsError> {
        let q_down = match self.down {
            DownRate::RentDependent => self.rates.down_rate(self.x),
            DownRate::Constant(q) => q,
        };
        if q_down > 1.0 {
            return Err(AnalyticsError::RateOutOfRange {
                name: "q_down",
                value: q_down,
                x: self.x,
            });
        }
        let mut x = self.x;
        if rng.next_uniform() < self.rates.up_rate {
            x += self.rates.up_jump;
        }
        if rng.next_uniform() < q_down {
            x -= self.rates.down_jump;
        }
        self.x = x.max(0.0);
        Ok(self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub n_steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Histogram bin width in log10 units.
    pub bin_width: f64,
    pub batches: usize,
}

impl WalkConfig {
    pub fn new(n_steps: u64, burn_in: u64, seed: u64) -> Self {
        WalkConfig {
            n_steps,
            burn_in,
            seed,
            bin_width: 0.001,
            batches: 50,
        }
    }
}

/// Histogram of the walker's position plus summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkHistogram {
    pub bin_width: f64,
    /// `counts[k]` covers `[k * bin_width, (k + 1) * bin_width)`.
    pub counts: Vec<u64>,
    pub steps: u64,
    pub mean: f64,
    pub std: f64,
    /// Standard error of the mean from batch means.
    pub standard_error: f64,
}

impl WalkHistogram {
    /// Normalized density at bin centres, populated bins only.
    pub fn density(&self) -> Vec<(f64, f64)> {
        let total = self.steps as f64 * self.bin_width;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| ((k as f64 + 0.5) * self.bin_width, c as f64 / total))
            .collect()
    }
}

/// Runs the mean-field walk from `x_eq`, discards `burn_in` steps and
/// records the position after each of the following `n_steps` steps.
pub fn simulate_meanfield_walk(
    params: &ModelParams,
    config: &WalkConfig,
) -> Result<WalkHistogram, AnalyticsError> {
    if config.n_steps == 0 {
        return Err(ConfigError::field("n_steps", "must be at least 1").into());
    }
    if !(config.bin_width > 0.0) {
        return Err(ConfigError::field("bin_width", "must be positive").into());
    }
    let (_, x_eq) = equilibrium_rent(params)?;
    let mut walk = MeanFieldWalk::new(params, DownRate::RentDependent, x_eq)?;
    let mut rng = SimRng::for_dynamics(config.seed);
    for _ in 0..config.burn_in {
        walk.step(&mut rng)?;
    }
    let batches = config.batches.max(2).min(config.n_steps as usize);
    let batch_len = config.n_steps / batches as u64;
    let mut counts: Vec<u64> = Vec::new();
    let mut batch_means = Vec::with_capacity(batches);
    let (mut sum, mut sum_sq, mut batch_sum) = (0.0, 0.0, 0.0);
    for i in 0..config.n_steps {
        let x = walk.step(&mut rng)?;
        let k = (x / config.bin_width) as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
        sum += x;
        sum_sq += x * x;
        batch_sum += x;
        if batch_len > 0 && (i + 1) % batch_len == 0 && batch_means.len() < batches {
            batch_means.push(batch_sum / batch_len as f64);
            batch_sum = 0.0;
        }
    }
    let n = config.n_steps as f64;
    let mean = sum / n;
    let std = (sum_sq / n - mean * mean).max(0.0).sqrt();
    let b = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / b;
    let bvar = batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(WalkHistogram {
        bin_width: config.bin_width,
        counts,
        steps: config.n_steps,
        mean,
        std,
        standard_error: (bvar / b).sqrt(),
    })
}
