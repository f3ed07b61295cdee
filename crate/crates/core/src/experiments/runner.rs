use serde::Serialize;

use crate::error::{ConfigError, StatsError};
use crate::market::{init_state, run_sweeps, InitialDistribution};
use crate::params::ModelParams;
use crate::rng::SimRng;
use crate::stats::{
    detect_burn_in, occupation_trend, spearman, FitResult, FlatClass, LognormalFit, Moments,
    RentHistogram, TimePoint, TREND_MIN_RELATIVE_DENSITY,
};

use super::config::BurnIn;

/// Sweeps run before the first plateau check under automatic burn-in.
pub const AUTO_FIRST_CHECK: u64 = 4000;
/// Sweeps between later plateau checks.
pub const AUTO_CHECK_EVERY: u64 = 2000;

/// Settings for one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub params: ModelParams,
    pub init: InitialDistribution,
    pub seed: u64,
    pub burn_in: BurnIn,
    pub burn_in_cap: u64,
    pub measure_sweeps: u64,
    pub snapshot_every: u64,
}

/// Raw output of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    /// Sweeps discarded before measurement.
    pub burn_in_sweeps: u64,
    /// False when automatic burn-in hit its cap; nothing was measured.
    pub equilibrated: bool,
    /// Snapshots of the whole run, burn-in included, starting at sweep 0.
    pub timeseries: Vec<TimePoint>,
    pub histogram: RentHistogram,
}

pub fn run_replica(spec: &RunSpec) -> Result<RunOutcome, ConfigError> {
    let params = spec.params;
    let a = params.lattice_resolution;
    let every = spec.snapshot_every.max(1);
    let mut state = init_state(&params, &spec.init, spec.seed)?;
    let mut rng = SimRng::for_dynamics(spec.seed);
    let mut timeseries = vec![TimePoint::from_state(0, &state, a)];

    let burn_in_sweeps = match spec.burn_in {
        BurnIn::Sweeps(n) => {
            run_sweeps(&mut state, &params, n, &mut rng, |k, s| {
                if k % every == 0 {
                    timeseries.push(TimePoint::from_state(k, s, a));
                }
            });
            Some(n)
        }
        BurnIn::Auto => {
            // plateau detection reads x̄ once per sweep
            let mut series = vec![(0u64, timeseries[0].mean_x)];
            let mut done = None;
            let mut next_check = AUTO_FIRST_CHECK.min(spec.burn_in_cap);
            while done.is_none() {
                let ran = state.step_count() / params.num_flats as u64;
                run_sweeps(&mut state, &params, next_check - ran, &mut rng, |k, s| {
                    let point = TimePoint::from_state(k, s, a);
                    series.push((k, point.mean_x));
                    if k % every == 0 {
                        timeseries.push(point);
                    }
                });
                match detect_burn_in(&series) {
                    Ok(_) => done = Some(Some(next_check)),
                    Err(StatsError::EquilibriumNotReached { .. })
                    | Err(StatsError::SeriesTooShort { .. })
                        if next_check < spec.burn_in_cap =>
                    {
                        next_check = (next_check + AUTO_CHECK_EVERY).min(spec.burn_in_cap);
                    }
                    Err(_) => done = Some(None),
                }
            }
            done.flatten()
        }
    };

    let mut histogram = RentHistogram::new(a);
    let Some(burn_in_sweeps) = burn_in_sweeps else {
        return Ok(RunOutcome {
            seed: spec.seed,
            burn_in_sweeps: state.step_count() / params.num_flats as u64,
            equilibrated: false,
            timeseries,
            histogram,
        });
    };
    run_sweeps(
        &mut state,
        &params,
        spec.measure_sweeps,
        &mut rng,
        |k, s| {
            let since = k - burn_in_sweeps;
            if since % every == 0 {
                histogram.accumulate(s);
            }
            if k % every == 0 && timeseries.last().map(|t| t.sweep) != Some(k) {
                timeseries.push(TimePoint::from_state(k, s, a));
            }
        },
    );
    Ok(RunOutcome {
        seed: spec.seed,
        burn_in_sweeps,
        equilibrated: true,
        timeseries,
        histogram,
    })
}

/// Equilibrium statistics of one measured histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub burn_in_sweeps: u64,
    pub snapshots: u64,
    pub moments: Moments,
    pub gaussian_fit: Option<FitResult>,
    pub lognormal_fit: Option<LognormalFit>,
    pub mean_x_occupied: Option<f64>,
    pub mean_x_vacant: Option<f64>,
    pub mean_p: f64,
    /// Spearman correlation of occupation rate against log-rent, over bins
    /// holding at least 1% of the peak density.
    pub eta_spearman: Option<f64>,
    /// The same correlation over every bin with a nonzero count.
    pub eta_spearman_all_bins: Option<f64>,
}

impl RunSummary {
    pub fn from_histogram(
        seed: u64,
        burn_in_sweeps: u64,
        hist: &RentHistogram,
    ) -> Result<Self, StatsError> {
        let moments = hist.moments_log()?;
        let gaussian_fit = hist.fit_gaussian().ok();
        let eta = hist.occupation_rate();
        let eta_spearman_all_bins = if eta.len() >= 3 {
            let xs: Vec<f64> = eta.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = eta.iter().map(|p| p.1).collect();
            Some(spearman(&xs, &ys)).filter(|r| r.is_finite())
        } else {
            None
        };
        let all = hist.density_log(FlatClass::All)?;
        let mean_p = all.iter().map(|&(x, phi)| 10f64.powf(x) * phi).sum::<f64>()
            * hist.lattice_resolution();
        Ok(RunSummary {
            seed,
            burn_in_sweeps,
            snapshots: hist.samples(),
            moments,
            gaussian_fit,
            lognormal_fit: gaussian_fit.map(LognormalFit::from_log_fit),
            mean_x_occupied: hist
                .moments_log_of(FlatClass::Occupied)
                .ok()
                .map(|m| m.mean),
            mean_x_vacant: hist.moments_log_of(FlatClass::Vacant).ok().map(|m| m.mean),
            mean_p,
            eta_spearman: occupation_trend(hist, TREND_MIN_RELATIVE_DENSITY),
            eta_spearman_all_bins,
        })
    }
}

/// Mean and sample standard error across replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se }
    }
}

/// Averages time series of equal-length replicas point by point.
pub fn average_timeseries(runs: &[&[TimePoint]]) -> Vec<TimePoint> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    let n = runs.len() as f64;
    (0..len)
        .map(|i| {
            let pick = |f: fn(&TimePoint) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n;
            TimePoint {
                sweep: runs[0][i].sweep,
                mean_x: pick(|t| t.mean_x),
                mean_p: pick(|t| t.mean_p),
                sigma_x: pick(|t| t.sigma_x),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(burn_in: BurnIn) -> RunSpec {
        RunSpec {
            params: ModelParams {
                num_flats: 200,
                ..ModelParams::reference()
            },
            init: InitialDistribution::Dirac { value: 81.0 },
            seed: 3,
            burn_in,
            burn_in_cap: 5000,
            measure_sweeps: 20,
            snapshot_every: 2,
        }
    }

    #[test]
    fn fixed_burn_in_layout() {
        let out = run_replica(&spec(BurnIn::Sweeps(10))).unwrap();
        assert!(out.equilibrated);
        assert_eq!(out.burn_in_sweeps, 10);
        assert_eq!(out.histogram.samples(), 10);
        let sweeps: Vec<u64> = out.timeseries.iter().map(|t| t.sweep).collect();
        assert_eq!(sweeps, (0..=30).step_by(2).collect::<Vec<_>>());
        assert_eq!(out.histogram.total(FlatClass::Occupied), 10 * 140);
    }

    #[test]
    fn auto_burn_in_near_equilibrium() {
        let out = run_replica(&spec(BurnIn::Auto)).unwrap();
        assert!(out.equilibrated);
        assert_eq!(out.burn_in_sweeps, AUTO_FIRST_CHECK);
    }

    #[test]
    fn auto_burn_in_gives_up_at_cap() {
        // Starting far below equilibrium, 30 sweeps cannot settle.
        let s = RunSpec {
            burn_in_cap: 30,
            init: InitialDistribution::Dirac { value: 2.0 },
            params: ModelParams {
                num_flats: 200,
                raise_prob: 1.0,
                ..ModelParams::reference()
            },
            ..spec(BurnIn::Auto)
        };
        let out = run_replica(&s).unwrap();
        assert!(!out.equilibrated);
        assert_eq!(out.histogram.samples(), 0);
        assert_eq!(out.burn_in_sweeps, 30);
    }

    #[test]
    fn mean_se() {
        let m = MeanSe::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.se - 1.0).abs() < 1e-12);
        assert_eq!(MeanSe::of(&[5.0]).se, 0.0);
    }
}
