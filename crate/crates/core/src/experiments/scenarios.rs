use std::path::Path;

use serde::Serialize;

use crate::analytics::{predict, AnalyticalPrediction};
use crate::parallel::{map_jobs, Execution};
use crate::params::ModelParams;
use crate::stats::{
    histogram_rows, write_histogram_csv, write_timeseries_csv, FlatClass, RentHistogram, TimePoint,
};

use super::config::{ExperimentConfig, InitSpec, SweepAxis, SweepParameter};
use super::runner::{average_timeseries, run_replica, MeanSe, RunOutcome, RunSpec, RunSummary};
use super::tables::{write_predictions_csv, write_sweep_csv, PredictionRow, SweepRow};
use super::{
    to_json, write_file, ExperimentError, HISTOGRAM_FILE, PARTIAL_MARKER, PREDICTIONS_FILE,
    REPORT_FILE, SWEEP_FILE, TIMESERIES_FILE,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub prediction: AnalyticalPrediction,
    /// Statistics of the histogram pooled over replicas.
    pub pooled: RunSummary,
    pub replicas: Vec<RunSummary>,
    pub mean_x: MeanSe,
    pub sigma_x: MeanSe,
}

/// A finished scenario: the report plus the pooled data behind it.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub report: ScenarioReport,
    pub histogram: RentHistogram,
    pub timeseries: Vec<TimePoint>,
    pub outcomes: Vec<RunOutcome>,
}

fn run_spec(
    config: &ExperimentConfig,
    params: &ModelParams,
    replica: u32,
) -> Result<RunSpec, ExperimentError> {
    Ok(RunSpec {
        params: *params,
        init: config.init_dist.resolve(params)?,
        seed: config.replica_seed(replica),
        burn_in: config.burn_in_sweeps,
        burn_in_cap: config.burn_in_cap,
        measure_sweeps: config.measure_sweeps,
        snapshot_every: config.snapshot_every,
    })
}

/// Writes the data files of one group of replicas into `dir` and builds
/// its report. Replicas are pooled in index order.
fn collect(
    config: &ExperimentConfig,
    params: &ModelParams,
    outcomes: Vec<RunOutcome>,
    dir: &Path,
) -> Result<ScenarioResult, ExperimentError> {
    let series: Vec<&[TimePoint]> = outcomes.iter().map(|o| o.timeseries.as_slice()).collect();
    let timeseries = average_timeseries(&series);
    write_file(dir, TIMESERIES_FILE, &write_timeseries_csv(&timeseries))?;
    if outcomes.len() > 1 {
        for (k, o) in outcomes.iter().enumerate() {
            let sub = dir.join(format!("replica-{k}"));
            write_file(&sub, TIMESERIES_FILE, &write_timeseries_csv(&o.timeseries))?;
            if o.equilibrated {
                let rows = histogram_rows(&o.histogram)?;
                write_file(&sub, HISTOGRAM_FILE, &write_histogram_csv(&rows))?;
            }
        }
    }
    if let Some(stuck) = outcomes.iter().find(|o| !o.equilibrated) {
        write_file(
            dir,
            PARTIAL_MARKER,
            &format!(
                "seed {} did not equilibrate within {} sweeps\n",
                stuck.seed, stuck.burn_in_sweeps
            ),
        )?;
        return Err(ExperimentError::EquilibriumNotReached {
            sweeps: stuck.burn_in_sweeps,
            dir: dir.to_path_buf(),
        });
    }

    let mut pooled = RentHistogram::new(params.lattice_resolution);
    for o in &outcomes {
        pooled.merge(&o.histogram)?;
    }
    write_file(
        dir,
        HISTOGRAM_FILE,
        &write_histogram_csv(&histogram_rows(&pooled)?),
    )?;

    let replicas = outcomes
        .iter()
        .map(|o| RunSummary::from_histogram(o.seed, o.burn_in_sweeps, &o.histogram))
        .collect::<Result<Vec<_>, _>>()?;
    let pooled_summary =
        RunSummary::from_histogram(outcomes[0].seed, outcomes[0].burn_in_sweeps, &pooled)?;
    let prediction = predict(params)?;
    write_file(
        dir,
        PREDICTIONS_FILE,
        &write_predictions_csv(&[PredictionRow::new(params.density, &prediction)]),
    )?;
    let means: Vec<f64> = replicas.iter().map(|r| r.moments.mean).collect();
    let sigmas: Vec<f64> = replicas.iter().map(|r| r.moments.std).collect();
    let report = ScenarioReport {
        config: ExperimentConfig {
            params: *params,
            ..config.clone()
        },
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        prediction,
        pooled: pooled_summary,
        replicas,
        mean_x: MeanSe::of(&means),
        sigma_x: MeanSe::of(&sigmas),
    };
    write_file(dir, REPORT_FILE, &to_json(&report))?;
    Ok(ScenarioResult {
        report,
        histogram: pooled,
        timeseries,
        outcomes,
    })
}

pub fn run_scenario(config: &ExperimentConfig) -> Result<ScenarioResult, ExperimentError> {
    run_scenario_with(config, Execution::default())
}

/// Runs every replica of `config` and writes `timeseries.csv`,
/// `histogram.csv`, `predictions.csv` and `report.json` to its output
/// directory.
pub fn run_scenario_with(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<ScenarioResult, ExperimentError> {
    config.validate()?;
    let specs = (0..config.replicas)
        .map(|r| run_spec(config, &config.params, r))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = map_jobs(exec, &specs, run_replica)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    collect(config, &config.params, outcomes, &config.output_dir)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub params: ModelParams,
    pub result: ScenarioResult,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [SweepRow],
    points: Vec<&'a ScenarioReport>,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    run_sweep_with(config, Execution::default())
}

/// Runs every (value, replica) pair of the configured sweep. Each point's
/// files go to `point-<k>/`; `sweep.csv`, `predictions.csv` and
/// `report.json` go to the output directory. Rows are ordered by sweep
/// value as given, then replica index.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let axis = config
        .sweep
        .clone()
        .ok_or_else(|| crate::error::ConfigError::field("sweep", "no sweep axis configured"))?;
    let point_params: Vec<ModelParams> = axis
        .values
        .iter()
        .map(|&v| axis.apply(&config.params, v))
        .collect();
    let mut specs = Vec::new();
    for p in &point_params {
        for r in 0..config.replicas {
            specs.push(run_spec(config, p, r)?);
        }
    }
    let mut outcomes = map_jobs(exec, &specs, run_replica).into_iter();

    let mut points = Vec::new();
    let mut stuck = None;
    for (k, (&value, params)) in axis.values.iter().zip(&point_params).enumerate() {
        let group = outcomes
            .by_ref()
            .take(config.replicas as usize)
            .collect::<Result<Vec<_>, _>>()?;
        let dir = config.output_dir.join(format!("point-{k}"));
        match collect(config, params, group, &dir) {
            Ok(result) => points.push(SweepPoint {
                value,
                params: *params,
                result,
            }),
            Err(e @ ExperimentError::EquilibriumNotReached { .. }) => {
                stuck.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(ExperimentError::EquilibriumNotReached { sweeps, .. }) = stuck {
        write_file(
            &config.output_dir,
            PARTIAL_MARKER,
            "one or more sweep points did not equilibrate\n",
        )?;
        return Err(ExperimentError::EquilibriumNotReached {
            sweeps,
            dir: config.output_dir.clone(),
        });
    }

    let rows: Vec<SweepRow> = points
        .iter()
        .map(|pt| {
            let r = &pt.result.report;
            let p_values: Vec<f64> = r.replicas.iter().map(|s| s.mean_p).collect();
            SweepRow {
                parameter: axis.parameter.name().to_string(),
                value: pt.value,
                mean_x: r.mean_x.mean,
                mean_x_se: r.mean_x.se,
                sigma_x: r.sigma_x.mean,
                sigma_x_se: r.sigma_x.se,
                mean_p: MeanSe::of(&p_values).mean,
                x_eq: r.prediction.x_eq,
                sigma_analytic: r.prediction.sigma_x,
                p_eq: r.prediction.p_eq,
            }
            .rounded()
        })
        .collect();
    write_file(&config.output_dir, SWEEP_FILE, &write_sweep_csv(&rows))?;
    let predictions: Vec<PredictionRow> = points
        .iter()
        .map(|pt| PredictionRow::new(pt.params.density, &pt.result.report.prediction))
        .collect();
    write_file(
        &config.output_dir,
        PREDICTIONS_FILE,
        &write_predictions_csv(&predictions),
    )?;
    let report = SweepReport {
        config,
        rows: &rows,
        points: points.iter().map(|p| &p.result.report).collect(),
    };
    write_file(&config.output_dir, REPORT_FILE, &to_json(&report))?;
    Ok(SweepResult {
        parameter: axis.parameter,
        rows,
        points,
    })
}

fn with_axis(base: &ExperimentConfig, axis: SweepAxis) -> ExperimentConfig {
    ExperimentConfig {
        sweep: Some(axis),
        ..base.clone()
    }
}

pub fn scenario_density_sweep(
    base: &ExperimentConfig,
    rhos: &[f64],
    exec: Execution,
) -> Result<SweepResult, ExperimentError> {
    let axis = SweepAxis::new(SweepParameter::Density, rhos.to_vec());
    run_sweep_with(&with_axis(base, axis), exec)
}

pub fn scenario_ps_sweep(
    base: &ExperimentConfig,
    ps_values: &[f64],
    exec: Execution,
) -> Result<SweepResult, ExperimentError> {
    let axis = SweepAxis::new(SweepParameter::SearchScale, ps_values.to_vec());
    run_sweep_with(&with_axis(base, axis), exec)
}

/// Sweeps the lattice spacing with `raise_steps` and `lower_steps` held
/// fixed unless `rescale_steps` is set.
pub fn scenario_lattice_sweep(
    base: &ExperimentConfig,
    a_values: &[f64],
    rescale_steps: bool,
    exec: Execution,
) -> Result<SweepResult, ExperimentError> {
    let axis = SweepAxis {
        rescale_steps,
        ..SweepAxis::new(SweepParameter::LatticeResolution, a_values.to_vec())
    };
    run_sweep_with(&with_axis(base, axis), exec)
}

/// Largest absolute difference between two densities over the union of
/// their bins; a bin missing from one side counts as zero there.
pub fn sup_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let xa = a.get(i).map(|p| p.0).unwrap_or(f64::INFINITY);
        let xb = b.get(j).map(|p| p.0).unwrap_or(f64::INFINITY);
        let d = if (xa - xb).abs() < 1e-12 {
            let d = (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
            d
        } else if xa < xb {
            i += 1;
            a[i - 1].1
        } else {
            j += 1;
            b[j - 1].1
        };
        sup = sup.max(d);
    }
    sup
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub first: String,
    pub second: String,
    pub mean_x_difference: f64,
    /// Sup-norm distance between the two equilibrium densities of log-rent.
    pub phi_sup_distance: f64,
    /// `phi_sup_distance` over the larger of the two peak heights.
    pub relative_to_peak: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialConditionsReport {
    pub labels: Vec<String>,
    pub runs: Vec<ScenarioReport>,
    pub pairs: Vec<PairComparison>,
    pub max_mean_x_difference: f64,
    pub max_relative_sup_distance: f64,
}

/// Runs one scenario per initial distribution (into `init-<k>/`) with the
/// shared parameters of `base`, then compares the equilibria pairwise.
pub fn scenario_initial_conditions(
    base: &ExperimentConfig,
    inits: &[InitSpec],
    exec: Execution,
) -> Result<(InitialConditionsReport, Vec<ScenarioResult>), ExperimentError> {
    let configs: Vec<ExperimentConfig> = inits
        .iter()
        .enumerate()
        .map(|(k, init)| ExperimentConfig {
            init_dist: *init,
            output_dir: base.output_dir.join(format!("init-{k}")),
            ..base.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    // Replicas inside each scenario run sequentially; the scenarios
    // themselves are the parallel jobs.
    let results = map_jobs(exec, &configs, |c| {
        run_scenario_with(c, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let densities = results
        .iter()
        .map(|r| r.histogram.density_log(FlatClass::All))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = inits.iter().map(InitSpec::label).collect();
    let mut pairs = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let peak = densities[i]
                .iter()
                .chain(&densities[j])
                .map(|p| p.1)
                .fold(0.0, f64::max);
            let sup = sup_distance(&densities[i], &densities[j]);
            pairs.push(PairComparison {
                first: labels[i].clone(),
                second: labels[j].clone(),
                mean_x_difference: (results[i].report.pooled.moments.mean
                    - results[j].report.pooled.moments.mean)
                    .abs(),
                phi_sup_distance: sup,
                relative_to_peak: sup / peak,
            });
        }
    }
    let report = InitialConditionsReport {
        labels,
        runs: results.iter().map(|r| r.report.clone()).collect(),
        max_mean_x_difference: pairs
            .iter()
            .map(|p| p.mean_x_difference)
            .fold(0.0, f64::max),
        max_relative_sup_distance: pairs.iter().map(|p| p.relative_to_peak).fold(0.0, f64::max),
        pairs,
    };
    write_file(&base.output_dir, REPORT_FILE, &to_json(&report))?;
    Ok((report, results))
}
