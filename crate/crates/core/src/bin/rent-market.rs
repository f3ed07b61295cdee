use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rent_market::analytics::{predict, simulate_meanfield_walk, WalkConfig};
use rent_market::experiments::{
    run_scenario_with, run_sweep_with, scenario_initial_conditions, write_predictions_csv, BurnIn,
    ExperimentConfig, ExperimentError, InitSpec, PredictionRow, SweepAxis, SweepParameter,
    PREDICTIONS_FILE, REPORT_FILE,
};
use rent_market::parallel::Execution;
use rent_market::ConfigError;

#[derive(Parser)]
#[command(
    name = "rent-market",
    version,
    about = "Rental housing market simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario to equilibrium and measure the rent distribution.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SimulateScenario::Single)]
        scenario: SimulateScenario,
    },
    /// Sweep one parameter and compare simulation with the closed forms.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scenario: Option<SweepScenario>,
        /// Parameter to sweep (density, search_scale, lower_scale, raise_prob, lattice_resolution).
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Lattice sweeps: rescale raise/lower steps to keep the factors fixed.
        #[arg(long)]
        rescale_steps: bool,
    },
    /// Print and write the analytic predictions; no simulation.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Comma-separated densities to tabulate.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
    },
    /// Run the mean-field random walk.
    Walk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 1_000_000)]
        walk_burn_in: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulateScenario {
    Single,
    InitialConditions,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepScenario {
    Density,
    SearchScale,
    Lattice,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_flats: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    raise_prob: Option<f64>,
    #[arg(long)]
    search_scale: Option<f64>,
    #[arg(long)]
    lower_scale: Option<f64>,
    #[arg(long)]
    lattice_resolution: Option<f64>,
    #[arg(long)]
    raise_steps: Option<u32>,
    #[arg(long)]
    lower_steps: Option<u32>,
    /// gaussian:MEAN,SD | uniform:LOW,HIGH | dirac:VALUE | equilibrium
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep count or "auto".
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    burn_in_cap: Option<u64>,
    #[arg(long)]
    measure_sweeps: Option<u64>,
    #[arg(long)]
    snapshot_every: Option<u64>,
    #[arg(long)]
    replicas: Option<u32>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run replicas and sweep points one after another.
    #[arg(long)]
    sequential: bool,
}

fn parse_init(s: &str) -> Result<InitSpec, ConfigError> {
    let bad = || ConfigError::field("init_dist", format!("cannot parse `{s}`"));
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if args.is_empty() {
        vec![]
    } else {
        args.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    match (kind, nums.as_slice()) {
        ("gaussian", [mean, sd]) => Ok(InitSpec::Gaussian {
            mean: *mean,
            sd: *sd,
        }),
        ("uniform", [low, high]) => Ok(InitSpec::Uniform {
            low: *low,
            high: *high,
        }),
        ("dirac", [value]) => Ok(InitSpec::Dirac { value: *value }),
        ("equilibrium", []) => Ok(InitSpec::Equilibrium),
        _ => Err(bad()),
    }
}

impl Common {
    /// Loads the config file (if any), then applies flag overrides.
    /// `default_init` replaces the init distribution when neither the file
    /// nor a flag names one.
    fn resolve(&self, default_init: Option<InitSpec>) -> Result<ExperimentConfig, ExperimentError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?;
                let c = ExperimentConfig::from_json(&text)?;
                let named = serde_json::from_str::<serde_json::Value>(&text)
                    .map(|v| v.get("init_dist").is_some())
                    .unwrap_or(false);
                if !named {
                    ExperimentConfig {
                        init_dist: default_init.unwrap_or(c.init_dist),
                        ..c
                    }
                } else {
                    c
                }
            }
            None => ExperimentConfig {
                init_dist: default_init.unwrap_or(ExperimentConfig::default().init_dist),
                ..ExperimentConfig::default()
            },
        };
        let p = &mut c.params;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            num_flats => p.num_flats,
            density => p.density,
            raise_prob => p.raise_prob,
            search_scale => p.search_scale,
            lower_scale => p.lower_scale,
            lattice_resolution => p.lattice_resolution,
            raise_steps => p.raise_steps,
            lower_steps => p.lower_steps,
            seed => c.seed,
            burn_in_cap => c.burn_in_cap,
            measure_sweeps => c.measure_sweeps,
            snapshot_every => c.snapshot_every,
            replicas => c.replicas,
        );
        if let Some(init) = &self.init {
            c.init_dist = parse_init(init)?;
        }
        if let Some(b) = &self.burn_in {
            c.burn_in_sweeps = b
                .parse::<BurnIn>()
                .map_err(|e| ConfigError::field("burn_in_sweeps", e))?;
        }
        if let Some(dir) = &self.output_dir {
            c.output_dir = dir.clone();
        }
        Ok(c)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Simulate { common, scenario } => {
            let config = common.resolve(None)?;
            match scenario {
                SimulateScenario::Single => {
                    let result = run_scenario_with(&config, common.execution())?;
                    let r = &result.report;
                    println!(
                        "mean x = {:.4} (analytic {:.4}), sigma_x = {:.4} (analytic {:.4}), KS = {}",
                        r.mean_x.mean,
                        r.prediction.x_eq,
                        r.sigma_x.mean,
                        r.prediction.sigma_x,
                        r.pooled
                            .gaussian_fit
                            .map(|f| format!("{:.4}", f.goodness))
                            .unwrap_or_else(|| "n/a".into())
                    );
                }
                SimulateScenario::InitialConditions => {
                    let inits = [
                        InitSpec::Gaussian {
                            mean: 90.0,
                            sd: 5.0,
                        },
                        InitSpec::Uniform {
                            low: 0.0,
                            high: 200.0,
                        },
                        InitSpec::Dirac { value: 100.0 },
                    ];
                    let (report, _) =
                        scenario_initial_conditions(&config, &inits, common.execution())?;
                    for p in &report.pairs {
                        println!(
                            "{} vs {}: |dx| = {:.5}, sup|dphi|/peak = {:.4}",
                            p.first, p.second, p.mean_x_difference, p.relative_to_peak
                        );
                    }
                }
            }
            println!("wrote {}", config.output_dir.display());
        }
        Command::Sweep {
            common,
            scenario,
            axis,
            values,
            rescale_steps,
        } => {
            let mut config = common.resolve(Some(InitSpec::Equilibrium))?;
            let (parameter, defaults) = match (scenario, axis.as_deref()) {
                (Some(SweepScenario::Density), _) => (
                    SweepParameter::Density,
                    (1..=9).map(|k| k as f64 / 10.0).collect(),
                ),
                (Some(SweepScenario::SearchScale), _) => {
                    (SweepParameter::SearchScale, vec![1000.0, 2000.0, 4000.0])
                }
                (Some(SweepScenario::Lattice), _) => (
                    SweepParameter::LatticeResolution,
                    vec![0.0005, 0.001, 0.002, 0.004],
                ),
                (None, Some(name)) => (
                    SweepParameter::parse(name).ok_or_else(|| {
                        ConfigError::field("sweep", format!("unknown axis `{name}`"))
                    })?,
                    vec![],
                ),
                (None, None) => match config.sweep.take() {
                    Some(a) => (a.parameter, a.values),
                    None => {
                        return Err(ConfigError::field("sweep", "give --scenario or --axis").into())
                    }
                },
            };
            config.sweep = Some(SweepAxis {
                parameter,
                values: values.unwrap_or(defaults),
                rescale_steps,
            });
            let result = run_sweep_with(&config, common.execution())?;
            println!(
                "{:<20} {:>9} {:>9} {:>9} {:>9}",
                "value", "mean_x", "x_eq", "sigma_x", "sigma_an"
            );
            for r in &result.rows {
                println!(
                    "{:<20} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                    r.value, r.mean_x, r.x_eq, r.sigma_x, r.sigma_analytic
                );
            }
            println!("wrote {}", config.output_dir.display());
        }
        Command::Predict { common, densities } => {
            let config = common.resolve(None)?;
            let rhos = densities.unwrap_or_else(|| vec![config.params.density]);
            let rows = rhos
                .iter()
                .map(|&rho| {
                    let p = config.params.with_density(rho);
                    predict(&p).map(|pred| PredictionRow::new(rho, &pred))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let csv = write_predictions_csv(&rows);
            print!("{csv}");
            write_out(&config.output_dir, PREDICTIONS_FILE, &csv)?;
        }
        Command::Walk {
            common,
            steps,
            walk_burn_in,
        } => {
            let config = common.resolve(None)?;
            let walk_config = WalkConfig {
                bin_width: config.params.lattice_resolution,
                ..WalkConfig::new(steps, walk_burn_in, config.seed)
            };
            let hist = simulate_meanfield_walk(&config.params, &walk_config)?;
            let pred = predict(&config.params)?;
            let mut csv = String::from("x,phi\n");
            for (x, phi) in hist.density() {
                csv.push_str(&format!("{x:.6},{phi:.8e}\n"));
            }
            write_out(&config.output_dir, "walk.csv", &csv)?;
            let report = serde_json::json!({
                "params": config.params,
                "seed": config.seed,
                "steps": steps,
                "burn_in": walk_burn_in,
                "mean": hist.mean,
                "std": hist.std,
                "standard_error": hist.standard_error,
                "x_eq": pred.x_eq,
                "sigma_x": pred.sigma_x,
            });
            write_out(
                &config.output_dir,
                REPORT_FILE,
                &(serde_json::to_string_pretty(&report).unwrap() + "\n"),
            )?;
            println!(
                "walk mean {:.5} ± {:.5}, std {:.5}; analytic x_eq {:.5}, sigma {:.5}",
                hist.mean, hist.standard_error, hist.std, pred.x_eq, pred.sigma_x
            );
        }
    }
    Ok(())
}

fn write_out(dir: &std::path::Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), contents))
        .map_err(|source| ExperimentError::Io {
            path: dir.join(name),
            source,
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
