use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytics::equilibrium_rent;
use crate::error::ConfigError;
use crate::market::InitialDistribution;
use crate::params::ModelParams;

/// Initial rents: an explicit distribution, or every flat at the analytic
/// equilibrium rent of the run's own parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Gaussian { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Dirac { value: f64 },
    Equilibrium,
}

impl InitSpec {
    pub fn resolve(&self, params: &ModelParams) -> Result<InitialDistribution, ConfigError> {
        let dist = match *self {
            InitSpec::Gaussian { mean, sd } => InitialDistribution::Gaussian { mean, sd },
            InitSpec::Uniform { low, high } => InitialDistribution::Uniform { low, high },
            InitSpec::Dirac { value } => InitialDistribution::Dirac { value },
            InitSpec::Equilibrium => InitialDistribution::Dirac {
                value: equilibrium_rent(params)?.0,
            },
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn label(&self) -> String {
        match *self {
            InitSpec::Gaussian { mean, sd } => format!("gaussian({mean},{sd})"),
            InitSpec::Uniform { low, high } => format!("uniform({low},{high})"),
            InitSpec::Dirac { value } => format!("dirac({value})"),
            InitSpec::Equilibrium => "equilibrium".into(),
        }
    }
}

impl From<InitialDistribution> for InitSpec {
    fn from(d: InitialDistribution) -> Self {
        match d {
            InitialDistribution::Gaussian { mean, sd } => InitSpec::Gaussian { mean, sd },
            InitialDistribution::Uniform { low, high } => InitSpec::Uniform { low, high },
            InitialDistribution::Dirac { value } => InitSpec::Dirac { value },
        }
    }
}

/// Burn-in length in sweeps, or `"auto"` to stop at the detected plateau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnIn {
    Auto,
    Sweeps(u64),
}

impl Serialize for BurnIn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BurnIn::Auto => s.serialize_str("auto"),
            BurnIn::Sweeps(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for BurnIn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(BurnIn::Sweeps(n)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for BurnIn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BurnIn::Auto);
        }
        s.parse()
            .map(BurnIn::Sweeps)
            .map_err(|_| format!("burn-in must be \"auto\" or a sweep count, got `{s}`"))
    }
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Density,
    SearchScale,
    LowerScale,
    RaiseProb,
    LatticeResolution,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Density => "density",
            SweepParameter::SearchScale => "search_scale",
            SweepParameter::LowerScale => "lower_scale",
            SweepParameter::RaiseProb => "raise_prob",
            SweepParameter::LatticeResolution => "lattice_resolution",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.replace('-', "_").as_str() {
            "density" | "rho" => Some(SweepParameter::Density),
            "search_scale" | "p_s" => Some(SweepParameter::SearchScale),
            "lower_scale" | "p_l" => Some(SweepParameter::LowerScale),
            "raise_prob" | "pi_r" => Some(SweepParameter::RaiseProb),
            "lattice_resolution" | "a" => Some(SweepParameter::LatticeResolution),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Lattice sweeps only: rescale `raise_steps` and `lower_steps` with `a`
    /// so the raise and cut factors stay roughly fixed.
    #[serde(default)]
    pub rescale_steps: bool,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Self {
        SweepAxis {
            parameter,
            values,
            rescale_steps: false,
        }
    }

    /// Parameters at one sweep value.
    pub fn apply(&self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self.parameter {
            SweepParameter::Density => p.density = value,
            SweepParameter::SearchScale => p.search_scale = value,
            SweepParameter::LowerScale => p.lower_scale = value,
            SweepParameter::RaiseProb => p.raise_prob = value,
            SweepParameter::LatticeResolution => {
                if self.rescale_steps {
                    let scale = base.lattice_resolution / value;
                    p.raise_steps = ((base.raise_steps as f64 * scale).round() as u32).max(1);
                    p.lower_steps = ((base.lower_steps as f64 * scale).round() as u32).max(1);
                }
                p.lattice_resolution = value;
            }
        }
        p
    }
}

/// Everything one experiment needs. Serialized as a flat JSON document:
/// the model parameters sit at the top level beside the run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub init_dist: InitSpec,
    pub seed: u64,
    pub burn_in_sweeps: BurnIn,
    pub measure_sweeps: u64,
    /// Histogram snapshot cadence during measurement, in sweeps.
    pub snapshot_every: u64,
    /// Upper bound on sweeps spent in automatic burn-in.
    pub burn_in_cap: u64,
    pub sweep: Option<SweepAxis>,
    pub replicas: u32,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: ModelParams::reference(),
            init_dist: InitSpec::Gaussian {
                mean: 90.0,
                sd: 5.0,
            },
            seed: 1,
            burn_in_sweeps: BurnIn::Auto,
            measure_sweeps: 10_000,
            snapshot_every: 1,
            burn_in_cap: 10_000,
            sweep: None,
            replicas: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.init_dist.resolve(&self.params)?;
        if self.measure_sweeps == 0 {
            return Err(ConfigError::field("measure_sweeps", "must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(ConfigError::field("snapshot_every", "must be at least 1"));
        }
        if self.replicas == 0 {
            return Err(ConfigError::field("replicas", "must be at least 1"));
        }
        if self.burn_in_sweeps == BurnIn::Auto && self.burn_in_cap == 0 {
            return Err(ConfigError::field("burn_in_cap", "must be at least 1"));
        }
        if let Some(axis) = &self.sweep {
            if axis.values.is_empty() {
                return Err(ConfigError::field("sweep", "no values given"));
            }
            for &v in &axis.values {
                let p = axis.apply(&self.params, v);
                p.validate().map_err(|e| {
                    ConfigError::field("sweep", format!("{} = {v}: {e}", axis.parameter.name()))
                })?;
                self.init_dist.resolve(&p)?;
            }
        }
        Ok(())
    }

    pub fn replica_seed(&self, replica: u32) -> u64 {
        self.seed.wrapping_add(replica as u64)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::field("config", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_flat_and_round_trips() {
        let mut c = ExperimentConfig::default();
        c.sweep = Some(SweepAxis::new(SweepParameter::Density, vec![0.3, 0.5]));
        c.burn_in_sweeps = BurnIn::Sweeps(500);
        let text = serde_json::to_string(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["density"], 0.7);
        assert_eq!(v["num_flats"], 5000);
        assert_eq!(v["burn_in_sweeps"], 500);
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn auto_burn_in_parses() {
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        assert_eq!(v["burn_in_sweeps"], "auto");
        v["burn_in_sweeps"] = "nonsense".into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn zero_measure_sweeps_is_config_error() {
        let c = ExperimentConfig {
            measure_sweeps: 0,
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::InvalidField {
                field: "measure_sweeps",
                ..
            })
        ));
    }

    #[test]
    fn sweep_values_are_validated() {
        let c = ExperimentConfig {
            sweep: Some(SweepAxis::new(SweepParameter::Density, vec![0.5, 1.5])),
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::InvalidField { field: "sweep", .. })
        ));
    }

    #[test]
    fn lattice_rescaling() {
        let base = ModelParams::reference();
        let mut axis = SweepAxis::new(SweepParameter::LatticeResolution, vec![]);
        let p = axis.apply(&base, 0.002);
        assert_eq!((p.raise_steps, p.lower_steps), (11, 19));
        axis.rescale_steps = true;
        let p = axis.apply(&base, 0.002);
        assert_eq!((p.raise_steps, p.lower_steps), (6, 10));
        assert_eq!(p.lattice_resolution, 0.002);
    }

    #[test]
    fn equilibrium_init_uses_point_params() {
        let p = ModelParams::reference().with_density(0.5);
        match InitSpec::Equilibrium.resolve(&p).unwrap() {
            InitialDistribution::Dirac { value } => {
                assert!((value - equilibrium_rent(&p).unwrap().0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }
}
