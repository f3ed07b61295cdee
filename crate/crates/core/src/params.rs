use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Market constants. Rents are in arbitrary currency units; the rent
/// lattice is `log10(p) = n * lattice_resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub num_flats: usize,
    /// Fraction of flats holding a tenant.
    pub density: f64,
    /// Per-step probability that an occupied flat's rent is raised.
    pub raise_prob: f64,
    /// Rent above which a tenant always searches.
    pub search_scale: f64,
    /// Rent above which a landlord always lowers a vacant flat's rent.
    pub lower_scale: f64,
    pub lattice_resolution: f64,
    pub raise_steps: u32,
    pub lower_steps: u32,
}

impl ModelParams {
    /// Reference parameter set: 5000 flats at density 0.7.
    pub fn reference() -> Self {
        ModelParams {
            num_flats: 5000,
            density: 0.7,
            raise_prob: 0.03,
            search_scale: 2000.0,
            lower_scale: 2000.0,
            lattice_resolution: 0.001,
            raise_steps: 11,
            lower_steps: 19,
        }
    }

    pub fn with_density(self, density: f64) -> Self {
        ModelParams { density, ..self }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_flats < 2 {
            return Err(ConfigError::field("num_flats", "need at least 2 flats"));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(ConfigError::field(
                "density",
                format!("{} is outside (0, 1)", self.density),
            ));
        }
        if !(0.0..=1.0).contains(&self.raise_prob) {
            return Err(ConfigError::field(
                "raise_prob",
                format!("{} is outside [0, 1]", self.raise_prob),
            ));
        }
        for (field, value) in [
            ("search_scale", self.search_scale),
            ("lower_scale", self.lower_scale),
            ("lattice_resolution", self.lattice_resolution),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::field(
                    field,
                    format!("{value} must be positive"),
                ));
            }
        }
        if self.raise_steps == 0 {
            return Err(ConfigError::field("raise_steps", "must be at least 1"));
        }
        if self.lower_steps == 0 {
            return Err(ConfigError::field("lower_steps", "must be at least 1"));
        }
        let agents = self.num_agents();
        if agents == 0 || agents >= self.num_flats {
            return Err(ConfigError::field(
                "density",
                format!(
                    "{} agents for {} flats; need at least one agent and one vacant flat",
                    agents, self.num_flats
                ),
            ));
        }
        Ok(())
    }

    /// `round(density * num_flats)`, halves rounded up.
    pub fn num_agents(&self) -> usize {
        (self.density * self.num_flats as f64 + 0.5).floor() as usize
    }

    pub fn num_vacant(&self) -> usize {
        self.num_flats - self.num_agents()
    }

    pub fn raise_factor(&self) -> f64 {
        10f64.powf(self.raise_steps as f64 * self.lattice_resolution)
    }

    pub fn lower_factor(&self) -> f64 {
        10f64.powf(-(self.lower_steps as f64) * self.lattice_resolution)
    }

    /// Rent at lattice index `n`.
    #[inline]
    pub fn rent_at(&self, n: u32) -> f64 {
        10f64.powf(n as f64 * self.lattice_resolution)
    }

    /// Log-rent at lattice index `n`.
    #[inline]
    pub fn log_rent_at(&self, n: u32) -> f64 {
        n as f64 * self.lattice_resolution
    }

    /// Nearest lattice index for rent `p`, clamped at zero.
    pub fn index_for_rent(&self, p: f64) -> u32 {
        let n = (p.log10() / self.lattice_resolution).round();
        if n.is_nan() || n <= 0.0 {
            0
        } else {
            n as u32
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}
