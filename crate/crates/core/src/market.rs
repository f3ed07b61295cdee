//! Market state and the per-step tenant/landlord dynamics.
//!
//! Each flat stores its rent as an integer index on the log10 lattice, so
//! raises and cuts are exact integer additions. Occupied and vacant flats are
//! tracked in two index lists with back-pointers, which gives O(1) uniform
//! sampling of a vacant candidate and O(1) moves.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::params::ModelParams;
use crate::rng::{RandomStream, SimRng};

/// Distribution of initial rents, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDistribution {
    Gaussian { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Dirac { value: f64 },
}

impl InitialDistribution {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::InitialDistribution(msg));
        match *self {
            InitialDistribution::Gaussian { mean, sd } => {
                if !(mean.is_finite() && mean > 0.0) {
                    return bad(format!("gaussian mean {mean} must be positive"));
                }
                if !(sd.is_finite() && sd >= 0.0) {
                    return bad(format!("gaussian sd {sd} must be non-negative"));
                }
            }
            InitialDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) {
                    return bad(format!("uniform bounds {low}..{high} must be finite"));
                }
                if high <= 0.0 {
                    return bad(format!("uniform high {high} must be positive"));
                }
                if low >= high {
                    return bad(format!("uniform low {low} must be below high {high}"));
                }
            }
            InitialDistribution::Dirac { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return bad(format!("dirac value {value} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Draws a positive rent; non-positive draws are rejected and redrawn.
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialDistribution::Gaussian { mean, sd } => {
                let normal = Normal::new(mean, sd).expect("validated");
                loop {
                    let p = normal.sample(rng);
                    if p > 0.0 {
                        return p;
                    }
                }
            }
            InitialDistribution::Uniform { low, high } => loop {
                let p = rng.gen_range(low..high);
                if p > 0.0 {
                    return p;
                }
            },
            InitialDistribution::Dirac { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flat {
    pub rent_index: u32,
    pub occupied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketState {
    flats: Vec<Flat>,
    occupied: Vec<usize>,
    vacant: Vec<usize>,
    /// Position of each flat inside `occupied` or `vacant`.
    slot: Vec<usize>,
    step_count: u64,
}

impl MarketState {
    /// Builds a state from explicit flats. Flat order fixes the order of
    /// the occupied and vacant lists.
    pub fn from_flats(flats: Vec<Flat>) -> Self {
        let mut occupied = Vec::new();
        let mut vacant = Vec::new();
        let mut slot = Vec::with_capacity(flats.len());
        for (i, f) in flats.iter().enumerate() {
            if f.occupied {
                slot.push(occupied.len());
                occupied.push(i);
            } else {
                slot.push(vacant.len());
                vacant.push(i);
            }
        }
        MarketState {
            flats,
            occupied,
            vacant,
            slot,
            step_count: 0,
        }
    }

    pub fn flats(&self) -> &[Flat] {
        &self.flats
    }

    pub fn occupied_indices(&self) -> &[usize] {
        &self.occupied
    }

    pub fn vacant_indices(&self) -> &[usize] {
        &self.vacant
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn num_flats(&self) -> usize {
        self.flats.len()
    }

    /// Mean log-rent over all flats.
    pub fn mean_log_rent(&self, params: &ModelParams) -> f64 {
        let sum: f64 = self.flats.iter().map(|f| f.rent_index as f64).sum();
        sum / self.flats.len() as f64 * params.lattice_resolution
    }

    /// Checks the bookkeeping invariants; used by tests and debug assertions.
    pub fn check_invariants(&self, num_agents: usize) -> Result<(), String> {
        if self.occupied.len() != num_agents {
            return Err(format!(
                "{} occupied flats, expected {}",
                self.occupied.len(),
                num_agents
            ));
        }
        if self.occupied.len() + self.vacant.len() != self.flats.len() {
            return Err("index lists do not cover all flats".into());
        }
        for (k, &i) in self.occupied.iter().enumerate() {
            if !self.flats[i].occupied || self.slot[i] != k {
                return Err(format!("flat {i} listed occupied but inconsistent"));
            }
        }
        for (k, &i) in self.vacant.iter().enumerate() {
            if self.flats[i].occupied || self.slot[i] != k {
                return Err(format!("flat {i} listed vacant but inconsistent"));
            }
        }
        Ok(())
    }

    fn relocate(&mut self, from: usize, to: usize) {
        let occ_slot = self.slot[from];
        let vac_slot = self.slot[to];
        self.occupied[occ_slot] = to;
        self.vacant[vac_slot] = from;
        self.slot[to] = occ_slot;
        self.slot[from] = vac_slot;
        self.flats[from].occupied = false;
        self.flats[to].occupied = true;
    }
}

/// Places tenants in the first `N_a` flats and draws every rent from `dist`.
pub fn init_state(
    params: &ModelParams,
    dist: &InitialDistribution,
    seed: u64,
) -> Result<MarketState, ConfigError> {
    params.validate()?;
    dist.validate()?;
    let mut rng = SimRng::for_init(seed);
    let agents = params.num_agents();
    let flats = (0..params.num_flats)
        .map(|i| Flat {
            rent_index: params.index_for_rent(dist.sample(rng.inner())),
            occupied: i < agents,
        })
        .collect();
    Ok(MarketState::from_flats(flats))
}

#[inline]
pub fn probability_search(p: f64, search_scale: f64) -> f64 {
    (p / search_scale).min(1.0)
}

#[inline]
pub fn probability_lower(p: f64, lower_scale: f64) -> f64 {
    (p / lower_scale).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    OccupiedNoChange,
    RentRaised,
    TenantMoved { to: usize },
    MoveRejected { candidate: usize },
    VacantNoChange,
    RentLowered,
}

/// Record of one elementary step. `raised` is set whenever the occupied
/// branch raised the rent, including steps that end in a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    pub flat_index: usize,
    pub branch: Branch,
    pub raised: bool,
    pub rent_before: u32,
    pub rent_after: u32,
}

/// One elementary step. Draws are consumed in the fixed order: flat choice,
/// raise (or lower) draw, search draw, candidate choice.
pub fn step<R: RandomStream + ?Sized>(
    state: &mut MarketState,
    params: &ModelParams,
    rng: &mut R,
) -> StepEvent {
    let i = rng.next_index(state.flats.len());
    let before = state.flats[i].rent_index;
    let event = if state.flats[i].occupied {
        let raised = rng.next_uniform() < params.raise_prob;
        if raised {
            state.flats[i].rent_index += params.raise_steps;
        }
        let rent = state.flats[i].rent_index;
        let search =
            rng.next_uniform() < probability_search(params.rent_at(rent), params.search_scale);
        let branch = if search {
            let j = state.vacant[rng.next_index(state.vacant.len())];
            // Index order equals rent order on the lattice; ties do not move.
            if state.flats[j].rent_index < rent {
                state.relocate(i, j);
                Branch::TenantMoved { to: j }
            } else {
                Branch::MoveRejected { candidate: j }
            }
        } else if raised {
            Branch::RentRaised
        } else {
            Branch::OccupiedNoChange
        };
        StepEvent {
            flat_index: i,
            branch,
            raised,
            rent_before: before,
            rent_after: rent,
        }
    } else {
        let lower =
            rng.next_uniform() < probability_lower(params.rent_at(before), params.lower_scale);
        let branch = if lower {
            state.flats[i].rent_index = before.saturating_sub(params.lower_steps);
            Branch::RentLowered
        } else {
            Branch::VacantNoChange
        };
        StepEvent {
            flat_index: i,
            branch,
            raised: false,
            rent_before: before,
            rent_after: state.flats[i].rent_index,
        }
    };
    state.step_count += 1;
    event
}

/// Callbacks fired while a run advances.
pub trait Observer {
    fn on_step(&mut self, _event: &StepEvent, _state: &MarketState) {}
    /// Fired each time the step counter reaches a multiple of `N_l`.
    fn on_sweep(&mut self, _sweep: u64, _state: &MarketState) {}
}

/// Applies `n_steps` steps, notifying every observer.
pub fn run<R: RandomStream + ?Sized>(
    state: &mut MarketState,
    params: &ModelParams,
    n_steps: u64,
    rng: &mut R,
    observers: &mut [&mut dyn Observer],
) {
    let n_flats = state.flats.len() as u64;
    for _ in 0..n_steps {
        let event = step(state, params, rng);
        for obs in observers.iter_mut() {
            obs.on_step(&event, state);
        }
        if state.step_count % n_flats == 0 {
            let sweep = state.step_count / n_flats;
            for obs in observers.iter_mut() {
                obs.on_sweep(sweep, state);
            }
        }
    }
}

/// Runs `n_sweeps` sweeps without per-step callbacks, calling `on_sweep`
/// after each one.
pub fn run_sweeps<R: RandomStream + ?Sized>(
    state: &mut MarketState,
    params: &ModelParams,
    n_sweeps: u64,
    rng: &mut R,
    mut on_sweep: impl FnMut(u64, &MarketState),
) {
    let n_flats = state.flats.len() as u64;
    for _ in 0..n_sweeps {
        let target = (state.step_count / n_flats + 1) * n_flats;
        while state.step_count < target {
            step(state, params, rng);
        }
        on_sweep(state.step_count / n_flats, state);
    }
}
