//! Random streams consumed by the market and the mean-field walk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of the draws a simulation step consumes.
pub trait RandomStream {
    /// Uniform draw in `[0, 1)`.
    fn next_uniform(&mut self) -> f64;
    /// Uniform index in `0..len`; `len > 0`.
    fn next_index(&mut self, len: usize) -> usize;
}

/// The seeded generator used for every run. Initialization and dynamics
/// read from separate ChaCha streams of the same seed.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    const INIT_STREAM: u64 = 0;
    const DYNAMICS_STREAM: u64 = 1;

    pub fn for_init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(Self::INIT_STREAM);
        SimRng(rng)
    }

    pub fn for_dynamics(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(Self::DYNAMICS_STREAM);
        SimRng(rng)
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

impl RandomStream for SimRng {
    #[inline]
    fn next_uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    #[inline]
    fn next_index(&mut self, len: usize) -> usize {
        self.0.gen_range(0..len)
    }
}

/// A replayable stream of pre-chosen draws, for tracing single steps.
///
/// Panics when the script runs out, so a test fails loudly if a step
/// consumes more draws than expected.
#[derive(Debug, Clone, Default)]
pub struct ScriptedStream {
    uniforms: std::collections::VecDeque<f64>,
    indices: std::collections::VecDeque<usize>,
}

impl ScriptedStream {
    pub fn new(indices: &[usize], uniforms: &[f64]) -> Self {
        ScriptedStream {
            uniforms: uniforms.iter().copied().collect(),
            indices: indices.iter().copied().collect(),
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.uniforms.is_empty() && self.indices.is_empty()
    }
}

impl RandomStream for ScriptedStream {
    fn next_uniform(&mut self) -> f64 {
        self.uniforms
            .pop_front()
            .expect("scripted uniforms exhausted")
    }

    fn next_index(&mut self, len: usize) -> usize {
        let i = self
            .indices
            .pop_front()
            .expect("scripted indices exhausted");
        assert!(i < len, "scripted index {i} out of range 0..{len}");
        i
    }
}
