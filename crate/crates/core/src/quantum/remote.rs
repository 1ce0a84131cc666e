use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_shots, Circuit, QuantumError, Result};

/// A circuit submission: serialized circuit text plus the requested shots.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub circuit: String,
    pub shots: u32,
}

impl Job {
    pub fn new(circuit: &Circuit, shots: u32) -> Result<Self> {
        if shots == 0 {
            return Err(QuantumError::ZeroShots);
        }
        Ok(Self {
            circuit: circuit.to_text(),
            shots,
        })
    }
}

/// Anything that accepts a circuit plus shot count and returns per-qubit `⟨Z⟩`.
///
/// A cloud device client would implement this; the crate ships only
/// [`LoopbackBackend`].
pub trait RemoteBackend {
    fn submit(&mut self, job: &Job) -> Result<Vec<f64>>;
}

/// Parses the submitted text and samples it on the local simulator.
#[derive(Debug, Clone)]
pub struct LoopbackBackend {
    rng: ChaCha8Rng,
    submitted: usize,
}

impl LoopbackBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            submitted: 0,
        }
    }

    pub fn submitted(&self) -> usize {
        self.submitted
    }
}

impl RemoteBackend for LoopbackBackend {
    fn submit(&mut self, job: &Job) -> Result<Vec<f64>> {
        let circuit = Circuit::from_text(&job.circuit)?;
        let state = circuit.simulate()?;
        self.submitted += 1;
        sample_shots(&state, job.shots, &mut self.rng)
    }
}
