use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{Circuit, Pauli, QuantumError, Result, Statevector};

/// Shot count used when a noisy mode is requested without one.
pub const DEFAULT_NOISY_SHOTS: u32 = 1000;

/// How circuits are executed and read out.
///
/// `Noisy` inserts a depolarizing error after every gate on each of its target
/// qubits: with probability `depolarizing` a Pauli drawn uniformly from
/// `{I, X, Y, Z}` is applied (one trajectory per shot), and each measured bit
/// is then flipped independently with probability `readout_flip`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BackendMode {
    #[default]
    Exact,
    Shots {
        shots: u32,
        seed: u64,
    },
    Noisy {
        shots: u32,
        depolarizing: f64,
        readout_flip: f64,
        seed: u64,
    },
}

impl BackendMode {
    pub fn name(&self) -> &'static str {
        match self {
            BackendMode::Exact => "exact",
            BackendMode::Shots { .. } => "shots",
            BackendMode::Noisy { .. } => "noisy",
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, BackendMode::Exact)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BackendMode::Exact => Ok(()),
            BackendMode::Shots { shots, .. } => check_shots(shots),
            BackendMode::Noisy {
                shots,
                depolarizing,
                readout_flip,
                ..
            } => {
                check_shots(shots)?;
                check_prob("depolarizing", depolarizing)?;
                check_prob("readout_flip", readout_flip)
            }
        }
    }

    /// Same mode with its RNG seed replaced (no-op for `Exact`).
    pub fn reseeded(&self, new_seed: u64) -> BackendMode {
        let mut out = self.clone();
        match &mut out {
            BackendMode::Exact => {}
            BackendMode::Shots { seed, .. } | BackendMode::Noisy { seed, .. } => *seed = new_seed,
        }
        out
    }
}

fn check_shots(shots: u32) -> Result<()> {
    if shots == 0 {
        Err(QuantumError::ZeroShots)
    } else {
        Ok(())
    }
}

fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(QuantumError::InvalidProbability { name, value })
    }
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendMode::Exact => write!(f, "exact"),
            BackendMode::Shots { shots, seed } => write!(f, "shots:{shots}:{seed}"),
            BackendMode::Noisy {
                shots,
                depolarizing,
                readout_flip,
                seed,
            } => write!(f, "noisy:{shots}:{depolarizing}:{readout_flip}:{seed}"),
        }
    }
}

/// Parses `exact`, `shots:N[:SEED]` or `noisy:N:P:R[:SEED]` (seed defaults to 0).
impl FromStr for BackendMode {
    type Err = QuantumError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QuantumError::BadMode(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad());
        let int = |i: usize| -> Result<u64> {
            match parts.get(i) {
                None => Ok(0),
                Some(p) => p.parse::<u64>().map_err(|_| bad()),
            }
        };
        let mode = match parts[0] {
            "exact" if parts.len() == 1 => BackendMode::Exact,
            "shots" if (2..=3).contains(&parts.len()) => BackendMode::Shots {
                shots: parts[1].parse().map_err(|_| bad())?,
                seed: int(2)?,
            },
            "noisy" if (4..=5).contains(&parts.len()) => BackendMode::Noisy {
                shots: parts[1].parse().map_err(|_| bad())?,
                depolarizing: num(2)?,
                readout_flip: num(3)?,
                seed: int(4)?,
            },
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Result of running a circuit: per-qubit `⟨Z⟩` estimates, plus the final
/// state when the mode is exact.
#[derive(Debug, Clone)]
pub struct Execution {
    pub z: Vec<f64>,
    pub state: Option<Statevector>,
}

/// Circuit executor owning the RNG stream of its mode.
///
/// Each rollout worker should own its own `Backend`; there is no shared state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Backend {
    mode: BackendMode,
    rng: ChaCha8Rng,
}

impl Backend {
    pub fn new(mode: BackendMode) -> Result<Self> {
        mode.validate()?;
        let seed = match mode {
            BackendMode::Exact => 0,
            BackendMode::Shots { seed, .. } | BackendMode::Noisy { seed, .. } => seed,
        };
        Ok(Self {
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn exact() -> Self {
        Self::new(BackendMode::Exact).expect("exact mode is always valid")
    }

    pub fn mode(&self) -> &BackendMode {
        &self.mode
    }

    pub fn execute(&mut self, circuit: &Circuit) -> Result<Execution> {
        match self.mode {
            BackendMode::Exact => {
                let state = circuit.simulate()?;
                Ok(Execution {
                    z: state.expectation_all_z(),
                    state: Some(state),
                })
            }
            BackendMode::Shots { shots, .. } => {
                let state = circuit.simulate()?;
                let z = sample_shots(&state, shots, &mut self.rng)?;
                Ok(Execution { z, state: None })
            }
            BackendMode::Noisy {
                shots,
                depolarizing,
                readout_flip,
                ..
            } => {
                let z = run_noisy(circuit, shots, depolarizing, readout_flip, &mut self.rng)?;
                Ok(Execution { z, state: None })
            }
        }
    }

    /// Per-qubit `⟨Z⟩` estimates.
    pub fn expectations(&mut self, circuit: &Circuit) -> Result<Vec<f64>> {
        Ok(self.execute(circuit)?.z)
    }
}

/// Draws `n_shots` computational-basis outcomes from `state` and returns the
/// per-qubit mean of the ±1 eigenvalues.
pub fn sample_shots<R: Rng + ?Sized>(state: &Statevector, n_shots: u32, rng: &mut R) -> Result<Vec<f64>> {
    check_shots(n_shots)?;
    let counts = sample_one_counts(state, n_shots, rng);
    Ok(counts_to_z(&counts, n_shots))
}

/// Number of shots with each qubit measured as 1.
fn sample_one_counts<R: Rng + ?Sized>(state: &Statevector, n_shots: u32, rng: &mut R) -> Vec<u32> {
    let n = state.n_qubits();
    let mut cdf = Vec::with_capacity(1 << n);
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let mut ones = vec![0u32; n];
    for _ in 0..n_shots {
        let idx = sample_index(&cdf, rng);
        accumulate_bits(idx, &mut ones);
    }
    ones
}

fn sample_index<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn accumulate_bits(idx: usize, ones: &mut [u32]) {
    for (q, count) in ones.iter_mut().enumerate() {
        *count += ((idx >> q) & 1) as u32;
    }
}

fn counts_to_z(ones: &[u32], n_shots: u32) -> Vec<f64> {
    let n = f64::from(n_shots);
    ones.iter().map(|&k| 1.0 - 2.0 * f64::from(k) / n).collect()
}

/// Error sites are (gate index, qubit) pairs in circuit order.
fn error_sites(circuit: &Circuit) -> Vec<(usize, usize)> {
    let mut sites = Vec::new();
    for (k, op) in circuit.ops().iter().enumerate() {
        let (a, b) = op.gate.targets();
        sites.push((k, a));
        if let Some(b) = b {
            sites.push((k, b));
        }
    }
    sites
}

fn run_noisy<R: Rng + ?Sized>(
    circuit: &Circuit,
    shots: u32,
    depolarizing: f64,
    readout_flip: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_shots(shots)?;
    let clean = circuit.simulate()?;
    let sites = error_sites(circuit);
    let per_shot = sites.len() as u64;
    let total = per_shot * u64::from(shots);

    // Error events across the flattened (shot, site) sequence, found by
    // geometric gap sampling so the error-free bulk costs nothing.
    let mut events: Vec<(u32, usize, Pauli)> = Vec::new();
    if depolarizing > 0.0 && per_shot > 0 {
        let mut pos: u64 = 0;
        let gap = if depolarizing < 1.0 {
            Some(Geometric::new(depolarizing).expect("probability validated"))
        } else {
            None
        };
        loop {
            if let Some(g) = &gap {
                pos = pos.saturating_add(g.sample(rng));
            }
            if pos >= total {
                break;
            }
            let pauli = match rng.random_range(0..4u8) {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            };
            if pauli != Pauli::I {
                events.push(((pos / per_shot) as u32, (pos % per_shot) as usize, pauli));
            }
            pos += 1;
        }
    }

    let n = circuit.n_qubits();
    let mut ones = vec![0u32; n];
    let noisy_shots = {
        let mut ids: Vec<u32> = events.iter().map(|e| e.0).collect();
        ids.dedup();
        ids.len() as u32
    };
    let clean_shots = shots - noisy_shots;
    if clean_shots > 0 {
        let counts = sample_one_counts(&clean, clean_shots, rng);
        for (o, c) in ones.iter_mut().zip(counts) {
            *o += c;
        }
    }

    let mut i = 0;
    while i < events.len() {
        let shot = events[i].0;
        let mut j = i;
        while j < events.len() && events[j].0 == shot {
            j += 1;
        }
        let shot_events = &events[i..j];
        let mut state = Statevector::zero(n)?;
        let mut e = 0;
        for (k, op) in circuit.ops().iter().enumerate() {
            state.apply_unchecked(&op.gate);
            while e < shot_events.len() && sites[shot_events[e].1].0 == k {
                state.apply_pauli(sites[shot_events[e].1].1, shot_events[e].2);
                e += 1;
            }
        }
        let probs: Vec<f64> = state
            .probabilities()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        accumulate_bits(sample_index(&probs, rng), &mut ones);
        i = j;
    }

    if readout_flip > 0.0 {
        // Independent bit flips leave each qubit's marginal count binomial.
        for count in ones.iter_mut() {
            let k = u64::from(*count);
            let zeros = u64::from(shots) - k;
            let lost = Binomial::new(k, readout_flip).expect("valid").sample(rng);
            let gained = Binomial::new(zeros, readout_flip).expect("valid").sample(rng);
            *count = (k - lost + gained) as u32;
        }
    }
    Ok(counts_to_z(&ones, shots))
}
