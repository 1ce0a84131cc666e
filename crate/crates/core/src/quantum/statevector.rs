use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::{Gate, Pauli, QuantumError, Result};

/// Dense `2^n` amplitude vector.
///
/// Amplitude index bit `q` holds qubit `q` (little-endian), so on two qubits
/// index `0b10` is the basis state with qubit 1 set and qubit 0 clear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;

impl Statevector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QuantumError::EmptyRegister);
        }
        if n_qubits > MAX_QUBITS {
            return Err(QuantumError::RegisterTooLarge(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the vector normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QuantumError::BadAmplitudeCount(len));
        }
        let n_qubits = len.trailing_zeros() as usize;
        let state = Self { n_qubits, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(QuantumError::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies `gate` in place after validating its targets and angle.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies the inverse of `gate` in place.
    pub fn apply_inverse(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(&gate.inverse());
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::H(q) => self.for_each_pair(q, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = (x + y) * FRAC_1_SQRT_2;
                *a1 = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::Ry(q, theta) => {
                let (s, c) = (0.5 * theta).sin_cos();
                self.for_each_pair(q, |a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = x * c - y * s;
                    *a1 = x * s + y * c;
                })
            }
            Gate::Rz(q, theta) => {
                let (s, c) = (0.5 * theta).sin_cos();
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.for_each_pair(q, |a0, a1| {
                    *a0 *= lo;
                    *a1 *= hi;
                })
            }
            Gate::Cz(a, b) => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
        }
    }

    pub(crate) fn apply_pauli(&mut self, q: usize, pauli: Pauli) {
        match pauli {
            Pauli::I => {}
            Pauli::X => self.for_each_pair(q, std::mem::swap),
            Pauli::Y => self.for_each_pair(q, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = Complex64::new(y.im, -y.re);
                *a1 = Complex64::new(-x.im, x.re);
            }),
            Pauli::Z => self.for_each_pair(q, |_, a1| *a1 = -*a1),
        }
    }

    #[inline]
    fn for_each_pair(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }

    /// `⟨bra| P_q |self⟩` for a single-qubit Pauli on qubit `q`.
    pub(crate) fn pauli_matrix_element(&self, bra: &Statevector, q: usize, pauli: Pauli) -> Complex64 {
        let stride = 1usize << q;
        let mut acc = Complex64::new(0.0, 0.0);
        let ket = self.amps.chunks_exact(stride << 1);
        let bra = bra.amps.chunks_exact(stride << 1);
        for (k, b) in ket.zip(bra) {
            let (k0, k1) = k.split_at(stride);
            let (b0, b1) = b.split_at(stride);
            for i in 0..stride {
                let (x, y) = (k0[i], k1[i]);
                let (p0, p1) = match pauli {
                    Pauli::I => (x, y),
                    Pauli::X => (y, x),
                    Pauli::Y => (Complex64::new(y.im, -y.re), Complex64::new(-x.im, x.re)),
                    Pauli::Z => (x, -y),
                };
                acc += b0[i].conj() * p0 + b1[i].conj() * p1;
            }
        }
        acc
    }

    /// Exact `⟨Z_q⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Exact `⟨Z_q⟩` for every qubit in one pass over the amplitudes.
    pub fn expectation_all_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out.iter_mut().enumerate() {
                if (i >> q) & 1 == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        out
    }

    /// Multiplies every amplitude by the diagonal observable `Σ_q w_q Z_q`.
    pub(crate) fn apply_weighted_z_sum(&mut self, weights: &[f64]) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            let d: f64 = weights
                .iter()
                .enumerate()
                .map(|(q, w)| if (i >> q) & 1 == 0 { *w } else { -*w })
                .sum();
            *a *= d;
        }
    }
}

/// Functional form of [`Statevector::apply`].
pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    let mut next = state.clone();
    next.apply(gate)?;
    Ok(next)
}
