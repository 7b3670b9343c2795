use num_complex::Complex64;

use super::gate::Gate;
use super::kernels;
use crate::error::{Error, Result};

/// Default qubit cap for statevector simulation.
pub const MAX_STATE_QUBITS: usize = 20;

/// Pure state of `num_qubits` qubits; qubit 0 is the most significant bit of
/// the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Builds a state from raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        kernels::apply_gate_at(&mut self.amplitudes, self.num_qubits, 0, gate, false);
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Dimension(format!(
                "{} vs {} qubits",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

pub fn zero_state(num_qubits: usize) -> Result<StateVector> {
    zero_state_capped(num_qubits, MAX_STATE_QUBITS)
}

pub fn zero_state_capped(num_qubits: usize, cap: usize) -> Result<StateVector> {
    if num_qubits == 0 || num_qubits > cap {
        return Err(Error::Capacity(format!(
            "{num_qubits} qubits outside 1..={cap}"
        )));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        num_qubits,
        amplitudes,
    })
}

pub fn apply_gate(mut state: StateVector, gate: &Gate) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

/// `|⟨a|b⟩|²`, clamped into `[0, 1]` against roundoff.
pub fn state_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}
