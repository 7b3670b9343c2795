//! Exact statevector and density-matrix simulation.
//!
//! Qubit 0 is the most significant bit of every amplitude index. Global phase
//! is kept as-is; comparisons go through fidelities, which ignore it.

mod density;
pub mod gate;
mod kernels;
mod state;

pub use density::{dm_overlap, DensityMatrix, NoiseSpec, MAX_DENSITY_QUBITS};
pub use gate::Gate;
pub use state::{
    apply_gate, state_fidelity, zero_state, zero_state_capped, StateVector, MAX_STATE_QUBITS,
};

use crate::circuit::CircuitLayout;
use crate::error::Result;

/// Runs the encoding circuit on `|0…0⟩` with the given feature values and
/// trainable parameters.
pub fn run_layout(layout: &CircuitLayout, features: &[f64], theta: &[f64]) -> Result<StateVector> {
    let gates = layout.resolve(features, theta)?;
    run_gates(layout.num_qubits(), &gates)
}

pub fn run_gates(num_qubits: usize, gates: &[Gate]) -> Result<StateVector> {
    let mut state = zero_state(num_qubits)?;
    for g in gates {
        state.apply(g)?;
    }
    Ok(state)
}

/// Density-matrix run with a depolarizing channel after every gate on the
/// qubits it touches.
pub fn run_layout_noisy(
    layout: &CircuitLayout,
    features: &[f64],
    theta: &[f64],
    noise: &NoiseSpec,
) -> Result<DensityMatrix> {
    noise.validate()?;
    let gates = layout.resolve(features, theta)?;
    run_gates_noisy(layout.num_qubits(), &gates, noise)
}

pub fn run_gates_noisy(num_qubits: usize, gates: &[Gate], noise: &NoiseSpec) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero(num_qubits)?;
    for g in gates {
        rho.apply_noisy(g, noise)?;
    }
    Ok(rho)
}
