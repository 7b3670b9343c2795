//! In-place amplitude kernels over a flat buffer of `2^width` entries.
//!
//! Qubit 0 is the most significant bit of the index. The density-matrix
//! backend reuses these on its `2N`-qubit vectorization.

use num_complex::Complex64;

use super::gate::{self, Gate, Mat2};

#[inline]
fn bit(width: usize, q: usize) -> usize {
    1 << (width - 1 - q)
}

pub fn apply_1q(amps: &mut [Complex64], width: usize, q: usize, m: &Mat2) {
    let mask = bit(width, q);
    for i in 0..amps.len() {
        if i & mask != 0 {
            continue;
        }
        let j = i | mask;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a + m[0][1] * b;
        amps[j] = m[1][0] * a + m[1][1] * b;
    }
}

/// Applies `m` to `target` on the subspace where `control` is 1.
pub fn apply_controlled_1q(
    amps: &mut [Complex64],
    width: usize,
    control: usize,
    target: usize,
    m: &Mat2,
) {
    let cmask = bit(width, control);
    let tmask = bit(width, target);
    for i in 0..amps.len() {
        if i & cmask == 0 || i & tmask != 0 {
            continue;
        }
        let j = i | tmask;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a + m[0][1] * b;
        amps[j] = m[1][0] * a + m[1][1] * b;
    }
}

pub fn apply_swap(amps: &mut [Complex64], width: usize, a: usize, b: usize) {
    let ma = bit(width, a);
    let mb = bit(width, b);
    for i in 0..amps.len() {
        if i & ma != 0 && i & mb == 0 {
            amps.swap(i, (i & !ma) | mb);
        }
    }
}

/// Applies `gate` to qubits offset by `offset`, optionally with every matrix
/// entry conjugated (used for the column side of `ρ → UρU†`).
pub fn apply_gate_at(
    amps: &mut [Complex64],
    width: usize,
    offset: usize,
    g: &Gate,
    conjugate: bool,
) {
    let pick = |m: Mat2| if conjugate { gate::conj(&m) } else { m };
    match *g {
        Gate::H(q) => apply_1q(amps, width, q + offset, &pick(gate::hadamard())),
        Gate::Rx(q, t) => apply_1q(amps, width, q + offset, &pick(gate::rx(t))),
        Gate::Ry(q, t) => apply_1q(amps, width, q + offset, &pick(gate::ry(t))),
        Gate::Rz(q, t) => apply_1q(amps, width, q + offset, &pick(gate::rz(t))),
        Gate::Cnot { control, target } => apply_controlled_1q(
            amps,
            width,
            control + offset,
            target + offset,
            &gate::pauli_x(),
        ),
        Gate::Cz(a, b) => {
            apply_controlled_1q(amps, width, a + offset, b + offset, &gate::pauli_z())
        }
        Gate::Swap(a, b) => apply_swap(amps, width, a + offset, b + offset),
        Gate::Crz {
            control,
            target,
            angle,
        } => apply_controlled_1q(
            amps,
            width,
            control + offset,
            target + offset,
            &pick(gate::rz(angle)),
        ),
    }
}
