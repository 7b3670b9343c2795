use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::kernels;
use super::state::StateVector;
use crate::error::{Error, Result};

/// Density-matrix simulation is capped well below the statevector cap.
pub const MAX_DENSITY_QUBITS: usize = 8;

/// Per-gate depolarizing probabilities for one- and two-qubit gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p1: f64,
    pub p2: f64,
}

impl NoiseSpec {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let spec = Self { p1, p2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Range(format!("{name}={p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }
}

/// Mixed state stored row-major as a `2N`-qubit vectorization: entry
/// `(r, c)` lives at index `(r << N) | c`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::Capacity(format!(
                "{num_qubits} qubits outside 1..={MAX_DENSITY_QUBITS} for density matrices"
            )));
        }
        let dim = 1usize << num_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        entries[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            entries,
        })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.num_qubits();
        if n > MAX_DENSITY_QUBITS {
            return Err(Error::Capacity(format!(
                "{n} qubits above density cap {MAX_DENSITY_QUBITS}"
            )));
        }
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for a in amps {
            for b in amps {
                entries.push(a * b.conj());
            }
        }
        Ok(Self {
            num_qubits: n,
            entries,
        })
    }

    /// Maximally mixed state `I / 2^N`.
    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        let mut rho = Self::zero(num_qubits)?;
        let dim = rho.dim();
        rho.entries.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        for i in 0..dim {
            rho.entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(rho)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.dim() + c]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|ρ_rc − conj(ρ_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let m = nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
            let z = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
            nalgebra::Complex::new(z.re, z.im)
        });
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn apply_unitary(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let width = 2 * self.num_qubits;
        kernels::apply_gate_at(&mut self.entries, width, 0, gate, false);
        kernels::apply_gate_at(&mut self.entries, width, self.num_qubits, gate, true);
        Ok(())
    }

    /// `ρ → (1−p)ρ + p · I_T/2^k ⊗ Tr_T ρ` on the qubit set `T`.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Range(format!("depolarizing p={p} outside [0, 1]")));
        }
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(Error::QubitIndex {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        if p == 0.0 || qubits.is_empty() {
            return Ok(());
        }
        let n = self.num_qubits;
        let dim = self.dim();
        let masks: Vec<usize> = qubits.iter().map(|&q| 1 << (n - 1 - q)).collect();
        let tmask: usize = masks.iter().fold(0, |acc, m| acc | m);
        let patterns: Vec<usize> = (0..1usize << masks.len())
            .map(|bits| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| bits >> k & 1 == 1)
                    .fold(0, |acc, (_, m)| acc | m)
            })
            .collect();
        let weight = 1.0 / patterns.len() as f64;

        let old = self.entries.clone();
        for r0 in (0..dim).filter(|r| r & tmask == 0) {
            for c0 in (0..dim).filter(|c| c & tmask == 0) {
                let traced: Complex64 = patterns
                    .iter()
                    .map(|&t| old[(r0 | t) * dim + (c0 | t)])
                    .sum();
                for &t1 in &patterns {
                    for &t2 in &patterns {
                        let idx = (r0 | t1) * dim + (c0 | t2);
                        let mut v = old[idx] * (1.0 - p);
                        if t1 == t2 {
                            v += traced * (p * weight);
                        }
                        self.entries[idx] = v;
                    }
                }
            }
        }
        Ok(())
    }

    /// Unitary followed by the depolarizing channel on the touched qubits.
    pub fn apply_noisy(&mut self, gate: &Gate, noise: &NoiseSpec) -> Result<()> {
        self.apply_unitary(gate)?;
        let p = if gate.is_two_qubit() { noise.p2 } else { noise.p1 };
        self.depolarize(&gate.qubits(), p)
    }
}

/// `Tr(a·b)`; both arguments are assumed Hermitian.
pub fn dm_overlap(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::Dimension(format!(
            "{} vs {} qubits",
            a.num_qubits, b.num_qubits
        )));
    }
    // Tr(ab) = Σ a_rc b_cr = Σ a_rc conj(b_rc) for Hermitian b.
    let s: f64 = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| (x * y.conj()).re)
        .sum();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::zero_state;

    #[test]
    fn overlap_examples() {
        let z = DensityMatrix::zero(1).unwrap();
        assert!((dm_overlap(&z, &z).unwrap() - 1.0).abs() < 1e-15);
        let m1 = DensityMatrix::maximally_mixed(1).unwrap();
        assert!((dm_overlap(&m1, &m1).unwrap() - 0.5).abs() < 1e-15);
        let m2 = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((dm_overlap(&m2, &m2).unwrap() - 0.25).abs() < 1e-15);
        assert!(dm_overlap(&m1, &m2).is_err());
    }

    #[test]
    fn cap() {
        assert!(matches!(DensityMatrix::zero(9), Err(Error::Capacity(_))));
        assert!(DensityMatrix::from_pure(&zero_state(9).unwrap()).is_err());
    }

    #[test]
    fn full_depolarization_single_qubit() {
        let mut rho = DensityMatrix::zero(1).unwrap();
        rho.apply_noisy(&Gate::Rx(0, 0.7), &NoiseSpec::new(1.0, 0.0).unwrap())
            .unwrap();
        let want = DensityMatrix::maximally_mixed(1).unwrap();
        for (a, b) in rho.entries().iter().zip(want.entries()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn partial_depolarization_keeps_other_qubit() {
        // |10⟩ with qubit 1 fully depolarized → |1⟩⟨1| ⊗ I/2.
        let mut rho = DensityMatrix::zero(2).unwrap();
        rho.apply_unitary(&Gate::Rx(0, std::f64::consts::PI)).unwrap();
        rho.depolarize(&[1], 1.0).unwrap();
        assert!((rho.get(2, 2).re - 0.5).abs() < 1e-15);
        assert!((rho.get(3, 3).re - 0.5).abs() < 1e-15);
        assert!(rho.get(0, 0).norm() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::new(1.1, 0.0).is_err());
        assert!(NoiseSpec::new(0.0, -0.1).is_err());
        assert!(NoiseSpec::new(0.0, 0.0).unwrap().is_noiseless());
    }
}
