use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::CircuitLayout;
use crate::error::{Error, Result};
use crate::qsim::{self, dm_overlap, state_fidelity, DensityMatrix, NoiseSpec, StateVector};

/// Tolerance below zero accepted for the smallest eigenvalue of a training
/// Gram matrix.
pub const PSD_TOLERANCE: f64 = 1e-7;

/// Dense row-major kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    square_training: bool,
}

impl GramMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, square_training: bool) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged Gram rows".into()));
        }
        if square_training && r != c {
            return Err(Error::Dimension(format!("training Gram must be square, got {r}x{c}")));
        }
        Ok(Self {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
            square_training,
        })
    }

    pub fn from_flat(rows: usize, cols: usize, entries: Vec<f64>, square_training: bool) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for {rows}x{cols}",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            square_training: square_training && rows == cols,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
            square_training: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_square_training(&self) -> bool {
        self.square_training
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes the entries as little-endian `f64`s plus a JSON sidecar at
    /// `<path>.json`.
    pub fn save(&self, path: &Path, sidecar: &GramSidecar) -> Result<()> {
        let bytes: Vec<u8> = self.entries.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, GramSidecar)> {
        let sidecar: GramSidecar =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let bytes = std::fs::read(path)?;
        if bytes.len() != sidecar.n * sidecar.m * 8 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("{} bytes for {}x{} entries", bytes.len(), sidecar.n, sidecar.m),
            });
        }
        let entries = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let g = Self::from_flat(sidecar.n, sidecar.m, entries, sidecar.square_training)?;
        Ok((g, sidecar))
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Metadata stored next to a persisted Gram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSidecar {
    pub n: usize,
    pub m: usize,
    pub square_training: bool,
    pub layout_hash: String,
    pub theta_hash: String,
    pub noise: Option<NoiseSpec>,
}

impl GramSidecar {
    pub fn new(g: &GramMatrix, layout: &CircuitLayout, theta: &[f64], noise: Option<&NoiseSpec>) -> Self {
        Self {
            n: g.rows,
            m: g.cols,
            square_training: g.square_training,
            layout_hash: layout.hash(),
            theta_hash: theta_hash(theta),
            noise: noise.copied(),
        }
    }
}

pub fn theta_hash(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in theta {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// A data point's encoded state on either backend.
#[derive(Clone, Debug)]
pub enum EncodedState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl EncodedState {
    pub fn overlap(&self, other: &EncodedState) -> Result<f64> {
        match (self, other) {
            (EncodedState::Pure(a), EncodedState::Pure(b)) => state_fidelity(a, b),
            (EncodedState::Mixed(a), EncodedState::Mixed(b)) => dm_overlap(a, b),
            _ => Err(Error::Argument("cannot overlap pure and mixed states".into())),
        }
    }
}

/// Encodes one data point. `noise = None` uses the statevector backend.
pub fn encode_point(
    layout: &CircuitLayout,
    features: &[f64],
    theta: &[f64],
    noise: Option<&NoiseSpec>,
) -> Result<EncodedState> {
    match noise {
        None => qsim::run_layout(layout, features, theta).map(EncodedState::Pure),
        Some(spec) => qsim::run_layout_noisy(layout, features, theta, spec).map(EncodedState::Mixed),
    }
}

pub fn encode_rows(
    layout: &CircuitLayout,
    rows: &[Vec<f64>],
    theta: &[f64],
    noise: Option<&NoiseSpec>,
) -> Result<Vec<EncodedState>> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != layout.p() {
            return Err(Error::Dimension(format!(
                "row {i} has {} features, layout expects p={}",
                r.len(),
                layout.p()
            )));
        }
    }
    rows.par_iter()
        .map(|r| encode_point(layout, r, theta, noise))
        .collect()
}

/// Gram matrix of already-encoded states. With `right = None` the result is
/// the square training matrix; only the upper triangle is evaluated.
pub fn gram_from_states(left: &[EncodedState], right: Option<&[EncodedState]>) -> Result<GramMatrix> {
    match right {
        None => {
            let n = left.len();
            let upper: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| left[i].overlap(&left[j])).collect())
                .collect::<Result<_>>()?;
            let mut entries = vec![0.0; n * n];
            for (i, row) in upper.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let j = i + k;
                    entries[i * n + j] = v;
                    entries[j * n + i] = v;
                }
            }
            GramMatrix::from_flat(n, n, entries, true)
        }
        Some(right) => {
            let rows: Vec<Vec<f64>> = left
                .par_iter()
                .map(|a| right.iter().map(|b| a.overlap(b)).collect())
                .collect::<Result<_>>()?;
            let cols = right.len();
            GramMatrix::from_flat(left.len(), cols, rows.into_iter().flatten().collect(), false)
        }
    }
}

/// Quantum kernel `Q_ij = Tr(ρ(x_i) ρ(y_j))`; `y = None` gives the square
/// training matrix on `x`.
pub fn gram(
    layout: &CircuitLayout,
    theta: &[f64],
    x: &[Vec<f64>],
    y: Option<&[Vec<f64>]>,
    noise: Option<&NoiseSpec>,
) -> Result<GramMatrix> {
    let left = encode_rows(layout, x, theta, noise)?;
    match y {
        None => gram_from_states(&left, None),
        Some(y) => {
            let right = encode_rows(layout, y, theta, noise)?;
            gram_from_states(&left, Some(&right))
        }
    }
}

/// Gaussian kernel `exp(−γ‖x_i − y_j‖²)`.
pub fn rbf_gram(x: &[Vec<f64>], y: Option<&[Vec<f64>]>, gamma: f64) -> Result<GramMatrix> {
    if !(gamma > 0.0) {
        return Err(Error::Range(format!("gamma={gamma} must be > 0")));
    }
    let square = y.is_none();
    let y = y.unwrap_or(x);
    let d = x.first().map_or(0, Vec::len);
    if x.iter().chain(y).any(|r| r.len() != d) {
        return Err(Error::Dimension("rows of differing length".into()));
    }
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            y.iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect();
    GramMatrix::from_rows(rows, square)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_round_trip() {
        let g = GramMatrix::from_rows(vec![vec![1.0, 0.25], vec![0.25, 1.0]], true).unwrap();
        let sidecar = GramSidecar {
            n: 2,
            m: 2,
            square_training: true,
            layout_hash: "abc".into(),
            theta_hash: theta_hash(&[]),
            noise: Some(NoiseSpec { p1: 0.01, p2: 0.05 }),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        g.save(&path, &sidecar).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 32);
        let (back, meta) = GramMatrix::load(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(meta, sidecar);
    }

    #[test]
    fn rbf_examples() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let k = rbf_gram(&x, None, 0.5).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert!((k.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        let far = rbf_gram(&x, None, 1e4).unwrap();
        assert!(far.get(0, 1) < 1e-300);
        assert!(rbf_gram(&x, None, 0.0).is_err());
    }
}
