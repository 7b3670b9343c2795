use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gram::{GramMatrix, PSD_TOLERANCE};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// One-vs-rest kernel ridge classifier over a precomputed Gram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMachine {
    /// `alpha[c]` holds the dual coefficients for class `c`.
    pub alpha: Vec<Vec<f64>>,
    pub lambda: f64,
    pub n_train: usize,
    pub num_classes: usize,
    /// `‖(Q + λI)α_c − t_c‖` per class.
    pub residuals: Vec<f64>,
}

fn targets(labels: &[usize], class: usize) -> DVector<f64> {
    DVector::from_iterator(
        labels.len(),
        labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }),
    )
}

/// Solves `(Q + λI) α_c = t_c` for every class, with `t_c = ±1`.
pub fn fit(q: &GramMatrix, labels: &[usize], num_classes: usize, lambda: f64) -> Result<KernelMachine> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Range(format!("lambda={lambda} must be > 0")));
    }
    if num_classes < 2 {
        return Err(Error::Range(format!("classification needs R >= 2, got {num_classes}")));
    }
    let n = q.rows();
    if !q.is_square() || labels.len() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} Gram for {} labels",
            q.rows(),
            q.cols(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Range(format!("label {bad} not below {num_classes}")));
    }
    let asym = q.max_asymmetry();
    if asym > PSD_TOLERANCE {
        return Err(Error::Numeric(format!("Gram asymmetry {asym:.3e}")));
    }
    let min_eig = q.min_eigenvalue();
    if min_eig < -PSD_TOLERANCE {
        return Err(Error::Numeric(format!(
            "Gram not PSD: min eigenvalue {min_eig:.3e} (n={n})"
        )));
    }
    let m: DMatrix<f64> = q.to_matrix() + DMatrix::identity(n, n) * lambda;
    let chol = m.clone().cholesky();
    let lu = if chol.is_none() { Some(m.clone().lu()) } else { None };
    let mut alpha = Vec::with_capacity(num_classes);
    let mut residuals = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let t = targets(labels, c);
        let a = match (&chol, &lu) {
            (Some(ch), _) => ch.solve(&t),
            (None, Some(lu)) => lu
                .solve(&t)
                .ok_or_else(|| Error::Numeric(format!("singular system (n={n}, lambda={lambda})")))?,
            (None, None) => unreachable!(),
        };
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dual coefficients".into()));
        }
        residuals.push((&m * &a - &t).norm());
        alpha.push(a.iter().copied().collect());
    }
    Ok(KernelMachine {
        alpha,
        lambda,
        n_train: n,
        num_classes,
        residuals,
    })
}

impl KernelMachine {
    /// Per-class scores `Q_cross α_c` for a `m × n_train` cross Gram.
    pub fn scores(&self, cross: &GramMatrix) -> Result<Vec<Vec<f64>>> {
        if cross.cols() != self.n_train {
            return Err(Error::Dimension(format!(
                "cross Gram has {} columns, model trained on {}",
                cross.cols(),
                self.n_train
            )));
        }
        Ok((0..cross.rows())
            .map(|i| {
                let row = cross.row(i);
                self.alpha
                    .iter()
                    .map(|a| row.iter().zip(a).map(|(k, w)| k * w).sum())
                    .collect()
            })
            .collect())
    }

    /// Argmax over class scores; ties go to the lower class index.
    pub fn predict(&self, cross: &GramMatrix) -> Result<Vec<usize>> {
        Ok(self
            .scores(cross)?
            .iter()
            .map(|s| {
                let mut best = 0;
                for (c, &v) in s.iter().enumerate() {
                    if v > s[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_solve() {
        let q = GramMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]], true).unwrap();
        let m = fit(&q, &[0, 1], 2, 0.5).unwrap();
        // (Q + λI) = [[1.5, .5], [.5, 1.5]], t = (1, −1): α = t / (1.5 − .5).
        assert!((m.alpha[0][0] - 1.0).abs() < 1e-12);
        assert!((m.alpha[0][1] + 1.0).abs() < 1e-12);
        assert!((m.alpha[1][0] + 1.0).abs() < 1e-12);
        assert!(m.residuals.iter().all(|&r| r < 1e-12));
        assert_eq!(m.predict(&q).unwrap(), vec![0, 1]);
    }

    #[test]
    fn tie_goes_low() {
        let q = GramMatrix::identity(2);
        let m = fit(&q, &[0, 1], 2, 1.0).unwrap();
        let zero = GramMatrix::from_rows(vec![vec![0.0, 0.0]], false).unwrap();
        assert_eq!(m.predict(&zero).unwrap(), vec![0]);
    }

    #[test]
    fn rejects_indefinite() {
        let q = GramMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]], true).unwrap();
        assert!(matches!(fit(&q, &[0, 1], 2, 1e-3), Err(Error::Numeric(_))));
        assert!(matches!(fit(&q, &[0, 1], 2, 0.0), Err(Error::Range(_))));
    }
}
