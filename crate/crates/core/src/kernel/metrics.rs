use super::gram::GramMatrix;
use crate::error::{Error, Result};

/// Ideal-kernel entry: `1` for equal labels, `−1/(R−1)` otherwise.
pub fn ideal_entry(a: usize, b: usize, num_classes: usize) -> f64 {
    if a == b {
        1.0
    } else {
        -1.0 / (num_classes as f64 - 1.0)
    }
}

/// Kernel-target alignment `⟨Q, J⟩_F / (n ‖Q‖_F)`.
pub fn kta(q: &GramMatrix, labels: &[usize], num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::Argument(format!("alignment needs R >= 2, got {num_classes}")));
    }
    let n = q.rows();
    if !q.is_square() || labels.len() != n {
        return Err(Error::Dimension(format!(
            "{}x{} Gram for {} labels",
            q.rows(),
            q.cols(),
            labels.len()
        )));
    }
    let norm = q.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::DivisionByZero("Gram matrix has zero Frobenius norm".into()));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += q.get(i, j) * ideal_entry(labels[i], labels[j], num_classes);
        }
    }
    Ok((s / (n as f64 * norm)).clamp(-1.0, 1.0))
}

/// Population variance of the strictly off-diagonal entries.
pub fn kernel_variance(q: &GramMatrix) -> Result<f64> {
    if !q.is_square() || q.rows() < 2 {
        return Err(Error::Argument(format!(
            "variance needs a square Gram with n >= 2, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let n = q.rows();
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| q.get(i, j))
        .collect();
    let mean = off.iter().sum::<f64>() / off.len() as f64;
    Ok(off.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / off.len() as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!(
            "correlation of {} and {} values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}
