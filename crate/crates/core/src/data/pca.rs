use nalgebra::DMatrix;

use super::dataset::TabularDataset;
use crate::error::{Error, Result};

/// `(components, means, variances)`.
pub type Principal = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Principal axes of `data`, as `(components, means, variances)`. Components
/// are rows of length `d`, ordered by descending eigenvalue; each is signed so
/// its largest-magnitude loading is positive.
pub fn principal_components(
    data: &TabularDataset,
    p: usize,
) -> Result<Principal> {
    let n = data.len();
    let d = data.dim();
    if p == 0 || p > n.min(d) {
        return Err(Error::Range(format!("p={p} outside 1..={}", n.min(d))));
    }
    let means = data.means();
    let centered = DMatrix::from_fn(n, d, |i, j| data.features()[i][j] - means[j]);
    let denom = (n.max(2) - 1) as f64;
    let cov = (centered.transpose() * &centered) / denom;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(p);
    let mut variances = Vec::with_capacity(p);
    for &k in order.iter().take(p) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        variances.push(eig.eigenvalues[k].max(0.0));
    }
    Ok((components, means, variances))
}
