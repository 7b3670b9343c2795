//! Max-relevance min-redundancy selection with the difference criterion and
//! an equal-frequency histogram estimate of mutual information.

use super::dataset::TabularDataset;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 8;

/// Equal-frequency bin of each value. Tied values share the bin of their
/// lowest rank, so a constant column lands entirely in bin 0.
pub fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let mut rank = 0;
    while rank < n {
        let v = values[order[rank]];
        let bin = (rank * bins / n).min(bins - 1);
        let mut k = rank;
        while k < n && values[order[k]] == v {
            out[order[k]] = bin;
            k += 1;
        }
        rank = k;
    }
    out
}

/// Plug-in mutual information (nats) of two discrete sequences.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; ka * kb];
    let mut ma = vec![0usize; ka];
    let mut mb = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        ma[x] += 1;
        mb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / nf;
            mi += pxy * (c as f64 * nf / (ma[x] as f64 * mb[y] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Greedy forward selection of `p` feature indices, in selection order.
/// Ties go to the lowest feature index.
pub fn mrmr_indices(data: &TabularDataset, p: usize, bins: usize) -> Result<Vec<usize>> {
    let d = data.dim();
    if p == 0 || p > d {
        return Err(Error::Range(format!("p={p} outside 1..={d}")));
    }
    if bins < 2 {
        return Err(Error::Argument(format!("bins={bins} must be >= 2")));
    }
    let columns: Vec<Vec<usize>> = (0..d).map(|j| discretize(&data.column(j), bins)).collect();
    let relevance: Vec<f64> = columns
        .iter()
        .map(|c| mutual_information(c, data.labels()))
        .collect();
    let mut redundancy_sum = vec![0.0; d];
    let mut chosen: Vec<usize> = Vec::with_capacity(p);
    let mut taken = vec![false; d];
    const TIE: f64 = 1e-12;
    while chosen.len() < p {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..d).filter(|&j| !taken[j]) {
            let score = if chosen.is_empty() {
                relevance[j]
            } else {
                relevance[j] - redundancy_sum[j] / chosen.len() as f64
            };
            if best.is_none_or(|(_, s)| score > s + TIE) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.expect("at least one candidate remains");
        taken[j] = true;
        chosen.push(j);
        for k in (0..d).filter(|&k| !taken[k]) {
            redundancy_sum[k] += mutual_information(&columns[k], &columns[j]);
        }
    }
    Ok(chosen)
}
