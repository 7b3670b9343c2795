use std::f64::consts::{FRAC_PI_2, SQRT_2};

use rayon::prelude::*;

use crate::circuit::{CircuitLayout, GateSlot};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::kernel::{gram_from_states, ideal_entry, kta, EncodedState, GramMatrix};
use crate::qsim::{run_gates, run_gates_noisy, Gate, NoiseSpec};

/// `(shift, coefficient)` pairs with `∂f = Σ c·f(θ + s)`.
fn shift_rule(slot: &GateSlot) -> Vec<(f64, f64)> {
    match slot {
        // Generator spectrum {0, 0, ±1/2}: two frequencies need four terms.
        GateSlot::Crz { .. } => {
            let c1 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
            let c2 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
            let s3 = 3.0 * FRAC_PI_2;
            vec![(FRAC_PI_2, c1), (-FRAC_PI_2, -c1), (s3, -c2), (-s3, c2)]
        }
        _ => vec![(FRAC_PI_2, 0.5), (-FRAC_PI_2, -0.5)],
    }
}

fn simulate(n: usize, gates: &[Gate], noise: Option<&NoiseSpec>) -> Result<EncodedState> {
    match noise {
        None => run_gates(n, gates).map(EncodedState::Pure),
        Some(spec) => run_gates_noisy(n, gates, spec).map(EncodedState::Mixed),
    }
}

/// Encodes every row with gate `shift.0` moved by `shift.1`.
fn encode_shifted(
    layout: &CircuitLayout,
    rows: &[Vec<f64>],
    theta: &[f64],
    shift: Option<(usize, f64)>,
    noise: Option<&NoiseSpec>,
) -> Result<Vec<EncodedState>> {
    rows.par_iter()
        .map(|x| {
            let mut gates = layout.resolve(x, theta)?;
            if let Some((g, delta)) = shift {
                gates[g] = gates[g].shifted(delta);
            }
            simulate(layout.num_qubits(), &gates, noise)
        })
        .collect()
}

/// Training KTA at `theta` and its gradient `∂KTA/∂θ` by the parameter-shift
/// rule, applied per occurrence of every parameter in both the bra and ket
/// circuits and chained through the alignment normalisation.
pub fn kta_gradient(
    layout: &CircuitLayout,
    theta: &[f64],
    data: &TabularDataset,
    noise: Option<&NoiseSpec>,
) -> Result<(f64, Vec<f64>)> {
    let num_params = layout.num_params();
    if num_params == 0 {
        return Err(Error::Argument("layout has no trainable parameters".into()));
    }
    if theta.len() < num_params {
        return Err(Error::Dimension(format!(
            "{} parameter values for {num_params} slots",
            theta.len()
        )));
    }
    let rows = data.features();
    let labels = data.labels();
    let r = data.num_classes();
    let n = rows.len();
    let base = encode_shifted(layout, rows, theta, None, noise)?;
    let q = gram_from_states(&base, None)?;
    let value = kta(&q, labels, r)?;

    let norm = q.frobenius_norm();
    let s: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| q.get(i, j) * ideal_entry(labels[i], labels[j], r))
        .sum();

    let mut grad = Vec::with_capacity(num_params);
    for k in 0..num_params {
        // a[i][j]: derivative of Q_ij through the bra (row i) circuit only.
        let mut a = vec![0.0; n * n];
        for g in layout.param_occurrences(k) {
            for (delta, c) in shift_rule(&layout.gates()[g]) {
                let shifted = encode_shifted(layout, rows, theta, Some((g, delta)), noise)?;
                let cross = gram_from_states(&shifted, Some(&base))?;
                for (acc, v) in a.iter_mut().zip(cross.entries()) {
                    *acc += c * v;
                }
            }
        }
        let dq = GramMatrix::from_flat(
            n,
            n,
            (0..n * n).map(|idx| a[idx] + a[(idx % n) * n + idx / n]).collect(),
            true,
        )?;
        let mut ds = 0.0;
        let mut dnorm = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = dq.get(i, j);
                ds += d * ideal_entry(labels[i], labels[j], r);
                dnorm += q.get(i, j) * d;
            }
        }
        dnorm /= norm;
        grad.push((ds * norm - s * dnorm) / (n as f64 * norm * norm));
    }
    Ok((value, grad))
}

/// Training KTA of `layout` at `theta`.
pub fn kta_at(
    layout: &CircuitLayout,
    theta: &[f64],
    data: &TabularDataset,
    noise: Option<&NoiseSpec>,
) -> Result<f64> {
    let states = encode_shifted(layout, data.features(), theta, None, noise)?;
    kta(&gram_from_states(&states, None)?, data.labels(), data.num_classes())
}
