use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gradient::{kta_at, kta_gradient};
use crate::circuit::{
    assign_features, block_count, sample_layout, Axis, Binding, BlockSpec, CircuitLayout,
    EncodingStrategy,
};
use crate::data::{
    apply_selector, identity_selector, mrmr_select, pca_reduce, TabularDataset, DEFAULT_BINS,
};
use crate::error::{Error, Result};
use crate::kernel::{accuracy, fit, kernel_variance, kta, gram, rbf_gram};
use crate::qsim::NoiseSpec;

fn baseline_strategy(n: usize, p: usize) -> EncodingStrategy {
    if p >= n {
        EncodingStrategy::Sequential
    } else {
        EncodingStrategy::Modular
    }
}

fn chain_layout(n: usize, l0: usize, p: usize, trainable: bool) -> Result<CircuitLayout> {
    let blocks = vec![
        BlockSpec {
            even_axis: Axis::X,
            odd_axis: Axis::X,
            mask: vec![true; n.saturating_sub(1)],
        };
        block_count(n, l0, p)
    ];
    let mut bindings = Vec::new();
    let mut k = 0;
    for _ in 0..blocks.len() {
        bindings.extend(std::iter::repeat_n(Binding::Const(0.0), n));
        if trainable {
            let module = if n > 1 { 2 * n } else { n };
            bindings.extend((k..k + module).map(Binding::Param));
            k += module;
        }
    }
    let layout = CircuitLayout::new(n, l0, p, blocks, trainable, &bindings)?;
    // Sequential and modular bindings draw nothing from the generator.
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    assign_features(&layout, baseline_strategy(n, p), &mut no_rng)
}

/// RX rotations on every qubit, a full CNOT chain per block, sequential
/// feature encoding.
pub fn heak_layout(n: usize, l0: usize, p: usize) -> Result<CircuitLayout> {
    chain_layout(n, l0, p, false)
}

/// [`heak_layout`] with a trainable `RY` layer and `CRZ` ring after every
/// block; parameters are numbered in gate order.
pub fn tek_layout(n: usize, l0: usize, p: usize) -> Result<CircuitLayout> {
    chain_layout(n, l0, p, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TekOutcome {
    #[serde(skip)]
    pub layout: Option<CircuitLayout>,
    pub initial_gamma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub initial_kta: f64,
    pub kta: f64,
    pub kta_trace: Vec<f64>,
}

/// Gradient ascent on training KTA over the trainable-module angles, which
/// start uniform in `[0, 2π)`. The best iterate is returned.
#[allow(clippy::too_many_arguments)]
pub fn train_tek(
    data: &TabularDataset,
    n: usize,
    l0: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
    noise: Option<&NoiseSpec>,
) -> Result<TekOutcome> {
    let layout = tek_layout(n, l0, data.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma: Vec<f64> = (0..layout.num_params()).map(|_| rng.gen_range(0.0..TAU)).collect();
    let initial_gamma = gamma.clone();
    let mut trace = Vec::with_capacity(epochs + 1);
    let mut best = (f64::NEG_INFINITY, gamma.clone());
    for _ in 0..epochs {
        let (k, grad) = kta_gradient(&layout, &gamma, data, noise)?;
        trace.push(k);
        if k > best.0 {
            best = (k, gamma.clone());
        }
        for (g, d) in gamma.iter_mut().zip(&grad) {
            *g += lr * d;
        }
    }
    let k = kta_at(&layout, &gamma, data, noise)?;
    trace.push(k);
    if k > best.0 {
        best = (k, gamma.clone());
    }
    Ok(TekOutcome {
        layout: Some(layout),
        initial_gamma,
        gamma: best.1,
        initial_kta: trace[0],
        kta: best.0,
        kta_trace: trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfRow {
    pub grid_value: f64,
    pub gamma: f64,
    pub kta_train: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Population variance over every entry of the training matrix.
pub fn feature_variance(data: &TabularDataset) -> f64 {
    let all: Vec<f64> = data.features().iter().flatten().copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64
}

/// Gaussian-kernel baseline over `γ = g / (p · Var)` for each grid value `g`.
pub fn rbf_baseline(
    train: &TabularDataset,
    test: &TabularDataset,
    grid: &[f64],
    lambda: f64,
) -> Result<Vec<RbfRow>> {
    let var = feature_variance(train);
    if var == 0.0 {
        return Err(Error::DivisionByZero("training features have zero variance".into()));
    }
    let r = train.num_classes().max(test.num_classes());
    grid.iter()
        .map(|&g| {
            let gamma = g / (train.dim() as f64 * var);
            let q = rbf_gram(train.features(), None, gamma)?;
            let cross = rbf_gram(test.features(), Some(train.features()), gamma)?;
            let m = fit(&q, train.labels(), r, lambda)?;
            Ok(RbfRow {
                grid_value: g,
                gamma,
                kta_train: kta(&q, train.labels(), r)?,
                train_accuracy: accuracy(&m.predict(&q)?, train.labels())?,
                test_accuracy: accuracy(&m.predict(&cross)?, test.labels())?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Mrmr,
    Pca,
    None,
}

impl std::str::FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mrmr" => Ok(SelectorKind::Mrmr),
            "pca" => Ok(SelectorKind::Pca),
            "none" => Ok(SelectorKind::None),
            _ => Err(Error::Argument(format!("unknown selector `{s}`"))),
        }
    }
}

/// Reduces `data` to `p` features (identity when `p` equals the input
/// dimension) and maps them onto angles.
pub fn select_angles(data: &TabularDataset, p: usize, kind: SelectorKind, bins: usize) -> Result<TabularDataset> {
    if p == 0 || p > data.dim() {
        return Err(Error::Range(format!("p={p} must be in 1..={}", data.dim())));
    }
    let selector = match kind {
        _ if p == data.dim() && kind != SelectorKind::Pca => identity_selector(data)?,
        SelectorKind::Mrmr => mrmr_select(data, p, bins)?,
        SelectorKind::Pca => pca_reduce(data, p)?,
        SelectorKind::None => {
            return Err(Error::Argument(format!(
                "selector `none` needs p = d = {}",
                data.dim()
            )))
        }
    };
    apply_selector(&selector, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KvRow {
    pub l0: usize,
    pub p: usize,
    pub trials: usize,
    pub mean_kv: f64,
    pub std_kv: f64,
}

/// Mean off-diagonal kernel variance of random layouts for every `(l0, p)`
/// cell, over the whole dataset.
pub fn diagnose_kv(
    data: &TabularDataset,
    n: usize,
    l0s: &[usize],
    ps: &[usize],
    trials: usize,
    seed: u64,
    selector: SelectorKind,
) -> Result<Vec<KvRow>> {
    if trials == 0 {
        return Err(Error::Range("trials must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for &l0 in l0s {
        for &p in ps {
            let angles = select_angles(data, p, selector, DEFAULT_BINS)?;
            let strategy = crate::circuit::default_strategy(n, p);
            let mut rng = ChaCha8Rng::seed_from_u64(super::derive_seed(seed, "kv", l0 as u64, p as u64));
            let kvs: Vec<f64> = (0..trials)
                .map(|_| {
                    let layout = sample_layout(n, l0, p, strategy, &mut rng)?;
                    kernel_variance(&gram(&layout, &[], angles.features(), None, None)?)
                })
                .collect::<Result<_>>()?;
            let mean = kvs.iter().sum::<f64>() / trials as f64;
            let var = kvs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / trials as f64;
            rows.push(KvRow {
                l0,
                p,
                trials,
                mean_kv: mean,
                std_kv: var.sqrt(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tek_minus_module_is_heak() {
        let heak = heak_layout(3, 2, 5).unwrap();
        let tek = tek_layout(3, 2, 5).unwrap();
        assert_eq!(tek.num_params(), 4 * 6);
        let rotations: Vec<_> = tek.rotation_indices().iter().map(|&i| tek.gates()[i]).collect();
        let heak_rotations: Vec<_> = heak.rotation_indices().iter().map(|&i| heak.gates()[i]).collect();
        assert_eq!(rotations, heak_rotations);
        assert_eq!(heak.blocks(), tek.blocks());
        assert!(!heak.has_trainable_module());
    }
}
