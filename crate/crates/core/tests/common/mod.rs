#![allow(dead_code)]

pub mod dense;

use qkernel::circuit::{Axis, Binding, BlockSpec, CircuitLayout};
use qkernel::data::TabularDataset;
use qkernel::predictor::PredictorModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two Gaussian classes in `d` dimensions whose means differ on the first
/// `informative` features; features beyond those are pure noise.
pub fn blobs(n: usize, d: usize, informative: usize, separation: f64, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let row = (0..d)
            .map(|j| {
                let shift = if j < informative { separation * y as f64 } else { 0.0 };
                shift + gaussian(&mut rng)
            })
            .collect();
        features.push(row);
        labels.push(y);
    }
    TabularDataset::new(features, labels, Some(2)).unwrap()
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Angle-valued dataset with `n` rows in `[0, 2π)^p`.
pub fn angles(n: usize, p: usize, classes: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect())
        .collect();
    let labels = (0..n).map(|i| i % classes).collect();
    TabularDataset::new(features, labels, Some(classes)).unwrap()
}

/// Random layout on `n` qubits with `blocks` blocks whose rotations read
/// random features, parameters or constants.
pub fn random_layout<R: Rng>(rng: &mut R, n: usize, blocks: usize, p: usize, params: usize) -> CircuitLayout {
    let specs: Vec<BlockSpec> = (0..blocks)
        .map(|_| BlockSpec {
            even_axis: Axis::ALL[rng.gen_range(0..3)],
            odd_axis: Axis::ALL[rng.gen_range(0..3)],
            mask: (0..n - 1).map(|_| rng.gen_bool(0.5)).collect(),
        })
        .collect();
    let bindings: Vec<Binding> = (0..blocks * n)
        .map(|_| match rng.gen_range(0..4) {
            0 if params > 0 => Binding::Param(rng.gen_range(0..params)),
            0 | 1 => Binding::Const(rng.gen_range(0.0..6.0)),
            _ => Binding::Feature(rng.gen_range(0..p)),
        })
        .collect();
    CircuitLayout::new(n, 1, p, specs, false, &bindings).unwrap()
}

/// Largest relative deviation between backprop and central differences on a
/// random small model and batch.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(2..12);
    let hidden = rng.gen_range(2..9);
    let model = PredictorModel::with_dims(input, hidden, seed).unwrap();
    let batch: Vec<(Vec<f64>, f64)> = (0..rng.gen_range(1..6))
        .map(|_| {
            let x = (0..input).map(|_| f64::from(rng.gen_range(0u8..2))).collect();
            (x, rng.gen_range(-3.0..3.0))
        })
        .collect();
    let refs: Vec<(&[f64], f64)> = batch.iter().map(|(x, t)| (x.as_slice(), *t)).collect();
    let loss = |m: &PredictorModel| m.loss_and_gradient(&refs).unwrap().0;
    let (_, grad) = model.loss_and_gradient(&refs).unwrap();
    // The loss is piecewise quadratic in each parameter, so central
    // differences are exact away from kinks; a wide step limits roundoff.
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        let mut plus = model.clone();
        plus.params[i] += h;
        let mut minus = model.clone();
        minus.params[i] -= h;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let scale = g.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((g - fd).abs() / scale);
    }
    worst
}

/// Random `(layout, θ, dataset)` with at least one trainable parameter.
/// Even seeds give searched-style layouts, odd seeds trainable-module ones
/// (which carry controlled-Z rotations).
pub fn gradient_case(seed: u64) -> (CircuitLayout, Vec<f64>, TabularDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let p = rng.gen_range(1..=3);
    let layout = if seed.is_multiple_of(2) || n == 1 {
        let mut l = random_layout(&mut rng, n, 3, p, 2);
        let rot = l.rotation_indices().to_vec();
        l.set_binding(rot[rng.gen_range(0..rot.len())], Binding::Param(0)).unwrap();
        l.set_binding(rot[rng.gen_range(0..rot.len())], Binding::Param(1)).unwrap();
        l
    } else {
        qkernel::pipeline::tek_layout(n, 2, p).unwrap()
    };
    let theta = (0..layout.num_params()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let data = angles(rng.gen_range(4..=8), p, rng.gen_range(2..=3), seed);
    (layout, theta, data)
}

/// Largest absolute deviation between the parameter-shift gradient and
/// central differences of training KTA.
pub fn shift_gradient_error(seed: u64) -> f64 {
    let (layout, theta, data) = gradient_case(seed);
    let (_, grad) = qkernel::pipeline::kta_gradient(&layout, &theta, &data, None).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let fd = (qkernel::pipeline::kta_at(&layout, &plus, &data, None).unwrap()
            - qkernel::pipeline::kta_at(&layout, &minus, &data, None).unwrap())
            / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs());
    }
    worst
}
