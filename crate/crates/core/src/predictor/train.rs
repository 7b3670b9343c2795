use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::PredictorModel;
use crate::circuit::{encode_image, CircuitImage, CircuitLayout};
use crate::error::{Error, Result};

/// Factor applied to KTA values to form regression targets.
pub const TARGET_SCALE: f64 = 10.0;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorSample {
    pub hash: String,
    pub image: CircuitImage,
    /// `10 × KTA`.
    pub target: f64,
}

impl PredictorSample {
    pub fn from_kta(hash: String, image: CircuitImage, kta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&kta) {
            return Err(Error::Range(format!("KTA {kta} outside [-1, 1]")));
        }
        Ok(Self {
            hash,
            image,
            target: TARGET_SCALE * kta,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.01,
            batch_size: 32,
            seed: 0,
        }
    }
}

fn adam_step(model: &mut PredictorModel, grad: &[f64], lr: f64) {
    model.adam_step += 1;
    let t = model.adam_step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, &g) in grad.iter().enumerate() {
        model.adam_m[i] = ADAM_BETA1 * model.adam_m[i] + (1.0 - ADAM_BETA1) * g;
        model.adam_v[i] = ADAM_BETA2 * model.adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = model.adam_m[i] / c1;
        let v_hat = model.adam_v[i] / c2;
        model.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Mini-batch Adam on mean Smooth-L1. The per-epoch loss appended to the
/// curve is the sample-weighted mean of the batch losses seen during the
/// epoch (evaluated before each update).
pub fn train_predictor(
    mut model: PredictorModel,
    samples: &[PredictorSample],
    config: &TrainConfig,
) -> Result<PredictorModel> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.lr >= 0.0) {
        return Err(Error::Range(format!(
            "batch size {} / lr {} invalid",
            config.batch_size, config.lr
        )));
    }
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.image.to_input()).collect();
    if let Some(bad) = inputs.iter().find(|x| x.len() != model.input_dim) {
        return Err(Error::Dimension(format!(
            "image of {} pixels for model input_dim {}",
            bad.len(),
            model.input_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk
                .iter()
                .map(|&i| (inputs[i].as_slice(), samples[i].target))
                .collect();
            let (loss, grad) = model.loss_and_gradient(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            epoch_loss += loss * chunk.len() as f64;
            if config.lr > 0.0 {
                adam_step(&mut model, &grad, config.lr);
                if model.params.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Divergence { epoch: epoch + 1 });
                }
            }
        }
        let mean = epoch_loss / samples.len() as f64;
        log::debug!("predictor epoch {} loss {mean:.6}", epoch + 1);
        model.loss_curve.push(mean);
        model.epochs_trained += 1;
    }
    Ok(model)
}

/// Mean Smooth-L1 of the current model over `samples`.
pub fn evaluate_loss(model: &PredictorModel, samples: &[PredictorSample]) -> Result<f64> {
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.image.to_input()).collect();
    let batch: Vec<(&[f64], f64)> = inputs
        .iter()
        .zip(samples)
        .map(|(x, s)| (x.as_slice(), s.target))
        .collect();
    Ok(model.loss_and_gradient(&batch)?.0)
}

/// Predicted KTA per layout, in input order.
pub fn score_layouts(
    model: &PredictorModel,
    layouts: &[CircuitLayout],
    max_width: usize,
) -> Result<Vec<f64>> {
    layouts
        .par_iter()
        .map(|l| {
            let img = encode_image(l, max_width)?;
            Ok(model.forward(&img.to_input())? / TARGET_SCALE)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::init_model;

    fn sample(bits: &[u8], target: f64) -> PredictorSample {
        PredictorSample {
            hash: format!("{bits:?}"),
            image: CircuitImage::from_pixels(1, 2, bits.to_vec()).unwrap(),
            target,
        }
    }

    #[test]
    fn memorizes_one_sample() {
        let model = init_model(1, 3).unwrap();
        let s = [sample(&[1, 0, 0, 1, 1, 0, 1, 0, 0, 1], 4.2)];
        let cfg = TrainConfig {
            epochs: 300,
            ..TrainConfig::default()
        };
        let trained = train_predictor(model, &s, &cfg).unwrap();
        assert!(evaluate_loss(&trained, &s).unwrap() < 1e-3);
        assert_eq!(trained.loss_curve.len(), 300);
    }

    #[test]
    fn zero_lr_is_frozen() {
        let model = init_model(1, 3).unwrap();
        let s = [sample(&[1; 10], 1.0), sample(&[0; 10], -1.0)];
        let cfg = TrainConfig {
            epochs: 4,
            lr: 0.0,
            ..TrainConfig::default()
        };
        let trained = train_predictor(model.clone(), &s, &cfg).unwrap();
        assert_eq!(trained.params, model.params);
        assert!(trained.loss_curve.windows(2).all(|w| w[0] == w[1]));
    }
}
