use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 128;
/// Input features per rotation slot: 5 channels over a 2-column block of
/// height `N`, i.e. `10·N·B = 10·L`.
pub const INPUTS_PER_ROTATION: usize = 10;

/// Two-layer regressor `w₂ᵀ ReLU(W₁x + b₁) + b₂` with its Adam state.
///
/// All parameters live in one flat vector laid out as `W₁` (row-major,
/// `hidden × input`), `b₁`, `w₂`, `b₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: u64,
    pub seed: u64,
    pub epochs_trained: usize,
    pub loss_curve: Vec<f64>,
}

impl PredictorModel {
    pub fn with_dims(input_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Range("model dimensions must be positive".into()));
        }
        let count = hidden * input_dim + 2 * hidden + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        let first = hidden * input_dim + hidden;
        let params = (0..count)
            .map(|i| {
                let bound = if i < first { b1 } else { b2 };
                rng.gen_range(-bound..=bound)
            })
            .collect();
        Ok(Self {
            input_dim,
            hidden,
            params,
            adam_m: vec![0.0; count],
            adam_v: vec![0.0; count],
            adam_step: 0,
            seed,
            epochs_trained: 0,
            loss_curve: Vec::new(),
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.input_dim]
    }

    pub fn b1(&self) -> &[f64] {
        let s = self.hidden * self.input_dim;
        &self.params[s..s + self.hidden]
    }

    pub fn w2(&self) -> &[f64] {
        let s = self.hidden * self.input_dim + self.hidden;
        &self.params[s..s + self.hidden]
    }

    pub fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input of length {} for model with input_dim {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let w1 = self.w1();
        self.b1()
            .iter()
            .enumerate()
            .map(|(h, b)| {
                let row = &w1[h * self.input_dim..(h + 1) * self.input_dim];
                b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let z = self.hidden_pre(x);
        Ok(self.b2() + z.iter().zip(self.w2()).map(|(z, w)| z.max(0.0) * w).sum::<f64>())
    }

    /// Mean Smooth-L1 loss over `(x, target)` pairs and its gradient with
    /// respect to the flat parameter vector. Per-sample contributions are
    /// summed in input order.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], f64)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let (d, h) = (self.input_dim, self.hidden);
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let w2 = self.w2().to_vec();
        for &(x, target) in batch {
            self.check_input(x)?;
            let z = self.hidden_pre(x);
            let pred = self.b2() + z.iter().zip(&w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>();
            let e = pred - target;
            loss += smooth_l1(pred, target) * scale;
            let g = smooth_l1_grad(e) * scale;
            if g == 0.0 {
                continue;
            }
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += g;
            for k in 0..h {
                if z[k] <= 0.0 {
                    continue;
                }
                gw2[k] += g * z[k];
                let dz = g * w2[k];
                gb1[k] += dz;
                let row = &mut gw1[k * d..(k + 1) * d];
                for (gw, &v) in row.iter_mut().zip(x) {
                    if v != 0.0 {
                        *gw += dz * v;
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Model for layouts with at most `l_max` rotations:
/// `10·L·128 + 128 + 128 + 1 = 1280·L + 257` parameters.
pub fn init_model(l_max: usize, seed: u64) -> Result<PredictorModel> {
    if l_max == 0 {
        return Err(Error::Range("L_max must be >= 1".into()));
    }
    PredictorModel::with_dims(INPUTS_PER_ROTATION * l_max, HIDDEN_UNITS, seed)
}

pub fn smooth_l1(pred: f64, target: f64) -> f64 {
    let e = pred - target;
    if e.abs() < 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

fn smooth_l1_grad(e: f64) -> f64 {
    e.clamp(-1.0, 1.0)
}
