use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gradient::{kta_at, kta_gradient};
use crate::circuit::{promote_gates, promotion_bounds, Binding, CircuitLayout};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::qsim::NoiseSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub num_theta_trials: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            num_theta_trials: 20,
            epochs: 30,
            lr: 0.2,
        }
    }
}

/// Promotion positions for one trial (rotation ordinals), shared by every
/// candidate fine-tuned in the same run.
pub type TrialPlan = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: usize,
    pub positions: Vec<usize>,
    pub theta_init: Vec<f64>,
    /// KTA before each update and after the last one (`epochs + 1` values).
    pub kta_trace: Vec<f64>,
    pub best_kta: f64,
    pub best_theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneOutcome {
    pub layout: CircuitLayout,
    pub theta: Vec<f64>,
    pub kta: f64,
    /// KTA of the unmodified layout (`Θ = ∅`).
    pub initial_kta: f64,
    /// Index of the winning trial; `None` when the unmodified layout won.
    pub best_trial: Option<usize>,
    pub trials: Vec<TrialTrace>,
}

/// Rotation ordinals of `layout` currently bound to a feature.
fn feature_ordinals(layout: &CircuitLayout) -> Vec<usize> {
    layout
        .rotation_indices()
        .iter()
        .enumerate()
        .filter(|(_, &g)| matches!(layout.gates()[g].binding(), Some(Binding::Feature(_))))
        .map(|(r, _)| r)
        .collect()
}

/// Draws `trials` plans against `reference`: `m` uniform in
/// `1 ..= L/l0 − 1`, then `m` distinct feature-bound rotations. Returns no
/// plans when the range of `m` is empty.
pub fn draw_trials<R: Rng + ?Sized>(
    reference: &CircuitLayout,
    trials: usize,
    rng: &mut R,
) -> Vec<TrialPlan> {
    let Some((lo, hi)) = promotion_bounds(reference) else {
        return Vec::new();
    };
    let pool = feature_ordinals(reference);
    let hi = hi.min(pool.len());
    if hi < lo {
        return Vec::new();
    }
    (0..trials)
        .map(|_| {
            let m = rng.gen_range(lo..=hi);
            index::sample(rng, pool.len(), m)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        })
        .collect()
}

fn run_trial(
    layout: &CircuitLayout,
    trial: usize,
    positions: &[usize],
    data: &TabularDataset,
    config: &FinetuneConfig,
    noise: Option<&NoiseSpec>,
) -> Result<(CircuitLayout, TrialTrace)> {
    let promo = promote_gates(layout, positions)?;
    let means = data.means();
    let mut theta = vec![0.0; promo.layout.num_params()];
    for (j, &f) in promo.replaced_features.iter().enumerate() {
        theta[promo.first_param + j] = means[f];
    }
    let theta_init = theta.clone();
    let mut trace = Vec::with_capacity(config.epochs + 1);
    let mut best = (f64::NEG_INFINITY, theta.clone());
    for _ in 0..config.epochs {
        let (k, grad) = kta_gradient(&promo.layout, &theta, data, noise)?;
        trace.push(k);
        if k > best.0 {
            best = (k, theta.clone());
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient in trial {trial}")));
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t += config.lr * g;
        }
    }
    let k = kta_at(&promo.layout, &theta, data, noise)?;
    trace.push(k);
    if k > best.0 {
        best = (k, theta.clone());
    }
    Ok((
        promo.layout,
        TrialTrace {
            trial,
            positions: positions.to_vec(),
            theta_init,
            kta_trace: trace,
            best_kta: best.0,
            best_theta: best.1,
        },
    ))
}

/// Promotes the planned gates, starts each parameter at the training mean
/// of the feature it replaced and runs gradient ascent on training KTA.
/// The best iterate over all trials wins; the unmodified layout is the
/// initial incumbent, so the result never scores below it.
pub fn finetune(
    layout: &CircuitLayout,
    plans: &[TrialPlan],
    data: &TabularDataset,
    config: &FinetuneConfig,
    noise: Option<&NoiseSpec>,
) -> Result<FinetuneOutcome> {
    let theta0 = vec![0.0; layout.num_params()];
    let initial_kta = kta_at(layout, &theta0, data, noise)?;
    let mut out = FinetuneOutcome {
        layout: layout.clone(),
        theta: theta0,
        kta: initial_kta,
        initial_kta,
        best_trial: None,
        trials: Vec::new(),
    };
    if plans.is_empty() {
        log::info!(
            "fine-tune skipped for {}: no promotable gates",
            &layout.hash()[..12]
        );
        return Ok(out);
    }
    let results: Vec<(CircuitLayout, TrialTrace)> = plans
        .par_iter()
        .enumerate()
        .map(|(t, plan)| run_trial(layout, t, plan, data, config, noise))
        .collect::<Result<_>>()?;
    for (promoted, trace) in results {
        if trace.best_kta > out.kta {
            out.kta = trace.best_kta;
            out.theta = trace.best_theta.clone();
            out.layout = promoted;
            out.best_trial = Some(trace.trial);
        }
        out.trials.push(trace);
    }
    Ok(out)
}
