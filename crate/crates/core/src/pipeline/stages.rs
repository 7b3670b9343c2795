use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{encode_image, CircuitLayout};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::kernel::{accuracy, encode_rows, fit, gram_from_states, kta};
use crate::predictor::{score_layouts, PredictorModel, PredictorSample};
use crate::qsim::NoiseSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TrainingPool,
    Candidate,
    Finetuned,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::TrainingPool, Stage::Candidate, Stage::Finetuned];

    pub fn name(self) -> &'static str {
        match self {
            Stage::TrainingPool => "training_pool",
            Stage::Candidate => "candidate",
            Stage::Finetuned => "finetuned",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown stage `{s}`")))
    }
}

/// One evaluated kernel at one stage of the search.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRecord {
    pub stage: Stage,
    /// Position within the stage's own list.
    pub index: usize,
    pub layout: CircuitLayout,
    pub theta: Vec<f64>,
    pub kta_train: f64,
    pub predicted_kta: Option<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledLayout {
    /// Position in the input pool.
    pub index: usize,
    pub hash: String,
    pub layout: CircuitLayout,
    pub kta: f64,
}

impl LabeledLayout {
    pub fn sample(&self, max_width: usize) -> Result<PredictorSample> {
        PredictorSample::from_kta(self.hash.clone(), encode_image(&self.layout, max_width)?, self.kta)
    }
}

/// Training KTA of every layout at `Θ = ∅`. Each distinct layout hash is
/// evaluated once. Layouts whose kernel fails are logged and dropped; the
/// number dropped is returned alongside.
pub fn label_pool(
    layouts: &[CircuitLayout],
    data: &TabularDataset,
    noise: Option<&NoiseSpec>,
) -> (Vec<LabeledLayout>, usize) {
    let hashes: Vec<String> = layouts.iter().map(CircuitLayout::hash).collect();
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (i, h) in hashes.iter().enumerate() {
        first.entry(h.as_str()).or_insert(i);
    }
    let mut unique: Vec<usize> = first.values().copied().collect();
    unique.sort_unstable();
    let computed: HashMap<usize, std::result::Result<f64, String>> = unique
        .par_iter()
        .map(|&i| {
            let attempt = encode_rows(&layouts[i], data.features(), &[], noise)
                .and_then(|s| gram_from_states(&s, None))
                .and_then(|q| kta(&q, data.labels(), data.num_classes()));
            (i, attempt.map_err(|e| e.to_string()))
        })
        .collect();
    let mut out = Vec::with_capacity(layouts.len());
    let mut failures = 0;
    for (index, (layout, hash)) in layouts.iter().zip(&hashes).enumerate() {
        match &computed[&first[hash.as_str()]] {
            Ok(k) => out.push(LabeledLayout {
                index,
                hash: hash.clone(),
                layout: layout.clone(),
                kta: *k,
            }),
            Err(e) => {
                log::warn!("dropping pool layout {index}: {e}");
                failures += 1;
            }
        }
    }
    (out, failures)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ranked {
    /// Position in the scored pool.
    pub index: usize,
    pub hash: String,
    pub predicted: f64,
}

/// Scores every layout and keeps the `k` best by predicted KTA; ties are
/// broken by layout hash, then by pool position.
pub fn rank_and_select(
    model: &PredictorModel,
    layouts: &[CircuitLayout],
    max_width: usize,
    k: usize,
) -> Result<Vec<Ranked>> {
    if k == 0 || k > layouts.len() {
        return Err(Error::Range(format!(
            "k={k} must be in 1..={}",
            layouts.len()
        )));
    }
    let scores = score_layouts(model, layouts, max_width)?;
    top_k_by_score(layouts, &scores, k)
}

/// The ordering step of [`rank_and_select`] for externally supplied scores.
pub fn top_k_by_score(layouts: &[CircuitLayout], scores: &[f64], k: usize) -> Result<Vec<Ranked>> {
    if scores.len() != layouts.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} layouts",
            scores.len(),
            layouts.len()
        )));
    }
    if k == 0 || k > layouts.len() {
        return Err(Error::Range(format!(
            "k={k} must be in 1..={}",
            layouts.len()
        )));
    }
    let mut ranked: Vec<Ranked> = layouts
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (l, &predicted))| Ranked {
            index,
            hash: l.hash(),
            predicted,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.predicted
            .total_cmp(&a.predicted)
            .then_with(|| a.hash.cmp(&b.hash))
            .then_with(|| a.index.cmp(&b.index))
    });
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub kta_train: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Largest per-class residual `‖(Q+λI)α − t‖` of the fitted model.
    pub max_residual: f64,
}

/// Fits kernel ridge on the training Gram and scores both splits.
pub fn evaluate_kernel(
    layout: &CircuitLayout,
    theta: &[f64],
    train: &TabularDataset,
    test: &TabularDataset,
    lambda: f64,
    noise: Option<&NoiseSpec>,
) -> Result<Evaluation> {
    let train_states = encode_rows(layout, train.features(), theta, noise)?;
    let test_states = encode_rows(layout, test.features(), theta, noise)?;
    let q = gram_from_states(&train_states, None)?;
    let cross = gram_from_states(&test_states, Some(&train_states))?;
    let r = train.num_classes().max(test.num_classes());
    let machine = fit(&q, train.labels(), r, lambda)?;
    Ok(Evaluation {
        kta_train: kta(&q, train.labels(), r)?,
        train_accuracy: accuracy(&machine.predict(&q)?, train.labels())?,
        test_accuracy: accuracy(&machine.predict(&cross)?, test.labels())?,
        max_residual: machine.residuals.iter().copied().fold(0.0, f64::max),
    })
}
