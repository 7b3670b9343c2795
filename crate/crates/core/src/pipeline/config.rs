use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::baselines::SelectorKind;
use super::finetune::FinetuneConfig;
use crate::circuit::{default_strategy, EncodingStrategy};
use crate::data::DEFAULT_BINS;
use crate::error::{Error, Result};
use crate::kernel::DEFAULT_LAMBDA;
use crate::predictor::TrainConfig;
use crate::qsim::NoiseSpec;

/// Flat search configuration; every key is optional in the JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub data: Option<PathBuf>,
    pub label_column: String,
    pub train_fraction: f64,
    pub selector: SelectorKind,
    pub bins: usize,
    pub n: usize,
    pub l0: Vec<usize>,
    pub p: usize,
    pub strategy: Option<EncodingStrategy>,
    /// Labeled pool size `M`.
    pub m_pool: usize,
    /// Scoring pool size `M′`; ignored when `exhaustive` is set.
    pub m_prime: usize,
    /// Score the whole block space instead of sampling `M′` layouts.
    pub exhaustive: bool,
    pub k: usize,
    /// Keep the best labeled layout among the candidates.
    pub keep_best_labeled: bool,
    pub num_theta_trials: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub lambda: f64,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
    pub predictor_epochs: usize,
    pub predictor_lr: f64,
    pub batch_size: usize,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            data: None,
            label_column: "label".into(),
            train_fraction: 0.5,
            selector: SelectorKind::Mrmr,
            bins: DEFAULT_BINS,
            n: 4,
            l0: vec![1],
            p: 4,
            strategy: None,
            m_pool: 500,
            m_prime: 50_000,
            exhaustive: false,
            k: 10,
            keep_best_labeled: true,
            num_theta_trials: 20,
            finetune_epochs: 30,
            finetune_lr: 0.2,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            noise: None,
            predictor_epochs: 30,
            predictor_lr: 0.01,
            batch_size: 32,
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn strategy(&self) -> EncodingStrategy {
        self.strategy.unwrap_or_else(|| default_strategy(self.n, self.p))
    }

    /// Image width fitting every layout of the configured space.
    pub fn max_width(&self) -> usize {
        2 * self.l0.iter().copied().max().unwrap_or(1) * self.p.div_ceil(self.n.max(1))
    }

    /// Rotation count of the largest layout, which sizes the predictor.
    pub fn l_max(&self) -> usize {
        self.n * self.max_width() / 2
    }

    pub fn finetune(&self) -> FinetuneConfig {
        FinetuneConfig {
            num_theta_trials: self.num_theta_trials,
            epochs: self.finetune_epochs,
            lr: self.finetune_lr,
        }
    }

    pub fn predictor_training(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.predictor_epochs,
            lr: self.predictor_lr,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n", self.n),
            ("p", self.p),
            ("m_pool", self.m_pool),
            ("m_prime", self.m_prime),
            ("k", self.k),
            ("num_theta_trials", self.num_theta_trials),
            ("bins", self.bins),
            ("batch_size", self.batch_size),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Range(format!("{name} must be >= 1")));
        }
        if self.n < 2 {
            return Err(Error::Range("n must be >= 2".into()));
        }
        if self.l0.is_empty() || self.l0.contains(&0) {
            return Err(Error::Range("l0 must be a non-empty list of values >= 1".into()));
        }
        if !self.exhaustive && self.k > self.m_prime {
            return Err(Error::Range(format!("k={} exceeds m_prime={}", self.k, self.m_prime)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Range(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Range(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(self.finetune_lr >= 0.0) || !(self.predictor_lr >= 0.0) {
            return Err(Error::Range("learning rates must be >= 0".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        self.strategy().check(self.p, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: SearchConfig = serde_json::from_str(r#"{"n": 3, "l0": [1, 2], "p": 5}"#).unwrap();
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.max_width(), 2 * 2 * 2);
        assert_eq!(cfg.l_max(), 12);
        assert_eq!(cfg.strategy(), EncodingStrategy::Sequential);
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<SearchConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let cfg = SearchConfig {
            k: 0,
            ..SearchConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Range(_))));
        let cfg = SearchConfig {
            p: 2,
            strategy: Some(EncodingStrategy::Sequential),
            ..SearchConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Strategy { .. })));
    }
}
