use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use super::mrmr::mrmr_indices;
use super::pca::principal_components;
use crate::error::{Error, Result};

/// Gap kept below `2π` so the training maximum maps strictly inside
/// `[0, 2π)`.
pub const ANGLE_EPS: f64 = 1e-9;
pub const ANGLE_MAX: f64 = TAU * (1.0 - ANGLE_EPS);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Reduction {
    Mrmr { indices: Vec<usize>, bins: usize },
    Pca { components: Vec<Vec<f64>>, means: Vec<f64> },
    Identity,
}

/// Dimension reduction `ℝ^d → ℝ^p` followed by a min-max map of every output
/// feature onto rotation angles in `[0, 2π)`, fitted on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelector {
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(flatten)]
    pub reduction: Reduction,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl FeatureSelector {
    fn fit_scaling(mut self, data: &TabularDataset) -> Result<Self> {
        let reduced = self.reduce_rows(data)?;
        let p = self.output_dim;
        self.mins = (0..p)
            .map(|j| reduced.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
            .collect();
        self.maxs = (0..p)
            .map(|j| reduced.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(self)
    }

    fn reduce_rows(&self, data: &TabularDataset) -> Result<Vec<Vec<f64>>> {
        if data.dim() != self.input_dim {
            return Err(Error::Dimension(format!(
                "selector expects {} features, dataset has {}",
                self.input_dim,
                data.dim()
            )));
        }
        Ok(data
            .features()
            .iter()
            .map(|row| match &self.reduction {
                Reduction::Mrmr { indices, .. } => indices.iter().map(|&j| row[j]).collect(),
                Reduction::Pca { components, means } => components
                    .iter()
                    .map(|c| c.iter().zip(row).zip(means).map(|((w, x), m)| w * (x - m)).sum())
                    .collect(),
                Reduction::Identity => row.clone(),
            })
            .collect())
    }

    /// Maps one reduced value of output feature `j` to an angle.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[j], self.maxs[j]);
        if hi <= lo {
            return 0.0;
        }
        (ANGLE_MAX * (v - lo) / (hi - lo)).clamp(0.0, ANGLE_MAX)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn mrmr_select(data: &TabularDataset, p: usize, bins: usize) -> Result<FeatureSelector> {
    let indices = mrmr_indices(data, p, bins)?;
    FeatureSelector {
        input_dim: data.dim(),
        output_dim: p,
        reduction: Reduction::Mrmr { indices, bins },
        mins: vec![],
        maxs: vec![],
    }
    .fit_scaling(data)
}

pub fn pca_reduce(data: &TabularDataset, p: usize) -> Result<FeatureSelector> {
    let (components, means, _) = principal_components(data, p)?;
    FeatureSelector {
        input_dim: data.dim(),
        output_dim: p,
        reduction: Reduction::Pca { components, means },
        mins: vec![],
        maxs: vec![],
    }
    .fit_scaling(data)
}

/// Keeps every column; only the angle scaling is fitted.
pub fn identity_selector(data: &TabularDataset) -> Result<FeatureSelector> {
    FeatureSelector {
        input_dim: data.dim(),
        output_dim: data.dim(),
        reduction: Reduction::Identity,
        mins: vec![],
        maxs: vec![],
    }
    .fit_scaling(data)
}

/// Reduces `data` and rescales every output feature into `[0, 2π)`. Values
/// outside the fitted training range are clipped.
pub fn apply_selector(selector: &FeatureSelector, data: &TabularDataset) -> Result<TabularDataset> {
    let rows = selector
        .reduce_rows(data)?
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| selector.scale(j, v)).collect())
        .collect();
    TabularDataset::new(rows, data.labels().to_vec(), Some(data.num_classes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TabularDataset {
        TabularDataset::new(
            vec![
                vec![1.0, 10.0, -1.0],
                vec![2.0, 30.0, -2.0],
                vec![3.0, 20.0, -3.0],
                vec![4.0, 40.0, -4.0],
            ],
            vec![0, 1, 0, 1],
            None,
        )
        .unwrap()
    }

    #[test]
    fn endpoints_and_clipping() {
        let ds = toy();
        let sel = identity_selector(&ds).unwrap();
        let out = apply_selector(&sel, &ds).unwrap();
        assert_eq!(out.features()[0][0], 0.0);
        assert!((out.features()[3][0] - TAU * (1.0 - ANGLE_EPS)).abs() < 1e-15);
        assert!(out.features().iter().flatten().all(|&a| (0.0..TAU).contains(&a)));

        let wide = TabularDataset::new(vec![vec![-100.0, 0.0, 0.0], vec![100.0, 0.0, 0.0]], vec![0, 1], None)
            .unwrap();
        let clipped = apply_selector(&sel, &wide).unwrap();
        assert_eq!(clipped.features()[0][0], 0.0);
        assert_eq!(clipped.features()[1][0], ANGLE_MAX);
    }

    #[test]
    fn full_mrmr_permutes() {
        let ds = toy();
        let sel = mrmr_select(&ds, 3, 2).unwrap();
        let Reduction::Mrmr { indices, .. } = &sel.reduction else {
            panic!()
        };
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
        let out = apply_selector(&sel, &ds).unwrap();
        let ident = apply_selector(&identity_selector(&ds).unwrap(), &ds).unwrap();
        for (row_o, row_i) in out.features().iter().zip(ident.features()) {
            for (k, &j) in indices.iter().enumerate() {
                assert_eq!(row_o[k], row_i[j]);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let sel = identity_selector(&toy()).unwrap();
        let other = TabularDataset::new(vec![vec![0.0; 2]], vec![0], None).unwrap();
        assert!(matches!(apply_selector(&sel, &other), Err(Error::Dimension(_))));
    }

    #[test]
    fn json_round_trip() {
        let sel = pca_reduce(&toy(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sel.json");
        sel.save(&path).unwrap();
        assert_eq!(FeatureSelector::load(&path).unwrap(), sel);
    }
}
