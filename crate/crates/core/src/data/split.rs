use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::TabularDataset;
use crate::error::{Error, Result};

/// Per-class proportional split. Classes with fewer than two members stay
/// whole in the training half. Both halves keep the original row order.
pub fn stratified_split(
    data: &TabularDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Range(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..data.num_classes() {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels()[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            log::warn!("class {class} has {} member(s); kept in train", members.len());
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((data.subset(&train)?, data.subset(&test)?))
}
