mod common;

use std::collections::HashMap;
use std::f64::consts::TAU;

use proptest::prelude::*;
use qkernel::data::{
    apply_selector, mrmr_select, parse_csv, pca_reduce, principal_components, stratified_split,
    LabelColumn, Reduction, TabularDataset,
};
use qkernel::data::mrmr::discretize;
use qkernel::error::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Equal-frequency bins by rank for columns without ties.
fn bins_by_rank(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| {
            let first = sorted.iter().position(|s| s == v).unwrap();
            first * bins / values.len()
        })
        .collect()
}

fn mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0 / n;
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(x, y), &p)| p * (p / (pa[&x] * pb[&y])).ln()).sum()
}

/// Feature 0 tracks the label through a small perturbation, feature 1
/// copies feature 0 and feature 2 is independent noise.
fn proxy_copy_noise(exact: bool) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels: Vec<usize> = (0..80).map(|i| (i * 7 % 11) % 2).collect();
    let rows = labels
        .iter()
        .map(|&y| {
            let f0 = y as f64 + if exact { 0.0 } else { 0.3 * rng.gen_range(0.0..1.0) };
            vec![f0, f0, rng.gen_range(0.0..1.0)]
        })
        .collect();
    TabularDataset::new(rows, labels, Some(2)).unwrap()
}

fn mrmr_pick(data: &TabularDataset, p: usize) -> Vec<usize> {
    match mrmr_select(data, p, 8).unwrap().reduction {
        Reduction::Mrmr { indices, .. } => indices,
        _ => unreachable!(),
    }
}

/// Greedy difference-criterion selection over precomputed discrete columns,
/// returning each step's winner and whether the step was an exact tie.
fn greedy_oracle(cols: &[Vec<usize>], labels: &[usize], p: usize) -> Vec<(usize, bool)> {
    let relevance: Vec<f64> = cols.iter().map(|c| mi(c, labels)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    while chosen.len() < p {
        let mut scored: Vec<(usize, f64)> = (0..cols.len())
            .filter(|j| !chosen.contains(j))
            .map(|j| {
                let red = if chosen.is_empty() {
                    0.0
                } else {
                    chosen.iter().map(|&s| mi(&cols[j], &cols[s])).sum::<f64>() / chosen.len() as f64
                };
                (j, relevance[j] - red)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let tie = scored.len() > 1 && (scored[0].1 - scored[1].1).abs() < 1e-9;
        chosen.push(scored[0].0);
        out.push((scored[0].0, tie));
    }
    out
}

#[test]
fn mrmr_prefers_noise_over_a_copy() {
    let data = proxy_copy_noise(false);
    assert_eq!(mrmr_pick(&data, 2), vec![0, 2]);
    let cols: Vec<Vec<usize>> = (0..3).map(|j| bins_by_rank(&data.column(j), 8)).collect();
    let oracle: Vec<usize> = greedy_oracle(&cols, data.labels(), 2).iter().map(|s| s.0).collect();
    assert_eq!(oracle, vec![0, 2]);
}

#[test]
fn exact_label_copy_is_a_tie() {
    // With feature 0 identical to the label, the copy and the noise column
    // both score exactly zero; the lowest index wins.
    let data = proxy_copy_noise(true);
    let cols = vec![data.labels().to_vec(), data.labels().to_vec(), bins_by_rank(&data.column(2), 8)];
    let steps = greedy_oracle(&cols, data.labels(), 2);
    assert!(steps[1].1);
    assert_eq!(mrmr_pick(&data, 2), vec![0, 1]);
}

#[test]
fn constant_feature_is_picked_last() {
    let base = common::blobs(60, 3, 3, 2.0, 4);
    let rows = base.features().iter().map(|r| vec![r[0], 5.0, r[1], r[2]]).collect();
    let data = TabularDataset::new(rows, base.labels().to_vec(), Some(2)).unwrap();
    let sel = mrmr_select(&data, 4, 8).unwrap();
    let Reduction::Mrmr { indices, .. } = &sel.reduction else { panic!() };
    assert_ne!(indices[0], 1);
    assert!(mrmr_select(&data, 5, 8).is_err());
}

#[test]
fn pca_examples() {
    let diag = TabularDataset::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]], vec![0, 1, 0], None).unwrap();
    let (c, means, _) = principal_components(&diag, 1).unwrap();
    let h = 1.0 / 2f64.sqrt();
    assert!((c[0][0] - h).abs() < 1e-12 && (c[0][1] - h).abs() < 1e-12);
    // Rank-1 data reconstructs exactly from its first component.
    for r in diag.features() {
        let t: f64 = r.iter().zip(&c[0]).zip(&means).map(|((x, w), m)| w * (x - m)).sum();
        for j in 0..2 {
            assert!((means[j] + t * c[0][j] - r[j]).abs() < 1e-9);
        }
    }
    assert!(pca_reduce(&diag, 3).is_err());
}

#[test]
fn pca_full_rank_preserves_variance() {
    let data = common::blobs(120, 5, 0, 0.0, 9);
    let (_, _, var) = principal_components(&data, 5).unwrap();
    let means = data.means();
    let total: f64 = (0..5)
        .map(|j| data.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / 119.0)
        .sum();
    assert!((var.iter().sum::<f64>() - total).abs() < 1e-8);
}

#[test]
fn csv_examples() {
    let ok = parse_csv("a,b,label\n1,2,0\n3,4,1\n5,6,1\n", &LabelColumn::Name("label".into())).unwrap();
    assert_eq!((ok.len(), ok.num_classes()), (3, 2));
    let nan = parse_csv("a,label\n1,0\nNaN,1\n", &LabelColumn::Name("label".into()));
    assert!(matches!(nan, Err(Error::Parse { row: 3, .. })), "{nan:?}");
    let empty = parse_csv("a,label\n", &LabelColumn::Name("label".into()));
    assert!(matches!(empty, Err(Error::EmptyDataset)));
}

#[test]
fn split_examples() {
    let data = common::blobs(100, 3, 1, 1.0, 1);
    let (train, test) = stratified_split(&data, 0.5, 17).unwrap();
    for part in [&train, &test] {
        assert_eq!(part.labels().iter().filter(|&&y| y == 0).count(), 25);
        assert_eq!(part.labels().iter().filter(|&&y| y == 1).count(), 25);
    }
    let again = stratified_split(&data, 0.5, 17).unwrap();
    assert_eq!((train.clone(), test.clone()), again);
    for row in train.features() {
        assert!(!test.features().contains(row));
    }
    assert!(matches!(stratified_split(&data, 1.0, 0), Err(Error::Range(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pca_is_orthonormal(seed in any::<u64>(), d in 2usize..=8, p_frac in 0.1f64..=1.0) {
        let data = common::blobs(40, d, d / 2, 1.0, seed);
        let p = ((d as f64 * p_frac).ceil() as usize).clamp(1, d);
        let (c, _, var) = principal_components(&data, p).unwrap();
        for a in 0..p {
            for b in 0..p {
                let dot: f64 = c[a].iter().zip(&c[b]).map(|(x, y)| x * y).sum();
                let expect = f64::from(u8::from(a == b));
                prop_assert!((dot - expect).abs() < 1e-8);
            }
            let lead = c[a].iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            prop_assert!(lead > 0.0);
        }
        prop_assert!(var.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn mrmr_is_permutation_equivariant(seed in any::<u64>(), d in 3usize..=7) {
        let data = common::blobs(64, d, 2, 1.5, seed);
        let cols: Vec<Vec<usize>> = (0..d).map(|j| discretize(&data.column(j), 8)).collect();
        prop_assume!(greedy_oracle(&cols, data.labels(), 3).iter().all(|s| !s.1));
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let rows = data.features().iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let permuted = TabularDataset::new(rows, data.labels().to_vec(), Some(2)).unwrap();
        let mapped: Vec<usize> = mrmr_pick(&permuted, 3).iter().map(|&j| perm[j]).collect();
        prop_assert_eq!(mapped, mrmr_pick(&data, 3));
    }

    #[test]
    fn selected_angles_stay_in_range(seed in any::<u64>(), d in 2usize..=6, use_pca in any::<bool>()) {
        let data = common::blobs(50, d, 1, 2.0, seed);
        let (train, test) = stratified_split(&data, 0.5, seed).unwrap();
        let p = d.min(3);
        let sel = if use_pca { pca_reduce(&train, p).unwrap() } else { mrmr_select(&train, p, 8).unwrap() };
        for part in [&train, &test] {
            let out = apply_selector(&sel, part).unwrap();
            prop_assert_eq!(out.dim(), p);
            prop_assert_eq!(out.labels(), part.labels());
            prop_assert!(out.features().iter().flatten().all(|a| (0.0..TAU).contains(a)));
        }
    }
}
