use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use super::{Binding, CircuitLayout};
use crate::error::{Error, Result};

/// A layout whose selected feature rotations now read trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Promotion {
    pub layout: CircuitLayout,
    /// Rotation ordinals (indices into `rotation_indices`) that were promoted.
    pub positions: Vec<usize>,
    /// `replaced_features[j]` is the feature that `Param(first_param + j)`
    /// replaced.
    pub replaced_features: Vec<usize>,
    pub first_param: usize,
}

/// Allowed range of `m`: `1 ..= L/l0 − 1`. `None` when the range is empty.
pub fn promotion_bounds(layout: &CircuitLayout) -> Option<(usize, usize)> {
    let hi = layout.rotations_per_layer().checked_sub(1)?;
    (hi >= 1).then_some((1, hi))
}

/// Rotation ordinals currently bound to a feature.
fn feature_ordinals(layout: &CircuitLayout) -> Vec<usize> {
    layout
        .rotation_indices()
        .iter()
        .enumerate()
        .filter(|(_, &g)| matches!(layout.gates()[g].binding(), Some(Binding::Feature(_))))
        .map(|(r, _)| r)
        .collect()
}

/// Promotes the block rotations at the given ordinals to fresh parameter
/// slots, numbered after any existing ones in the order given.
pub fn promote_gates(layout: &CircuitLayout, positions: &[usize]) -> Result<Promotion> {
    let m = positions.len();
    let (lo, hi) = promotion_bounds(layout).ok_or_else(|| {
        Error::Range(format!(
            "layout has {} rotations per layer; nothing can be promoted",
            layout.rotations_per_layer()
        ))
    })?;
    if m < lo || m > hi {
        return Err(Error::Range(format!("m={m} outside {lo}..={hi}")));
    }
    let mut seen = HashSet::new();
    if let Some(d) = positions.iter().find(|p| !seen.insert(**p)) {
        return Err(Error::Argument(format!("duplicate promotion position {d}")));
    }
    let first_param = layout.num_params();
    let mut out = layout.clone();
    let mut replaced = Vec::with_capacity(m);
    for (j, &pos) in positions.iter().enumerate() {
        let gate_index = *layout.rotation_indices().get(pos).ok_or_else(|| {
            Error::Range(format!(
                "position {pos} beyond {} rotations",
                layout.total_rotations()
            ))
        })?;
        match layout.gates()[gate_index].binding() {
            Some(Binding::Feature(f)) => replaced.push(f),
            other => {
                return Err(Error::Argument(format!(
                    "rotation {pos} is bound to {other:?}, not a feature"
                )))
            }
        }
        out.set_binding(gate_index, Binding::Param(first_param + j))?;
    }
    Ok(Promotion {
        layout: out,
        positions: positions.to_vec(),
        replaced_features: replaced,
        first_param,
    })
}

/// Draws `m` distinct feature-bound rotations uniformly and promotes them.
pub fn promote_random<R: Rng + ?Sized>(
    layout: &CircuitLayout,
    m: usize,
    rng: &mut R,
) -> Result<Promotion> {
    let candidates = feature_ordinals(layout);
    if m > candidates.len() {
        return Err(Error::Range(format!(
            "m={m} exceeds {} feature-bound rotations",
            candidates.len()
        )));
    }
    let picks: Vec<usize> = index::sample(rng, candidates.len(), m)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    promote_gates(layout, &picks)
}
