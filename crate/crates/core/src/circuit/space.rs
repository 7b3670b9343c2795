use rand::Rng;

use super::encoding::{assign_features, default_strategy, EncodingStrategy};
use super::{Axis, Binding, BlockSpec, CircuitLayout};
use crate::error::{Error, Result};

/// Upper bound on the number of layouts `enumerate_block_space` will build.
pub const MAX_ENUMERATION: usize = 1_000_000;

/// `B = l0 · ⌈p/N⌉`.
pub fn block_count(n: usize, l0: usize, p: usize) -> usize {
    l0 * p.div_ceil(n)
}

/// Distinct blocks for `n` qubits: `3 · 3 · 2^(n−1)`.
pub fn block_space_size(n: usize) -> usize {
    9 << (n - 1)
}

/// Decodes `code ∈ [0, block_space_size(n))`; the mask occupies the low
/// `n−1` bits with `mask[0]` most significant.
pub fn block_from_code(n: usize, code: usize) -> BlockSpec {
    let masks = 1usize << (n - 1);
    let axes = code / masks;
    let bits = code % masks;
    BlockSpec {
        even_axis: Axis::ALL[axes / 3],
        odd_axis: Axis::ALL[axes % 3],
        mask: (0..n - 1).map(|i| bits >> (n - 2 - i) & 1 == 1).collect(),
    }
}

fn check_dims(n: usize, l0: usize, p: usize) -> Result<()> {
    if n < 2 || l0 < 1 || p < 1 {
        return Err(Error::Argument(format!(
            "need n >= 2, l0 >= 1, p >= 1 (got n={n}, l0={l0}, p={p})"
        )));
    }
    Ok(())
}

fn unbound(n: usize, l0: usize, p: usize, blocks: Vec<BlockSpec>) -> Result<CircuitLayout> {
    let slots = blocks.len() * n;
    CircuitLayout::new(n, l0, p, blocks, false, &vec![Binding::Const(0.0); slots])
}

/// Draws one layout: per block, both rotation axes uniformly from `{X, Y, Z}`
/// and every neighbour entangler uniformly from `{CNOT, I}`.
pub fn sample_layout<R: Rng + ?Sized>(
    n: usize,
    l0: usize,
    p: usize,
    strategy: EncodingStrategy,
    rng: &mut R,
) -> Result<CircuitLayout> {
    check_dims(n, l0, p)?;
    strategy.check(p, n)?;
    let blocks = (0..block_count(n, l0, p))
        .map(|_| BlockSpec {
            even_axis: Axis::ALL[rng.gen_range(0..3)],
            odd_axis: Axis::ALL[rng.gen_range(0..3)],
            mask: (0..n - 1).map(|_| rng.gen_bool(0.5)).collect(),
        })
        .collect();
    assign_features(&unbound(n, l0, p, blocks)?, strategy, rng)
}

/// Every layout of the block space, bound with [`default_strategy`], in
/// mixed-radix order of the block codes.
pub fn enumerate_block_space(n: usize, l0: usize, p: usize) -> Result<Vec<CircuitLayout>> {
    check_dims(n, l0, p)?;
    let per_block = block_space_size(n);
    let b = block_count(n, l0, p);
    let total = (0..b).try_fold(1usize, |acc, _| {
        acc.checked_mul(per_block)
            .filter(|&t| t <= MAX_ENUMERATION)
    });
    let total = total.ok_or_else(|| {
        Error::Capacity(format!(
            "block space {per_block}^{b} exceeds {MAX_ENUMERATION} layouts"
        ))
    })?;
    let strategy = default_strategy(n, p);
    // The default strategies draw nothing from the generator.
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    (0..total)
        .map(|mut index| {
            let mut codes = vec![0; b];
            for slot in codes.iter_mut().rev() {
                *slot = index % per_block;
                index /= per_block;
            }
            let blocks = codes.into_iter().map(|c| block_from_code(n, c)).collect();
            assign_features(&unbound(n, l0, p, blocks)?, strategy, &mut no_rng)
        })
        .collect()
}
