use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Binding, CircuitLayout};
use crate::error::{Error, Result};

/// How features are loaded into the block rotations.
///
/// For `p > N` the first `⌈p/N⌉` blocks form one group that covers every
/// feature; deeper layouts repeat the group's assignment once per layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingStrategy {
    /// Fill qubits top to bottom, column after column.
    Sequential,
    /// Like sequential but every other column runs bottom to top.
    Chain,
    /// A fresh permutation of the features over each group.
    Random,
    /// Qubit `j` reads feature `j` (`p = N`).
    Elementwise,
    /// Qubit `j` reads feature `j mod p` (`p < N`).
    Modular,
    /// First `p` qubits read features, the rest get fixed random angles.
    RandomFill,
}

impl EncodingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sequential => "sequential",
            Self::Chain => "chain",
            Self::Random => "random",
            Self::Elementwise => "elementwise",
            Self::Modular => "modular",
            Self::RandomFill => "random_fill",
        }
    }

    pub fn check(self, p: usize, n: usize) -> Result<()> {
        use std::cmp::Ordering::*;
        let ok = match (p.cmp(&n), self) {
            (Greater, Self::Sequential | Self::Chain | Self::Random) => true,
            // Sequential and chain reduce to elementwise on a single column.
            (Equal, Self::Elementwise | Self::Random | Self::Sequential | Self::Chain) => true,
            (Less, Self::Modular | Self::RandomFill) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Strategy {
                strategy: self.name().to_string(),
                p,
                n,
            })
        }
    }
}

impl fmt::Display for EncodingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sequential" => Self::Sequential,
            "chain" => Self::Chain,
            "random" => Self::Random,
            "elementwise" => Self::Elementwise,
            "modular" => Self::Modular,
            "random_fill" => Self::RandomFill,
            other => return Err(Error::Argument(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Deterministic strategy used when enumerating the block space.
pub fn default_strategy(n: usize, p: usize) -> EncodingStrategy {
    use std::cmp::Ordering::*;
    match p.cmp(&n) {
        Greater => EncodingStrategy::Sequential,
        Equal => EncodingStrategy::Elementwise,
        Less => EncodingStrategy::Modular,
    }
}

/// Bindings for one group of `⌈p/N⌉` columns, indexed `column * N + qubit`.
fn group_bindings<R: Rng + ?Sized>(
    strategy: EncodingStrategy,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Vec<Binding> {
    let columns = p.div_ceil(n);
    let slots = columns * n;
    match strategy {
        EncodingStrategy::Sequential | EncodingStrategy::Elementwise => {
            (0..slots).map(|s| Binding::Feature(s % p)).collect()
        }
        EncodingStrategy::Chain => {
            let mut out = vec![Binding::Feature(0); slots];
            for col in 0..columns {
                for q in 0..n {
                    let offset = if col % 2 == 1 { n - 1 - q } else { q };
                    out[col * n + q] = Binding::Feature((col * n + offset) % p);
                }
            }
            out
        }
        EncodingStrategy::Random => {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(rng);
            (0..slots)
                .map(|s| {
                    if s < p {
                        Binding::Feature(order[s])
                    } else {
                        Binding::Feature(rng.gen_range(0..p))
                    }
                })
                .collect()
        }
        EncodingStrategy::Modular => (0..n).map(|q| Binding::Feature(q % p)).collect(),
        EncodingStrategy::RandomFill => (0..n)
            .map(|q| {
                if q < p {
                    Binding::Feature(q)
                } else {
                    Binding::Const(rng.gen_range(0.0..TAU))
                }
            })
            .collect(),
    }
}

/// Binds every block rotation of `layout` to a feature (or, for
/// `random_fill`, a constant) according to `strategy`.
pub fn assign_features<R: Rng + ?Sized>(
    layout: &CircuitLayout,
    strategy: EncodingStrategy,
    rng: &mut R,
) -> Result<CircuitLayout> {
    let n = layout.num_qubits();
    let p = layout.p();
    strategy.check(p, n)?;
    let group = group_bindings(strategy, n, p, rng);
    let columns = group.len() / n;
    let mut out = layout.clone();
    for (r, &gate_index) in layout.rotation_indices().iter().enumerate() {
        let block = r / n;
        let q = r % n;
        out.set_binding(gate_index, group[(block % columns) * n + q])?;
    }
    Ok(out)
}
