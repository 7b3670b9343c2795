//! Circuit layouts: block-structured hardware-efficient encoders, feature
//! bindings, search-space sampling, gate promotion and image encoding.
//!
//! A layout is a list of blocks. Each block applies one rotation per qubit
//! (even-indexed qubits share `even_axis`, odd-indexed qubits share
//! `odd_axis`) followed by CNOTs on the neighbouring pairs `(i, i+1)` selected
//! by the block's mask, in ascending `i`. Layouts built for the trainable
//! baseline append an `RY` layer and a ring of `CRZ` gates after every block.

mod encoding;
mod image;
mod promote;
mod space;

pub use encoding::{assign_features, default_strategy, EncodingStrategy};
pub use image::{encode_image, CircuitImage, IMAGE_CHANNELS};
pub use promote::{promote_gates, promote_random, promotion_bounds, Promotion};
pub use space::{
    block_count, block_from_code, block_space_size, enumerate_block_space, sample_layout,
    MAX_ENUMERATION,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qsim::Gate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn gate(self, qubit: usize, angle: f64) -> Gate {
        match self {
            Axis::X => Gate::Rx(qubit, angle),
            Axis::Y => Gate::Ry(qubit, angle),
            Axis::Z => Gate::Rz(qubit, angle),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub even_axis: Axis,
    pub odd_axis: Axis,
    /// `mask[i]` places a CNOT on `(i, i+1)`.
    pub mask: Vec<bool>,
}

impl BlockSpec {
    pub fn axis_for(&self, qubit: usize) -> Axis {
        if qubit.is_multiple_of(2) {
            self.even_axis
        } else {
            self.odd_axis
        }
    }
}

/// What drives the angle of a parameterized gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binding {
    Feature(usize),
    Param(usize),
    Const(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateSlot {
    Rotation {
        axis: Axis,
        qubit: usize,
        binding: Binding,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Crz {
        control: usize,
        target: usize,
        binding: Binding,
    },
}

impl GateSlot {
    pub fn binding(&self) -> Option<Binding> {
        match *self {
            GateSlot::Rotation { binding, .. } | GateSlot::Crz { binding, .. } => Some(binding),
            GateSlot::Cnot { .. } => None,
        }
    }

    fn set_binding(&mut self, b: Binding) {
        match self {
            GateSlot::Rotation { binding, .. } | GateSlot::Crz { binding, .. } => *binding = b,
            GateSlot::Cnot { .. } => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitLayout {
    num_qubits: usize,
    l0: usize,
    p: usize,
    blocks: Vec<BlockSpec>,
    trainable_module: bool,
    gates: Vec<GateSlot>,
    /// Gate-list indices of the block rotations, in circuit order.
    rotation_indices: Vec<usize>,
}

impl CircuitLayout {
    /// Builds the gate list for `blocks` and binds every parameterized gate, in
    /// gate order, to the matching entry of `bindings`.
    pub fn new(
        num_qubits: usize,
        l0: usize,
        p: usize,
        blocks: Vec<BlockSpec>,
        trainable_module: bool,
        bindings: &[Binding],
    ) -> Result<Self> {
        let mut layout = Self::skeleton(num_qubits, l0, p, blocks, trainable_module)?;
        let slots = layout.parameterized_indices();
        if slots.len() != bindings.len() {
            return Err(Error::Binding(format!(
                "{} parameterized gates but {} bindings",
                slots.len(),
                bindings.len()
            )));
        }
        for (idx, b) in slots.into_iter().zip(bindings) {
            layout.set_binding(idx, *b)?;
        }
        Ok(layout)
    }

    /// Gate list with every parameterized gate bound to `Const(0)`.
    fn skeleton(
        num_qubits: usize,
        l0: usize,
        p: usize,
        blocks: Vec<BlockSpec>,
        trainable_module: bool,
    ) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Argument("layout needs at least one qubit".into()));
        }
        if l0 == 0 || p == 0 {
            return Err(Error::Argument(format!("l0={l0} and p={p} must be >= 1")));
        }
        for (b, block) in blocks.iter().enumerate() {
            if block.mask.len() != num_qubits - 1 {
                return Err(Error::Dimension(format!(
                    "block {b}: mask length {} != N-1 = {}",
                    block.mask.len(),
                    num_qubits - 1
                )));
            }
        }
        let mut gates = Vec::new();
        let mut rotation_indices = Vec::new();
        let placeholder = Binding::Const(0.0);
        for block in &blocks {
            for q in 0..num_qubits {
                rotation_indices.push(gates.len());
                gates.push(GateSlot::Rotation {
                    axis: block.axis_for(q),
                    qubit: q,
                    binding: placeholder,
                });
            }
            for (i, &on) in block.mask.iter().enumerate() {
                if on {
                    gates.push(GateSlot::Cnot {
                        control: i,
                        target: i + 1,
                    });
                }
            }
            if trainable_module {
                for q in 0..num_qubits {
                    gates.push(GateSlot::Rotation {
                        axis: Axis::Y,
                        qubit: q,
                        binding: placeholder,
                    });
                }
                if num_qubits > 1 {
                    for i in 0..num_qubits {
                        gates.push(GateSlot::Crz {
                            control: i,
                            target: (i + 1) % num_qubits,
                            binding: placeholder,
                        });
                    }
                }
            }
        }
        Ok(Self {
            num_qubits,
            l0,
            p,
            blocks,
            trainable_module,
            gates,
            rotation_indices,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn l0(&self) -> usize {
        self.l0
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn gates(&self) -> &[GateSlot] {
        &self.gates
    }

    pub fn has_trainable_module(&self) -> bool {
        self.trainable_module
    }

    /// Number of block rotations, `L = N × B`.
    pub fn total_rotations(&self) -> usize {
        self.rotation_indices.len()
    }

    pub fn rotations_per_layer(&self) -> usize {
        self.total_rotations() / self.l0
    }

    pub fn rotation_indices(&self) -> &[usize] {
        &self.rotation_indices
    }

    /// Image width of the unpadded circuit: one rotation column and one
    /// entangling column per block.
    pub fn natural_width(&self) -> usize {
        2 * self.blocks.len()
    }

    pub fn parameterized_indices(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.binding().is_some())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn bindings(&self) -> Vec<(usize, Binding)> {
        self.gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.binding().map(|b| (i, b)))
            .collect()
    }

    /// Number of trainable parameters referenced (`max ParamSlot + 1`).
    pub fn num_params(&self) -> usize {
        self.gates
            .iter()
            .filter_map(|g| match g.binding() {
                Some(Binding::Param(k)) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Gate-list indices whose binding is `Param(k)`.
    pub fn param_occurrences(&self, k: usize) -> Vec<usize> {
        self.bindings()
            .into_iter()
            .filter(|(_, b)| *b == Binding::Param(k))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn set_binding(&mut self, gate_index: usize, binding: Binding) -> Result<()> {
        if let Binding::Feature(f) = binding {
            if f >= self.p {
                return Err(Error::Binding(format!(
                    "feature slot {f} at gate {gate_index} not below p={}",
                    self.p
                )));
            }
        }
        if let Binding::Const(v) = binding {
            if !v.is_finite() {
                return Err(Error::Binding(format!("non-finite constant at gate {gate_index}")));
            }
        }
        match self.gates.get_mut(gate_index) {
            Some(g) if g.binding().is_some() => {
                g.set_binding(binding);
                Ok(())
            }
            Some(_) => Err(Error::Binding(format!(
                "gate {gate_index} is not parameterized"
            ))),
            None => Err(Error::Range(format!(
                "gate index {gate_index} beyond {} gates",
                self.gates.len()
            ))),
        }
    }

    /// Concrete gates for one data point.
    pub fn resolve(&self, features: &[f64], theta: &[f64]) -> Result<Vec<Gate>> {
        let angle = |i: usize, b: Binding| -> Result<f64> {
            match b {
                Binding::Feature(f) => features.get(f).copied().ok_or_else(|| {
                    Error::Binding(format!(
                        "gate {i} reads feature {f} but only {} given",
                        features.len()
                    ))
                }),
                Binding::Param(k) => theta.get(k).copied().ok_or_else(|| {
                    Error::Binding(format!(
                        "gate {i} reads theta[{k}] but only {} given",
                        theta.len()
                    ))
                }),
                Binding::Const(v) => Ok(v),
            }
        };
        self.gates
            .iter()
            .enumerate()
            .map(|(i, g)| {
                Ok(match *g {
                    GateSlot::Rotation {
                        axis,
                        qubit,
                        binding,
                    } => axis.gate(qubit, angle(i, binding)?),
                    GateSlot::Cnot { control, target } => Gate::Cnot { control, target },
                    GateSlot::Crz {
                        control,
                        target,
                        binding,
                    } => Gate::Crz {
                        control,
                        target,
                        angle: angle(i, binding)?,
                    },
                })
            })
            .collect()
    }

    fn to_file(&self) -> LayoutFile {
        LayoutFile {
            n: self.num_qubits,
            l0: self.l0,
            p: self.p,
            blocks: self.blocks.clone(),
            bindings: self
                .bindings()
                .into_iter()
                .map(|(gate_index, b)| {
                    let (kind, value) = match b {
                        Binding::Feature(f) => (BindingKind::Feature, Value::from(f)),
                        Binding::Param(k) => (BindingKind::Param, Value::from(k)),
                        Binding::Const(v) => (BindingKind::Const, Value::from(v)),
                    };
                    BindingFile {
                        gate_index,
                        kind,
                        value,
                    }
                })
                .collect(),
            trainable_module: self.trainable_module,
        }
    }

    /// Canonical JSON text; this is the persisted form and the hash input.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("layout serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        let mut layout = Self::skeleton(file.n, file.l0, file.p, file.blocks, file.trainable_module)?;
        let expected = layout.parameterized_indices();
        let mut seen = vec![false; layout.gates.len()];
        for b in &file.bindings {
            let binding = match b.kind {
                BindingKind::Feature => Binding::Feature(index_value(&b.value)?),
                BindingKind::Param => Binding::Param(index_value(&b.value)?),
                BindingKind::Const => Binding::Const(b.value.as_f64().ok_or_else(|| {
                    Error::Binding(format!("const binding at gate {} is not a number", b.gate_index))
                })?),
            };
            layout.set_binding(b.gate_index, binding)?;
            if std::mem::replace(&mut seen[b.gate_index], true) {
                return Err(Error::Binding(format!("gate {} bound twice", b.gate_index)));
            }
        }
        if let Some(missing) = expected.into_iter().find(|&i| !seen[i]) {
            return Err(Error::Binding(format!("gate {missing} has no binding")));
        }
        Ok(layout)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn index_value(v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Binding(format!("slot index {v} is not a non-negative integer")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BindingKind {
    Feature,
    Param,
    Const,
}

#[derive(Serialize, Deserialize)]
struct BindingFile {
    gate_index: usize,
    kind: BindingKind,
    value: Value,
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    n: usize,
    l0: usize,
    p: usize,
    blocks: Vec<BlockSpec>,
    bindings: Vec<BindingFile>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    trainable_module: bool,
}

impl FromStr for CircuitLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}
