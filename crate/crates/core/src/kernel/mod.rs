//! Fidelity kernels, alignment metrics and kernel ridge classification.

mod gram;
mod machine;
mod metrics;

pub use gram::{
    encode_point, encode_rows, gram, gram_from_states, rbf_gram, theta_hash, EncodedState,
    GramMatrix, GramSidecar, PSD_TOLERANCE,
};
pub use machine::{fit, KernelMachine, DEFAULT_LAMBDA};
pub use metrics::{accuracy, ideal_entry, kernel_variance, kta, pearson};
