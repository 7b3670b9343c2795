//! The staged search: pool labeling, predictor ranking, fine-tuning,
//! evaluation, and the classical and hardware-efficient baselines.

mod baselines;
mod config;
mod finetune;
mod gradient;
mod run;
mod stages;

pub use baselines::{
    diagnose_kv, feature_variance, heak_layout, rbf_baseline, select_angles, tek_layout,
    train_tek, KvRow, RbfRow, SelectorKind, TekOutcome,
};
pub use config::SearchConfig;
pub use finetune::{draw_trials, finetune, FinetuneConfig, FinetuneOutcome, TrialPlan, TrialTrace};
pub use gradient::{kta_at, kta_gradient};
pub use run::{
    evaluate_stage, file_sha256, finetune_stage, label_pool_stage, load_candidates,
    load_finetuned, load_labeled_pool, load_labels, load_pool, rank_stage, run_full_search,
    sample_layouts, sample_pool, scoring_pool, select_features, select_features_from_file,
    stage_report, train_predictor_stage, Artifact, CandidateEntry, RunDir, RunManifest,
    SearchOutcome, StageEntry, STAGE_NAMES, TOOL_NAME, TOOL_VERSION,
};
pub use stages::{
    evaluate_kernel, label_pool, rank_and_select, CandidateRecord, Evaluation, LabeledLayout,
    Ranked, Stage, top_k_by_score,
};

use sha2::{Digest, Sha256};

/// Sub-seed for one worker: the first eight bytes of
/// `SHA-256(master ‖ tag ‖ a ‖ b)`, little-endian.
pub fn derive_seed(master: u64, tag: &str, a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
