//! MLP performance predictor mapping circuit images to alignment scores.

mod mlp;
mod store;
mod train;

pub use mlp::{init_model, smooth_l1, PredictorModel, HIDDEN_UNITS, INPUTS_PER_ROTATION};
pub use store::{load_checkpoint, load_samples, save_checkpoint, save_samples};
pub use train::{
    evaluate_loss, score_layouts, train_predictor, PredictorSample, TrainConfig, TARGET_SCALE,
};
