//! Dataset ingestion, feature selection and splitting.

mod dataset;
pub mod mrmr;
mod pca;
mod selector;
mod split;

pub use dataset::{load_csv, parse_csv, LabelColumn, TabularDataset};
pub use mrmr::DEFAULT_BINS;
pub use pca::{principal_components, Principal};
pub use selector::{
    apply_selector, identity_selector, mrmr_select, pca_reduce, FeatureSelector, Reduction,
    ANGLE_EPS, ANGLE_MAX,
};
pub use split::stratified_split;
