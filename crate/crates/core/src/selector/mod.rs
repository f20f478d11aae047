//! Per-image technique selection: features, labels, the softmax classifier and routing.

pub mod features;
pub mod model;

pub use features::{extract_features, feature_spec_hash, FeatureVector, FEATURE_LEN};
pub use model::{
    adaptive_mask, best_technique, generate_labels, score_techniques, Normalization, SelectorModel,
    TrainParams, TrainReport, FALLBACK_TECHNIQUE, MODEL_VERSION,
};
