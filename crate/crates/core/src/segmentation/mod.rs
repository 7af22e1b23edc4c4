//! Static/dynamic segmentation of (SGM, RGM) pairs into dynamic masks.
//!
//! Two interchangeable segmenters share the same input and output contract:
//! a deterministic dilate-and-cluster rule and a per-cell logistic
//! classifier over a local patch.

mod heuristic;
mod learned;

pub use heuristic::{segment_heuristic, HeuristicParams};
pub use learned::{
    extract_features, feature_len, forward, gradient_check, read_model, segment_learned, train, train_with_log,
    weighted_loss, write_model, SegModel, SegTrainConfig, TrainLog,
};
