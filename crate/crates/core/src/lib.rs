//! Dynamics-aware evidential occupancy grids.
//!
//! Lidar scans are ray traced into sensor grid maps (SGMs), compared across
//! frames into residual grid maps (RGMs) and fused over time into evidential
//! occupancy grid maps (eOGMs) holding Dempster–Shafer masses over
//! {occupied, free}. A segmenter splits each eOGM into static and dynamic
//! parts, and a double-prong predictor extrapolates both into future
//! occupancy probabilities.
//!
//! ```
//! use evigrid::{combine_masses, pignistic, BeliefMass};
//!
//! let a = BeliefMass::new(0.6, 0.1, 0.3).unwrap();
//! let b = BeliefMass::new(0.5, 0.2, 0.3).unwrap();
//! let m = combine_masses(a, b).unwrap();
//! assert!(pignistic(m) > 0.7);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod components;
pub mod error;
pub mod evaluation;
pub mod evidence;
pub mod format;
pub mod grid;
pub mod pipeline;
pub mod prediction;
pub mod render;
pub mod representation;
pub mod segmentation;
pub mod sim;
pub mod store;

pub use components::{label_components, Connectivity};
pub use error::{Error, Result};
pub use evaluation::{dynamic_mse, evaluate, image_similarity, mask_iou, mse, EvalSample, IouScores, MetricReport};
pub use evidence::{classify_mass, combine_masses, discount_mass, pignistic, BeliefMass};
pub use grid::{
    cell_center, transform_grid, world_to_cell, Cell, CellClass, DynamicMask, Eogm, Grid, GridConfig, Ogm, Pose2, Rgm,
    Sgm,
};
pub use prediction::{predict, PredictorConfig, SequenceSpec, Track};
pub use representation::{
    build_rgm, build_sequence, build_sgm, raytrace_cells, split_by_mask, update_eogm, FrameRepr, MeasurementModel,
    PointCloud, RepresentationConfig,
};
pub use segmentation::{segment_heuristic, segment_learned, HeuristicParams, SegModel, SegTrainConfig};
