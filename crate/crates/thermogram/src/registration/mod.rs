//! Rigid registration of sequence frames: closed-form fit from supplied
//! keypoints, and search-based alignment scored by region intensity or
//! edge-map similarity.

mod keypoints;
mod metrics;
mod search;
mod transform;
mod warp;

pub use keypoints::{fit_rigid_from_keypoints, parse_keypoints, read_keypoints_file, KeypointPair};
pub use metrics::{chamfer_distance, mean_abs_difference, MAX_SCORE};
pub use search::{
    format_transforms, parse_transforms, read_transforms_file, register_by_roi, register_sequence,
    write_transforms_file, SearchParams, SequenceMode, SequenceRegistration, SimilarityMetric,
};
pub use transform::{apply_transform, RigidTransform2D};
pub use warp::{warp_image, Interpolation};
