//! Thermogram-analysis toolkit for thyroid screening workflows: directional
//! valley filtering, autonomous region-of-interest localization, rigid
//! registration of dynamic acquisition sequences, threshold segmentation,
//! four-feature extraction (including bilateral asymmetry), and
//! nearest-neighbor classification, plus a deterministic synthetic phantom
//! generator so every stage is testable without clinical data.
//!
//! The common entry points are re-exported at the crate root; the full
//! surface lives in the per-stage modules.

pub mod classifier;
pub mod error;
pub mod features;
pub mod filter;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod registration;
pub mod roi;
pub mod synth;

pub use classifier::{BatchReport, ClassifyMethod, Label, PatientRecord};
pub use error::{Error, Result};
pub use features::FeatureVector;
pub use filter::{Axis, FilterParams, Polarity};
pub use model::{AcquisitionMetadata, BinaryMask, Calibration, Rect, ThermalImage};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
pub use registration::{
    Interpolation, KeypointPair, RigidTransform2D, SearchParams, SequenceMode, SimilarityMetric,
};
pub use roi::{RoiParams, ScanOrder};
pub use synth::{generate_phantom, ground_truth, PhantomSpec};
