//! Deterministic coarse-to-fine grid search for the registering transform.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{directional_valley, FilterParams};
use crate::model::{Rect, ThermalImage};
use crate::roi::{detect_thyroid_roi, RoiParams};

use super::metrics::chamfer_distance;
use super::transform::RigidTransform2D;
use super::warp::{sample_nearest, warp_image, Interpolation};

/// How candidate alignments are scored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimilarityMetric {
    /// Mean absolute intensity difference over the region.
    MeanAbsDiff,
    /// Chamfer distance between the valley-filtered edge masks of the two
    /// region crops, using the given filter configuration.
    Chamfer { filter: FilterParams },
}

/// Grid-search configuration. The coarse stage scans
/// θ ∈ [−theta_range, theta_range] in theta_step increments (analogously
/// for translation), always including the exact zero candidate; each
/// refinement level halves the steps around the incumbent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub theta_range: f64,
    pub theta_step: f64,
    pub trans_range: f64,
    pub trans_step: f64,
    pub refine_levels: u32,
    pub metric: SimilarityMetric,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            theta_range: 10.0f64.to_radians(),
            theta_step: 0.5f64.to_radians(),
            trans_range: 15.0,
            trans_step: 1.0,
            refine_levels: 3,
            metric: SimilarityMetric::MeanAbsDiff,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.theta_range.is_finite()
            && self.theta_step.is_finite()
            && self.trans_range.is_finite()
            && self.trans_step.is_finite();
        if !finite || self.theta_step <= 0.0 || self.trans_step <= 0.0 {
            return Err(Error::EmptySearchSpace {
                detail: format!(
                    "steps must be positive and finite, got theta_step {} trans_step {}",
                    self.theta_step, self.trans_step
                ),
            });
        }
        if self.theta_range < 0.0 || self.trans_range < 0.0 {
            return Err(Error::EmptySearchSpace {
                detail: format!(
                    "ranges must be non-negative, got theta_range {} trans_range {}",
                    self.theta_range, self.trans_range
                ),
            });
        }
        Ok(())
    }
}

/// Picks the better of two scored candidates. Lower score wins; score ties
/// go to smaller |θ|, then |t_x|, then |t_y|, then to the candidate
/// generated earlier, so the result never depends on evaluation order.
fn better(
    score: f64,
    t: &RigidTransform2D,
    order: usize,
    best_score: f64,
    best_t: &RigidTransform2D,
    best_order: usize,
) -> bool {
    match score.total_cmp(&best_score) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            let key = (t.theta.abs(), t.t_x.abs(), t.t_y.abs(), order);
            let best_key = (best_t.theta.abs(), best_t.t_x.abs(), best_t.t_y.abs(), best_order);
            key < best_key
        }
    }
}

fn select_best(candidates: &[RigidTransform2D], scores: &[f64]) -> (f64, RigidTransform2D) {
    let mut best = (scores[0], candidates[0], 0usize);
    for (order, (&score, t)) in scores.iter().zip(candidates).enumerate().skip(1) {
        if better(score, t, order, best.0, &best.1, best.2) {
            best = (score, *t, order);
        }
    }
    (best.0, best.1)
}

struct RoiScorer<'a> {
    reference: &'a ThermalImage,
    moving: &'a ThermalImage,
    roi: Rect,
    metric: SimilarityMetric,
    reference_edges: Option<crate::model::BinaryMask>,
}

impl<'a> RoiScorer<'a> {
    fn new(
        reference: &'a ThermalImage,
        moving: &'a ThermalImage,
        roi: Rect,
        metric: SimilarityMetric,
    ) -> Result<Self> {
        let reference_edges = match metric {
            SimilarityMetric::MeanAbsDiff => None,
            SimilarityMetric::Chamfer { filter } => {
                let crop = reference.crop(roi)?;
                Some(directional_valley(&crop, &filter)?)
            }
        };
        Ok(RoiScorer {
            reference,
            moving,
            roi,
            metric,
            reference_edges,
        })
    }

    /// Scores one candidate: the moving image is resampled (nearest) at the
    /// region pixels through the candidate's inverse, which equals warping
    /// the full image and reading the region.
    fn score(&self, t: &RigidTransform2D) -> f64 {
        match self.metric {
            SimilarityMetric::MeanAbsDiff => {
                let mut sum = 0u64;
                for i in self.roi.y..self.roi.bottom() {
                    for j in self.roi.x..self.roi.right() {
                        let (x, y) = t.apply_inverse(j as f64, i as f64);
                        let moved = sample_nearest(self.moving, x, y);
                        sum += u64::from(self.reference.pixel(i, j).abs_diff(moved));
                    }
                }
                sum as f64 / (255.0 * (self.roi.w * self.roi.h) as f64)
            }
            SimilarityMetric::Chamfer { filter } => {
                let warped_crop = ThermalImage::from_fn(self.roi.w, self.roi.h, |i, j| {
                    let (x, y) =
                        t.apply_inverse((self.roi.x + j) as f64, (self.roi.y + i) as f64);
                    sample_nearest(self.moving, x, y)
                });
                let edges = directional_valley(&warped_crop, &filter)
                    .expect("filter params validated before the search");
                chamfer_distance(self.reference_edges.as_ref().unwrap(), &edges)
                    .expect("crops share the region extents")
            }
        }
    }
}

/// Finds the transform aligning `moving` to `reference` within the region:
/// a full grid scan over (θ, t_x, t_y), then `refine_levels` local rounds
/// with halved steps around the incumbent. Returns the argmin under the
/// documented tie-break; never returns a transform outside the ranges.
pub fn register_by_roi(
    reference: &ThermalImage,
    moving: &ThermalImage,
    roi: Rect,
    sp: &SearchParams,
) -> Result<RigidTransform2D> {
    sp.validate()?;
    if let SimilarityMetric::Chamfer { filter } = sp.metric {
        filter.validate()?;
    }
    if !roi.fits(reference.width(), reference.height()) {
        return Err(Error::OutOfBounds {
            detail: format!(
                "region {}x{} at ({}, {}) exceeds reference {}x{}",
                roi.w,
                roi.h,
                roi.x,
                roi.y,
                reference.width(),
                reference.height()
            ),
        });
    }
    let scorer = RoiScorer::new(reference, moving, roi, sp.metric)?;

    // Coarse stage: integer-indexed grid so θ = 0 is hit exactly.
    let n_theta = (sp.theta_range / sp.theta_step + 1e-9).floor() as i64;
    let n_trans = (sp.trans_range / sp.trans_step + 1e-9).floor() as i64;
    let mut candidates = Vec::new();
    for kt in -n_theta..=n_theta {
        for ky in -n_trans..=n_trans {
            for kx in -n_trans..=n_trans {
                candidates.push(RigidTransform2D::new(
                    kt as f64 * sp.theta_step,
                    kx as f64 * sp.trans_step,
                    ky as f64 * sp.trans_step,
                ));
            }
        }
    }
    let scores: Vec<f64> = candidates.par_iter().map(|t| scorer.score(t)).collect();
    let (mut best_score, mut best) = select_best(&candidates, &scores);

    let within = |c: &RigidTransform2D| {
        c.theta.abs() <= sp.theta_range + 1e-9
            && c.t_x.abs() <= sp.trans_range + 1e-9
            && c.t_y.abs() <= sp.trans_range + 1e-9
    };
    for level in 1..=sp.refine_levels {
        let h_theta = sp.theta_step / f64::from(1u32 << level);
        let h_trans = sp.trans_step / f64::from(1u32 << level);
        let mut local = Vec::with_capacity(27);
        for dt in [-1.0, 0.0, 1.0] {
            for dy in [-1.0, 0.0, 1.0] {
                for dx in [-1.0, 0.0, 1.0] {
                    let c = RigidTransform2D::new(
                        best.theta + dt * h_theta,
                        best.t_x + dx * h_trans,
                        best.t_y + dy * h_trans,
                    );
                    // An edge incumbent may not be refined past the ranges.
                    if within(&c) {
                        local.push(c);
                    }
                }
            }
        }
        let scores: Vec<f64> = local.par_iter().map(|t| scorer.score(t)).collect();
        let (score, t) = select_best(&local, &scores);
        // The incumbent is among the local candidates, so the best local
        // score never regresses.
        best_score = score;
        best = t;
    }
    let _ = best_score;
    Ok(best)
}

/// Which frames the search sees and when the region is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// Detect the region on the reference frame first and register within
    /// it.
    RoiFirst,
    /// Register over the full frames, then detect the region once on the
    /// reference.
    RegisterFirst,
}

/// Output of [`register_sequence`]: the region used downstream and, per
/// frame, the fitted transform with the resampled (bilinear) frame. Frame 0
/// is the reference and carries the identity.
#[derive(Clone, Debug)]
pub struct SequenceRegistration {
    pub roi: Rect,
    pub frames: Vec<(RigidTransform2D, ThermalImage)>,
}

/// Registers every frame to the first. All frames must share extents.
pub fn register_sequence(
    frames: &[ThermalImage],
    mode: SequenceMode,
    sp: &SearchParams,
    filter_params: &FilterParams,
    roi_params: &RoiParams,
) -> Result<SequenceRegistration> {
    if frames.len() < 2 {
        return Err(Error::InvalidParams {
            detail: format!("sequence registration needs at least 2 frames, got {}", frames.len()),
        });
    }
    let reference = &frames[0];
    for f in &frames[1..] {
        if f.width() != reference.width() || f.height() != reference.height() {
            return Err(Error::DimensionMismatch {
                a_w: reference.width(),
                a_h: reference.height(),
                b_w: f.width(),
                b_h: f.height(),
            });
        }
    }
    let roi = detect_thyroid_roi(reference, filter_params, roi_params)?;
    let search_region = match mode {
        SequenceMode::RoiFirst => roi,
        SequenceMode::RegisterFirst => Rect {
            x: 0,
            y: 0,
            w: reference.width(),
            h: reference.height(),
        },
    };

    let mut out = Vec::with_capacity(frames.len());
    out.push((RigidTransform2D::identity(), reference.clone()));
    for frame in &frames[1..] {
        let t = register_by_roi(reference, frame, search_region, sp)?;
        let warped = warp_image(frame, &t, Interpolation::Bilinear);
        out.push((t, warped));
    }
    Ok(SequenceRegistration { roi, frames: out })
}

/// Renders transforms as the `frame theta t_x t_y` text form, one line per
/// frame, six decimal places.
pub fn format_transforms(transforms: &[(usize, RigidTransform2D)]) -> String {
    let mut text = String::new();
    for (frame, t) in transforms {
        text.push_str(&format!(
            "{} {:.6} {:.6} {:.6}\n",
            frame, t.theta, t.t_x, t.t_y
        ));
    }
    text
}

pub fn write_transforms_file(path: &Path, transforms: &[(usize, RigidTransform2D)]) -> Result<()> {
    fs::write(path, format_transforms(transforms)).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Parses the `frame theta t_x t_y` form; `#` comments and blank lines are
/// ignored.
pub fn parse_transforms(text: &str) -> Result<Vec<(usize, RigidTransform2D)>> {
    let mut out = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                what: "transforms".into(),
                detail: format!(
                    "line {}: expected 4 fields `frame theta t_x t_y`, got {}",
                    line_no + 1,
                    fields.len()
                ),
            });
        }
        let frame: usize = fields[0].parse().map_err(|_| Error::Parse {
            what: "transforms".into(),
            detail: format!("line {}: frame index {:?} is not an integer", line_no + 1, fields[0]),
        })?;
        let mut nums = [0.0f64; 3];
        for (k, f) in fields[1..].iter().enumerate() {
            nums[k] = f.parse().map_err(|_| Error::Parse {
                what: "transforms".into(),
                detail: format!("line {}: {:?} is not a number", line_no + 1, f),
            })?;
        }
        out.push((frame, RigidTransform2D::new(nums[0], nums[1], nums[2])));
    }
    Ok(out)
}

pub fn read_transforms_file(path: &Path) -> Result<Vec<(usize, RigidTransform2D)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_transforms(&text)
}
