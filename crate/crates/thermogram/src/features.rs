//! Threshold segmentation and the four screening features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryMask, Rect, ThermalImage};

/// The four features extracted from a region of interest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Mean intensity of the segmented hot region, scaled to [0, 1].
    pub mean_norm: f64,
    /// Population standard deviation of the hot region on the raw 0-255
    /// scale, so in [0, 127.5].
    pub std_raw: f64,
    /// Maximal intensity of the hot region, scaled to [0, 1].
    pub max_norm: f64,
    /// Mirror-asymmetry of the full region, in [0, 1].
    pub asymmetry: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mean_norm, self.std_raw, self.max_norm, self.asymmetry]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams {
                detail: "feature values must be finite".into(),
            });
        }
        let unit_ok = |v: f64| (0.0..=1.0).contains(&v);
        if !unit_ok(self.mean_norm) || !unit_ok(self.max_norm) || !unit_ok(self.asymmetry) {
            return Err(Error::InvalidParams {
                detail: "mean_norm, max_norm and asymmetry must lie in [0, 1]".into(),
            });
        }
        if !(0.0..=127.5).contains(&self.std_raw) {
            return Err(Error::InvalidParams {
                detail: "std_raw must lie in [0, 127.5]".into(),
            });
        }
        Ok(())
    }
}

/// Marks every pixel at or above the cutoff.
pub fn threshold(img: &ThermalImage, cutoff: u8) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |i, j| img.pixel(i, j) >= cutoff)
}

/// Statistics over the masked pixels: normalized mean, raw-scale population
/// standard deviation, normalized maximum.
pub fn segment_stats(img: &ThermalImage, mask: &BinaryMask) -> Result<(f64, f64, f64)> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::DimensionMismatch {
            a_w: img.width(),
            a_h: img.height(),
            b_w: mask.width(),
            b_h: mask.height(),
        });
    }
    let mut count = 0u64;
    let mut sum = 0u64;
    let mut sum_sq = 0u64;
    let mut max = 0u8;
    for i in 0..img.height() {
        for j in 0..img.width() {
            if mask.is_set(i, j) {
                let v = img.pixel(i, j);
                count += 1;
                sum += u64::from(v);
                sum_sq += u64::from(v) * u64::from(v);
                max = max.max(v);
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptySegment);
    }
    let n = count as f64;
    let mean = sum as f64 / n;
    let variance = (sum_sq as f64 / n - mean * mean).max(0.0);
    Ok((mean / 255.0, variance.sqrt(), f64::from(max) / 255.0))
}

/// Mirror-asymmetry of a region about its vertical center line.
///
/// Each pixel is compared with the 3x3 neighborhood of its mirror pixel in
/// column `n−1−j`; the per-pixel term is the smallest absolute intensity
/// difference among those candidates (neighbor indices clamped into the
/// image), normalized by 255. The result is the mean term over all pixels,
/// so both halves contribute and a perfectly mirror-symmetric region scores
/// exactly 0.
pub fn asymmetry(img: &ThermalImage) -> f64 {
    let (n, m) = (img.width(), img.height());
    let mut sum = 0u64;
    for i in 0..m {
        for j in 0..n {
            let v = i32::from(img.pixel(i, j));
            let mirror_j = n - 1 - j;
            let mut best = i32::MAX;
            for p in -1isize..=1 {
                for q in -1isize..=1 {
                    let ni = (i as isize + p).clamp(0, m as isize - 1) as usize;
                    let nj = (mirror_j as isize + q).clamp(0, n as isize - 1) as usize;
                    best = best.min((v - i32::from(img.pixel(ni, nj))).abs());
                }
            }
            sum += best as u64;
        }
    }
    sum as f64 / (255.0 * (m * n) as f64)
}

/// Crops the region, segments it at the cutoff, and assembles the feature
/// vector. Asymmetry is computed on the full cropped region, not the mask.
pub fn extract_features(img: &ThermalImage, roi: Rect, cutoff: u8) -> Result<FeatureVector> {
    let crop = img.crop(roi)?;
    let mask = threshold(&crop, cutoff);
    let (mean_norm, std_raw, max_norm) = segment_stats(&crop, &mask)?;
    Ok(FeatureVector {
        mean_norm,
        std_raw,
        max_norm,
        asymmetry: asymmetry(&crop),
    })
}
