//! Autonomous region-of-interest detection.
//!
//! The valley filter marks thin dark structures on the neck. The densest
//! window of that mask is taken as the region of interest: a rectangle slid
//! over every candidate position, scored by white-pixel count. Small bright
//! residues such as a skin marker are removed first by locating the densest
//! reduced window and erasing it, then the full-size scan runs bottom-up so
//! that lower placements win ties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{directional_valley, FilterParams};
use crate::model::{BinaryMask, Rect, ThermalImage};

/// Direction the candidate rows are visited in. Columns always go
/// left-to-right within a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Rows from the top of the image downward.
    TopDown,
    /// Rows from the bottom upward.
    BottomUp,
}

/// Sliding-window search configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    /// Extent of the region-of-interest window.
    pub roi_w: usize,
    pub roi_h: usize,
    /// Extent of the reduced window used to erase residues.
    pub residual_w: usize,
    pub residual_h: usize,
    /// How many erase passes to run before the final scan.
    pub residual_passes: usize,
    pub scan: ScanOrder,
    /// Step between candidate positions, in pixels.
    pub stride: usize,
}

impl Default for RoiParams {
    fn default() -> Self {
        RoiParams {
            roi_w: 330,
            roi_h: 310,
            residual_w: 110,
            residual_h: 110,
            residual_passes: 1,
            scan: ScanOrder::BottomUp,
            stride: 1,
        }
    }
}

impl RoiParams {
    pub fn validate(&self) -> Result<()> {
        if self.roi_w == 0 || self.roi_h == 0 || self.residual_w == 0 || self.residual_h == 0 {
            return Err(Error::InvalidParams {
                detail: "window extents must be at least 1".into(),
            });
        }
        if self.stride == 0 {
            return Err(Error::InvalidParams {
                detail: "stride must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Number of set pixels inside the rectangle, counted directly.
pub fn count_white(mask: &BinaryMask, rect: Rect) -> Result<usize> {
    if !rect.fits(mask.width(), mask.height()) {
        return Err(Error::OutOfBounds {
            detail: format!(
                "rectangle {}x{} at ({}, {}) exceeds mask {}x{}",
                rect.w,
                rect.h,
                rect.x,
                rect.y,
                mask.width(),
                mask.height()
            ),
        });
    }
    let mut count = 0usize;
    for i in rect.y..rect.bottom() {
        for j in rect.x..rect.right() {
            count += mask.value(i, j) as usize;
        }
    }
    Ok(count)
}

/// Summed-area table with a zero border row/column, so any window count is
/// four lookups.
fn summed_area(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for i in 0..h {
        let mut row_sum = 0u32;
        for j in 0..w {
            row_sum += u32::from(mask.value(i, j));
            sat[(i + 1) * (w + 1) + (j + 1)] = sat[i * (w + 1) + (j + 1)] + row_sum;
        }
    }
    sat
}

fn window_count(sat: &[u32], table_w: usize, x: usize, y: usize, w: usize, h: usize) -> u32 {
    let a = sat[y * table_w + x];
    let b = sat[y * table_w + (x + w)];
    let c = sat[(y + h) * table_w + x];
    let d = sat[(y + h) * table_w + (x + w)];
    d + a - b - c
}

/// Finds the `w` x `h` window with the most set pixels. Candidate positions
/// step by `stride` from 0; ties go to the first candidate in scan order.
pub fn find_roi(
    mask: &BinaryMask,
    w: usize,
    h: usize,
    scan: ScanOrder,
    stride: usize,
) -> Result<Rect> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidParams {
            detail: "window extents must be at least 1".into(),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidParams {
            detail: "stride must be at least 1".into(),
        });
    }
    if w > mask.width() || h > mask.height() {
        return Err(Error::RectLargerThanImage {
            window_w: w,
            window_h: h,
            width: mask.width(),
            height: mask.height(),
        });
    }

    let sat = summed_area(mask);
    let table_w = mask.width() + 1;
    let xs: Vec<usize> = (0..=mask.width() - w).step_by(stride).collect();
    let mut ys: Vec<usize> = (0..=mask.height() - h).step_by(stride).collect();
    if scan == ScanOrder::BottomUp {
        ys.reverse();
    }

    let mut best: Option<(u32, Rect)> = None;
    for &y in &ys {
        for &x in &xs {
            let count = window_count(&sat, table_w, x, y, w, h);
            if best.map_or(true, |(b, _)| count > b) {
                best = Some((count, Rect { x, y, w, h }));
            }
        }
    }
    Ok(best.expect("at least one candidate position exists").1)
}

/// Erases the densest `residual_w` x `residual_h` window, `passes` times.
/// Each pass locates the window with a top-down stride-1 scan and zeroes
/// the whole rectangle.
pub fn remove_residuals(
    mask: &BinaryMask,
    residual_w: usize,
    residual_h: usize,
    passes: usize,
) -> Result<BinaryMask> {
    let mut out = mask.clone();
    for _ in 0..passes {
        let rect = find_roi(&out, residual_w, residual_h, ScanOrder::TopDown, 1)?;
        for i in rect.y..rect.bottom() {
            for j in rect.x..rect.right() {
                out.set(i, j, false);
            }
        }
    }
    Ok(out)
}

/// End-to-end localization: filter, residual removal, bottom-anchored scan.
pub fn detect_thyroid_roi(
    img: &ThermalImage,
    filter_params: &FilterParams,
    roi_params: &RoiParams,
) -> Result<Rect> {
    roi_params.validate()?;
    let mask = directional_valley(img, filter_params)?;
    let cleaned = remove_residuals(
        &mask,
        roi_params.residual_w,
        roi_params.residual_h,
        roi_params.residual_passes,
    )?;
    find_roi(
        &cleaned,
        roi_params.roi_w,
        roi_params.roi_h,
        roi_params.scan,
        roi_params.stride,
    )
}

/// Draws a one-pixel rectangle outline, for inspection overlays.
pub fn draw_rect_border(img: &ThermalImage, rect: Rect, intensity: u8) -> Result<ThermalImage> {
    if !rect.fits(img.width(), img.height()) {
        return Err(Error::OutOfBounds {
            detail: format!(
                "rectangle {}x{} at ({}, {}) exceeds image {}x{}",
                rect.w,
                rect.h,
                rect.x,
                rect.y,
                img.width(),
                img.height()
            ),
        });
    }
    let mut out = img.clone();
    for j in rect.x..rect.right() {
        out.set(rect.y, j, intensity);
        out.set(rect.bottom() - 1, j, intensity);
    }
    for i in rect.y..rect.bottom() {
        out.set(i, rect.x, intensity);
        out.set(i, rect.right() - 1, intensity);
    }
    Ok(out)
}
