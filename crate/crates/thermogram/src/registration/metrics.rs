//! Similarity scores used by the registration search.

use crate::error::{Error, Result};
use crate::model::{BinaryMask, Rect, ThermalImage};

/// Score returned by [`chamfer_distance`] when exactly one mask is empty:
/// worse than any finite alignment.
pub const MAX_SCORE: f64 = f64::INFINITY;

/// Mean absolute intensity difference over a region, scaled to [0, 1].
pub fn mean_abs_difference(
    reference: &ThermalImage,
    moving: &ThermalImage,
    region: Rect,
) -> Result<f64> {
    for img in [reference, moving] {
        if !region.fits(img.width(), img.height()) {
            return Err(Error::OutOfBounds {
                detail: format!(
                    "region {}x{} at ({}, {}) exceeds image {}x{}",
                    region.w,
                    region.h,
                    region.x,
                    region.y,
                    img.width(),
                    img.height()
                ),
            });
        }
    }
    let mut sum = 0u64;
    for i in region.y..region.bottom() {
        for j in region.x..region.right() {
            let a = i64::from(reference.pixel(i, j));
            let b = i64::from(moving.pixel(i, j));
            sum += a.abs_diff(b);
        }
    }
    Ok(sum as f64 / (255.0 * (region.w * region.h) as f64))
}

/// Symmetric mean Chamfer distance between two same-size masks: the average
/// of each mask's set pixels' Euclidean distances to the other mask's
/// nearest set pixel, averaged over both directions. Both masks empty gives
/// 0; exactly one empty gives [`MAX_SCORE`].
pub fn chamfer_distance(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    let na = a.count_ones();
    let nb = b.count_ones();
    if na == 0 && nb == 0 {
        return Ok(0.0);
    }
    if na == 0 || nb == 0 {
        return Ok(MAX_SCORE);
    }
    let mean_ab = mean_distance_to(a, &distance_squared_transform(b));
    let mean_ba = mean_distance_to(b, &distance_squared_transform(a));
    Ok(0.5 * (mean_ab + mean_ba))
}

fn mean_distance_to(from: &BinaryMask, dt_squared: &[f64]) -> f64 {
    let w = from.width();
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for i in 0..from.height() {
        for j in 0..w {
            if from.is_set(i, j) {
                sum += dt_squared[i * w + j].sqrt();
                count += 1;
            }
        }
    }
    sum / count as f64
}

/// Exact squared Euclidean distance transform (two-pass lower-envelope
/// method). Columns with no set pixel use a finite sentinel larger than any
/// real squared distance so the row pass stays well defined; callers ensure
/// the mask is nonempty.
pub(crate) fn distance_squared_transform(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let sentinel = ((w + h) * (w + h)) as f64;

    // Pass 1: per column, squared distance to the nearest set pixel along
    // the column (two linear sweeps over row offsets).
    let mut colwise = vec![sentinel; w * h];
    for j in 0..w {
        let mut nearest: Option<usize> = None;
        for i in 0..h {
            if mask.is_set(i, j) {
                nearest = Some(i);
            }
            if let Some(n) = nearest {
                let d = (i - n) as f64;
                colwise[i * w + j] = d * d;
            }
        }
        nearest = None;
        for i in (0..h).rev() {
            if mask.is_set(i, j) {
                nearest = Some(i);
            }
            if let Some(n) = nearest {
                let d = (n - i) as f64;
                colwise[i * w + j] = colwise[i * w + j].min(d * d);
            }
        }
    }

    // Pass 2: per row, lower envelope of the parabolas rooted at the
    // column-wise distances.
    let mut out = vec![0.0f64; w * h];
    let mut f = vec![0.0f64; w];
    for i in 0..h {
        f.copy_from_slice(&colwise[i * w..(i + 1) * w]);
        envelope_1d(&f, &mut out[i * w..(i + 1) * w]);
    }
    out
}

/// One-dimensional squared-distance transform of a sampled function:
/// `out[q] = min over p of f[p] + (q − p)²`.
fn envelope_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if n == 1 {
        out[0] = f[0];
        return;
    }
    let mut hull = vec![0usize; n];
    let mut bounds = vec![0.0f64; n + 1];
    let mut k = 0usize;
    hull[0] = 0;
    bounds[0] = f64::NEG_INFINITY;
    bounds[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = hull[k];
            // Intersection of the parabolas rooted at p and q.
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= bounds[k] {
                if k == 0 {
                    hull[0] = q;
                    bounds[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                hull[k] = q;
                bounds[k] = s;
                bounds[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while bounds[k + 1] < q as f64 {
            k += 1;
        }
        let p = hull[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
}
