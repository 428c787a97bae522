//! Resampling an image under a rigid transform.

use serde::{Deserialize, Serialize};

use crate::model::{round_half_up, ThermalImage};

use super::transform::RigidTransform2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Bilinear,
}

/// Warps the image so that content moves by `t`: each output pixel is the
/// source sampled at the inverse-mapped position (zero outside the source).
/// Output extents match the input; calibration and metadata carry over.
pub fn warp_image(img: &ThermalImage, t: &RigidTransform2D, interp: Interpolation) -> ThermalImage {
    let (w, h) = (img.width(), img.height());
    let mut out = ThermalImage::from_fn(w, h, |i, j| {
        let (x, y) = t.apply_inverse(j as f64, i as f64);
        match interp {
            Interpolation::Nearest => sample_nearest(img, x, y),
            Interpolation::Bilinear => sample_bilinear(img, x, y),
        }
    });
    if let Some(c) = img.calibration() {
        out = out.with_calibration(c);
    }
    if let Some(m) = img.metadata() {
        out = out.with_metadata(m.clone());
    }
    out
}

pub(crate) fn sample_nearest(img: &ThermalImage, x: f64, y: f64) -> u8 {
    let xi = x.round();
    let yi = y.round();
    if xi < 0.0 || yi < 0.0 || xi >= img.width() as f64 || yi >= img.height() as f64 {
        return 0;
    }
    img.pixel(yi as usize, xi as usize)
}

pub(crate) fn sample_bilinear(img: &ThermalImage, x: f64, y: f64) -> u8 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fetch = |ix: f64, iy: f64| -> f64 {
        if ix < 0.0 || iy < 0.0 || ix >= img.width() as f64 || iy >= img.height() as f64 {
            0.0
        } else {
            f64::from(img.pixel(iy as usize, ix as usize))
        }
    };
    let v = fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + fetch(x0 + 1.0, y0) * fx * (1.0 - fy)
        + fetch(x0, y0 + 1.0) * (1.0 - fx) * fy
        + fetch(x0 + 1.0, y0 + 1.0) * fx * fy;
    round_half_up(v).clamp(0.0, 255.0) as u8
}
