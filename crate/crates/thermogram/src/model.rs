//! Core raster types shared by every stage.
//!
//! Coordinate convention, used everywhere in this crate: a pixel address is
//! written `(i, j)` where `i` is the row (0 at the top) and `j` is the
//! column (0 at the left). Geometric points and [`Rect`] use `(x, y)` where
//! `x = j` (column) and `y = i` (row). Buffers are row-major.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Linear map between 8-bit intensity and temperature in degrees Celsius.
///
/// Intensity 0 corresponds to `t_min`, intensity 255 to `t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t_min: f64,
    pub t_max: f64,
}

impl Calibration {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() || t_min >= t_max {
            return Err(Error::InvalidParams {
                detail: format!("calibration requires t_min < t_max, got [{t_min}, {t_max}]"),
            });
        }
        Ok(Calibration { t_min, t_max })
    }

    /// Temperature represented by an intensity value.
    pub fn temperature(&self, value: u8) -> f64 {
        self.t_min + f64::from(value) / 255.0 * (self.t_max - self.t_min)
    }

    /// Intensity representing a temperature, rounded half-up and clamped.
    pub fn intensity(&self, temp: f64) -> u8 {
        let v = 255.0 * (temp - self.t_min) / (self.t_max - self.t_min);
        round_half_up(v).clamp(0.0, 255.0) as u8
    }
}

/// Acquisition conditions recorded alongside a thermogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMetadata {
    /// Room temperature in degrees Celsius.
    pub room_temp: f64,
    /// Relative humidity in percent.
    pub rel_humidity: f64,
    /// Position of this frame within its capture sequence, 0-based.
    pub frame_index: u32,
    /// Seconds between consecutive frames of the sequence.
    pub capture_interval: f64,
    /// Camera-to-subject distance in meters.
    pub distance_to_camera: f64,
}

/// Axis-aligned rectangle: top-left corner `(x, y)`, extent `w` x `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidParams {
                detail: format!("rectangle extent must be positive, got {w}x{h}"),
            });
        }
        Ok(Rect { x, y, w, h })
    }

    /// One past the rightmost column.
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    /// One past the bottom row.
    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    /// True when the rectangle lies fully inside a `width` x `height` image.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                detail: format!(
                    "rectangle {}x{} at ({}, {}) exceeds {}x{}",
                    self.w, self.h, self.x, self.y, width, height
                ),
            })
        }
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for Rect {
    type Err = Error;

    /// Parses the `"x y w h"` form used by rect files and CLI flags.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                what: "rectangle".into(),
                detail: format!("expected 4 fields `x y w h`, got {}", parts.len()),
            });
        }
        let mut nums = [0usize; 4];
        for (k, p) in parts.iter().enumerate() {
            nums[k] = p.parse().map_err(|_| Error::Parse {
                what: "rectangle".into(),
                detail: format!("field {:?} is not a non-negative integer", p),
            })?;
        }
        Rect::new(nums[0], nums[1], nums[2], nums[3])
    }
}

/// 8-bit grayscale thermogram, optionally calibrated.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    calibration: Option<Calibration>,
    metadata: Option<AcquisitionMetadata>,
}

impl ThermalImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams {
                detail: format!("image extent must be positive, got {width}x{height}"),
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParams {
                detail: format!(
                    "pixel buffer holds {} values, {}x{} needs {}",
                    pixels.len(),
                    width,
                    height,
                    width * height
                ),
            });
        }
        Ok(ThermalImage {
            width,
            height,
            pixels,
            calibration: None,
            metadata: None,
        })
    }

    /// Builds an image by evaluating `f(i, j)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                pixels.push(f(i, j));
            }
        }
        ThermalImage::new(width, height, pixels).expect("from_fn extents are positive")
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        ThermalImage::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Unchecked accessor; panics when `(i, j)` is outside the image.
    pub fn pixel(&self, i: usize, j: usize) -> u8 {
        assert!(i < self.height && j < self.width, "pixel ({i}, {j}) out of bounds");
        self.pixels[i * self.width + j]
    }

    /// Checked accessor.
    pub fn get(&self, i: usize, j: usize) -> Option<u8> {
        if i < self.height && j < self.width {
            Some(self.pixels[i * self.width + j])
        } else {
            None
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: u8) {
        assert!(i < self.height && j < self.width, "pixel ({i}, {j}) out of bounds");
        self.pixels[i * self.width + j] = value;
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.calibration
    }

    pub fn metadata(&self) -> Option<&AcquisitionMetadata> {
        self.metadata.as_ref()
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Self {
        self.calibration = Some(calibration);
        self
    }

    pub fn with_metadata(mut self, metadata: AcquisitionMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    /// Temperature at a pixel; requires calibration.
    pub fn temperature_at(&self, i: usize, j: usize) -> Result<f64> {
        let value = self.get(i, j).ok_or_else(|| Error::OutOfBounds {
            detail: format!("pixel ({i}, {j}) outside {}x{}", self.width, self.height),
        })?;
        let calib = self.calibration.ok_or(Error::NoCalibration)?;
        Ok(calib.temperature(value))
    }

    /// Copies the rectangle into a new image, carrying calibration and
    /// metadata over.
    pub fn crop(&self, rect: Rect) -> Result<ThermalImage> {
        rect.check_fits(self.width, self.height)?;
        let mut pixels = Vec::with_capacity(rect.w * rect.h);
        for i in rect.y..rect.bottom() {
            let row = &self.pixels[i * self.width + rect.x..i * self.width + rect.right()];
            pixels.extend_from_slice(row);
        }
        let mut out = ThermalImage::new(rect.w, rect.h, pixels)?;
        out.calibration = self.calibration;
        out.metadata = self.metadata.clone();
        Ok(out)
    }
}

/// Per-pixel mask with values in `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams {
                detail: format!("mask extent must be positive, got {width}x{height}"),
            });
        }
        if values.len() != width * height {
            return Err(Error::InvalidParams {
                detail: format!(
                    "mask buffer holds {} values, {}x{} needs {}",
                    values.len(),
                    width,
                    height,
                    width * height
                ),
            });
        }
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParams {
                detail: format!("mask values must be 0 or 1, found {v}"),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                values.push(u8::from(f(i, j)));
            }
        }
        BinaryMask::new(width, height, values).expect("from_fn values are 0/1")
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Unchecked accessor; panics when `(i, j)` is outside the mask.
    pub fn value(&self, i: usize, j: usize) -> u8 {
        assert!(i < self.height && j < self.width, "mask ({i}, {j}) out of bounds");
        self.values[i * self.width + j]
    }

    pub fn is_set(&self, i: usize, j: usize) -> bool {
        self.value(i, j) == 1
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        assert!(i < self.height && j < self.width, "mask ({i}, {j}) out of bounds");
        self.values[i * self.width + j] = u8::from(on);
    }

    /// Number of set pixels over the whole mask.
    pub fn count_ones(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    /// Renders the mask as an image with set pixels at 255.
    pub fn to_image(&self) -> ThermalImage {
        ThermalImage::from_fn(self.width, self.height, |i, j| self.value(i, j) * 255)
    }

    /// Copies the rectangle into a new mask.
    pub fn crop(&self, rect: Rect) -> Result<BinaryMask> {
        rect.check_fits(self.width, self.height)?;
        let mut values = Vec::with_capacity(rect.w * rect.h);
        for i in rect.y..rect.bottom() {
            let row = &self.values[i * self.width + rect.x..i * self.width + rect.right()];
            values.extend_from_slice(row);
        }
        BinaryMask::new(rect.w, rect.h, values)
    }
}

/// Rounds to the nearest integer with halves going up.
pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}
