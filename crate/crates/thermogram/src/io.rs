//! Raster and text-format input/output.
//!
//! Rasters are 8-bit grayscale PNG or PGM (binary `P5` and ASCII `P2` are
//! both read; writes pick the format from the file extension). A raster may
//! be accompanied by a sidecar file with the same path but a `.toml`
//! extension carrying calibration and acquisition metadata; the sidecar is
//! read and written automatically when present. Temperature grids come as
//! comma-separated text, one row per line; row numbers in error messages
//! are 1-based, matching what editors display.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AcquisitionMetadata, Calibration, ThermalImage};

/// Sidecar schema. Calibration keys come as a pair; the five acquisition
/// keys come all together or not at all.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    t_min: Option<f64>,
    t_max: Option<f64>,
    room_temp: Option<f64>,
    rel_humidity: Option<f64>,
    frame_index: Option<u32>,
    capture_interval: Option<f64>,
    distance_to_camera: Option<f64>,
}

fn sidecar_path(raster: &Path) -> PathBuf {
    raster.with_extension("toml")
}

fn parse_sidecar(path: &Path, text: &str) -> Result<(Option<Calibration>, Option<AcquisitionMetadata>)> {
    let sc: Sidecar = toml::from_str(text).map_err(|e| Error::Parse {
        what: format!("sidecar {}", path.display()),
        detail: e.to_string(),
    })?;
    let calibration = match (sc.t_min, sc.t_max) {
        (Some(t_min), Some(t_max)) => Some(Calibration::new(t_min, t_max)?),
        (None, None) => None,
        _ => {
            return Err(Error::Parse {
                what: format!("sidecar {}", path.display()),
                detail: "t_min and t_max must be given together".into(),
            })
        }
    };
    let acq = [
        sc.room_temp.is_some(),
        sc.rel_humidity.is_some(),
        sc.frame_index.is_some(),
        sc.capture_interval.is_some(),
        sc.distance_to_camera.is_some(),
    ];
    let metadata = if acq.iter().all(|&p| p) {
        Some(AcquisitionMetadata {
            room_temp: sc.room_temp.unwrap(),
            rel_humidity: sc.rel_humidity.unwrap(),
            frame_index: sc.frame_index.unwrap(),
            capture_interval: sc.capture_interval.unwrap(),
            distance_to_camera: sc.distance_to_camera.unwrap(),
        })
    } else if acq.iter().all(|&p| !p) {
        None
    } else {
        return Err(Error::Parse {
            what: format!("sidecar {}", path.display()),
            detail: "acquisition keys (room_temp, rel_humidity, frame_index, \
                     capture_interval, distance_to_camera) must be given together"
                .into(),
        });
    };
    Ok((calibration, metadata))
}

/// Loads a grayscale raster, picking up an adjacent `.toml` sidecar when one
/// exists.
pub fn load_image(path: &Path) -> Result<ThermalImage> {
    let dynamic = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: io.to_string(),
        },
        other => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let buf = match dynamic {
        DynamicImage::ImageLuma8(buf) => buf,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("expected 8-bit grayscale, got {:?}", other.color()),
            })
        }
    };
    let (width, height) = (buf.width() as usize, buf.height() as usize);
    let mut img = ThermalImage::new(width, height, buf.into_raw())?;

    let sc_path = sidecar_path(path);
    if sc_path.exists() {
        let text = fs::read_to_string(&sc_path).map_err(|e| Error::UnreadableFile {
            path: sc_path.clone(),
            reason: e.to_string(),
        })?;
        let (calibration, metadata) = parse_sidecar(&sc_path, &text)?;
        if let Some(c) = calibration {
            img = img.with_calibration(c);
        }
        if let Some(m) = metadata {
            img = img.with_metadata(m);
        }
    }
    Ok(img)
}

/// Saves a raster as PNG or PGM depending on the file extension.
pub fn save_image(img: &ThermalImage, path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if !matches!(ext.as_str(), "png" | "pgm" | "pnm") {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("cannot write extension {ext:?}, use png or pgm"),
        });
    }
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.pixels().to_vec(),
    )
    .expect("pixel buffer length matches extents");
    buf.save(path).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Saves a raster and, when the image carries calibration or metadata, an
/// adjacent `.toml` sidecar.
pub fn save_image_with_sidecar(img: &ThermalImage, path: &Path) -> Result<()> {
    save_image(img, path)?;
    if img.calibration().is_none() && img.metadata().is_none() {
        return Ok(());
    }
    let sc = Sidecar {
        t_min: img.calibration().map(|c| c.t_min),
        t_max: img.calibration().map(|c| c.t_max),
        room_temp: img.metadata().map(|m| m.room_temp),
        rel_humidity: img.metadata().map(|m| m.rel_humidity),
        frame_index: img.metadata().map(|m| m.frame_index),
        capture_interval: img.metadata().map(|m| m.capture_interval),
        distance_to_camera: img.metadata().map(|m| m.distance_to_camera),
    };
    let text = toml::to_string(&sc).map_err(|e| Error::Parse {
        what: "sidecar".into(),
        detail: e.to_string(),
    })?;
    let sc_path = sidecar_path(path);
    fs::write(&sc_path, text).map_err(|e| Error::UnwritableFile {
        path: sc_path,
        reason: e.to_string(),
    })
}

/// Reads a comma-separated temperature grid and quantizes it to intensities
/// under the given calibration. The result carries that calibration.
pub fn load_temperature_csv(path: &Path, calibration: Calibration) -> Result<ThermalImage> {
    let text = fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_temperature_grid(&text, calibration)
}

/// Parses comma-separated temperature rows; exposed for in-memory use.
pub fn parse_temperature_grid(text: &str, calibration: Calibration) -> Result<ThermalImage> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let trimmed = cell.trim();
            let value: f64 = trimmed.parse().map_err(|_| Error::NonNumericCell {
                row: line_no + 1,
                col: col + 1,
                text: trimmed.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    row: line_no + 1,
                    col: col + 1,
                    text: trimmed.to_string(),
                });
            }
            cells.push(value);
        }
        if let Some(first) = rows.first() {
            if cells.len() != first.len() {
                return Err(Error::RaggedRows {
                    row: line_no + 1,
                    expected: first.len(),
                    got: cells.len(),
                });
            }
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            what: "temperature grid".into(),
            detail: "no rows".into(),
        });
    }
    let width = rows[0].len();
    let height = rows.len();
    let mut pixels = Vec::with_capacity(width * height);
    for row in &rows {
        for &t in row {
            pixels.push(calibration.intensity(t));
        }
    }
    Ok(ThermalImage::new(width, height, pixels)?.with_calibration(calibration))
}
