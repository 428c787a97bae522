//! Deterministic synthetic neck phantom: a flat background crossed by two
//! dark vertical bands, an optional marker square, and an optional hot
//! Gaussian nodule, rendered per frame through a rigid jitter list with
//! optional Gaussian pixel noise. Every stage of the toolkit can be
//! exercised against the analytic ground truth this module also exposes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{round_half_up, BinaryMask, Rect, ThermalImage};
use crate::registration::RigidTransform2D;

/// Half-open column range `start <= j < end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub start: usize,
    pub end: usize,
}

/// Bright marker square overriding the scene, as on chin markers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    #[serde(flatten)]
    pub rect: Rect,
    pub intensity: u8,
}

/// Isotropic additive Gaussian hot spot, truncated at `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nodule {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub peak: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub background: u8,
    pub band_intensity: u8,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// The two dark vertical neck borders, rendered full height.
    pub bands: [ColumnSpan; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<Marker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodule: Option<Nodule>,
    /// Per-frame rigid jitter; the list length is the frame count and
    /// entry 0 must be the identity.
    #[serde(default = "default_jitter")]
    pub jitter: Vec<RigidTransform2D>,
}

fn default_jitter() -> Vec<RigidTransform2D> {
    vec![RigidTransform2D::identity()]
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::SpecOutOfBounds { detail });
        if self.width == 0 || self.height == 0 {
            return fail(format!("image extent must be positive, got {}x{}", self.width, self.height));
        }
        for (k, band) in self.bands.iter().enumerate() {
            if band.start >= band.end || band.end > self.width {
                return fail(format!(
                    "band {} columns [{}, {}) must satisfy start < end <= width {}",
                    k, band.start, band.end, self.width
                ));
            }
        }
        if let Some(marker) = &self.marker {
            if !marker.rect.fits(self.width, self.height) {
                return fail(format!("marker {} exceeds the {}x{} scene", marker.rect, self.width, self.height));
            }
        }
        if let Some(n) = &self.nodule {
            if !(n.center_x.is_finite() && n.center_y.is_finite())
                || n.center_x < 0.0
                || n.center_x >= self.width as f64
                || n.center_y < 0.0
                || n.center_y >= self.height as f64
            {
                return fail(format!(
                    "nodule center ({}, {}) must lie inside the {}x{} scene",
                    n.center_x, n.center_y, self.width, self.height
                ));
            }
            if !(n.radius.is_finite() && n.radius > 0.0) {
                return fail(format!("nodule radius must be positive, got {}", n.radius));
            }
            if !(n.sigma.is_finite() && n.sigma > 0.0) {
                return fail(format!("nodule sigma must be positive, got {}", n.sigma));
            }
            if !(n.peak.is_finite() && (0.0..=255.0).contains(&n.peak)) {
                return fail(format!("nodule peak must be within [0, 255], got {}", n.peak));
            }
        }
        if self.jitter.is_empty() {
            return fail("jitter list must name at least one frame".into());
        }
        let first = &self.jitter[0];
        if first.theta != 0.0 || first.t_x != 0.0 || first.t_y != 0.0 {
            return fail("frame 0 jitter must be the identity".into());
        }
        for (k, t) in self.jitter.iter().enumerate() {
            if !(t.theta.is_finite() && t.t_x.is_finite() && t.t_y.is_finite()) {
                return fail(format!("jitter {} has non-finite components", k));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return fail(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }

    /// Frame count, i.e. the jitter list length.
    pub fn frames(&self) -> usize {
        self.jitter.len()
    }
}

/// Analytic truth for a spec, for use in assertions.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Full-height rectangles covering the two bands.
    pub bands: [Rect; 2],
    pub marker: Option<Rect>,
    /// Scene pixels whose quantized intensity reaches the cutoff.
    pub nodule_mask: BinaryMask,
    /// The jitter list, verbatim.
    pub jitter: Vec<RigidTransform2D>,
}

/// The noiseless, unjittered scene as a real-valued grid in [0, 255].
fn build_scene(spec: &PhantomSpec) -> Vec<f64> {
    let (w, h) = (spec.width, spec.height);
    let mut scene = vec![f64::from(spec.background); w * h];
    for band in &spec.bands {
        for i in 0..h {
            for j in band.start..band.end {
                scene[i * w + j] = f64::from(spec.band_intensity);
            }
        }
    }
    if let Some(marker) = &spec.marker {
        for i in marker.rect.y..marker.rect.bottom() {
            for j in marker.rect.x..marker.rect.right() {
                scene[i * w + j] = f64::from(marker.intensity);
            }
        }
    }
    if let Some(n) = &spec.nodule {
        for i in 0..h {
            for j in 0..w {
                let dx = j as f64 - n.center_x;
                let dy = i as f64 - n.center_y;
                let r2 = dx * dx + dy * dy;
                if r2 <= n.radius * n.radius {
                    let v = scene[i * w + j] + n.peak * (-r2 / (2.0 * n.sigma * n.sigma)).exp();
                    scene[i * w + j] = v.clamp(0.0, 255.0);
                }
            }
        }
    }
    scene
}

/// Bilinear sample of the scene grid; out-of-bounds taps contribute 0.
fn sample_scene(scene: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fetch = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            0.0
        } else {
            scene[yi as usize * w + xi as usize]
        }
    };
    let c00 = fetch(x0, y0);
    let c10 = fetch(x0 + 1.0, y0);
    let c01 = fetch(x0, y0 + 1.0);
    let c11 = fetch(x0 + 1.0, y0 + 1.0);
    (c00 * (1.0 - fx) + c10 * fx) * (1.0 - fy) + (c01 * (1.0 - fx) + c11 * fx) * fy
}

/// Part of the fixture contract: frame k draws from a ChaCha8 stream
/// seeded with this value, one standard-normal sample per pixel in
/// row-major order, scaled by noise_sigma.
fn frame_seed(seed: u64, frame: u64) -> u64 {
    seed.wrapping_add((frame + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Renders the full frame sequence described by the spec.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Vec<ThermalImage>> {
    spec.validate()?;
    let scene = build_scene(spec);
    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.jitter.len());
    for (k, jitter) in spec.jitter.iter().enumerate() {
        let mut values = Vec::with_capacity(w * h);
        for i in 0..h {
            for j in 0..w {
                let (sx, sy) = jitter.apply_inverse(j as f64, i as f64);
                values.push(sample_scene(&scene, w, h, sx, sy));
            }
        }
        if spec.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(spec.seed, k as u64));
            let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParams {
                detail: format!("noise distribution: {e}"),
            })?;
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        let pixels: Vec<u8> = values
            .into_iter()
            .map(|v| round_half_up(v).clamp(0.0, 255.0) as u8)
            .collect();
        frames.push(ThermalImage::new(w, h, pixels)?);
    }
    Ok(frames)
}

/// Analytic band/marker/nodule truth plus the jitter list, for assertions
/// against rendered frames. The nodule mask thresholds the quantized
/// noiseless scene, so it equals thresholding an unjittered render.
pub fn ground_truth(spec: &PhantomSpec, cutoff: u8) -> Result<GroundTruth> {
    spec.validate()?;
    let scene = build_scene(spec);
    let (w, h) = (spec.width, spec.height);
    let bands = [
        Rect::new(spec.bands[0].start, 0, spec.bands[0].end - spec.bands[0].start, h)?,
        Rect::new(spec.bands[1].start, 0, spec.bands[1].end - spec.bands[1].start, h)?,
    ];
    let nodule_mask = BinaryMask::from_fn(w, h, |i, j| {
        let q = round_half_up(scene[i * w + j]).clamp(0.0, 255.0) as u8;
        q >= cutoff
    });
    Ok(GroundTruth {
        bands,
        marker: spec.marker.map(|m| m.rect),
        nodule_mask,
        jitter: spec.jitter.clone(),
    })
}
