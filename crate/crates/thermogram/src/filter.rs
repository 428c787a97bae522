//! Directional valley filtering.
//!
//! A pixel fires when the pixels a fixed distance `d` away on the evaluated
//! axes all differ from it by more than a signed threshold `t`. With the
//! shadow polarity the neighbors must exceed the center (the center sits in
//! an intensity valley, e.g. a shadow line across warmer skin); the light
//! polarity is the mirror image and picks out thin bright structures. Any
//! pixel whose required neighbors fall outside the image gets 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryMask, ThermalImage};

/// Which axes the comparison runs along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Compare against the pixels `d` rows above and below.
    Rows,
    /// Compare against the pixels `d` columns left and right.
    Cols,
    /// Require both row and column comparisons to pass.
    Both,
}

/// Direction of the intensity difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Neighbors brighter than the center: dark valleys fire.
    Shadow,
    /// Neighbors darker than the center: bright ridges fire.
    Light,
}

/// Valley filter configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Neighbor distance in pixels.
    pub d: usize,
    /// Signed difference threshold; negative values make the test permissive.
    pub t: i32,
    pub axis: Axis,
    pub polarity: Polarity,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            d: 4,
            t: 40,
            axis: Axis::Cols,
            polarity: Polarity::Shadow,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParams {
                detail: "filter distance d must be at least 1".into(),
            });
        }
        if self.t < -255 || self.t > 255 {
            return Err(Error::InvalidParams {
                detail: format!("filter threshold t must lie in [-255, 255], got {}", self.t),
            });
        }
        Ok(())
    }
}

/// Runs the valley filter over the whole image.
pub fn directional_valley(img: &ThermalImage, params: &FilterParams) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let d = params.d;
    let (rows_axis, cols_axis) = match params.axis {
        Axis::Rows => (true, false),
        Axis::Cols => (false, true),
        Axis::Both => (true, true),
    };
    let i_range = if rows_axis {
        if h > 2 * d { d..h - d } else { 0..0 }
    } else {
        0..h
    };
    let j_range = if cols_axis {
        if w > 2 * d { d..w - d } else { 0..0 }
    } else {
        0..w
    };

    let mut values = vec![0u8; w * h];
    let px = img.pixels();
    for i in i_range {
        for j in j_range.clone() {
            let center = i32::from(px[i * w + j]);
            let mut fires = true;
            if rows_axis {
                let above = i32::from(px[(i - d) * w + j]);
                let below = i32::from(px[(i + d) * w + j]);
                fires &= exceeds(above, center, params) && exceeds(below, center, params);
            }
            if cols_axis && fires {
                let left = i32::from(px[i * w + j - d]);
                let right = i32::from(px[i * w + j + d]);
                fires &= exceeds(left, center, params) && exceeds(right, center, params);
            }
            values[i * w + j] = u8::from(fires);
        }
    }
    BinaryMask::new(w, h, values)
}

fn exceeds(neighbor: i32, center: i32, params: &FilterParams) -> bool {
    match params.polarity {
        Polarity::Shadow => neighbor - center > params.t,
        Polarity::Light => center - neighbor > params.t,
    }
}

/// Two-axis shadow detector: dark pixels between brighter surroundings fire.
pub fn shadow_sobel(img: &ThermalImage, d: usize, t: i32) -> Result<BinaryMask> {
    directional_valley(
        img,
        &FilterParams {
            d,
            t,
            axis: Axis::Both,
            polarity: Polarity::Shadow,
        },
    )
}

/// Two-axis light detector: bright pixels between darker surroundings fire.
pub fn light_sobel(img: &ThermalImage, d: usize, t: i32) -> Result<BinaryMask> {
    directional_valley(
        img,
        &FilterParams {
            d,
            t,
            axis: Axis::Both,
            polarity: Polarity::Light,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal per-pixel restatement of the filter definition, used as the
    /// oracle: every referenced neighbor must exist and pass the comparison.
    fn oracle(img: &ThermalImage, params: &FilterParams) -> BinaryMask {
        let d = params.d as isize;
        let offsets: Vec<(isize, isize)> = match params.axis {
            Axis::Rows => vec![(-d, 0), (d, 0)],
            Axis::Cols => vec![(0, -d), (0, d)],
            Axis::Both => vec![(-d, 0), (d, 0), (0, -d), (0, d)],
        };
        BinaryMask::from_fn(img.width(), img.height(), |i, j| {
            let center = i32::from(img.pixel(i, j));
            offsets.iter().all(|&(di, dj)| {
                let ni = i as isize + di;
                let nj = j as isize + dj;
                if ni < 0 || nj < 0 {
                    return false;
                }
                match img.get(ni as usize, nj as usize) {
                    Some(n) => exceeds(i32::from(n), center, params),
                    None => false,
                }
            })
        })
    }

    fn invert(img: &ThermalImage) -> ThermalImage {
        ThermalImage::from_fn(img.width(), img.height(), |i, j| 255 - img.pixel(i, j))
    }

    #[test]
    fn lone_valley_pixel_fires_only_at_center() {
        // A single dark pixel in a 7-wide row, compared at distance 3.
        let img = ThermalImage::new(7, 1, vec![100, 100, 100, 30, 100, 100, 100]).unwrap();
        let params = FilterParams {
            d: 3,
            t: 40,
            axis: Axis::Cols,
            polarity: Polarity::Shadow,
        };
        let mask = directional_valley(&img, &params).unwrap();
        assert_eq!(mask.values(), &[0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn dark_row_fires_under_rows_axis_only() {
        let img = ThermalImage::from_fn(5, 7, |i, _| if i == 3 { 30 } else { 100 });
        let rows = FilterParams {
            d: 3,
            t: 40,
            axis: Axis::Rows,
            polarity: Polarity::Shadow,
        };
        let mask = directional_valley(&img, &rows).unwrap();
        for j in 0..5 {
            assert!(mask.is_set(3, j));
        }
        assert_eq!(mask.count_ones(), 5);
        let cols = FilterParams { axis: Axis::Cols, ..rows };
        assert_eq!(directional_valley(&img, &cols).unwrap().count_ones(), 0);
    }

    #[test]
    fn both_axes_require_all_four_neighbors() {
        // A dark cross-center pixel: columns and rows both rise around it.
        let img = ThermalImage::from_fn(9, 9, |i, j| {
            if i == 4 && j == 4 {
                20
            } else {
                120
            }
        });
        let mask = shadow_sobel(&img, 4, 40).unwrap();
        assert_eq!(mask.count_ones(), 1);
        assert!(mask.is_set(4, 4));
        // A dark full row defeats the row comparison for its own pixels.
        let img = ThermalImage::from_fn(9, 9, |i, _| if i == 4 { 20 } else { 120 });
        assert_eq!(shadow_sobel(&img, 4, 40).unwrap().count_ones(), 0);
    }

    #[test]
    fn light_equals_shadow_on_inverted_image() {
        let img = ThermalImage::from_fn(16, 12, |i, j| ((i * 31 + j * 17) % 256) as u8);
        for d in [1, 3, 4] {
            for t in [-10, 0, 25] {
                assert_eq!(
                    light_sobel(&img, d, t).unwrap(),
                    shadow_sobel(&invert(&img), d, t).unwrap()
                );
            }
        }
    }

    #[test]
    fn negative_threshold_is_permissive() {
        let img = ThermalImage::filled(9, 9, 77);
        // On a uniform image the difference is 0, which passes t = -1.
        let mask = shadow_sobel(&img, 4, -1).unwrap();
        assert_eq!(mask.count_ones(), 1);
        assert!(mask.is_set(4, 4));
        // t = 0 demands a strict rise, so nothing fires.
        assert_eq!(shadow_sobel(&img, 4, 0).unwrap().count_ones(), 0);
    }

    #[test]
    fn image_smaller_than_reach_yields_empty_mask() {
        let img = ThermalImage::filled(3, 3, 0);
        let mask = shadow_sobel(&img, 2, -255).unwrap();
        assert_eq!(mask.count_ones(), 0);
        // One axis can still be evaluable when only the other is too short.
        let img = ThermalImage::from_fn(9, 3, |_, j| if j == 4 { 0 } else { 200 });
        let params = FilterParams {
            d: 4,
            t: 40,
            axis: Axis::Cols,
            polarity: Polarity::Shadow,
        };
        let mask = directional_valley(&img, &params).unwrap();
        assert_eq!(mask.count_ones(), 3);
    }

    #[test]
    fn zero_distance_is_rejected() {
        let img = ThermalImage::filled(4, 4, 0);
        let params = FilterParams { d: 0, ..FilterParams::default() };
        assert!(directional_valley(&img, &params).is_err());
        let params = FilterParams { t: 256, ..FilterParams::default() };
        assert!(directional_valley(&img, &params).is_err());
    }

    #[test]
    fn default_params_match_pipeline_defaults() {
        let p = FilterParams::default();
        assert_eq!((p.d, p.t), (4, 40));
        assert_eq!(p.axis, Axis::Cols);
        assert_eq!(p.polarity, Polarity::Shadow);
    }

    proptest! {
        #[test]
        fn matches_oracle_on_random_images(
            w in 1usize..24,
            h in 1usize..24,
            d in 1usize..6,
            t in -255i32..=255,
            axis_pick in 0u8..3,
            polarity_pick in 0u8..2,
            seed in any::<u64>(),
        ) {
            let axis = [Axis::Rows, Axis::Cols, Axis::Both][axis_pick as usize];
            let polarity = [Polarity::Shadow, Polarity::Light][polarity_pick as usize];
            let mut state = seed;
            let img = ThermalImage::from_fn(w, h, |_, _| {
                // Tiny xorshift keeps the generator independent of the code
                // under test.
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 256) as u8
            });
            let params = FilterParams { d, t, axis, polarity };
            let got = directional_valley(&img, &params).unwrap();
            prop_assert_eq!(got, oracle(&img, &params));
        }
    }
}
