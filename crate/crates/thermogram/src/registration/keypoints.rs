//! Closed-form rigid fit from corresponding point pairs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::transform::RigidTransform2D;

/// One correspondence: a point in the moving image and where it should land
/// in the reference image. Coordinates are `(x, y)` pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeypointPair {
    pub moving: (f64, f64),
    pub reference: (f64, f64),
}

/// Least-squares rigid fit: the transform minimizing
/// Σ ‖T(moving_k) − reference_k‖². Centroids give the translation; the
/// rotation is the arctangent of the cross/dot covariance sums of the
/// centered points (no scaling).
pub fn fit_rigid_from_keypoints(pairs: &[KeypointPair]) -> Result<RigidTransform2D> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateConfiguration {
            detail: format!("need at least 2 pairs, got {}", pairs.len()),
        });
    }
    let n = pairs.len() as f64;
    let (mut mcx, mut mcy, mut rcx, mut rcy) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        mcx += p.moving.0;
        mcy += p.moving.1;
        rcx += p.reference.0;
        rcy += p.reference.1;
    }
    mcx /= n;
    mcy /= n;
    rcx /= n;
    rcy /= n;

    let mut spread = 0.0f64;
    let mut dot = 0.0f64;
    let mut cross = 0.0f64;
    for p in pairs {
        let mx = p.moving.0 - mcx;
        let my = p.moving.1 - mcy;
        let rx = p.reference.0 - rcx;
        let ry = p.reference.1 - rcy;
        spread = spread.max(mx * mx + my * my);
        dot += mx * rx + my * ry;
        cross += mx * ry - my * rx;
    }
    if spread == 0.0 {
        return Err(Error::DegenerateConfiguration {
            detail: "all moving points coincide".into(),
        });
    }

    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    let t_x = rcx - (c * mcx - s * mcy);
    let t_y = rcy - (s * mcx + c * mcy);
    Ok(RigidTransform2D::new(theta, t_x, t_y))
}

/// Parses keypoint pairs from text: one pair per line as
/// `x_mov y_mov x_ref y_ref`, with `#` starting a comment and blank lines
/// ignored.
pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointPair>> {
    let mut pairs = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                what: "keypoints".into(),
                detail: format!(
                    "line {}: expected 4 fields `x_mov y_mov x_ref y_ref`, got {}",
                    line_no + 1,
                    fields.len()
                ),
            });
        }
        let mut nums = [0.0f64; 4];
        for (k, f) in fields.iter().enumerate() {
            nums[k] = f.parse().map_err(|_| Error::Parse {
                what: "keypoints".into(),
                detail: format!("line {}: {:?} is not a number", line_no + 1, f),
            })?;
        }
        pairs.push(KeypointPair {
            moving: (nums[0], nums[1]),
            reference: (nums[2], nums[3]),
        });
    }
    Ok(pairs)
}

pub fn read_keypoints_file(path: &Path) -> Result<Vec<KeypointPair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_keypoints(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pairs_under(t: &RigidTransform2D, points: &[(f64, f64)]) -> Vec<KeypointPair> {
        points
            .iter()
            .map(|&p| KeypointPair {
                moving: p,
                reference: t.apply(p.0, p.1),
            })
            .collect()
    }

    #[test]
    fn recovers_known_transform_from_five_points() {
        let truth = RigidTransform2D::new(0.1, 4.0, -2.0);
        let points = [(0.0, 0.0), (10.0, 3.0), (-5.0, 7.0), (2.5, -8.0), (12.0, 12.0)];
        let fit = fit_rigid_from_keypoints(&pairs_under(&truth, &points)).unwrap();
        assert_abs_diff_eq!(fit.theta, truth.theta, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.t_x, truth.t_x, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.t_y, truth.t_y, epsilon = 1e-9);
    }

    #[test]
    fn identical_point_sets_give_identity() {
        let points = [(1.0, 2.0), (3.0, 4.0), (5.0, -1.0)];
        let pairs: Vec<KeypointPair> = points
            .iter()
            .map(|&p| KeypointPair { moving: p, reference: p })
            .collect();
        let fit = fit_rigid_from_keypoints(&pairs).unwrap();
        assert_abs_diff_eq!(fit.theta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.t_x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.t_y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_pair_is_degenerate() {
        let pairs = [KeypointPair { moving: (1.0, 1.0), reference: (2.0, 2.0) }];
        assert!(matches!(
            fit_rigid_from_keypoints(&pairs),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn coincident_moving_points_are_degenerate() {
        let pairs = [
            KeypointPair { moving: (3.0, 3.0), reference: (0.0, 0.0) },
            KeypointPair { moving: (3.0, 3.0), reference: (5.0, 5.0) },
        ];
        assert!(matches!(
            fit_rigid_from_keypoints(&pairs),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn parses_pairs_with_comments_and_blanks() {
        let text = "# chin and clavicle markers\n\
                    10 20 12.5 21 # chin\n\
                    \n\
                    30 40 31 39\n";
        let pairs = parse_keypoints(text).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].moving, (10.0, 20.0));
        assert_eq!(pairs[0].reference, (12.5, 21.0));
        assert!(parse_keypoints("1 2 3\n").is_err());
        assert!(parse_keypoints("1 2 3 four\n").is_err());
    }

    proptest! {
        #[test]
        fn generate_and_recover_over_random_transforms(
            theta in -3.0f64..3.0,
            tx in -30.0f64..30.0,
            ty in -30.0f64..30.0,
            seed in any::<u64>(),
        ) {
            let truth = RigidTransform2D::new(theta, tx, ty);
            let mut state = seed | 1;
            let mut coord = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2001) as f64 / 10.0 - 100.0
            };
            let points: Vec<(f64, f64)> = (0..5).map(|_| (coord(), coord())).collect();
            // Degenerate draws (all five points equal) are astronomically
            // unlikely but the fit would reject them; require spread.
            prop_assume!(points.windows(2).any(|w| w[0] != w[1]));
            let fit = fit_rigid_from_keypoints(&pairs_under(&truth, &points)).unwrap();
            prop_assert!((fit.theta - truth.theta).abs() < 1e-6);
            prop_assert!((fit.t_x - truth.t_x).abs() < 1e-6);
            prop_assert!((fit.t_y - truth.t_y).abs() < 1e-6);
        }
    }
}
