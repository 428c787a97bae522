//! Rigid 2-D transforms: rotation by `theta` followed by translation.

use serde::{Deserialize, Serialize};

/// Rotation angle in radians plus translation in pixels.
///
/// A point maps as `x' = x cos θ − y sin θ + t_x`,
/// `y' = x sin θ + y cos θ + t_y`. Angles are kept normalized to (−π, π];
/// use [`RigidTransform2D::new`] rather than a struct literal to preserve
/// that.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub theta: f64,
    pub t_x: f64,
    pub t_y: f64,
}

impl RigidTransform2D {
    pub fn new(theta: f64, t_x: f64, t_y: f64) -> Self {
        RigidTransform2D { theta, t_x, t_y }.normalized()
    }

    pub fn identity() -> Self {
        RigidTransform2D {
            theta: 0.0,
            t_x: 0.0,
            t_y: 0.0,
        }
    }

    /// Returns the same transform with `theta` wrapped into (−π, π].
    pub fn normalized(mut self) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut a = self.theta.rem_euclid(two_pi);
        if a > std::f64::consts::PI {
            a -= two_pi;
        }
        self.theta = a;
        self
    }

    /// Maps a point forward.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (x * c - y * s + self.t_x, x * s + y * c + self.t_y)
    }

    /// Maps a point through the inverse transform.
    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.t_x;
        let dy = y - self.t_y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// The transform sending outputs back to inputs.
    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        RigidTransform2D {
            theta: -self.theta,
            t_x: -(c * self.t_x + s * self.t_y),
            t_y: -(-s * self.t_x + c * self.t_y),
        }
        .normalized()
    }

    /// `self` applied after `inner`: the result maps `p` to
    /// `self(inner(p))`.
    pub fn compose(&self, inner: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        RigidTransform2D {
            theta: self.theta + inner.theta,
            t_x: c * inner.t_x - s * inner.t_y + self.t_x,
            t_y: s * inner.t_x + c * inner.t_y + self.t_y,
        }
        .normalized()
    }
}

/// Convenience for tests and fixtures: apply as a free function.
pub fn apply_transform(t: &RigidTransform2D, p: (f64, f64)) -> (f64, f64) {
    t.apply(p.0, p.1)
}
