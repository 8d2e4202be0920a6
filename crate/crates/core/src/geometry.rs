//! Value-semantic 3D primitives and the point-cloud metrics used by the
//! optimizer.
//!
//! All coordinates are meters in a user-local frame: `y` is up, `+z` points
//! from the seated user toward their workspace and `+x` points to the user's
//! right. Screens face the user, so a screen rectangle spans `+x` (width) and
//! `+y` (height) from its bottom-left corner.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Slack used for closed-boundary containment tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).length()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let len = self.length();
        if len > 1e-12 && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, other: Vec3, alpha: f64) -> Vec3 {
        self + (other - self) * alpha
    }

    pub fn min(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x.min(other.x), self.y.min(other.y), self.z.min(other.z))
    }

    pub fn max(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x.max(other.x), self.y.max(other.y), self.z.max(other.z))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// Documents store vectors as `[x, y, z]`.
impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

/// Axis-aligned box, closed on all faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
            && self.min.z <= self.max.z
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Closed intersection: boxes that merely touch intersect.
    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x + EPS
            && other.min.x <= self.max.x + EPS
            && self.min.y <= other.max.y + EPS
            && other.min.y <= self.max.y + EPS
            && self.min.z <= other.max.z + EPS
            && other.min.z <= self.max.z + EPS
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        p.x >= self.min.x - EPS
            && p.x <= self.max.x + EPS
            && p.y >= self.min.y - EPS
            && p.y <= self.max.y + EPS
            && p.z >= self.min.z - EPS
            && p.z <= self.max.z + EPS
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        self.contains_point(other.min) && self.contains_point(other.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::Domain("ray direction has zero length".into()))?;
        Ok(Self { origin, direction })
    }

    /// Ray from `from` through `through`.
    pub fn through(from: Vec3, through: Vec3) -> Result<Self> {
        Self::new(from, through - from)
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Planar rectangle anchored at its bottom-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect3 {
    pub origin: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub width: f64,
    pub height: f64,
}

impl Rect3 {
    pub fn new(origin: Vec3, u_axis: Vec3, v_axis: Vec3, width: f64, height: f64) -> Result<Self> {
        let (u, v) = match (u_axis.normalized(), v_axis.normalized()) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::Domain("rectangle axes must be nonzero".into())),
        };
        if u.dot(v).abs() > 1e-9 {
            return Err(Error::Domain("rectangle axes must be orthogonal".into()));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Domain("rectangle width and height must be positive".into()));
        }
        Ok(Self { origin, u_axis: u, v_axis: v, width, height })
    }

    /// Screen-style rectangle in the `x`/`y` plane facing the user.
    pub fn facing_user(bottom_left: Vec3, width: f64, height: f64) -> Self {
        Self { origin: bottom_left, u_axis: Vec3::X, v_axis: Vec3::Y, width, height }
    }

    pub fn from_center(center: Vec3, width: f64, height: f64) -> Self {
        Self::facing_user(center - Vec3::new(width * 0.5, height * 0.5, 0.0), width, height)
    }

    pub fn normal(&self) -> Vec3 {
        self.u_axis.cross(self.v_axis)
    }

    pub fn center(&self) -> Vec3 {
        self.origin + self.u_axis * (self.width * 0.5) + self.v_axis * (self.height * 0.5)
    }

    /// Same rectangle enlarged by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Rect3 {
        let (w, h) = (self.width * factor, self.height * factor);
        let origin = self.center() - self.u_axis * (w * 0.5) - self.v_axis * (h * 0.5);
        Rect3 { origin, width: w, height: h, ..*self }
    }

    /// Normalized in-plane coordinates of `p` (0..1 inside the rectangle).
    pub fn local_uv(&self, p: Vec3) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.u_axis) / self.width, d.dot(self.v_axis) / self.height)
    }

    pub fn point_at_uv(&self, u: f64, v: f64) -> Vec3 {
        self.origin + self.u_axis * (u * self.width) + self.v_axis * (v * self.height)
    }
}

/// Parametric distance at which `ray` meets the closed rectangle, if it does.
pub fn ray_intersects_rect(ray: &Ray, rect: &Rect3) -> Option<f64> {
    let n = rect.normal();
    let denom = ray.direction.dot(n);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (rect.origin - ray.origin).dot(n) / denom;
    if t < -EPS {
        return None;
    }
    let t = t.max(0.0);
    let d = ray.at(t) - rect.origin;
    let a = d.dot(rect.u_axis);
    let b = d.dot(rect.v_axis);
    let inside = a >= -EPS && a <= rect.width + EPS && b >= -EPS && b <= rect.height + EPS;
    inside.then_some(t)
}

/// Parametric distance at which `ray` enters the sphere, if it does.
pub fn ray_intersects_sphere(ray: &Ray, center: Vec3, radius: f64) -> Option<f64> {
    let oc = ray.origin - center;
    let b = oc.dot(ray.direction);
    let c = oc.length_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t1 < 0.0 {
        None
    } else {
        Some(t0.max(0.0))
    }
}

/// Angle in `[0, π]` between two nonzero vectors.
pub fn angular_distance(a: Vec3, b: Vec3) -> Result<f64> {
    let (a, b) = match (a.normalized(), b.normalized()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Domain("angular distance of a zero-length vector".into())),
    };
    // atan2 keeps full precision near 0 and π, where acos of the dot product does not.
    Ok(a.cross(b).length().atan2(a.dot(b)))
}

/// Distance from `p` to the nearest point of `cloud` (infinite for an empty cloud).
pub fn nearest_distance(p: Vec3, cloud: &[Vec3]) -> f64 {
    cloud.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two non-empty point clouds under the
/// Euclidean metric.
pub fn hausdorff(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty point set".into()));
    }
    let forward = x.iter().map(|p| nearest_distance(*p, y)).fold(0.0, f64::max);
    let backward = y.iter().map(|q| nearest_distance(*q, x)).fold(0.0, f64::max);
    Ok(forward.max(backward))
}

/// Gaussian fall-off used for screen and container semantic values.
pub fn gaussian_utility(theta: f64, mu: f64, sigma: f64) -> f64 {
    let d = theta - mu;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}
