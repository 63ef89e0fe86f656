//! Minimal 3-D geometry: vectors, axis-aligned boxes, and axis-aligned
//! planes. Everything the scene generator and the ray tracer need, nothing
//! more.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Cartesian 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Unit vector in the same direction. Zero-length input yields NaNs.
    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    pub fn axis(self, axis: Axis) -> T {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn set_axis(&mut self, axis: Axis, value: T) {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Linear interpolation `self + (other - self) * t`; exact at t = 0, 1.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Scalar> AddAssign for Vec3<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// The two axes spanning a plane orthogonal to `self`, in fixed order.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn unit<T: Scalar>(self, sign: T) -> Vec3<T> {
        let mut v = Vec3::zero();
        v.set_axis(self, sign);
        v
    }
}

/// Plane orthogonal to a coordinate axis at the given offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPlane<T> {
    pub axis: Axis,
    pub offset: T,
}

impl<T: Scalar> AxisPlane<T> {
    pub fn new(axis: Axis, offset: T) -> Self {
        Self { axis, offset }
    }

    /// Mirror image of `p` across the plane.
    pub fn mirror(&self, p: Vec3<T>) -> Vec3<T> {
        let mut out = p;
        let two = T::of(2.0);
        out.set_axis(self.axis, two * self.offset - p.axis(self.axis));
        out
    }

    /// Signed distance from `p`, positive on the `+axis` side.
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        p.axis(self.axis) - self.offset
    }
}

/// Axis-aligned ground rectangle (2-D, x/y), closed on all edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> Rect2<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn depth(&self) -> T {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    /// True when the open 2-D segment (a, b) meets the closed rectangle.
    pub fn intersects_segment(&self, ax: T, ay: T, bx: T, by: T) -> bool {
        // 2-D slab test on the open parameter interval (0, 1).
        let mut t_lo = T::zero();
        let mut t_hi = T::one();
        for (a, b, lo, hi) in [
            (ax, bx, self.min_x, self.max_x),
            (ay, by, self.min_y, self.max_y),
        ] {
            let d = b - a;
            if d == T::zero() {
                if a < lo || a > hi {
                    return false;
                }
            } else {
                let mut t0 = (lo - a) / d;
                let mut t1 = (hi - a) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_lo = t_lo.max(t0);
                t_hi = t_hi.min(t1);
                if t_lo > t_hi {
                    return false;
                }
            }
        }
        t_hi > T::zero() && t_lo < T::one()
    }
}

/// Axis-aligned box, closed surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    /// Closed-box membership (surface counts as inside).
    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, p: Vec3<T>) -> bool {
        p.x > self.min.x
            && p.x < self.max.x
            && p.y > self.min.y
            && p.y < self.max.y
            && p.z > self.min.z
            && p.z < self.max.z
    }

    /// Slab intersection of the segment `a + t (b - a)` with the closed box,
    /// restricted to the open parameter interval (0, 1). Endpoints that merely
    /// touch the surface do not count; a mid-segment graze of a face, edge, or
    /// corner does.
    pub fn intersects_open_segment(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let mut t_lo = T::zero();
        let mut t_hi = T::one();
        for axis in Axis::ALL {
            let pa = a.axis(axis);
            let d = b.axis(axis) - pa;
            let lo = self.min.axis(axis);
            let hi = self.max.axis(axis);
            if d == T::zero() {
                if pa < lo || pa > hi {
                    return false;
                }
            } else {
                let mut t0 = (lo - pa) / d;
                let mut t1 = (hi - pa) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_lo = t_lo.max(t0);
                t_hi = t_hi.min(t1);
                if t_lo > t_hi {
                    return false;
                }
            }
        }
        // Non-empty overlap of [t_lo, t_hi] with (0, 1).
        t_hi > T::zero() && t_lo < T::one()
    }

    /// First intersection parameter of the ray `origin + t dir` (t > eps)
    /// with the closed box, or None.
    pub fn ray_entry(&self, origin: Vec3<T>, dir: Vec3<T>, eps: T) -> Option<T> {
        let mut t_lo = eps;
        let mut t_hi = T::infinity();
        for axis in Axis::ALL {
            let o = origin.axis(axis);
            let d = dir.axis(axis);
            let lo = self.min.axis(axis);
            let hi = self.max.axis(axis);
            if d == T::zero() {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let mut t0 = (lo - o) / d;
                let mut t1 = (hi - o) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_lo = t_lo.max(t0);
                t_hi = t_hi.min(t1);
                if t_lo > t_hi {
                    return None;
                }
            }
        }
        Some(t_lo)
    }
}

/// Rectangular patch of an axis-aligned plane with an outward normal:
/// one face of a building, used both as a reflector and as a sampling surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceRect<T> {
    pub plane: AxisPlane<T>,
    /// +1 or -1 along `plane.axis`.
    pub normal_sign: T,
    /// Bounds along `plane.axis.others().0`.
    pub u_range: (T, T),
    /// Bounds along `plane.axis.others().1`.
    pub v_range: (T, T),
}

impl<T: Scalar> FaceRect<T> {
    pub fn outward_normal(&self) -> Vec3<T> {
        self.plane.axis.unit(self.normal_sign)
    }

    /// Extent along the two in-plane axes.
    pub fn extents(&self) -> (T, T) {
        (
            self.u_range.1 - self.u_range.0,
            self.v_range.1 - self.v_range.0,
        )
    }

    /// Point on the face from in-plane coordinates.
    pub fn point_at(&self, u: T, v: T) -> Vec3<T> {
        let (ua, va) = self.plane.axis.others();
        let mut p = Vec3::zero();
        p.set_axis(self.plane.axis, self.plane.offset);
        p.set_axis(ua, u);
        p.set_axis(va, v);
        p
    }

    /// True when `p` lies on the plane within the face bounds, shrunk by
    /// `margin` on every edge.
    pub fn contains_with_margin(&self, p: Vec3<T>, margin: T) -> bool {
        let (ua, va) = self.plane.axis.others();
        let u = p.axis(ua);
        let v = p.axis(va);
        u >= self.u_range.0 + margin
            && u <= self.u_range.1 - margin
            && v >= self.v_range.0 + margin
            && v <= self.v_range.1 - margin
    }
}

/// The five exposed faces of a ground-standing box (all but the base).
pub fn exposed_faces<T: Scalar>(aabb: &Aabb<T>) -> [FaceRect<T>; 5] {
    let one = T::one();
    [
        FaceRect {
            plane: AxisPlane::new(Axis::X, aabb.min.x),
            normal_sign: -one,
            u_range: (aabb.min.y, aabb.max.y),
            v_range: (aabb.min.z, aabb.max.z),
        },
        FaceRect {
            plane: AxisPlane::new(Axis::X, aabb.max.x),
            normal_sign: one,
            u_range: (aabb.min.y, aabb.max.y),
            v_range: (aabb.min.z, aabb.max.z),
        },
        FaceRect {
            plane: AxisPlane::new(Axis::Y, aabb.min.y),
            normal_sign: -one,
            u_range: (aabb.min.x, aabb.max.x),
            v_range: (aabb.min.z, aabb.max.z),
        },
        FaceRect {
            plane: AxisPlane::new(Axis::Y, aabb.max.y),
            normal_sign: one,
            u_range: (aabb.min.x, aabb.max.x),
            v_range: (aabb.min.z, aabb.max.z),
        },
        FaceRect {
            plane: AxisPlane::new(Axis::Z, aabb.max.z),
            normal_sign: one,
            u_range: (aabb.min.x, aabb.max.x),
            v_range: (aabb.min.y, aabb.max.y),
        },
    ]
}

/// Distance from a point to the closed box (0 when inside or on it).
pub fn point_box_distance<T: Scalar>(p: Vec3<T>, aabb: &Aabb<T>) -> T {
    let mut d2 = T::zero();
    for axis in Axis::ALL {
        let v = p.axis(axis);
        let lo = aabb.min.axis(axis);
        let hi = aabb.max.axis(axis);
        let gap = if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            T::zero()
        };
        d2 += gap * gap;
    }
    d2.sqrt()
}

/// Distance from a point to the surface of the box (positive inside too).
pub fn point_surface_distance<T: Scalar>(p: Vec3<T>, aabb: &Aabb<T>) -> T {
    let outside = point_box_distance(p, aabb);
    if outside > T::zero() {
        return outside;
    }
    // Inside: nearest face along any axis.
    let mut best = T::infinity();
    for axis in Axis::ALL {
        let v = p.axis(axis);
        best = best
            .min(v - aabb.min.axis(axis))
            .min(aabb.max.axis(axis) - v);
    }
    best
}
