//! Rigid-body pose algebra.
//!
//! A [`Pose`] is a translation plus a unit quaternion stored as `(w, x, y, z)`.
//! Quaternions are kept in canonical sign (`w >= 0`, ties broken on the first
//! nonzero vector component) so that equal rotations compare equal.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::scalar::Real;

/// Tolerance used by approximate pose equality.
pub const POSE_EPS: f64 = 1e-9;

/// Rigid transform in 3-D space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr<T>", try_from = "PoseRepr<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Pose<T: Real> {
    translation: [T; 3],
    rotation: [T; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct PoseRepr<T: Real> {
    t: [T; 3],
    q: [T; 4],
}

impl<T: Real> From<Pose<T>> for PoseRepr<T> {
    fn from(p: Pose<T>) -> Self {
        PoseRepr {
            t: p.translation,
            q: p.rotation,
        }
    }
}

impl<T: Real> TryFrom<PoseRepr<T>> for Pose<T> {
    type Error = GeometryError;

    fn try_from(r: PoseRepr<T>) -> Result<Self, Self::Error> {
        if r.t.iter().chain(r.q.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        // Stored quaternions are already unit; renormalizing them again would
        // perturb the last bit and break exact file round trips.
        let n = norm4(&r.q);
        let q = if (n - T::one()).abs() <= T::of(1e-12) {
            r.q
        } else {
            normalize4(r.q).ok_or(GeometryError::DegenerateRotation)?
        };
        Ok(Pose {
            translation: r.t,
            rotation: canonical(q),
        })
    }
}

/// Bandwidths of the pose kernel: translation in meters, rotation in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PoseDistanceParams<T: Real> {
    pub sigma_t: T,
    pub sigma_r: T,
}

impl<T: Real> PoseDistanceParams<T> {
    pub fn new(sigma_t: T, sigma_r: T) -> Result<Self, GeometryError> {
        if !(sigma_t > T::zero() && sigma_r > T::zero()) || !sigma_t.is_finite() || !sigma_r.is_finite() {
            return Err(GeometryError::InvalidBandwidth);
        }
        Ok(Self { sigma_t, sigma_r })
    }

    /// Rotation-to-translation lever: the distance in meters that one radian
    /// of rotation is worth under this metric.
    pub fn lever(&self) -> T {
        self.sigma_t / self.sigma_r
    }
}

impl<T: Real> Default for PoseDistanceParams<T> {
    fn default() -> Self {
        Self {
            sigma_t: T::of(0.02),
            sigma_r: T::of(0.1),
        }
    }
}

fn norm4<T: Real>(q: &[T; 4]) -> T {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

fn normalize4<T: Real>(q: [T; 4]) -> Option<[T; 4]> {
    let n = norm4(&q);
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    Some([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

fn canonical<T: Real>(q: [T; 4]) -> [T; 4] {
    let flip = if q[0] != T::zero() {
        q[0] < T::zero()
    } else {
        q[1..].iter().find(|v| **v != T::zero()).is_some_and(|v| *v < T::zero())
    };
    if flip {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        q
    }
}

fn quat_mul<T: Real>(a: &[T; 4], b: &[T; 4]) -> [T; 4] {
    let [aw, ax, ay, az] = *a;
    let [bw, bx, by, bz] = *b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

fn quat_conj<T: Real>(q: &[T; 4]) -> [T; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

fn rotate<T: Real>(q: &[T; 4], v: &[T; 3]) -> [T; 3] {
    // v' = v + 2w(u x v) + 2u x (u x v)
    let (w, u) = (q[0], [q[1], q[2], q[3]]);
    let two = T::of(2.0);
    let c = cross(&u, v);
    let cc = cross(&u, &c);
    [
        v[0] + two * (w * c[0] + cc[0]),
        v[1] + two * (w * c[1] + cc[1]),
        v[2] + two * (w * c[2] + cc[2]),
    ]
}

pub(crate) fn cross<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3<T: Real>(a: &[T; 3]) -> T {
    dot3(a, a).sqrt()
}

impl<T: Real> Pose<T> {
    /// Builds a pose from a translation and a (not necessarily unit)
    /// quaternion `(w, x, y, z)`.
    pub fn new(translation: [T; 3], rotation: [T; 4]) -> Result<Self, GeometryError> {
        if translation.iter().chain(rotation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let q = normalize4(rotation).ok_or(GeometryError::DegenerateRotation)?;
        Ok(Self {
            translation,
            rotation: canonical(q),
        })
    }

    fn from_parts(translation: [T; 3], rotation: [T; 4]) -> Self {
        let q = normalize4(rotation).unwrap_or([T::one(), T::zero(), T::zero(), T::zero()]);
        Self {
            translation,
            rotation: canonical(q),
        }
    }

    pub fn identity() -> Self {
        Self {
            translation: [T::zero(); 3],
            rotation: [T::one(), T::zero(), T::zero(), T::zero()],
        }
    }

    pub fn from_translation(x: T, y: T, z: T) -> Self {
        Self {
            translation: [x, y, z],
            rotation: [T::one(), T::zero(), T::zero(), T::zero()],
        }
    }

    /// Rotation of `angle` radians about `axis`; a zero axis yields identity.
    pub fn from_axis_angle(axis: [T; 3], angle: T) -> Self {
        let n = norm3(&axis);
        if !(n > T::zero()) {
            return Self::identity();
        }
        let half = angle * T::of(0.5);
        let s = half.sin() / n;
        Self::from_parts([T::zero(); 3], [half.cos(), axis[0] * s, axis[1] * s, axis[2] * s])
    }

    /// Rotation about the z-axis by `yaw` radians placed at `translation`.
    pub fn from_yaw(translation: [T; 3], yaw: T) -> Self {
        let mut p = Self::from_axis_angle([T::zero(), T::zero(), T::one()], yaw);
        p.translation = translation;
        p
    }

    pub fn translation(&self) -> [T; 3] {
        self.translation
    }

    /// Unit quaternion `(w, x, y, z)` in canonical sign.
    pub fn rotation(&self) -> [T; 4] {
        self.rotation
    }

    pub fn with_translation(&self, translation: [T; 3]) -> Self {
        Self {
            translation,
            rotation: self.rotation,
        }
    }

    /// `self * other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let rt = rotate(&self.rotation, &other.translation);
        Self::from_parts(
            [
                self.translation[0] + rt[0],
                self.translation[1] + rt[1],
                self.translation[2] + rt[2],
            ],
            quat_mul(&self.rotation, &other.rotation),
        )
    }

    pub fn inverse(&self) -> Self {
        let qi = quat_conj(&self.rotation);
        let t = rotate(&qi, &self.translation);
        Self::from_parts([-t[0], -t[1], -t[2]], qi)
    }

    pub fn transform_point(&self, p: &[T; 3]) -> [T; 3] {
        let r = rotate(&self.rotation, p);
        [r[0] + self.translation[0], r[1] + self.translation[1], r[2] + self.translation[2]]
    }

    pub fn rotate_vector(&self, v: &[T; 3]) -> [T; 3] {
        rotate(&self.rotation, v)
    }

    /// Columns of the rotation matrix: the pose's local x, y, z axes in the
    /// parent frame.
    pub fn axes(&self) -> [[T; 3]; 3] {
        let (o, l) = (T::zero(), T::one());
        [
            rotate(&self.rotation, &[l, o, o]),
            rotate(&self.rotation, &[o, l, o]),
            rotate(&self.rotation, &[o, o, l]),
        ]
    }

    /// Geodesic angle in `[0, pi]` between the two rotations.
    pub fn angle_to(&self, other: &Self) -> T {
        let rel = quat_mul(&quat_conj(&self.rotation), &other.rotation);
        let v = (rel[1] * rel[1] + rel[2] * rel[2] + rel[3] * rel[3]).sqrt();
        let theta = T::of(2.0) * v.atan2(rel[0].abs());
        theta.min(T::PI())
    }

    /// Heading of the local x-axis projected on the ground plane.
    pub fn yaw(&self) -> T {
        let x = rotate(&self.rotation, &[T::one(), T::zero(), T::zero()]);
        x[1].atan2(x[0])
    }

    /// Interpolates translation linearly and rotation along the shortest arc.
    pub fn interpolate(&self, other: &Self, s: T) -> Self {
        let t = [
            self.translation[0] + (other.translation[0] - self.translation[0]) * s,
            self.translation[1] + (other.translation[1] - self.translation[1]) * s,
            self.translation[2] + (other.translation[2] - self.translation[2]) * s,
        ];
        Self::from_parts(t, slerp(&self.rotation, &other.rotation, s))
    }

    /// Component-wise equality within `tol` after canonicalization.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.translation
            .iter()
            .zip(other.translation.iter())
            .chain(self.rotation.iter().zip(other.rotation.iter()))
            .all(|(a, b)| (*a - *b).abs() <= tol)
    }

    /// Same pose up to `tol`, treating `q` and `-q` as equal even when `w`
    /// sits on the canonicalization boundary.
    pub fn approx_eq_rotation_invariant(&self, other: &Self, tol: T) -> bool {
        if self.approx_eq(other, tol) {
            return true;
        }
        let flipped = [-other.rotation[0], -other.rotation[1], -other.rotation[2], -other.rotation[3]];
        self.translation
            .iter()
            .zip(other.translation.iter())
            .chain(self.rotation.iter().zip(flipped.iter()))
            .all(|(a, b)| (*a - *b).abs() <= tol)
    }

    /// 4x4 homogeneous matrix, row-major.
    pub fn to_matrix(&self) -> [[T; 4]; 4] {
        let ax = self.axes();
        let t = self.translation;
        let (o, l) = (T::zero(), T::one());
        [
            [ax[0][0], ax[1][0], ax[2][0], t[0]],
            [ax[0][1], ax[1][1], ax[2][1], t[1]],
            [ax[0][2], ax[1][2], ax[2][2], t[2]],
            [o, o, o, l],
        ]
    }
}

fn slerp<T: Real>(a: &[T; 4], b: &[T; 4], s: T) -> [T; 4] {
    let mut d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
    let mut b = *b;
    if d < T::zero() {
        d = -d;
        b = [-b[0], -b[1], -b[2], -b[3]];
    }
    let (wa, wb) = if d > T::one() - T::of(1e-9) {
        (T::one() - s, s)
    } else {
        let theta = d.min(T::one()).acos();
        let st = theta.sin();
        (((T::one() - s) * theta).sin() / st, (s * theta).sin() / st)
    };
    [
        wa * a[0] + wb * b[0],
        wa * a[1] + wb * b[1],
        wa * a[2] + wb * b[2],
        wa * a[3] + wb * b[3],
    ]
}

/// Pose of `target` expressed in the frame of `reference`: `reference^-1 * target`.
pub fn relative_pose<T: Real>(reference: &Pose<T>, target: &Pose<T>) -> Pose<T> {
    reference.inverse().compose(target)
}

/// Normalized pose distance: `sqrt(|dt|^2 / sigma_t^2 + theta^2 / sigma_r^2)`.
pub fn pose_distance<T: Real>(a: &Pose<T>, b: &Pose<T>, params: &PoseDistanceParams<T>) -> T {
    pose_distance_sq(a, b, params).sqrt()
}

pub fn pose_distance_sq<T: Real>(a: &Pose<T>, b: &Pose<T>, params: &PoseDistanceParams<T>) -> T {
    let dt = [
        a.translation[0] - b.translation[0],
        a.translation[1] - b.translation[1],
        a.translation[2] - b.translation[2],
    ];
    let theta = a.angle_to(b);
    dot3(&dt, &dt) / (params.sigma_t * params.sigma_t) + theta * theta / (params.sigma_r * params.sigma_r)
}

/// Average of a set of poses: arithmetic mean translation and the normalized
/// component mean of the quaternions after aligning each to the first.
pub fn mean_pose<T: Real>(poses: &[Pose<T>]) -> Result<Pose<T>, GeometryError> {
    let first = poses.first().ok_or(GeometryError::EmptyCluster)?;
    let n = T::from_usize(poses.len()).ok_or(GeometryError::EmptyCluster)?;
    let mut t = [T::zero(); 3];
    let mut q = [T::zero(); 4];
    for p in poses {
        for (acc, v) in t.iter_mut().zip(p.translation) {
            *acc = *acc + v;
        }
        let d: T = (0..4).map(|i| p.rotation[i] * first.rotation[i]).sum();
        let sign = if d < T::zero() { -T::one() } else { T::one() };
        for (acc, v) in q.iter_mut().zip(p.rotation) {
            *acc = *acc + sign * v;
        }
    }
    let t = [t[0] / n, t[1] / n, t[2] / n];
    let q = normalize4(q).ok_or(GeometryError::DegenerateRotation)?;
    Ok(Pose {
        translation: t,
        rotation: canonical(q),
    })
}
