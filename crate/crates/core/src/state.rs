//! Object identifiers and world states.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::scalar::Real;

/// Identifier of a scene object.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Poses of all objects at one instant, keyed in deterministic order.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WorldState<T: Real> {
    poses: BTreeMap<ObjectId, Pose<T>>,
}

impl<T: Real> WorldState<T> {
    pub fn new() -> Self {
        Self { poses: BTreeMap::new() }
    }

    pub fn pose(&self, id: &ObjectId) -> Option<&Pose<T>> {
        self.poses.get(id)
    }

    pub fn set(&mut self, id: ObjectId, pose: Pose<T>) {
        self.poses.insert(id, pose);
    }

    /// Copy of this state with one object moved.
    pub fn with_pose(&self, id: &ObjectId, pose: Pose<T>) -> Self {
        let mut s = self.clone();
        s.poses.insert(id.clone(), pose);
        s
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.poses.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.poses.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, &Pose<T>)> {
        self.poses.iter()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// True when both states hold the same ids with poses equal within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.poses.len() == other.poses.len()
            && self
                .poses
                .iter()
                .zip(other.poses.iter())
                .all(|((ia, pa), (ib, pb))| ia == ib && pa.approx_eq_rotation_invariant(pb, tol))
    }
}

impl<T: Real> FromIterator<(ObjectId, Pose<T>)> for WorldState<T> {
    fn from_iter<I: IntoIterator<Item = (ObjectId, Pose<T>)>>(iter: I) -> Self {
        Self {
            poses: iter.into_iter().collect(),
        }
    }
}
