//! Named rigid frames: BASE -> TASK -> FIXTURE(name).

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Translation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{quat, ManifoldPoint};
use crate::error::{Result, VfError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Base,
    Task,
    Fixture(String),
}

impl Frame {
    pub fn parse(s: &str) -> Frame {
        match s {
            "base" | "BASE" => Frame::Base,
            "task" | "TASK" => Frame::Task,
            other => Frame::Fixture(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameTree {
    /// Pose of TASK in BASE.
    pub task: Isometry3<f64>,
    /// Poses of fixture frames in TASK.
    pub fixtures: BTreeMap<String, Isometry3<f64>>,
}

impl Default for FrameTree {
    fn default() -> Self {
        FrameTree { task: Isometry3::identity(), fixtures: BTreeMap::new() }
    }
}

impl FrameTree {
    pub fn add_fixture(&mut self, name: &str, in_task: Isometry3<f64>) {
        self.fixtures.insert(name.to_string(), in_task);
    }

    /// Pose of `frame` in BASE.
    pub fn in_base(&self, frame: &Frame) -> Result<Isometry3<f64>> {
        match frame {
            Frame::Base => Ok(Isometry3::identity()),
            Frame::Task => Ok(self.task),
            Frame::Fixture(name) => self
                .fixtures
                .get(name)
                .map(|f| self.task * f)
                .ok_or_else(|| VfError::UnknownFrame(name.clone())),
        }
    }

    /// Transform taking coordinates in `from` to coordinates in `to`.
    pub fn relative(&self, from: &Frame, to: &Frame) -> Result<Isometry3<f64>> {
        Ok(self.in_base(to)?.inverse() * self.in_base(from)?)
    }

    /// Re-express an M1 pose given in `from` in frame `to`.
    pub fn express_pose(&self, x: &ManifoldPoint, from: &Frame, to: &Frame) -> Result<ManifoldPoint> {
        let t = self.relative(from, to)?;
        match x {
            ManifoldPoint::Cartesian { p, q } => Ok(ManifoldPoint::m1((t * nalgebra::Point3::from(*p)).coords, t.rotation * q)),
            other => Err(VfError::ManifoldMismatch { expected: super::ManifoldId::M1, got: other.manifold() }),
        }
    }

    /// Re-express a free 6-vector (both blocks rotate, no lever arm).
    pub fn express_vector(&self, w: &Vector6<f64>, from: &Frame, to: &Frame) -> Result<Vector6<f64>> {
        let r = self.relative(from, to)?.rotation;
        let f = r * Vector3::new(w[0], w[1], w[2]);
        let m = r * Vector3::new(w[3], w[4], w[5]);
        Ok(Vector6::new(f.x, f.y, f.z, m.x, m.y, m.z))
    }
}

/// Isometry from a translation and an `xyzw` quaternion.
pub fn isometry(t: [f64; 3], q_xyzw: [f64; 4]) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(t[0], t[1], t[2]),
        quat::from_xyzw(q_xyzw[0], q_xyzw[1], q_xyzw[2], q_xyzw[3]),
    )
}
