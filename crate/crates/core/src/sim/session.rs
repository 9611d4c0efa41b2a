//! Live session: owns an engine, takes operator messages, produces the wire
//! messages. Transport-agnostic; the CLI wraps it in a WebSocket server.

use std::fs::File;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::engine::{Engine, StepRecord};
use super::operator::LiveInput;
use super::scenario::Scenario;
use super::trace::TraceWriter;
use crate::error::Result;
use crate::fixtures::FixtureModel;
use crate::geometry::{to_m1, ManifoldPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Operator { wrench: [f64; 6] },
    Cursor { pose: [f64; 7] },
}

impl ClientMessage {
    /// Parse and validate one wire message.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        match &msg {
            ClientMessage::Operator { wrench } if wrench.iter().any(|v| !v.is_finite()) => {
                return Err("operator wrench must be finite".into())
            }
            ClientMessage::Cursor { pose } => {
                ManifoldPoint::from_pose7(pose).map_err(|e| format!("bad cursor pose: {e}"))?;
            }
            _ => {}
        }
        Ok(msg)
    }
}

#[derive(Serialize)]
struct StateMessage<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    rec: &'a StepRecord,
}

pub fn state_message(rec: &StepRecord) -> String {
    serde_json::to_string(&StateMessage { kind: "state", rec }).unwrap_or_default()
}

pub fn error_message(msg: &str) -> String {
    json!({"type": "error", "message": msg}).to_string()
}

pub struct Session {
    engine: Engine,
    live: LiveInput,
    trace: Option<TraceWriter<File>>,
}

/// Position of any manifold point as a 3-vector (planar points get z = 0).
fn point3(x: &ManifoldPoint) -> Option<Vector3<f64>> {
    match x {
        ManifoldPoint::Euclidean(v) if v.len() == 2 => Some(Vector3::new(v[0], v[1], 0.0)),
        ManifoldPoint::Euclidean(v) if v.len() == 3 => Some(Vector3::new(v[0], v[1], v[2])),
        ManifoldPoint::Position(p) => Some(*p),
        other => to_m1(other).ok().and_then(|m| m.position()),
    }
}

impl Session {
    pub fn new(scenario: Scenario, trace: Option<&Path>) -> Result<Self> {
        let trace = trace.map(TraceWriter::create).transpose()?;
        Ok(Session { engine: Engine::new(scenario)?, live: LiveInput::default(), trace })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn finished(&self) -> bool {
        self.engine.finished()
    }

    /// Fixture geometry for rendering, all positions in BASE.
    pub fn scene(&self) -> Value {
        let s = &self.engine.scenario;
        let mut fixtures = Vec::new();
        for f in &s.fixtures {
            let t = s.frames.in_base(&f.frame).unwrap_or_else(|_| nalgebra::Isometry3::identity());
            let to_base = |p: Vector3<f64>| {
                let b = t * Point3::from(p);
                [b.x, b.y, b.z]
            };
            let pts = |xs: &mut dyn Iterator<Item = &ManifoldPoint>| -> Vec<[f64; 3]> {
                xs.filter_map(point3).map(to_base).collect()
            };
            let (kind, geometry) = match &f.model {
                FixtureModel::Ds(d) => ("ds", json!({"points": pts(&mut d.policies.iter().flat_map(|p| p.kmp.reference.inputs.iter()))})),
                FixtureModel::Stab(d) => ("stab", json!({"points": pts(&mut d.ref_points.iter())})),
                FixtureModel::Trajectory(d) => {
                    let covs: Vec<Vec<f64>> = d
                        .samples
                        .iter()
                        .map(|s| {
                            let r = t.rotation.to_rotation_matrix().into_inner();
                            let c = r * s.cov.fixed_view::<3, 3>(0, 0) * r.transpose();
                            c.transpose().iter().copied().collect()
                        })
                        .collect();
                    ("trajectory", json!({"points": pts(&mut d.samples.iter().map(|s| &s.mean)), "covs": covs}))
                }
                FixtureModel::Visual(d) => ("visual", json!({"points": pts(&mut d.experts.iter().map(|e| &e.mean))})),
                FixtureModel::Constant(d) => (
                    "constant",
                    json!({"region": d.region.map(|r| json!({"min": [r.min.x, r.min.y, r.min.z], "max": [r.max.x, r.max.y, r.max.z]}))}),
                ),
            };
            fixtures.push(json!({
                "id": f.id,
                "kind": kind,
                "manifold": format!("{:?}", f.model.manifold()),
                "frame": s.frames.in_base(&f.frame).ok().map(|t| {
                    let q = crate::geometry::quat::to_xyzw(&t.rotation);
                    [t.translation.x, t.translation.y, t.translation.z, q[0], q[1], q[2], q[3]]
                }),
                "geometry": geometry,
            }));
        }
        json!({
            "type": "scene",
            "dt": s.dt,
            "duration": s.duration,
            "body": {"pose": self.engine.state.pose7()},
            "fixtures": fixtures,
        })
    }

    /// Apply a client message; malformed input is reported and ignored.
    pub fn handle_message(&mut self, text: &str) -> std::result::Result<(), String> {
        self.apply(ClientMessage::parse(text)?);
        Ok(())
    }

    /// Latest values are held until replaced.
    pub fn apply(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::Operator { wrench } => self.live.wrench = Some(wrench),
            ClientMessage::Cursor { pose } => self.live.cursor = Some(pose),
        }
    }

    /// Advance one step with the latest live input held.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        if self.engine.finished() {
            return Ok(None);
        }
        let rec = self.engine.step(&self.live)?;
        if let Some(t) = &mut self.trace {
            t.write(&rec)?;
        }
        Ok(Some(rec))
    }

    pub fn flush(&mut self) -> Result<()> {
        match &mut self.trace {
            Some(t) => t.flush(),
            None => Ok(()),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}
