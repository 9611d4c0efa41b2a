//! Scripted and live operators. The hand is a spring-damper surrogate pulling
//! the body toward a waypoint or cursor.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::config::{HandParams, OperatorConfig, WaypointKey, WrenchKey};
use super::engine::BodyState;
use crate::error::{Result, VfError};
use crate::geometry::{quat, ManifoldPoint, Quat};

/// Live input accumulated between two steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LiveInput {
    /// Added to any scripted wrench (BASE).
    pub wrench: Option<[f64; 6]>,
    /// Cursor pose `[x, y, z, qx, qy, qz, qw]`; replaces the scripted
    /// waypoint target.
    pub cursor: Option<[f64; 7]>,
}

#[derive(Debug, Clone)]
pub struct Operator {
    kind: Kind,
    pub hand: HandParams,
}

#[derive(Debug, Clone)]
enum Kind {
    None,
    Wrench(Vec<WrenchKey>),
    Waypoints(Vec<(f64, Vector3<f64>, Quat)>),
}

/// Hand-spring wrench in BASE: force toward `target`, capped at `max_force`.
pub fn hand_spring(hand: &HandParams, body: &BodyState, target_p: &Vector3<f64>, target_q: &Quat) -> Vector6<f64> {
    let (p, q) = match &body.pose {
        ManifoldPoint::Cartesian { p, q } => (*p, *q),
        _ => return Vector6::zeros(),
    };
    let v = Vector3::new(body.twist[0], body.twist[1], body.twist[2]);
    let mut f = hand.k_h * (target_p - p) - hand.d_h * v;
    let n = f.norm();
    if n > hand.max_force {
        f *= hand.max_force / n;
    }
    let w = Vector3::new(body.twist[3], body.twist[4], body.twist[5]);
    let tau_body = hand.k_rot * quat::log(&q, target_q) - hand.d_rot * w;
    let tau = q * tau_body;
    Vector6::new(f.x, f.y, f.z, tau.x, tau.y, tau.z)
}

fn cap(w: Vector6<f64>, max_force: f64) -> Vector6<f64> {
    let n = w.fixed_rows::<3>(0).norm();
    if n > max_force {
        let s = max_force / n;
        Vector6::new(w[0] * s, w[1] * s, w[2] * s, w[3], w[4], w[5])
    } else {
        w
    }
}

fn pose_parts(p: &[f64; 7]) -> Result<(Vector3<f64>, Quat)> {
    match ManifoldPoint::from_pose7(p)? {
        ManifoldPoint::Cartesian { p, q } => Ok((p, q)),
        _ => unreachable!("from_pose7 yields M1"),
    }
}

impl Operator {
    pub fn from_config(cfg: &OperatorConfig) -> Result<Self> {
        let sorted = |ts: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = ts.collect();
            v.windows(2).all(|w| w[0] <= w[1])
        };
        Ok(match cfg {
            OperatorConfig::None { hand } => Operator { kind: Kind::None, hand: *hand },
            OperatorConfig::Wrench { profile, hand } => {
                if !sorted(&mut profile.iter().map(|k| k.t)) {
                    return Err(VfError::Config("wrench profile times must be non-decreasing".into()));
                }
                Operator { kind: Kind::Wrench(profile.clone()), hand: *hand }
            }
            OperatorConfig::Waypoints { waypoints, hand } => {
                if !sorted(&mut waypoints.iter().map(|k| k.t)) {
                    return Err(VfError::Config("waypoint times must be non-decreasing".into()));
                }
                let wps = waypoints
                    .iter()
                    .map(|WaypointKey { t, pose }| pose_parts(pose).map(|(p, q)| (*t, p, q)))
                    .collect::<Result<Vec<_>>>()?;
                Operator { kind: Kind::Waypoints(wps), hand: *hand }
            }
        })
    }

    pub fn model_name(&self, live: &LiveInput) -> &'static str {
        if live.cursor.is_some() {
            return "hand_spring_surrogate";
        }
        match self.kind {
            Kind::None if live.wrench.is_some() => "live_wrench",
            Kind::None => "none",
            Kind::Wrench(_) => "wrench_profile",
            Kind::Waypoints(_) => "hand_spring_surrogate",
        }
    }

    /// Operator wrench in BASE at time `t`.
    pub fn wrench_base(&self, t: f64, body: &BodyState, live: &LiveInput) -> Vector6<f64> {
        let mut w = match (&live.cursor, &self.kind) {
            (Some(c), _) => match pose_parts(c) {
                Ok((p, q)) => hand_spring(&self.hand, body, &p, &q),
                Err(_) => Vector6::zeros(),
            },
            (None, Kind::None) => Vector6::zeros(),
            (None, Kind::Wrench(profile)) => match profile.iter().rev().find(|k| k.t <= t) {
                Some(k) => cap(Vector6::from_column_slice(&k.wrench), self.hand.max_force),
                None => Vector6::zeros(),
            },
            (None, Kind::Waypoints(wps)) => match wps.iter().rev().find(|k| k.0 <= t) {
                Some((_, p, q)) => hand_spring(&self.hand, body, p, q),
                None => Vector6::zeros(),
            },
        };
        if let Some(lw) = &live.wrench {
            w += cap(Vector6::from_column_slice(lw), self.hand.max_force);
        }
        w
    }
}
