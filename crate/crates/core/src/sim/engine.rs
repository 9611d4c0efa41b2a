//! One control step: evaluate fixtures, align, fuse, add the operator and
//! integrate the virtual body.

use nalgebra::{Isometry3, Matrix3, Matrix6, Point3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::operator::{LiveInput, Operator};
use super::scenario::{BodyParams, Scenario};
use super::teleop::{teleop_couple, TeleopParams};
use crate::arbitration::{express_wrench_m1, fuse_wrenches, guarded_jacobian, AlignedWrench, FusedWrench};
use crate::error::{Result, VfError};
use crate::fixtures::{EvalContext, FixtureOutput};
use crate::geometry::{convert, exp, quat, ManifoldPoint};
use crate::impedance::manifold_mass;
use crate::linalg::{blockdiag_rot, from_v6, rows_flat6};

/// Rigid-body state. Pose is an M1 point in BASE; the twist is
/// `[v in BASE; ω in TOOL]`, matching the M1 tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyState {
    pub pose: ManifoldPoint,
    pub twist: Vector6<f64>,
}

impl BodyState {
    pub fn at_rest(pose: ManifoldPoint) -> Self {
        BodyState { pose, twist: Vector6::zeros() }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.pose.quat().map(|q| q.to_rotation_matrix().into_inner()).unwrap_or_else(Matrix3::identity)
    }

    /// Twist with the linear part in TOOL.
    pub fn twist_tool(&self) -> Vector6<f64> {
        let r = self.rotation();
        let v = r.transpose() * self.twist.fixed_rows::<3>(0);
        Vector6::new(v.x, v.y, v.z, self.twist[3], self.twist[4], self.twist[5])
    }

    pub fn pose7(&self) -> [f64; 7] {
        self.pose.to_pose7().unwrap_or([f64::NAN; 7])
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite() && self.twist.iter().all(|v| v.is_finite())
    }

    /// Semi-implicit Euler under a TOOL wrench.
    pub fn integrate(&mut self, body: &BodyParams, w_tool: &Vector6<f64>, dt: f64) -> Result<()> {
        let m_inv = body.mass.try_inverse().ok_or_else(|| VfError::Singular("body mass".into()))?;
        let acc = m_inv * (w_tool - body.ambient_damping * self.twist_tool());
        let r = self.rotation();
        let a_lin = r * Vector3::new(acc[0], acc[1], acc[2]);
        for i in 0..3 {
            self.twist[i] += dt * a_lin[i];
            self.twist[3 + i] += dt * acc[3 + i];
        }
        self.pose = exp(&self.pose, &from_v6(&(self.twist * dt)))?;
        if !self.is_finite() {
            return Err(VfError::NonFinite("body state"));
        }
        Ok(())
    }
}

/// Body pose and twist re-expressed in a fixture frame (`t` = frame in BASE).
pub fn to_frame(state: &BodyState, t: &Isometry3<f64>) -> Result<(ManifoldPoint, Vector6<f64>)> {
    let (p, q) = match &state.pose {
        ManifoldPoint::Cartesian { p, q } => (*p, *q),
        other => return Err(VfError::ManifoldMismatch { expected: crate::geometry::ManifoldId::M1, got: other.manifold() }),
    };
    let inv = t.inverse();
    let pf = (inv * Point3::from(p)).coords;
    let qf = quat::canonical(inv.rotation * q);
    let v = inv.rotation * Vector3::new(state.twist[0], state.twist[1], state.twist[2]);
    Ok((ManifoldPoint::m1(pf, qf), Vector6::new(v.x, v.y, v.z, state.twist[3], state.twist[4], state.twist[5])))
}

/// Evaluation context for a fixture on `manifold`, with the body mass mapped
/// into manifold coordinates.
pub fn eval_context(x_f: &ManifoldPoint, twist_f: &Vector6<f64>, manifold: crate::geometry::ManifoldId, mass_tool: &Matrix6<f64>) -> Result<EvalContext> {
    let x = convert(x_f, manifold)?;
    let j = guarded_jacobian(&x)?;
    let r = x_f.quat().map(|q| q.to_rotation_matrix().into_inner()).unwrap_or_else(Matrix3::identity);
    let mut tm = blockdiag_rot(&r.transpose());
    tm.fixed_view_mut::<3, 3>(3, 3).copy_from(&Matrix3::identity());
    let m_m1 = tm.transpose() * mass_tool * tm;
    Ok(EvalContext { x, twist: j * twist_f, x_m1: x_f.clone(), mass: manifold_mass(&m_m1, &j)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub id: String,
    pub active: bool,
    /// Fixture wrench in TOOL.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<[f64; 6]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cov: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub progress: Option<f64>,
    /// Attractor pose in BASE.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attractor: Option<[f64; 7]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRecord {
    pub mean: [f64; 6],
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessRecord {
    pub id: String,
    /// Row-major, fixture manifold coordinates.
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub model: String,
    /// Operator wrench in BASE.
    pub wrench: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDeviceRecord {
    pub pose: [f64; 7],
    pub twist: [f64; 6],
}

/// One trace line: the state at `t` and everything evaluated there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub pose: [f64; 7],
    pub twist: [f64; 6],
    pub operator: OperatorRecord,
    pub fixtures: Vec<FixtureRecord>,
    pub fused: FusedRecord,
    pub stiffness: Vec<StiffnessRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<InputDeviceRecord>,
}

fn arr6(v: &Vector6<f64>) -> [f64; 6] {
    [v[0], v[1], v[2], v[3], v[4], v[5]]
}

/// Wrench with both blocks rotated by `r`.
fn rotate_wrench(r: &Matrix3<f64>, w: &Vector6<f64>) -> Vector6<f64> {
    blockdiag_rot(r) * w
}

/// Scenario plus mutable simulation state.
#[derive(Debug, Clone)]
pub struct Engine {
    pub scenario: Scenario,
    frames: Vec<Isometry3<f64>>,
    pub state: BodyState,
    /// Input device body when teleoperating.
    pub input: Option<BodyState>,
    teleop: Option<TeleopParams>,
    operator: Operator,
    pub step_index: usize,
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let frames = scenario
            .fixtures
            .iter()
            .map(|f| scenario.frames.in_base(&f.frame))
            .collect::<Result<Vec<_>>>()?;
        let state = BodyState::at_rest(scenario.x0.clone());
        let teleop = scenario.teleop.as_ref().map(TeleopParams::from_config).transpose()?;
        let input = teleop.as_ref().map(|_| state.clone());
        let operator = Operator::from_config(&scenario.operator)?;
        Ok(Engine { scenario, frames, state, input, teleop, operator, step_index: 0 })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.scenario.dt
    }

    pub fn finished(&self) -> bool {
        self.step_index >= self.scenario.n_steps()
    }

    pub fn reset(&mut self, pose: ManifoldPoint) {
        self.state = BodyState::at_rest(pose);
        if self.input.is_some() {
            self.input = Some(self.state.clone());
        }
        self.step_index = 0;
    }

    fn evaluate_one(&self, k: usize) -> Result<(FixtureOutput, Option<AlignedWrench>)> {
        let inst = &self.scenario.fixtures[k];
        let (x_f, tw_f) = to_frame(&self.state, &self.frames[k])?;
        let ctx = eval_context(&x_f, &tw_f, inst.model.manifold(), &self.scenario.body.mass)?;
        let out = inst.model.evaluate(&ctx)?;
        let aligned = match &out.wrench {
            Some(wd) if out.active => Some(express_wrench_m1(wd, &x_f, &inst.id)?),
            _ => None,
        };
        Ok((out, aligned))
    }

    /// Evaluate, fuse and integrate one step; returns the record of the
    /// state the step started from.
    pub fn step(&mut self, live: &LiveInput) -> Result<StepRecord> {
        let t = self.time();
        let n = self.scenario.fixtures.len();
        let evals = self.scenario.exec.map_range(n, |k| self.evaluate_one(k));

        let mut aligned = Vec::with_capacity(n);
        let mut fixtures = Vec::with_capacity(n);
        let mut stiffness = Vec::new();
        for (k, ev) in evals.into_iter().enumerate() {
            let inst = &self.scenario.fixtures[k];
            let (out, al, error) = match ev {
                Ok((out, al)) => (Some(out), al, None),
                // A chart singularity only drops this fixture for the step.
                Err(e @ VfError::ChartSingularity { .. }) => (None, None, Some(e.to_string())),
                Err(e) => return Err(VfError::InvalidParam(format!("fixture '{}' at t = {t}: {e}", inst.id))),
            };
            let mut rec = FixtureRecord {
                id: inst.id.clone(),
                active: false,
                mean: None,
                cov: None,
                progress: None,
                attractor: None,
                error,
            };
            if let Some(out) = &out {
                rec.active = out.active;
                rec.progress = out.progress;
                if let Some(a) = &out.attractor {
                    let m1 = crate::geometry::to_m1(a)?;
                    let based = self.scenario.frames.express_pose(&m1, &inst.frame, &crate::geometry::frames::Frame::Base)?;
                    rec.attractor = Some(based.to_pose7()?);
                }
                if let Some(kk) = &out.stiffness {
                    stiffness.push(StiffnessRecord { id: inst.id.clone(), k: rows_flat6(kk) });
                }
            }
            if let Some(a) = al {
                rec.mean = Some(arr6(&a.mean));
                let wd_cov = crate::linalg::pinv_sym(&crate::linalg::from_m6(&a.precision), 1e-14).0;
                rec.cov = Some(crate::linalg::rows_flat(&wd_cov));
                aligned.push(a);
            }
            fixtures.push(rec);
        }
        let fused = if aligned.is_empty() { FusedWrench::zero() } else { fuse_wrenches(&aligned)? };

        let dt = self.scenario.dt;
        let body = self.scenario.body;
        let pose7 = self.state.pose7();
        let twist = arr6(&self.state.twist);

        let (op_record, input_record) = match (&self.teleop, &mut self.input) {
            (Some(tp), Some(inp)) => {
                // Operator drives the input device; the remote body feels the
                // coupling plus the fused fixture wrench.
                let w_op = self.operator.wrench_base(t, inp, live);
                let r_rem = self.state.rotation();
                let w_vf = {
                    let f = r_rem * Vector3::new(fused.mean[0], fused.mean[1], fused.mean[2]);
                    Vector6::new(f.x, f.y, f.z, fused.mean[3], fused.mean[4], fused.mean[5])
                };
                let c = teleop_couple(&inp.pose, &self.state.pose, &inp.twist, &self.state.twist, tp, &w_vf)?;
                let r_inp = inp.rotation();
                let to_tool = |r: &Matrix3<f64>, w: &Vector6<f64>| {
                    let f = r.transpose() * Vector3::new(w[0], w[1], w[2]);
                    Vector6::new(f.x, f.y, f.z, w[3], w[4], w[5])
                };
                let op_tool = rotate_wrench(&r_inp.transpose(), &w_op);
                let inp_rec = InputDeviceRecord { pose: inp.pose7(), twist: arr6(&inp.twist) };
                inp.integrate(&tp.input_body, &(to_tool(&r_inp, &c.input) + op_tool), dt)?;
                self.state.integrate(&body, &to_tool(&r_rem, &c.remote), dt)?;
                (OperatorRecord { model: self.operator.model_name(live).into(), wrench: arr6(&w_op) }, Some(inp_rec))
            }
            _ => {
                let w_op = self.operator.wrench_base(t, &self.state, live);
                let r = self.state.rotation();
                let total = fused.mean + rotate_wrench(&r.transpose(), &w_op);
                self.state.integrate(&body, &total, dt)?;
                (OperatorRecord { model: self.operator.model_name(live).into(), wrench: arr6(&w_op) }, None)
            }
        };
        self.step_index += 1;

        Ok(StepRecord {
            t,
            pose: pose7,
            twist,
            operator: op_record,
            fixtures,
            fused: FusedRecord { mean: arr6(&fused.mean), cov: rows_flat6(&fused.cov) },
            stiffness,
            input: input_record,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quat;

    fn body(m: f64) -> BodyParams {
        BodyParams { mass: Matrix6::identity() * m, ambient_damping: Matrix6::zeros() }
    }

    #[test]
    fn constant_force_from_rest() {
        let mut s = BodyState::at_rest(ManifoldPoint::m1(Vector3::zeros(), Quat::identity()));
        let f = Vector6::new(2.0, 0.0, -1.0, 0.0, 0.0, 0.0);
        s.integrate(&body(4.0), &f, 1e-3).unwrap();
        assert!((s.twist - f * (1e-3 / 4.0)).norm() < 1e-18);
    }

    #[test]
    fn tool_force_follows_orientation() {
        let q = quat::rot_z(std::f64::consts::FRAC_PI_2);
        let mut s = BodyState::at_rest(ManifoldPoint::m1(Vector3::zeros(), q));
        s.integrate(&body(1.0), &Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        assert!((s.twist - Vector6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn frame_change_round_trip() {
        let s = BodyState {
            pose: ManifoldPoint::m1(Vector3::new(1.0, 2.0, 3.0), quat::rot_z(0.3)),
            twist: Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
        };
        let t = crate::geometry::frames::isometry([0.5, -1.0, 0.0], [0.0, 0.0, 0.2f64.sin(), 0.2f64.cos()]);
        let (x, tw) = to_frame(&s, &t).unwrap();
        let p = x.position().unwrap();
        let back = t * Point3::from(p);
        assert!((back.coords - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!((tw.fixed_rows::<3>(3) - s.twist.fixed_rows::<3>(3)).norm() == 0.0);
        assert!((tw.fixed_rows::<3>(0).norm() - s.twist.fixed_rows::<3>(0).norm()).abs() < 1e-12);
    }
}
