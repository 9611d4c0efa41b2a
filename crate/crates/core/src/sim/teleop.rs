//! Position-computed force coupling between an input device and the remote
//! end-effector.

use nalgebra::{Matrix6, Vector6};

use super::config::TeleopConfig;
use super::scenario::BodyParams;
use crate::error::{Result, VfError};
use crate::geometry::{log, ManifoldPoint};
use crate::linalg::{psd_clip6, to_v6};

#[derive(Debug, Clone, PartialEq)]
pub struct TeleopParams {
    pub k: Matrix6<f64>,
    pub d: Matrix6<f64>,
    pub chi: f64,
    pub adjoint: Matrix6<f64>,
    pub input_body: BodyParams,
}

impl TeleopParams {
    pub fn from_config(c: &TeleopConfig) -> Result<Self> {
        let k = Matrix6::from_diagonal(&Vector6::from_column_slice(&c.stiffness));
        let d = Matrix6::from_diagonal(&Vector6::from_column_slice(&c.damping));
        if psd_clip6(&k) != k || psd_clip6(&d) != d {
            return Err(VfError::Config("teleop stiffness and damping must be non-negative".into()));
        }
        let adjoint = match &c.adjoint {
            None => Matrix6::identity(),
            Some(v) if v.len() == 36 => Matrix6::from_row_slice(v),
            Some(v) => return Err(VfError::Dimension { expected: 36, got: v.len() }),
        };
        if adjoint.determinant().abs() < 1e-12 {
            return Err(VfError::Config("teleop adjoint must be invertible".into()));
        }
        let mass = Matrix6::from_diagonal(&Vector6::from_column_slice(&c.input_mass));
        Ok(TeleopParams {
            k,
            d,
            chi: c.chi,
            adjoint,
            input_body: BodyParams { mass, ambient_damping: Matrix6::zeros() },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopWrenches {
    /// Coupling spring-damper alone, M1 cotangent at the remote pose.
    pub coupling: Vector6<f64>,
    /// Coupling plus fixture wrench, applied to the remote body.
    pub remote: Vector6<f64>,
    /// Wrench rendered on the input device.
    pub input: Vector6<f64>,
}

/// Remote and input wrenches. Twists follow the M1 tangent convention; the
/// input twist's angular part is re-expressed in the remote body frame before
/// differencing. `w_vf` is an M1 cotangent vector at `x_rem`.
pub fn teleop_couple(
    x_inp: &ManifoldPoint,
    x_rem: &ManifoldPoint,
    twist_inp: &Vector6<f64>,
    twist_rem: &Vector6<f64>,
    p: &TeleopParams,
    w_vf: &Vector6<f64>,
) -> Result<TeleopWrenches> {
    let (Some(q_inp), Some(q_rem)) = (x_inp.quat(), x_rem.quat()) else {
        return Err(VfError::InvalidParam("teleoperation poses must be on M1".into()));
    };
    let l = to_v6(&log(x_rem, x_inp)?);
    let w_inp_in_rem = (q_rem.inverse() * q_inp) * twist_inp.fixed_rows::<3>(3).into_owned();
    let mut dv = twist_inp - twist_rem;
    for i in 0..3 {
        dv[3 + i] = w_inp_in_rem[i] - twist_rem[3 + i];
    }
    let coupling = p.chi * (p.k * l + p.d * dv);
    Ok(TeleopWrenches { coupling, remote: coupling + w_vf, input: -(p.adjoint * coupling) })
}
