//! Bring fixture wrenches into one space and fuse them.
//!
//! Wrenches are pulled back from the manifold cotangent to M1 with the chart
//! Jacobian, then the force part is rotated into the TOOL frame. Fusion runs
//! in information form so zero-precision DoFs stay neutral.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::fixtures::WrenchDistribution;
use crate::geometry::{convert, manifold_jacobian, ManifoldId, ManifoldPoint};
use crate::linalg::{blockdiag_rot, from_m6, from_v6, symmetrize6, to_m6, to_v6};
use crate::prob::product_information;

/// Largest chart Jacobian condition number accepted.
pub const JACOBIAN_COND_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedWrench {
    pub source: String,
    /// Force and torque in TOOL coordinates.
    pub mean: Vector6<f64>,
    pub precision: Matrix6<f64>,
}

/// Chart Jacobian at `x`, rejected when numerically singular.
pub fn guarded_jacobian(x: &ManifoldPoint) -> Result<Matrix6<f64>> {
    let j = manifold_jacobian(x)?;
    if x.manifold() == ManifoldId::M1 {
        return Ok(j);
    }
    let sv = j.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 0.0) || hi / lo > JACOBIAN_COND_MAX {
        return Err(VfError::ChartSingularity { r: x.radius().unwrap_or(0.0) });
    }
    Ok(j)
}

/// Pull a wrench distribution back to M1 and express it in TOOL.
///
/// `x_m1` is the end-effector pose (fixture frame) the distribution's base was
/// converted from.
pub fn express_wrench_m1(wd: &WrenchDistribution, x_m1: &ManifoldPoint, source: &str) -> Result<AlignedWrench> {
    let base = convert(x_m1, wd.manifold)?;
    let j = guarded_jacobian(&base)?;
    let mean_m1 = j.transpose() * wd.mean;
    // Precision form of J^-1 Σ J^-T.
    let prec_m1 = j.transpose() * wd.precision * j;
    let q = x_m1.quat().ok_or(VfError::ManifoldMismatch { expected: ManifoldId::M1, got: x_m1.manifold() })?;
    let mut a = blockdiag_rot(&q.to_rotation_matrix().into_inner().transpose());
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&nalgebra::Matrix3::identity());
    Ok(AlignedWrench {
        source: source.to_string(),
        mean: a * mean_m1,
        precision: symmetrize6(&(a * prec_m1 * a.transpose())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedWrench {
    pub mean: Vector6<f64>,
    pub cov: Matrix6<f64>,
    pub precision: Matrix6<f64>,
    /// Directions without information; their wrench component is zero.
    pub degenerate: usize,
}

impl FusedWrench {
    pub fn zero() -> Self {
        FusedWrench { mean: Vector6::zeros(), cov: Matrix6::zeros(), precision: Matrix6::zeros(), degenerate: 6 }
    }
}

/// Product of experts over aligned wrenches.
pub fn fuse_wrenches(items: &[AlignedWrench]) -> Result<FusedWrench> {
    if items.is_empty() {
        return Ok(FusedWrench::zero());
    }
    let info: Vec<(DVector<f64>, DMatrix<f64>)> = items.iter().map(|w| (from_v6(&w.mean), from_m6(&w.precision))).collect();
    let p = product_information(&info)?;
    if p.degenerate > 0 {
        log::debug!("fused precision lacks {} direction(s)", p.degenerate);
    }
    Ok(FusedWrench { mean: to_v6(&p.mean), cov: to_m6(&p.cov), precision: to_m6(&p.precision), degenerate: p.degenerate })
}

/// `τ = Jᵀ ŵ` for an articulated arm with Jacobian `j` (6 × n).
pub fn joint_torques(w: &Vector6<f64>, j: &DMatrix<f64>) -> Result<DVector<f64>> {
    if j.nrows() != 6 {
        return Err(VfError::Dimension { expected: 6, got: j.nrows() });
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(VfError::NonFinite("robot jacobian"));
    }
    Ok(j.transpose() * from_v6(w))
}
