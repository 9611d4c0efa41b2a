//! Constant wrench overlays, optionally limited to a box in the fixture frame.

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{EvalContext, FixtureOutput, WrenchDistribution};
use crate::error::{Result, VfError};
use crate::geometry::{ManifoldId, ManifoldPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveRegion {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl ActiveRegion {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantWrenchFixture {
    pub manifold: ManifoldId,
    pub mean: Vector6<f64>,
    /// Zero rows mean no opinion on that DoF.
    pub cov: Matrix6<f64>,
    pub region: Option<ActiveRegion>,
}

impl ConstantWrenchFixture {
    /// Lift a reduced wrench onto the listed DoFs of the 6-D cotangent.
    pub fn padded(manifold: ManifoldId, slots: &[usize], mean: &[f64], cov: &[f64]) -> Result<Self> {
        let k = slots.len();
        if mean.len() != k || cov.len() != k * k {
            return Err(VfError::Dimension { expected: k, got: mean.len() });
        }
        let mut m = Vector6::zeros();
        let mut c = Matrix6::zeros();
        for (a, &i) in slots.iter().enumerate() {
            if i >= 6 {
                return Err(VfError::InvalidParam(format!("slot {i} out of range")));
            }
            m[i] = mean[a];
            for (b, &j) in slots.iter().enumerate() {
                c[(i, j)] = cov[a * k + b];
            }
        }
        Ok(ConstantWrenchFixture { manifold, mean: m, cov: c, region: None })
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        if let (Some(r), ManifoldPoint::Cartesian { p, .. }) = (&self.region, &ctx.x_m1) {
            if !r.contains(p) {
                return Ok(FixtureOutput::inactive());
            }
        }
        Ok(FixtureOutput::with_wrench(WrenchDistribution::from_cov(ctx.x.clone(), self.mean, self.cov)?))
    }
}
