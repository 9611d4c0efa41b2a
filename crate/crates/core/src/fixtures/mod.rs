//! Fixture models. Every fixture turns the current end-effector state into a
//! Gaussian over a wrench in its manifold's cotangent space.

use nalgebra::{DMatrix, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::geometry::{ManifoldId, ManifoldPoint};
use crate::linalg::{self, from_m6, to_m6};

pub mod constant;
pub mod ds;
pub mod trajectory;
pub mod visual;

pub use constant::{ActiveRegion, ConstantWrenchFixture};
pub use ds::{DsFixture, DsPolicy, Projection, StabilizingPolicy};
pub use trajectory::{pb_attractor, precision_scaling, Automation, PbAttractor, TrajectoryFixture, TrajectorySample};
pub use visual::{vs_deadzone_log, AdditionalExpert, Deadzone, VisualServoFixture};

/// Gaussian wrench in the cotangent space at `base`.
///
/// The precision is the primary representation so that DoFs a fixture has no
/// opinion on carry exactly zero information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchDistribution {
    pub manifold: ManifoldId,
    pub base: ManifoldPoint,
    pub mean: Vector6<f64>,
    pub cov: Matrix6<f64>,
    pub precision: Matrix6<f64>,
}

impl WrenchDistribution {
    /// Zero rows/columns of `cov` mark DoFs without an opinion; the rest is
    /// inverted with jitter.
    pub fn from_cov(base: ManifoldPoint, mean: Vector6<f64>, cov: Matrix6<f64>) -> Result<Self> {
        let precision = precision_from_cov(&cov)?;
        Ok(WrenchDistribution { manifold: base.manifold(), base, mean, cov, precision })
    }

    pub fn from_precision(base: ManifoldPoint, mean: Vector6<f64>, precision: Matrix6<f64>) -> Self {
        let (pinv, _) = linalg::pinv_sym(&from_m6(&precision), 1e-14);
        WrenchDistribution { manifold: base.manifold(), base, mean, cov: to_m6(&pinv), precision }
    }
}

/// Precision with zero information on DoFs whose covariance row and column
/// are identically zero.
pub fn precision_from_cov(cov: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(VfError::NonFinite("covariance"));
    }
    let live: Vec<usize> = (0..6).filter(|&i| (0..6).any(|j| cov[(i, j)] != 0.0 || cov[(j, i)] != 0.0)).collect();
    let mut p = Matrix6::zeros();
    if live.is_empty() {
        return Ok(p);
    }
    let sub = DMatrix::from_fn(live.len(), live.len(), |a, b| cov[(live[a], live[b])]);
    let inv = linalg::regularized_inverse(&linalg::psd_clip(&sub))?;
    for (a, &i) in live.iter().enumerate() {
        for (b, &j) in live.iter().enumerate() {
            p[(i, j)] = inv[(a, b)];
        }
    }
    Ok(p)
}

/// State handed to a fixture, all in the fixture's frame and manifold.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub x: ManifoldPoint,
    /// Twist in the manifold tangent.
    pub twist: Vector6<f64>,
    /// Same pose as an M1 point.
    pub x_m1: ManifoldPoint,
    /// Virtual mass in manifold coordinates.
    pub mass: Matrix6<f64>,
}

#[derive(Debug, Clone)]
pub struct FixtureOutput {
    pub active: bool,
    pub wrench: Option<WrenchDistribution>,
    /// Trajectory progress `j + nu`.
    pub progress: Option<f64>,
    pub stiffness: Option<Matrix6<f64>>,
    pub attractor: Option<ManifoldPoint>,
}

impl FixtureOutput {
    pub fn inactive() -> Self {
        FixtureOutput { active: false, wrench: None, progress: None, stiffness: None, attractor: None }
    }

    pub fn with_wrench(w: WrenchDistribution) -> Self {
        FixtureOutput { active: true, wrench: Some(w), progress: None, stiffness: None, attractor: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FixtureModel {
    Ds(DsFixture),
    Stab(StabilizingPolicy),
    Trajectory(TrajectoryFixture),
    Visual(VisualServoFixture),
    Constant(ConstantWrenchFixture),
}

impl FixtureModel {
    pub fn manifold(&self) -> ManifoldId {
        match self {
            FixtureModel::Ds(f) => f.manifold,
            FixtureModel::Stab(f) => f.manifold,
            FixtureModel::Trajectory(f) => f.manifold,
            FixtureModel::Visual(f) => f.manifold,
            FixtureModel::Constant(f) => f.manifold,
        }
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        match self {
            FixtureModel::Ds(f) => f.evaluate(ctx),
            FixtureModel::Stab(f) => f.evaluate(ctx),
            FixtureModel::Trajectory(f) => f.evaluate(ctx),
            FixtureModel::Visual(f) => f.evaluate(ctx),
            FixtureModel::Constant(f) => f.evaluate(ctx),
        }
    }
}
