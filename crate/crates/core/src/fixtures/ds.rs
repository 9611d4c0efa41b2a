//! Velocity-field fixtures: learned KMP policies and the stabilizing policy.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{EvalContext, FixtureOutput, WrenchDistribution};
use crate::error::{Result, VfError};
use crate::exec::Execution;
use crate::geometry::{distance_sq, log, ManifoldId, ManifoldPoint, Quat};
use crate::learning::{
    fit_gmm, gmr_condition, pose_space_covariance, subsample_equal_spacing, Demonstration, GmmOptions, JointPoint,
    KmpModel, KmpParams, ReferenceDistribution, kmp_fit,
};
use crate::learning::demo::finite_difference_velocities;

/// Which part of the pose a policy sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Full,
    /// Orientation dropped: M1 becomes a plain position, M2/M3 keep their
    /// chart with identity orientation.
    Position,
    /// Planar `(x, y)` of an M1 pose.
    PositionXy,
}

impl Projection {
    pub fn apply(self, x: &ManifoldPoint) -> Result<ManifoldPoint> {
        Ok(match (self, x) {
            (Projection::Full, _) => x.clone(),
            (Projection::Position, ManifoldPoint::Cartesian { p, .. }) => ManifoldPoint::Position(*p),
            (Projection::Position, ManifoldPoint::Cylindrical { .. } | ManifoldPoint::Spherical { .. }) => {
                x.with_quat(Quat::identity())
            }
            (Projection::PositionXy, ManifoldPoint::Cartesian { p, .. }) => {
                ManifoldPoint::Euclidean(DVector::from_vec(vec![p.x, p.y]))
            }
            _ => {
                return Err(VfError::InvalidParam(format!("projection {:?} not defined on {:?}", self, x.manifold())))
            }
        })
    }

    /// Default output slots in the 6-D manifold tangent.
    pub fn default_slots(self) -> Vec<usize> {
        match self {
            Projection::Full => (0..6).collect(),
            Projection::Position => vec![0, 1, 2],
            Projection::PositionXy => vec![0, 1],
        }
    }
}

/// Pick the slot entries of a projected tangent vector.
fn select(v: &DVector<f64>, slots: &[usize]) -> DVector<f64> {
    if v.len() == slots.len() {
        v.clone()
    } else {
        DVector::from_iterator(slots.len(), slots.iter().map(|&s| v[s]))
    }
}

fn select_block(m: &DMatrix<f64>, slots: &[usize]) -> DMatrix<f64> {
    if m.nrows() == slots.len() {
        m.clone()
    } else {
        DMatrix::from_fn(slots.len(), slots.len(), |a, b| m[(slots[a], slots[b])])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DsPolicy {
    pub projection: Projection,
    pub slots: Vec<usize>,
    pub kmp: KmpModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsTrainConfig {
    pub spacing: f64,
    pub n_components: usize,
    pub seed: u64,
    pub kmp: KmpParams,
    /// Keep every `stride`-th subsampled point as a KMP reference input.
    pub stride: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for DsTrainConfig {
    fn default() -> Self {
        DsTrainConfig {
            spacing: 0.05,
            n_components: 5,
            seed: 0,
            kmp: KmpParams { l: 0.1, lambda: 1.0, lambda_c: 10.0, alpha: 1.0 },
            stride: 1,
            exec: Execution::Parallel,
        }
    }
}

impl DsPolicy {
    /// Subsample, fit a GMM over (pose, velocity), sample GMR means with the
    /// pose-space covariance as reference, and fit the KMP.
    pub fn train(demos: &[Demonstration], projection: Projection, slots: Vec<usize>, cfg: &DsTrainConfig) -> Result<Self> {
        if demos.is_empty() {
            return Err(VfError::Empty("demonstrations"));
        }
        let mut data: Vec<JointPoint> = Vec::new();
        for d in demos {
            let pts = d.points.iter().map(|p| projection.apply(p)).collect::<Result<Vec<_>>>()?;
            let mut proj = Demonstration::new(d.times.clone(), pts)?;
            proj.velocities = d.velocities.clone();
            let sub = subsample_equal_spacing(&proj, cfg.spacing)?;
            let vels = match (&d.velocities, &sub.velocities) {
                (Some(_), Some(v)) => v.clone(),
                _ => finite_difference_velocities(&sub.times, &sub.points)?,
            };
            for (p, v) in sub.points.iter().zip(&vels) {
                data.push((p.clone(), ManifoldPoint::Euclidean(select(v, &slots))));
            }
        }
        let opts = GmmOptions { exec: cfg.exec, ..GmmOptions::default() };
        let gmm = fit_gmm(&data, cfg.n_components.min(data.len()), cfg.seed, &opts)?.gmm;
        let stride = cfg.stride.max(1);
        let mut reference = ReferenceDistribution { inputs: vec![], means: vec![], covs: vec![] };
        for (x, _) in data.iter().step_by(stride) {
            let ManifoldPoint::Euclidean(mu) = gmr_condition(&gmm, x)?.gaussian.mean else {
                return Err(VfError::InvalidParam("velocity output must be Euclidean".into()));
            };
            let cov = pose_space_covariance(&gmm, x)?.cov;
            reference.inputs.push(x.clone());
            reference.means.push(mu);
            reference.covs.push(select_block(&cov, &slots));
        }
        let kmp = kmp_fit(reference, cfg.kmp, cfg.exec)?;
        Ok(DsPolicy { projection, slots, kmp })
    }

    pub fn predict(&self, x: &ManifoldPoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.kmp.predict(&self.projection.apply(x)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DsFixture {
    pub manifold: ManifoldId,
    pub policies: Vec<DsPolicy>,
    pub d_vf: Matrix6<f64>,
    /// Covariance on DoFs no policy predicts.
    pub sigma_far: f64,
}

impl DsFixture {
    pub fn new(manifold: ManifoldId, policies: Vec<DsPolicy>, d_vf: Matrix6<f64>, sigma_far: f64) -> Result<Self> {
        if policies.is_empty() {
            return Err(VfError::Empty("ds policies"));
        }
        let mut seen = [false; 6];
        for p in &policies {
            for &s in &p.slots {
                if s >= 6 || seen[s] {
                    return Err(VfError::InvalidParam(format!("ds output slot {s} out of range or repeated")));
                }
                seen[s] = true;
            }
            if p.slots.len() != p.kmp.output_dim() {
                return Err(VfError::Dimension { expected: p.slots.len(), got: p.kmp.output_dim() });
            }
        }
        Ok(DsFixture { manifold, policies, d_vf, sigma_far })
    }

    /// Mean velocity and covariance assembled over the six DoFs.
    pub fn velocity(&self, x: &ManifoldPoint) -> Result<(Vector6<f64>, Matrix6<f64>)> {
        let mut v = Vector6::zeros();
        let mut cov = Matrix6::identity() * self.sigma_far;
        for p in &self.policies {
            let (mu, sigma) = p.predict(x)?;
            for (a, &i) in p.slots.iter().enumerate() {
                v[i] = mu[a];
                for (b, &j) in p.slots.iter().enumerate() {
                    cov[(i, j)] = sigma[(a, b)];
                }
            }
        }
        Ok((v, cov))
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        let (v, cov) = self.velocity(&ctx.x)?;
        let w = self.d_vf * (v - ctx.twist);
        Ok(FixtureOutput::with_wrench(WrenchDistribution::from_cov(ctx.x.clone(), w, cov)?))
    }

    /// All reference inputs, for pooling into a stabilizing policy.
    pub fn reference_points(&self) -> Vec<ManifoldPoint> {
        self.policies.iter().flat_map(|p| p.kmp.reference.inputs.iter().cloned()).collect()
    }
}

/// Constant-covariance policy pulling toward the closest known reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizingPolicy {
    pub manifold: ManifoldId,
    pub projection: Projection,
    pub slots: Vec<usize>,
    pub ref_points: Vec<ManifoldPoint>,
    pub speed: f64,
    pub sigma_stab: f64,
    pub eps_d: f64,
    pub d_vf: Matrix6<f64>,
}

impl StabilizingPolicy {
    pub fn new(
        manifold: ManifoldId,
        projection: Projection,
        ref_points: Vec<ManifoldPoint>,
        speed: f64,
        sigma_stab: f64,
        d_vf: Matrix6<f64>,
    ) -> Result<Self> {
        if ref_points.is_empty() {
            return Err(VfError::Empty("stabilizer reference set"));
        }
        if !(speed > 0.0 && sigma_stab > 0.0) {
            return Err(VfError::InvalidParam("stabilizer speed and covariance must be positive".into()));
        }
        Ok(StabilizingPolicy {
            manifold,
            projection,
            slots: projection.default_slots(),
            ref_points,
            speed,
            sigma_stab,
            eps_d: 1e-8,
            d_vf,
        })
    }

    /// Velocity toward the closest reference, `speed` long unless already
    /// there.
    pub fn velocity(&self, x: &ManifoldPoint) -> Result<Vector6<f64>> {
        let xp = self.projection.apply(x)?;
        let mut best = (f64::INFINITY, 0usize);
        for (j, r) in self.ref_points.iter().enumerate() {
            let d = distance_sq(&xp, r)?;
            if d < best.0 {
                best = (d, j);
            }
        }
        let mut v = Vector6::zeros();
        if best.0 < self.eps_d {
            return Ok(v);
        }
        let l = select(&log(&xp, &self.ref_points[best.1])?, &self.slots) * (self.speed / best.0.sqrt());
        for (a, &i) in self.slots.iter().enumerate() {
            v[i] = l[a];
        }
        Ok(v)
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        let v = self.velocity(&ctx.x)?;
        let w = self.d_vf * (v - ctx.twist);
        let cov = Matrix6::identity() * self.sigma_stab;
        Ok(FixtureOutput::with_wrench(WrenchDistribution::from_cov(ctx.x.clone(), w, cov)?))
    }
}
