//! Visual-servoing fixtures: a mixture of detection experts gated by
//! deformed manifold distances and collapsed to one attractor.

use nalgebra::{DMatrix, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{precision_from_cov, EvalContext, FixtureOutput, WrenchDistribution};
use crate::error::{Result, VfError};
use crate::geometry::{log, ManifoldId, ManifoldPoint};
use crate::impedance::{impedance_wrench, optimal_damping, synthesize_stiffness, StiffnessParams};
use crate::linalg::{to_m6, to_v6};
use crate::prob::{moment_match, GaussianOnManifold};

/// Inverse-square weights; a zero length ignores that DoF.
pub fn inverse_square(l: &[f64; 6]) -> Vector6<f64> {
    Vector6::from_fn(|i, _| if l[i] > 0.0 { 1.0 / (l[i] * l[i]) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deadzone {
    pub l_dead: [f64; 6],
    pub r_dead: f64,
}

impl Default for Deadzone {
    fn default() -> Self {
        Deadzone { l_dead: [0.0; 6], r_dead: 0.0 }
    }
}

/// Shrink the active DoFs of a log by up to `r_dead` in the deadzone metric.
/// Inside the deadzone the active DoFs become exactly zero.
pub fn vs_deadzone_log(l: &Vector6<f64>, dz: &Deadzone) -> Vector6<f64> {
    let w = inverse_square(&dz.l_dead);
    let r = l.dot(&w.component_mul(l)).sqrt();
    if r == 0.0 {
        return *l;
    }
    let inside = r <= dz.r_dead;
    let crop = r.min(dz.r_dead);
    Vector6::from_fn(|i, _| {
        if dz.l_dead[i] > 0.0 {
            if inside {
                0.0
            } else {
                l[i] - crop * (l[i] / r)
            }
        } else {
            l[i]
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditionalExpert {
    pub l_add: [f64; 6],
    pub deadzone: Deadzone,
    /// Expected location of the detections.
    pub x_targ: ManifoldPoint,
    /// Isotropic covariance of the expert placed at the end effector.
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisualServoFixture {
    pub manifold: ManifoldId,
    pub experts: Vec<GaussianOnManifold>,
    pub lengths: [f64; 6],
    pub gamma: f64,
    pub deadzone: Deadzone,
    pub insertion_axis: Option<usize>,
    pub additional: Option<AdditionalExpert>,
    pub stiffness: StiffnessParams,
    pub zeta: f64,
}

#[derive(Debug, Clone)]
pub struct VsBlend {
    /// Normalized gates; the additional expert, if any, is last.
    pub weights: Vec<f64>,
    pub attractor: GaussianOnManifold,
}

impl VisualServoFixture {
    pub fn new(
        manifold: ManifoldId,
        experts: Vec<GaussianOnManifold>,
        lengths: [f64; 6],
        gamma: f64,
        stiffness: StiffnessParams,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(VfError::Empty("visual experts"));
        }
        if !(gamma > 0.0) || lengths.iter().any(|l| *l < 0.0) {
            return Err(VfError::InvalidParam("gamma must be positive and lengths non-negative".into()));
        }
        for e in &experts {
            if e.manifold() != manifold {
                return Err(VfError::ManifoldMismatch { expected: manifold, got: e.manifold() });
            }
        }
        stiffness.validate()?;
        Ok(VisualServoFixture {
            manifold,
            experts,
            lengths,
            gamma,
            deadzone: Deadzone::default(),
            insertion_axis: None,
            additional: None,
            stiffness,
            zeta: 0.7,
        })
    }

    /// Gates and the moment-matched attractor at `x`.
    pub fn blend(&self, x: &ManifoldPoint) -> Result<VsBlend> {
        let lw = inverse_square(&self.lengths);
        let mut h = Vec::with_capacity(self.experts.len() + 1);
        for e in &self.experts {
            let l = vs_deadzone_log(&to_v6(&log(x, &e.mean)?), &self.deadzone);
            h.push((-0.5 * l.dot(&lw.component_mul(&l))).exp() + self.gamma);
        }
        let mut comps = self.experts.clone();
        if let Some(add) = &self.additional {
            let l = vs_deadzone_log(&to_v6(&log(x, &add.x_targ)?), &add.deadzone);
            let wa = inverse_square(&add.l_add);
            h.push(1.0 - (-0.5 * l.dot(&wa.component_mul(&l))).exp());
            comps.push(GaussianOnManifold { mean: x.clone(), cov: DMatrix::identity(6, 6) * add.sigma });
        }
        let total: f64 = h.iter().sum();
        let weights: Vec<f64> = h.iter().map(|v| v / total).collect();
        let attractor = moment_match(&weights, &comps)?;
        Ok(VsBlend { weights, attractor })
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        let b = self.blend(&ctx.x)?;
        let cov = to_m6(&b.attractor.cov);
        let p = precision_from_cov(&cov)?;
        let r = ctx.x.radius().unwrap_or(1.0);
        let syn = synthesize_stiffness(&p, &self.stiffness, self.manifold, r)?;
        let mut k = syn.k;
        let mut d = optimal_damping(&syn.floored(self.stiffness.eps_damp), &ctx.mass, self.zeta);
        if let Some(ax) = self.insertion_axis {
            for m in [&mut k, &mut d] {
                m.row_mut(ax).fill(0.0);
                m.column_mut(ax).fill(0.0);
            }
        }
        let w = impedance_wrench(&ctx.x, &ctx.twist, &b.attractor.mean, &k, &d)?;
        Ok(FixtureOutput {
            active: true,
            wrench: Some(WrenchDistribution::from_cov(ctx.x.clone(), w, cov)?),
            progress: None,
            stiffness: Some(k),
            attractor: Some(b.attractor.mean),
        })
    }
}

/// Dense precision of the blended attractor, for inspection.
pub fn attractor_precision(b: &VsBlend) -> Result<Matrix6<f64>> {
    precision_from_cov(&to_m6(&b.attractor.cov))
}
