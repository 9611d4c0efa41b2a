//! Position-based trajectory fixtures: attractor interpolation along sampled
//! GMR means, distance-based precision scaling and optional automation.

use nalgebra::{DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{precision_from_cov, EvalContext, FixtureOutput, WrenchDistribution};
use crate::error::{Result, VfError};
use crate::geometry::{exp, log, ManifoldId, ManifoldPoint};
use crate::impedance::{impedance_wrench, optimal_damping, synthesize_stiffness, StiffnessParams};
use crate::learning::{dtw_align, fit_gmm, gmr_condition, Demonstration, GmmOptions, JointPoint};
use crate::linalg::{to_m6, to_v6};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub mean: ManifoldPoint,
    pub cov: Matrix6<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Automation {
    /// Commanded speed along the trajectory.
    pub speed: f64,
    pub damping: Matrix6<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFixture {
    pub manifold: ManifoldId,
    pub samples: Vec<TrajectorySample>,
    /// Cached sample precisions.
    precisions: Vec<Matrix6<f64>>,
    pub d_min: f64,
    pub d_max: f64,
    pub stiffness: StiffnessParams,
    pub zeta: f64,
    pub automation: Option<Automation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbAttractor {
    pub x: ManifoldPoint,
    pub j: usize,
    pub nu: f64,
    /// Unclamped interpolation factor.
    pub nu_raw: f64,
}

/// Linear ramp of the precision scaling between `d_min` and `d_max`.
pub fn precision_scaling(d: f64, d_min: f64, d_max: f64) -> f64 {
    if d < d_min {
        1.0
    } else if d > d_max {
        0.0
    } else {
        1.0 - (d - d_min) / (d_max - d_min)
    }
}

fn position_only(v: DVector<f64>) -> DVector<f64> {
    let mut v = v;
    for k in 3..v.len() {
        v[k] = 0.0;
    }
    v
}

/// Closest consecutive pair by position-only Mahalanobis distance, then the
/// interpolation factor along the covariance-weighted geodesic.
pub fn pb_attractor(samples: &[TrajectorySample], precisions: &[Matrix6<f64>], x: &ManifoldPoint) -> Result<PbAttractor> {
    let n = samples.len();
    if n < 2 {
        return Err(VfError::InvalidParam("trajectory needs at least two samples".into()));
    }
    let dist = |k: usize| -> Result<f64> {
        let l = to_v6(&position_only(log(&samples[k].mean, x)?));
        Ok(l.dot(&(precisions[k] * l)))
    };
    let mut best = (f64::INFINITY, 0usize);
    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        let dk = dist(k)?;
        d.push(dk);
        if dk < best.0 {
            best = (dk, k);
        }
    }
    let k = best.1;
    let j = if k == 0 {
        0
    } else if k == n - 1 {
        n - 2
    } else if d[k - 1] <= d[k + 1] {
        k - 1
    } else {
        k
    };
    let mu = &samples[j].mean;
    let p = &precisions[j];
    let dl = to_v6(&log(mu, &samples[j + 1].mean)?);
    let de = to_v6(&log(mu, x)?);
    let den = dl.dot(&(p * dl));
    let nu_raw = if den > 0.0 { de.dot(&(p * dl)) / den } else { 0.0 };
    let nu = nu_raw.clamp(0.0, 1.0);
    let xp = exp(mu, &(crate::linalg::from_v6(&(dl * nu))))?;
    Ok(PbAttractor { x: xp, j, nu, nu_raw })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryTrainConfig {
    pub n_components: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for TrajectoryTrainConfig {
    fn default() -> Self {
        TrajectoryTrainConfig { n_components: 5, n_samples: 50, seed: 0 }
    }
}

impl TrajectoryFixture {
    pub fn new(
        manifold: ManifoldId,
        samples: Vec<TrajectorySample>,
        d_min: f64,
        d_max: f64,
        stiffness: StiffnessParams,
        automation: Option<Automation>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(VfError::InvalidParam("trajectory needs at least two samples".into()));
        }
        if !(d_min < d_max) {
            return Err(VfError::InvalidParam("d_min must be below d_max".into()));
        }
        stiffness.validate()?;
        for s in &samples {
            if s.mean.manifold() != manifold {
                return Err(VfError::ManifoldMismatch { expected: manifold, got: s.mean.manifold() });
            }
        }
        let precisions = samples.iter().map(|s| precision_from_cov(&s.cov)).collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryFixture { manifold, samples, precisions, d_min, d_max, stiffness, zeta: 0.7, automation })
    }

    /// DTW-align demos, encode `(t, pose)` in a GMM and sample GMR at equally
    /// spaced times.
    pub fn learn_samples(demos: &[Demonstration], cfg: &TrajectoryTrainConfig) -> Result<Vec<TrajectorySample>> {
        let aligned = dtw_align(demos)?;
        let mut data: Vec<JointPoint> = Vec::new();
        for d in &aligned {
            for (t, p) in d.times.iter().zip(&d.points) {
                data.push((ManifoldPoint::scalar(*t), p.clone()));
            }
        }
        let gmm = fit_gmm(&data, cfg.n_components.min(data.len()), cfg.seed, &GmmOptions::default())?.gmm;
        let n = cfg.n_samples.max(2);
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                let g = gmr_condition(&gmm, &ManifoldPoint::scalar(t))?.gaussian;
                Ok(TrajectorySample { mean: g.mean, cov: to_m6(&g.cov) })
            })
            .collect()
    }

    pub fn attractor(&self, x: &ManifoldPoint) -> Result<PbAttractor> {
        pb_attractor(&self.samples, &self.precisions, x)
    }

    pub fn precision(&self, j: usize) -> &Matrix6<f64> {
        &self.precisions[j]
    }

    /// Unit direction of segment `j` in the linear block of the tangent.
    pub fn direction(&self, j: usize) -> Result<Vector6<f64>> {
        let dl = to_v6(&log(&self.samples[j].mean, &self.samples[j + 1].mean)?);
        let mut d = Vector6::zeros();
        let lin = dl.fixed_rows::<3>(0);
        let n = lin.norm();
        if n > 0.0 {
            d.fixed_rows_mut::<3>(0).copy_from(&(lin / n));
        }
        Ok(d)
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<FixtureOutput> {
        let a = self.attractor(&ctx.x)?;
        let p = self.precisions[a.j];
        let l = to_v6(&log(&a.x, &ctx.x)?);
        let d = l.dot(&(p * l));
        let s = precision_scaling(d, self.d_min, self.d_max);
        let progress = a.j as f64 + a.nu;
        if s == 0.0 {
            let mut out = FixtureOutput::inactive();
            out.progress = Some(progress);
            return Ok(out);
        }
        let ps = p * s;
        let r = ctx.x.radius().unwrap_or(1.0);
        let syn = synthesize_stiffness(&ps, &self.stiffness, self.manifold, r)?;
        let damp = optimal_damping(&syn.floored(self.stiffness.eps_damp), &ctx.mass, self.zeta);
        let mut w = impedance_wrench(&ctx.x, &ctx.twist, &a.x, &syn.k, &damp)?;
        if let Some(aut) = &self.automation {
            // Past the end of the last segment the commanded velocity is zero,
            // so the automation only damps.
            let at_end = a.j + 2 == self.samples.len() && a.nu_raw >= 1.0;
            let v = if at_end { Vector6::zeros() } else { self.direction(a.j)? * aut.speed };
            w += aut.damping * (v - ctx.twist);
        }
        let out = FixtureOutput {
            active: true,
            wrench: Some(WrenchDistribution::from_precision(ctx.x.clone(), w, ps)),
            progress: Some(progress),
            stiffness: Some(syn.k),
            attractor: Some(a.x),
        };
        Ok(out)
    }
}
