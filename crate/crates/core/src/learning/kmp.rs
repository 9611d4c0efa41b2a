//! Kernelized movement primitives over a manifold input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::exec::Execution;
use crate::geometry::{distance_sq, ManifoldPoint};
use crate::linalg::{self, symmetrize};

/// RBF kernel on the identity-weighted manifold distance.
pub fn kernel_eval(x1: &ManifoldPoint, x2: &ManifoldPoint, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(VfError::InvalidParam("kernel length must be positive".into()));
    }
    Ok((-distance_sq(x1, x2)? / (2.0 * l * l)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub inputs: Vec<ManifoldPoint>,
    /// Outputs are treated as Euclidean vectors.
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

impl ReferenceDistribution {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(VfError::Empty("kmp reference"));
        }
        let n = self.inputs.len();
        if self.means.len() != n || self.covs.len() != n {
            return Err(VfError::Dimension { expected: n, got: self.means.len().min(self.covs.len()) });
        }
        let o = self.output_dim();
        let mi = self.inputs[0].manifold();
        for k in 0..n {
            if self.inputs[k].manifold() != mi {
                return Err(VfError::ManifoldMismatch { expected: mi, got: self.inputs[k].manifold() });
            }
            if self.means[k].len() != o || self.covs[k].shape() != (o, o) {
                return Err(VfError::Dimension { expected: o, got: self.means[k].len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmpParams {
    pub l: f64,
    pub lambda: f64,
    pub lambda_c: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KmpModel {
    pub reference: ReferenceDistribution,
    pub params: KmpParams,
    /// `(K + λΣ)⁻¹ μ`, stacked.
    coef: DVector<f64>,
    /// `(K + λ_c Σ)⁻¹`.
    gc_inv: DMatrix<f64>,
    fingerprint: u64,
}

/// FNV-1a over the serialized reference and parameters.
fn fingerprint(reference: &ReferenceDistribution, params: &KmpParams) -> u64 {
    let bytes = serde_json::to_vec(&(reference, params)).unwrap_or_default();
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Block kernel matrix `k(x_i, x_j) I_O`.
pub fn kernel_matrix(inputs: &[ManifoldPoint], o: usize, l: f64, exec: Execution) -> Result<DMatrix<f64>> {
    let n = inputs.len();
    let rows: Vec<Result<Vec<f64>>> =
        exec.map_range(n, |i| (0..n).map(|j| kernel_eval(&inputs[i], &inputs[j], l)).collect());
    let mut k = DMatrix::zeros(n * o, n * o);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            for a in 0..o {
                k[(i * o + a, j * o + a)] = v;
            }
        }
    }
    Ok(k)
}

fn block_cov(reference: &ReferenceDistribution) -> DMatrix<f64> {
    let o = reference.output_dim();
    let n = reference.len();
    let mut s = DMatrix::zeros(n * o, n * o);
    for (k, c) in reference.covs.iter().enumerate() {
        s.view_mut((k * o, k * o), (o, o)).copy_from(c);
    }
    s
}

/// Cholesky with one jittered retry.
fn factor(a: DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let d = a.nrows();
    let j = linalg::cov_jitter(&a);
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch);
    }
    log::warn!("{what} not positive definite, retrying with jitter {j:e}");
    (a + DMatrix::identity(d, d) * j).cholesky().ok_or_else(|| VfError::Singular(what.into()))
}

pub fn kmp_fit(reference: ReferenceDistribution, params: KmpParams, exec: Execution) -> Result<KmpModel> {
    reference.validate()?;
    for (name, v) in [("l", params.l), ("lambda", params.lambda), ("lambda_c", params.lambda_c), ("alpha", params.alpha)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(VfError::InvalidParam(format!("kmp {name} must be positive")));
        }
    }
    let o = reference.output_dim();
    let k = kernel_matrix(&reference.inputs, o, params.l, exec)?;
    let s = block_cov(&reference);
    let mu = DVector::from_iterator(reference.len() * o, reference.means.iter().flat_map(|m| m.iter().cloned()));
    let coef = factor(symmetrize(&(&k + &s * params.lambda)), "K + lambda Sigma")?.solve(&mu);
    let gc_inv = symmetrize(&factor(symmetrize(&(&k + &s * params.lambda_c)), "K + lambda_c Sigma")?.inverse());
    let fingerprint = fingerprint(&reference, &params);
    Ok(KmpModel { reference, params, coef, gc_inv, fingerprint })
}

impl KmpModel {
    /// True when the cached factors still belong to the stored reference.
    pub fn verify(&self) -> bool {
        fingerprint(&self.reference, &self.params) == self.fingerprint
    }

    pub fn output_dim(&self) -> usize {
        self.reference.output_dim()
    }

    /// Mean and covariance at `x`.
    pub fn predict(&self, x: &ManifoldPoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let o = self.output_dim();
        let n = self.reference.len();
        let kv = self
            .reference
            .inputs
            .iter()
            .map(|xi| kernel_eval(x, xi, self.params.l))
            .collect::<Result<Vec<f64>>>()?;
        let mut mean = DVector::zeros(o);
        for (i, ki) in kv.iter().enumerate() {
            if *ki != 0.0 {
                mean += self.coef.rows(i * o, o) * *ki;
            }
        }
        let mut quad = DMatrix::zeros(o, o);
        for i in 0..n {
            if kv[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if kv[j] == 0.0 {
                    continue;
                }
                quad += self.gc_inv.view((i * o, j * o), (o, o)) * (kv[i] * kv[j]);
            }
        }
        let cov = (DMatrix::identity(o, o) - quad) * self.params.alpha;
        Ok((mean, symmetrize(&cov)))
    }

    /// Minimum distance from `x` to any reference input.
    pub fn min_distance(&self, x: &ManifoldPoint) -> Result<f64> {
        let mut best = f64::INFINITY;
        for xi in &self.reference.inputs {
            best = best.min(distance_sq(x, xi)?.sqrt());
        }
        Ok(best)
    }
}
