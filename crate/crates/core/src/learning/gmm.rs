//! Gaussian mixtures over an input × output product manifold, fitted by EM
//! in tangent spaces, plus GMR conditioning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::exec::Execution;
use crate::geometry::{exp, log, ManifoldId, ManifoldPoint};
use crate::linalg::{self, symmetrize};
use crate::prob::{karcher_mean, log_pdf_tangent, moment_match, GaussianOnManifold};

/// A joint sample `(input, output)`.
pub type JointPoint = (ManifoldPoint, ManifoldPoint);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGmm {
    pub input: ManifoldId,
    pub output: ManifoldId,
    pub weights: Vec<f64>,
    pub means: Vec<JointPoint>,
    /// Joint covariances, input block first.
    pub covs: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    pub tol: f64,
    pub lloyd_iter: usize,
    pub exec: Execution,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions { max_iter: 200, tol: 1e-10, lloyd_iter: 20, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub gmm: JointGmm,
    pub log_likelihood: Vec<f64>,
    /// Components that needed covariance jitter at least once.
    pub jittered: usize,
}

fn joint_log(mu: &JointPoint, x: &JointPoint) -> Result<DVector<f64>> {
    let a = log(&mu.0, &x.0)?;
    let b = log(&mu.1, &x.1)?;
    let mut v = DVector::zeros(a.len() + b.len());
    v.rows_mut(0, a.len()).copy_from(&a);
    v.rows_mut(a.len(), b.len()).copy_from(&b);
    Ok(v)
}

/// Weighted product-manifold Karcher mean; the objective splits per factor.
fn joint_karcher(weights: &[f64], data: &[JointPoint], init: &JointPoint) -> Result<JointPoint> {
    let mut ins: Vec<ManifoldPoint> = Vec::with_capacity(data.len() + 1);
    let mut outs: Vec<ManifoldPoint> = Vec::with_capacity(data.len() + 1);
    ins.push(init.0.clone());
    outs.push(init.1.clone());
    ins.extend(data.iter().map(|d| d.0.clone()));
    outs.extend(data.iter().map(|d| d.1.clone()));
    let mut w = Vec::with_capacity(weights.len() + 1);
    w.push(0.0);
    w.extend_from_slice(weights);
    Ok((karcher_mean(&w, &ins, 0)?, karcher_mean(&w, &outs, 0)?))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Degenerate when too few effective points support it or it is numerically
/// rank deficient.
fn repair_cov(cov: &DMatrix<f64>, n_eff: f64) -> (DMatrix<f64>, bool) {
    let d = cov.nrows();
    let scale = (cov.trace() / d as f64).max(1e-12);
    let min_eig = linalg::min_eigenvalue(cov);
    if n_eff < (d + 1) as f64 || min_eig <= 1e-12 * scale {
        let j = 1e-6 * scale + 1e-10;
        (cov + DMatrix::identity(d, d) * j, true)
    } else {
        (cov.clone(), false)
    }
}

fn weighted_cov(mu: &JointPoint, data: &[JointPoint], r: &[f64]) -> Result<DMatrix<f64>> {
    let total: f64 = r.iter().sum();
    let d = mu.0.manifold().tangent_dim() + mu.1.manifold().tangent_dim();
    let mut cov = DMatrix::zeros(d, d);
    for (x, w) in data.iter().zip(r) {
        if *w > 0.0 {
            let l = joint_log(mu, x)?;
            cov += &l * l.transpose() * *w;
        }
    }
    Ok(symmetrize(&(cov / total)))
}

fn kmeans_pp(z: &[DVector<f64>], m: usize, rng: &mut ChaCha8Rng, lloyd: usize) -> Vec<usize> {
    let n = z.len();
    let mut centers: Vec<DVector<f64>> = vec![z[rng.gen_range(0..n)].clone()];
    while centers.len() < m {
        let d2: Vec<f64> = z
            .iter()
            .map(|p| centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if u < *v {
                    idx = i;
                    break;
                }
                u -= v;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centers.push(z[pick].clone());
    }
    let assign = |centers: &[DVector<f64>]| -> Vec<usize> {
        z.iter()
            .map(|p| {
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (k, c) in centers.iter().enumerate() {
                    let d = (p - c).norm_squared();
                    if d < bd {
                        bd = d;
                        best = k;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..lloyd {
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = z.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(p, _)| p).collect();
            if !members.is_empty() {
                *c = members.iter().fold(DVector::zeros(c.len()), |acc, p| acc + *p) / members.len() as f64;
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// EM for a joint GMM. Deterministic for a fixed seed in either execution mode.
pub fn fit_gmm(data: &[JointPoint], m: usize, seed: u64, opts: &GmmOptions) -> Result<GmmFit> {
    if m == 0 {
        return Err(VfError::InvalidParam("component count must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(VfError::Empty("gmm data"));
    }
    let (mi, mo) = (data[0].0.manifold(), data[0].1.manifold());
    for x in data {
        if x.0.manifold() != mi {
            return Err(VfError::ManifoldMismatch { expected: mi, got: x.0.manifold() });
        }
        if x.1.manifold() != mo {
            return Err(VfError::ManifoldMismatch { expected: mo, got: x.1.manifold() });
        }
    }
    let n = data.len();
    let uniform = vec![1.0 / n as f64; n];
    let global = joint_karcher(&uniform, data, &data[0])?;
    let z: Vec<DVector<f64>> = data.iter().map(|x| joint_log(&global, x)).collect::<Result<_>>()?;
    let mut distinct = 0;
    for i in 0..n {
        if (0..i).all(|k| (&z[i] - &z[k]).norm() > 1e-12) {
            distinct += 1;
            if distinct >= m {
                break;
            }
        }
    }
    if distinct < m {
        return Err(VfError::InvalidParam(format!("need at least {m} distinct points")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = kmeans_pp(&z, m, &mut rng, opts.lloyd_iter);
    let global_cov = weighted_cov(&global, data, &uniform)?;
    let mut jittered = 0usize;
    let mut weights = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for k in 0..m {
        let r: Vec<f64> = labels.iter().map(|l| if *l == k { 1.0 } else { 0.0 }).collect();
        let cnt: f64 = r.iter().sum();
        if cnt == 0.0 {
            weights.push(1e-3);
            means.push(global.clone());
            covs.push(repair_cov(&global_cov, n as f64).0);
            continue;
        }
        let first = labels.iter().position(|l| *l == k).unwrap();
        let mu = joint_karcher(&r, data, &data[first])?;
        let (c, j) = repair_cov(&weighted_cov(&mu, data, &r)?, cnt);
        jittered += j as usize;
        weights.push(cnt);
        means.push(mu);
        covs.push(c);
    }
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);

    let mut gmm = JointGmm { input: mi, output: mo, weights, means, covs };
    let mut history = Vec::new();
    for _ in 0..opts.max_iter {
        // E step.
        let rows: Vec<Result<Vec<f64>>> = opts.exec.map(data, |x| {
            (0..m)
                .map(|k| Ok(gmm.weights[k].ln() + log_pdf_tangent(&joint_log(&gmm.means[k], x)?, &gmm.covs[k])?))
                .collect()
        });
        let mut resp = Vec::with_capacity(n);
        let mut ll = 0.0;
        for row in rows {
            let row = row?;
            let lse = log_sum_exp(&row);
            ll += lse;
            resp.push(row.iter().map(|v| (v - lse).exp()).collect::<Vec<f64>>());
        }
        if let Some(prev) = history.last().copied() {
            if ll < prev - 1e-6 {
                log::warn!("EM log-likelihood decreased: {prev} -> {ll}");
            }
            history.push(ll);
            if (ll - prev).abs() <= opts.tol * prev.abs().max(1.0) {
                break;
            }
        } else {
            history.push(ll);
        }
        // M step.
        for k in 0..m {
            let r: Vec<f64> = resp.iter().map(|row| row[k]).collect();
            let nk: f64 = r.iter().sum();
            if nk <= 1e-300 {
                continue;
            }
            gmm.weights[k] = nk / n as f64;
            gmm.means[k] = joint_karcher(&r, data, &gmm.means[k])?;
            let (c, j) = repair_cov(&weighted_cov(&gmm.means[k], data, &r)?, nk);
            if j {
                log::warn!("GMM component {k} degenerate ({nk:.2} effective points), jitter added");
                jittered += 1;
            }
            gmm.covs[k] = c;
        }
        let wsum: f64 = gmm.weights.iter().sum();
        gmm.weights.iter_mut().for_each(|w| *w /= wsum);
    }
    Ok(GmmFit { gmm, log_likelihood: history, jittered })
}

impl JointGmm {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn input_dim(&self) -> usize {
        self.input.tangent_dim()
    }

    /// Input-marginal component `m`.
    pub fn input_marginal(&self, m: usize) -> GaussianOnManifold {
        let di = self.input_dim();
        GaussianOnManifold { mean: self.means[m].0.clone(), cov: self.covs[m].view((0, 0), (di, di)).into_owned() }
    }

    /// Normalized activation of each component at an input point.
    /// The flag is set when every activation underflowed and uniform weights
    /// were substituted.
    pub fn activations(&self, x: &ManifoldPoint) -> Result<(Vec<f64>, bool)> {
        if x.manifold() != self.input {
            return Err(VfError::ManifoldMismatch { expected: self.input, got: x.manifold() });
        }
        let mut lw = Vec::with_capacity(self.n_components());
        for m in 0..self.n_components() {
            let g = self.input_marginal(m);
            lw.push(self.weights[m].ln() + log_pdf_tangent(&log(&g.mean, x)?, &g.cov)?);
        }
        let lse = log_sum_exp(&lw);
        if !lse.is_finite() {
            let k = self.n_components();
            return Ok((vec![1.0 / k as f64; k], true));
        }
        Ok((lw.iter().map(|v| (v - lse).exp()).collect(), false))
    }
}

#[derive(Debug, Clone)]
pub struct GmrOutput {
    pub gaussian: GaussianOnManifold,
    pub weights: Vec<f64>,
    pub fallback: bool,
}

fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let j = linalg::cov_jitter(a).max(1e-300);
    let d = a.nrows();
    match (a + DMatrix::identity(d, d) * j).cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(VfError::Singular("input covariance block".into())),
    }
}

/// Per-component conditional of the output given `x`, in the output tangent
/// at the component's output mean.
pub fn component_conditional(gmm: &JointGmm, m: usize, x: &ManifoldPoint) -> Result<GaussianOnManifold> {
    let di = gmm.input_dim();
    let d = gmm.covs[m].nrows();
    let dout = d - di;
    let c = &gmm.covs[m];
    let s_i = c.view((0, 0), (di, di)).into_owned();
    let s_oi = c.view((di, 0), (dout, di)).into_owned();
    let s_o = c.view((di, di), (dout, dout)).into_owned();
    let l = log(&gmm.means[m].0, x)?;
    let rhs = DMatrix::from_column_slice(di, 1, l.as_slice());
    let sol = solve_spd(&s_i, &rhs)?;
    let shift = &s_oi * sol.column(0);
    let gain = solve_spd(&s_i, &s_oi.transpose())?;
    let cov = linalg::psd_clip(&symmetrize(&(s_o - &s_oi * gain)));
    let mean = exp(&gmm.means[m].1, &DVector::from_column_slice(shift.as_slice()))?;
    Ok(GaussianOnManifold { mean, cov })
}

/// Unimodal GMR prediction at `x`.
pub fn gmr_condition(gmm: &JointGmm, x: &ManifoldPoint) -> Result<GmrOutput> {
    let (weights, fallback) = gmm.activations(x)?;
    if fallback {
        log::warn!("GMR activations underflowed; using uniform weights");
    }
    let comps = (0..gmm.n_components())
        .map(|m| component_conditional(gmm, m, x))
        .collect::<Result<Vec<_>>>()?;
    let gaussian = moment_match(&weights, &comps)?;
    Ok(GmrOutput { gaussian, weights, fallback })
}

/// Moment-matched input marginal at `x`: the pose-space covariance used to
/// attach uncertainty to a DS reference.
pub fn pose_space_covariance(gmm: &JointGmm, x: &ManifoldPoint) -> Result<GaussianOnManifold> {
    let (weights, _) = gmm.activations(x)?;
    let comps: Vec<GaussianOnManifold> = (0..gmm.n_components()).map(|m| gmm.input_marginal(m)).collect();
    moment_match(&weights, &comps)
}
