//! Gaussians on manifolds, products of Gaussians and mixture collapse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::geometry::{exp, log, parallel_transport, ManifoldId, ManifoldPoint};
use crate::linalg::{self, symmetrize};

/// Gauss-Newton passes used for weighted Karcher means.
pub const KARCHER_MAX_ITER: usize = 10;
pub const KARCHER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianOnManifold {
    pub mean: ManifoldPoint,
    /// Covariance in the tangent space at `mean`.
    pub cov: DMatrix<f64>,
}

impl GaussianOnManifold {
    pub fn new(mean: ManifoldPoint, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.manifold().tangent_dim();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(VfError::Dimension { expected: d, got: cov.nrows() });
        }
        let asym = linalg::asymmetry(&cov);
        if asym > 1e-10 * cov.abs().max().max(1.0) {
            return Err(VfError::NotSymmetric(asym));
        }
        Ok(GaussianOnManifold { mean, cov: linalg::psd_clip(&cov) })
    }

    pub fn manifold(&self) -> ManifoldId {
        self.mean.manifold()
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// Log-density with the tangent-space normalizer.
    pub fn log_pdf(&self, x: &ManifoldPoint) -> Result<f64> {
        let l = log(&self.mean, x)?;
        log_pdf_tangent(&l, &self.cov)
    }

    pub fn pdf(&self, x: &ManifoldPoint) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }
}

/// Cholesky factor of a covariance; jitter is added only when the plain
/// factorization fails.
fn chol(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let s = symmetrize(cov);
    if let Some(c) = s.clone().cholesky() {
        return Ok(c);
    }
    let n = s.nrows();
    let eps = linalg::cov_jitter(&s).max(1e-300);
    (s + DMatrix::identity(n, n) * eps)
        .cholesky()
        .ok_or_else(|| VfError::Singular("covariance after regularization".into()))
}

/// Log of the zero-mean Gaussian density of tangent vector `l`.
pub fn log_pdf_tangent(l: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = l.len();
    let c = chol(cov)?;
    let z = c.l().solve_lower_triangular(l).ok_or_else(|| VfError::Singular("cholesky solve".into()))?;
    let log_det: f64 = c.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Ok(-0.5 * (z.norm_squared() + log_det + d as f64 * (2.0 * std::f64::consts::PI).ln()))
}

/// Product of Gaussians that share one tangent space:
/// `cov = (sum P_i)^-1`, `mean = cov * sum P_i mu_i`.
pub fn gaussian_product(items: &[(DVector<f64>, DMatrix<f64>)]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let first = items.first().ok_or(VfError::Empty("gaussian product"))?;
    if items.len() == 1 {
        return Ok(first.clone());
    }
    let infos = items
        .iter()
        .map(|(m, c)| Ok((m.clone(), linalg::regularized_inverse(c)?)))
        .collect::<Result<Vec<_>>>()?;
    let fused = product_information(&infos)?;
    if fused.degenerate > 0 {
        return Err(VfError::Singular("total precision".into()));
    }
    Ok((fused.mean, fused.cov))
}

#[derive(Debug, Clone)]
pub struct InfoProduct {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    /// Number of directions with no information from any input.
    pub degenerate: usize,
}

/// Information-form product: precisions add, so zero-precision inputs are
/// exactly neutral. Directions without information get zero mean.
pub fn product_information(items: &[(DVector<f64>, DMatrix<f64>)]) -> Result<InfoProduct> {
    let first = items.first().ok_or(VfError::Empty("gaussian product"))?;
    let d = first.0.len();
    let mut p = DMatrix::zeros(d, d);
    let mut eta = DVector::zeros(d);
    for (mu, prec) in items {
        if mu.len() != d || prec.nrows() != d {
            return Err(VfError::Dimension { expected: d, got: mu.len() });
        }
        p += prec;
        eta += prec * mu;
    }
    let p = symmetrize(&p);
    let (cov, degenerate) = if let Some(c) = p.clone().cholesky() {
        (symmetrize(&c.inverse()), 0)
    } else {
        linalg::pinv_sym(&p, 1e-12)
    };
    let mean = &cov * eta;
    Ok(InfoProduct { mean, cov, precision: p, degenerate })
}

/// Weighted Karcher mean starting from `points[init]`.
pub fn karcher_mean(weights: &[f64], points: &[ManifoldPoint], init: usize) -> Result<ManifoldPoint> {
    let total: f64 = weights.iter().sum();
    if points.is_empty() || !(total > 0.0) {
        return Err(VfError::Empty("karcher mean weights"));
    }
    let mut mu = points[init].clone();
    for _ in 0..KARCHER_MAX_ITER {
        let d = mu.manifold().tangent_dim();
        let mut step = DVector::zeros(d);
        for (w, p) in weights.iter().zip(points) {
            if *w != 0.0 {
                step += log(&mu, p)? * (*w / total);
            }
        }
        mu = exp(&mu, &step)?;
        if step.norm() < KARCHER_TOL {
            break;
        }
    }
    Ok(mu)
}

/// Collapse a mixture into one Gaussian: weighted Karcher mean plus
/// transported component covariances and the spread of the means.
pub fn moment_match(weights: &[f64], comps: &[GaussianOnManifold]) -> Result<GaussianOnManifold> {
    if weights.len() != comps.len() {
        return Err(VfError::Dimension { expected: comps.len(), got: weights.len() });
    }
    if comps.is_empty() {
        return Err(VfError::Empty("mixture components"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(VfError::Empty("mixture weights"));
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let init = (0..w.len()).fold(0, |best, i| if w[i] > w[best] { i } else { best });
    let points: Vec<ManifoldPoint> = comps.iter().map(|c| c.mean.clone()).collect();
    let mu = karcher_mean(&w, &points, init)?;
    let d = mu.manifold().tangent_dim();
    let mut cov = DMatrix::zeros(d, d);
    for (wi, c) in w.iter().zip(comps) {
        if *wi == 0.0 {
            continue;
        }
        let l = log(&mu, &c.mean)?;
        let t = transport_cov(&c.mean, &c.cov, &mu)?;
        cov += (t + &l * l.transpose()) * *wi;
    }
    Ok(GaussianOnManifold { mean: mu, cov: symmetrize(&cov) })
}

/// Transport a covariance from the tangent space at `from` to that at `to`.
pub fn transport_cov(from: &ManifoldPoint, cov: &DMatrix<f64>, to: &ManifoldPoint) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    let mut a = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut e = DVector::zeros(d);
        e[k] = 1.0;
        a.set_column(k, &parallel_transport(from, &e, to)?);
    }
    Ok(symmetrize(&(&a * cov * a.transpose())))
}
