//! Variable stiffness from precision matrices, optimal damping, and the
//! impedance wrench.
//!
//! Stiffness synthesis diagonalizes the translational precision block, splits
//! the rotated precision into screw springs (translation with coupled
//! rotation) and torsional springs (Schur complement), scales each spring by
//! where its precision falls between two thresholds, then rotates back.

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfError};
use crate::geometry::{log, ManifoldId, ManifoldPoint};
use crate::linalg::{self, blockdiag_rot, from_m6, psd_clip6, sqrtm_psd, symmetrize6, to_m6, to_v6};

/// Relative asymmetry accepted in an input precision before it is rejected.
/// Reference matrices rounded to a few digits carry asymmetry of a few 1e-4.
pub const PRECISION_ASYM_RTOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StiffnessParams {
    pub k_t: f64,
    pub k_r: f64,
    pub lambda_trans: [f64; 2],
    pub lambda_rot: [f64; 2],
    pub eps_damp: f64,
    /// Scale translational nominals in the diagonalizing frame so that the
    /// rotated-back diagonal never exceeds `k_t`. Off by default.
    pub limit_rotated_nominal: bool,
}

impl Default for StiffnessParams {
    fn default() -> Self {
        StiffnessParams {
            k_t: 1000.0,
            k_r: 40.0,
            lambda_trans: [1000.0, 2500.0],
            lambda_rot: [1000.0, 2500.0],
            eps_damp: 0.01,
            limit_rotated_nominal: false,
        }
    }
}

impl StiffnessParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VfError::InvalidParam(m.into()));
        if !(self.k_t > 0.0 && self.k_r > 0.0) {
            return bad("nominal stiffness must be positive");
        }
        if !(self.lambda_trans[0] < self.lambda_trans[1] && self.lambda_rot[0] < self.lambda_rot[1]) {
            return bad("precision thresholds must satisfy lower < upper");
        }
        if !(self.eps_damp > 0.0 && self.eps_damp <= 0.1) {
            return bad("eps_damp must lie in (0, 0.1]");
        }
        Ok(())
    }
}

/// Linear ramp between the thresholds, clamped to [0, 1].
pub fn threshold_scaling(lambda: f64, lo: f64, hi: f64) -> f64 {
    ((lambda - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    /// Wrench axis in the diagonalizing frame.
    pub axis: Vector6<f64>,
    pub k_nom: f64,
    pub s: f64,
}

impl Spring {
    fn matrix(&self, s: f64) -> Matrix6<f64> {
        self.axis * self.axis.transpose() * (self.k_nom * s)
    }
}

#[derive(Debug, Clone)]
pub struct StiffnessSynthesis {
    /// Three screw springs followed by three torsional springs.
    pub springs: Vec<Spring>,
    pub r_diag: Matrix3<f64>,
    /// Sum of springs before rotating back.
    pub k_prime: Matrix6<f64>,
    pub k: Matrix6<f64>,
}

impl StiffnessSynthesis {
    /// Stiffness rebuilt with every spring scaling raised to at least `eps`;
    /// used to damp DoFs that carry no stiffness.
    pub fn floored(&self, eps: f64) -> Matrix6<f64> {
        let kp = self.springs.iter().fold(Matrix6::zeros(), |acc, sp| acc + sp.matrix(sp.s.max(eps)));
        let t = blockdiag_rot(&self.r_diag);
        psd_clip6(&symmetrize6(&(t * kp * t.transpose())))
    }
}

/// Angular slots of the position block whose nominal scales with radius.
fn angular_slots(m: ManifoldId) -> &'static [usize] {
    match m {
        ManifoldId::M2 => &[0],
        ManifoldId::M3 => &[0, 1],
        _ => &[],
    }
}

pub fn synthesize_stiffness(
    p: &Matrix6<f64>,
    params: &StiffnessParams,
    manifold: ManifoldId,
    r: f64,
) -> Result<StiffnessSynthesis> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(VfError::NonFinite("precision"));
    }
    let asym = linalg::asymmetry(&from_m6(p));
    let scale = p.amax().max(1e-300);
    if asym > PRECISION_ASYM_RTOL * scale {
        return Err(VfError::NotSymmetric(asym));
    }
    let p = symmetrize6(p);

    let mut k_trans = Vector3::repeat(params.k_t);
    for &j in angular_slots(manifold) {
        // Radius scaling only ever softens, so large radii keep the nominal.
        k_trans[j] *= r.min(1.0);
    }

    let eig = SymmetricEigen::new(p.fixed_view::<3, 3>(0, 0).into_owned());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = Matrix3::zeros();
    for (c, &i) in order.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    if v.determinant() < 0.0 {
        let flipped = -v.column(2);
        v.set_column(2, &flipped);
    }
    let t = blockdiag_rot(&v);
    let pp = t.transpose() * p * t;
    let a = pp.fixed_view::<3, 3>(0, 0).into_owned();
    let b = pp.fixed_view::<3, 3>(0, 3).into_owned();
    let c = pp.fixed_view::<3, 3>(3, 3).into_owned();

    if params.limit_rotated_nominal {
        let k_rot = (v.transpose() * Matrix3::from_diagonal(&k_trans) * v).diagonal();
        let k_back = (v * Matrix3::from_diagonal(&k_rot) * v.transpose()).diagonal();
        let beta = k_back.component_div(&k_trans).max();
        if beta > 0.0 {
            k_trans = k_rot / beta;
        }
    }

    let tiny = 1e-12 * a.diagonal().amax().max(1e-300);
    let mut springs = Vec::with_capacity(6);
    let mut a_pinv = Matrix3::zeros();
    for j in 0..3 {
        let ajj = a[(j, j)];
        let mut axis = Vector6::zeros();
        axis[j] = 1.0;
        let mut s = 0.0;
        if ajj > tiny {
            a_pinv[(j, j)] = 1.0 / ajj;
            let wt = b.row(j).transpose() / ajj;
            axis.fixed_rows_mut::<3>(3).copy_from(&wt);
            s = threshold_scaling(ajj, params.lambda_trans[0], params.lambda_trans[1]);
            let n2 = wt.norm_squared();
            if n2 > 0.0 {
                s = s.min(params.k_r / (k_trans[j] * n2));
            }
        }
        springs.push(Spring { axis, k_nom: k_trans[j], s });
    }
    let schur = c - b.transpose() * a_pinv * b;
    let se = SymmetricEigen::new((schur + schur.transpose()) * 0.5);
    for j in 0..3 {
        let mut axis = Vector6::zeros();
        axis.fixed_rows_mut::<3>(3).copy_from(&se.eigenvectors.column(j));
        let s = threshold_scaling(se.eigenvalues[j], params.lambda_rot[0], params.lambda_rot[1]);
        springs.push(Spring { axis, k_nom: params.k_r, s });
    }

    let k_prime = springs.iter().fold(Matrix6::zeros(), |acc, sp| acc + sp.matrix(sp.s));
    let k = psd_clip6(&symmetrize6(&(t * k_prime * t.transpose())));
    Ok(StiffnessSynthesis { springs, r_diag: v, k_prime, k })
}

/// Mass seen in manifold coordinates: `(J M⁻¹ Jᵀ)⁻¹`.
pub fn manifold_mass(m_cart: &Matrix6<f64>, jac: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    let m_inv = m_cart.cholesky().ok_or_else(|| VfError::Singular("virtual mass".into()))?.inverse();
    let inner = symmetrize6(&(jac * m_inv * jac.transpose()));
    let mm = inner.cholesky().ok_or_else(|| VfError::Singular("manifold mass transform".into()))?.inverse();
    Ok(symmetrize6(&mm))
}

/// `ζ (M½ K*½ + K*½ M½)` with `M` already in manifold coordinates.
pub fn optimal_damping(k_star: &Matrix6<f64>, m: &Matrix6<f64>, zeta: f64) -> Matrix6<f64> {
    let k1 = sqrtm_psd(&from_m6(k_star));
    let m1 = sqrtm_psd(&from_m6(m));
    let d: DMatrix<f64> = (&m1 * &k1 + &k1 * &m1) * zeta;
    psd_clip6(&symmetrize6(&to_m6(&d)))
}

/// `K Log_{x_ee}(x_attr) − D twist`, the attractor taken as quasi-static.
pub fn impedance_wrench(
    x_ee: &ManifoldPoint,
    twist: &Vector6<f64>,
    x_attr: &ManifoldPoint,
    k: &Matrix6<f64>,
    d: &Matrix6<f64>,
) -> Result<Vector6<f64>> {
    let l = to_v6(&log(x_ee, x_attr)?);
    Ok(k * l - d * twist)
}
