//! Pose manifolds: charts, Log/Exp, transport, conversions and Jacobians.
//!
//! Tangent layout is `[linear(3); angular(3)]`. The angular block is a
//! body-frame rotation vector. Linear blocks are `[dx, dy, dz]` on M1,
//! `[dtheta, dr, dz]` on M2 and `[dalpha1, dalpha2, dr]` on M3, where the two
//! sphere coordinates live in the basis given by the first two columns of the
//! alignment rotation at the base point.

pub mod frames;
pub mod quat;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, VfError};
pub use frames::{Frame, FrameTree};
pub use quat::Quat;

/// Smallest admissible radius for the cylindrical and spherical charts.
pub const R_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldId {
    /// R^3 x S^3
    M1,
    /// S^1 x R^2 x S^3
    M2,
    /// S^2 x R x S^3
    M3,
    R3Only,
    S3Only,
    /// Plain Euclidean space, used for time inputs and velocity outputs.
    Rn(usize),
}

impl ManifoldId {
    pub fn tangent_dim(self) -> usize {
        match self {
            ManifoldId::M1 | ManifoldId::M2 | ManifoldId::M3 => 6,
            ManifoldId::R3Only | ManifoldId::S3Only => 3,
            ManifoldId::Rn(n) => n,
        }
    }

    pub fn is_pose(self) -> bool {
        matches!(self, ManifoldId::M1 | ManifoldId::M2 | ManifoldId::M3)
    }

    pub fn parse(s: &str) -> Result<ManifoldId> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "M1" | "CARTESIAN" => ManifoldId::M1,
            "M2" | "CYLINDRICAL" => ManifoldId::M2,
            "M3" | "SPHERICAL" => ManifoldId::M3,
            "R3" | "R3ONLY" => ManifoldId::R3Only,
            "S3" | "S3ONLY" => ManifoldId::S3Only,
            other => return Err(VfError::Config(format!("unknown manifold `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ManifoldPoint {
    Cartesian { p: Vector3<f64>, q: Quat },
    Cylindrical { theta: f64, r: f64, z: f64, q: Quat },
    Spherical { u: Vector3<f64>, r: f64, q: Quat },
    Position(Vector3<f64>),
    Rotation(Quat),
    Euclidean(DVector<f64>),
}

impl ManifoldPoint {
    pub fn m1(p: Vector3<f64>, q: Quat) -> Self {
        ManifoldPoint::Cartesian { p, q: quat::canonical(q) }
    }

    pub fn identity(m: ManifoldId) -> Self {
        match m {
            ManifoldId::M1 => Self::m1(Vector3::zeros(), Quat::identity()),
            ManifoldId::M2 => ManifoldPoint::Cylindrical { theta: 0.0, r: 1.0, z: 0.0, q: Quat::identity() },
            ManifoldId::M3 => ManifoldPoint::Spherical { u: Vector3::z(), r: 1.0, q: Quat::identity() },
            ManifoldId::R3Only => ManifoldPoint::Position(Vector3::zeros()),
            ManifoldId::S3Only => ManifoldPoint::Rotation(Quat::identity()),
            ManifoldId::Rn(n) => ManifoldPoint::Euclidean(DVector::zeros(n)),
        }
    }

    /// `[x, y, z, qx, qy, qz, qw]` as an M1 point.
    pub fn from_pose7(v: &[f64]) -> Result<Self> {
        if v.len() != 7 {
            return Err(VfError::Dimension { expected: 7, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(VfError::NonFinite("pose"));
        }
        let n = (v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]).sqrt();
        if n < 1e-12 {
            return Err(VfError::InvalidParam("zero quaternion".into()));
        }
        Ok(Self::m1(Vector3::new(v[0], v[1], v[2]), quat::from_xyzw(v[3], v[4], v[5], v[6])))
    }

    pub fn scalar(t: f64) -> Self {
        ManifoldPoint::Euclidean(DVector::from_element(1, t))
    }

    pub fn manifold(&self) -> ManifoldId {
        match self {
            ManifoldPoint::Cartesian { .. } => ManifoldId::M1,
            ManifoldPoint::Cylindrical { .. } => ManifoldId::M2,
            ManifoldPoint::Spherical { .. } => ManifoldId::M3,
            ManifoldPoint::Position(_) => ManifoldId::R3Only,
            ManifoldPoint::Rotation(_) => ManifoldId::S3Only,
            ManifoldPoint::Euclidean(v) => ManifoldId::Rn(v.len()),
        }
    }

    /// Orientation of the chart, if the point has one.
    pub fn quat(&self) -> Option<Quat> {
        match self {
            ManifoldPoint::Cartesian { q, .. }
            | ManifoldPoint::Cylindrical { q, .. }
            | ManifoldPoint::Spherical { q, .. }
            | ManifoldPoint::Rotation(q) => Some(*q),
            _ => None,
        }
    }

    pub fn with_quat(&self, nq: Quat) -> Self {
        let nq = quat::canonical(nq);
        match self.clone() {
            ManifoldPoint::Cartesian { p, .. } => ManifoldPoint::Cartesian { p, q: nq },
            ManifoldPoint::Cylindrical { theta, r, z, .. } => ManifoldPoint::Cylindrical { theta, r, z, q: nq },
            ManifoldPoint::Spherical { u, r, .. } => ManifoldPoint::Spherical { u, r, q: nq },
            ManifoldPoint::Rotation(_) => ManifoldPoint::Rotation(nq),
            other => other,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self {
            ManifoldPoint::Cylindrical { r, .. } | ManifoldPoint::Spherical { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// Cartesian position of pose-like points.
    pub fn position(&self) -> Option<Vector3<f64>> {
        match self {
            ManifoldPoint::Cartesian { p, .. } | ManifoldPoint::Position(p) => Some(*p),
            ManifoldPoint::Cylindrical { theta, r, z, .. } => Some(Vector3::new(r * theta.cos(), r * theta.sin(), *z)),
            ManifoldPoint::Spherical { u, r, .. } => Some(u * *r),
            _ => None,
        }
    }

    /// `[x, y, z, qx, qy, qz, qw]` of the equivalent M1 pose.
    pub fn to_pose7(&self) -> Result<[f64; 7]> {
        match to_m1(self)? {
            ManifoldPoint::Cartesian { p, q } => {
                let [qx, qy, qz, qw] = quat::to_xyzw(&q);
                Ok([p.x, p.y, p.z, qx, qy, qz, qw])
            }
            _ => unreachable!(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ManifoldPoint::Cartesian { p, q } => p.iter().all(|x| x.is_finite()) && q.coords.iter().all(|x| x.is_finite()),
            ManifoldPoint::Cylindrical { theta, r, z, q } => {
                theta.is_finite() && r.is_finite() && z.is_finite() && q.coords.iter().all(|x| x.is_finite())
            }
            ManifoldPoint::Spherical { u, r, q } => {
                u.iter().all(|x| x.is_finite()) && r.is_finite() && q.coords.iter().all(|x| x.is_finite())
            }
            ManifoldPoint::Position(p) => p.iter().all(|x| x.is_finite()),
            ManifoldPoint::Rotation(q) => q.coords.iter().all(|x| x.is_finite()),
            ManifoldPoint::Euclidean(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn mismatch(a: &ManifoldPoint, b: &ManifoldPoint) -> VfError {
    VfError::ManifoldMismatch { expected: a.manifold(), got: b.manifold() }
}

fn check_r(r: f64) -> Result<f64> {
    if r > R_MIN && r.is_finite() {
        Ok(r)
    } else {
        Err(VfError::ChartSingularity { r })
    }
}

fn v3(v: &DVector<f64>, start: usize) -> Vector3<f64> {
    Vector3::new(v[start], v[start + 1], v[start + 2])
}

fn pack(lin: Vector3<f64>, ang: Vector3<f64>) -> DVector<f64> {
    DVector::from_iterator(6, lin.iter().chain(ang.iter()).cloned())
}

/// Rotation matrix of the minimal alignment `+z -> u`; its columns form the
/// `(a1, a2, u)` frame used for sphere tangents.
pub fn align_matrix(u: &Vector3<f64>) -> Matrix3<f64> {
    quat::align_z_to(u).to_rotation_matrix().into_inner()
}

fn s2_log(u1: &Vector3<f64>, u2: &Vector3<f64>) -> Vector3<f64> {
    let c = u1.dot(u2).clamp(-1.0, 1.0);
    let s = u1.cross(u2).norm();
    let angle = s.atan2(c);
    let w = u2 - u1 * c;
    let n = w.norm();
    if n < 1e-300 || angle == 0.0 {
        if angle < 1.0 {
            return Vector3::zeros();
        }
        return align_matrix(u1).column(0) * angle;
    }
    w * (angle / n)
}

fn s2_exp(u: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n < 1e-300 {
        return *u;
    }
    (u * n.cos() + v * (n.sin() / n)).normalize()
}

/// Spatial S^2 tangent -> `(dalpha1, dalpha2)` in the basis at `u`.
fn s2_to_basis(u: &Vector3<f64>, v: &Vector3<f64>) -> (f64, f64) {
    let ra = align_matrix(u);
    (ra.column(0).dot(v), ra.column(1).dot(v))
}

fn s2_from_basis(u: &Vector3<f64>, a1: f64, a2: f64) -> Vector3<f64> {
    let ra = align_matrix(u);
    ra.column(0) * a1 + ra.column(1) * a2
}

/// Geodesic transport of a spatial tangent on S^2 from `u1` to `u2`.
fn s2_transport(u1: &Vector3<f64>, u2: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let w = s2_log(u1, u2);
    let theta = w.norm();
    if theta < 1e-300 {
        return *v;
    }
    let e = w / theta;
    let a = v.dot(&e);
    let perp = v - e * a;
    perp + (e * theta.cos() - u1 * theta.sin()) * a
}

/// Tangent vector at `base` pointing to `target`; its norm is the geodesic distance.
pub fn log(base: &ManifoldPoint, target: &ManifoldPoint) -> Result<DVector<f64>> {
    use ManifoldPoint::*;
    Ok(match (base, target) {
        (Cartesian { p: p1, q: q1 }, Cartesian { p: p2, q: q2 }) => pack(p2 - p1, quat::log(q1, q2)),
        (Cylindrical { theta: t1, r: r1, z: z1, q: q1 }, Cylindrical { theta: t2, r: r2, z: z2, q: q2 }) => {
            check_r(*r1)?;
            check_r(*r2)?;
            pack(Vector3::new(wrap_angle(t2 - t1), r2 - r1, z2 - z1), quat::log(q1, q2))
        }
        (Spherical { u: u1, r: r1, q: q1 }, Spherical { u: u2, r: r2, q: q2 }) => {
            check_r(*r1)?;
            check_r(*r2)?;
            let (a1, a2) = s2_to_basis(u1, &s2_log(u1, u2));
            pack(Vector3::new(a1, a2, r2 - r1), quat::log(q1, q2))
        }
        (Position(a), Position(b)) => DVector::from_column_slice((b - a).as_slice()),
        (Rotation(a), Rotation(b)) => DVector::from_column_slice(quat::log(a, b).as_slice()),
        (Euclidean(a), Euclidean(b)) if a.len() == b.len() => b - a,
        _ => return Err(mismatch(base, target)),
    })
}

pub fn exp(base: &ManifoldPoint, v: &DVector<f64>) -> Result<ManifoldPoint> {
    use ManifoldPoint::*;
    let dim = base.manifold().tangent_dim();
    if v.len() != dim {
        return Err(VfError::Dimension { expected: dim, got: v.len() });
    }
    Ok(match base {
        Cartesian { p, q } => Cartesian { p: p + v3(v, 0), q: quat::exp(q, &v3(v, 3)) },
        Cylindrical { theta, r, z, q } => Cylindrical {
            theta: wrap_angle(theta + v[0]),
            r: check_r(r + v[1])?,
            z: z + v[2],
            q: quat::exp(q, &v3(v, 3)),
        },
        Spherical { u, r, q } => {
            check_r(*r)?;
            let t = s2_from_basis(u, v[0], v[1]);
            Spherical { u: s2_exp(u, &t), r: check_r(r + v[2])?, q: quat::exp(q, &v3(v, 3)) }
        }
        Position(p) => Position(p + v3(v, 0)),
        Rotation(q) => Rotation(quat::exp(q, &v3(v, 0))),
        Euclidean(a) => Euclidean(a + v),
    })
}

/// Move a tangent vector at `from` to the tangent space at `to`.
pub fn parallel_transport(from: &ManifoldPoint, v: &DVector<f64>, to: &ManifoldPoint) -> Result<DVector<f64>> {
    use ManifoldPoint::*;
    let rot = |q1: &Quat, q2: &Quat, w: Vector3<f64>| (q2.inverse() * q1) * w;
    Ok(match (from, to) {
        (Cartesian { q: q1, .. }, Cartesian { q: q2, .. }) | (Cylindrical { q: q1, .. }, Cylindrical { q: q2, .. }) => {
            pack(v3(v, 0), rot(q1, q2, v3(v, 3)))
        }
        (Spherical { u: u1, q: q1, .. }, Spherical { u: u2, q: q2, .. }) => {
            let t = s2_transport(u1, u2, &s2_from_basis(u1, v[0], v[1]));
            let (a1, a2) = s2_to_basis(u2, &t);
            pack(Vector3::new(a1, a2, v[2]), rot(q1, q2, v3(v, 3)))
        }
        (Rotation(q1), Rotation(q2)) => DVector::from_column_slice(rot(q1, q2, v3(v, 0)).as_slice()),
        (Position(_), Position(_)) => v.clone(),
        (Euclidean(a), Euclidean(b)) if a.len() == b.len() => v.clone(),
        _ => return Err(mismatch(from, to)),
    })
}

/// `Log(x2)^T A Log(x2)` at `x1`.
pub fn distance_weighted(x1: &ManifoldPoint, x2: &ManifoldPoint, a: &DMatrix<f64>) -> Result<f64> {
    let l = log(x1, x2)?;
    if a.nrows() != l.len() || a.ncols() != l.len() {
        return Err(VfError::Dimension { expected: l.len(), got: a.nrows() });
    }
    Ok((l.transpose() * a * &l)[(0, 0)])
}

/// `|Log_x1(x2)|^2`, the unweighted squared distance.
pub fn distance_sq(x1: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
    Ok(log(x1, x2)?.norm_squared())
}

pub fn to_m1(x: &ManifoldPoint) -> Result<ManifoldPoint> {
    use ManifoldPoint::*;
    Ok(match x {
        Cartesian { .. } => x.clone(),
        Cylindrical { theta, r, z, q } => {
            ManifoldPoint::m1(Vector3::new(r * theta.cos(), r * theta.sin(), *z), quat::rot_z(*theta) * q)
        }
        Spherical { u, r, q } => ManifoldPoint::m1(u * *r, quat::align_z_to(u) * q),
        Position(p) => ManifoldPoint::m1(*p, Quat::identity()),
        Rotation(q) => ManifoldPoint::m1(Vector3::zeros(), *q),
        Euclidean(_) => {
            return Err(VfError::ManifoldMismatch { expected: ManifoldId::M1, got: x.manifold() });
        }
    })
}

fn from_m1(p: &Vector3<f64>, q: &Quat, to: ManifoldId) -> Result<ManifoldPoint> {
    Ok(match to {
        ManifoldId::M1 => ManifoldPoint::m1(*p, *q),
        ManifoldId::M2 => {
            let r = check_r(p.x.hypot(p.y))?;
            let theta = p.y.atan2(p.x);
            ManifoldPoint::Cylindrical { theta, r, z: p.z, q: quat::canonical(quat::rot_z(-theta) * q) }
        }
        ManifoldId::M3 => {
            let r = check_r(p.norm())?;
            let u = p / r;
            ManifoldPoint::Spherical { u, r, q: quat::canonical(quat::align_z_to(&u).inverse() * q) }
        }
        ManifoldId::R3Only => ManifoldPoint::Position(*p),
        ManifoldId::S3Only => ManifoldPoint::Rotation(*q),
        ManifoldId::Rn(_) => return Err(VfError::ManifoldMismatch { expected: ManifoldId::M1, got: to }),
    })
}

/// Change of chart. Position-only and rotation-only targets drop the other part.
pub fn convert(x: &ManifoldPoint, to: ManifoldId) -> Result<ManifoldPoint> {
    if x.manifold() == to {
        return Ok(x.clone());
    }
    match to_m1(x)? {
        ManifoldPoint::Cartesian { p, q } => from_m1(&p, &q, to),
        _ => unreachable!(),
    }
}

/// Jacobian of the chart map M1 -> M evaluated at `x` (given in any chart of
/// a pose manifold). Maps M1 tangents to tangents of `x.manifold()`.
pub fn manifold_jacobian(x: &ManifoldPoint) -> Result<Matrix6<f64>> {
    let mut j = Matrix6::identity();
    match x {
        ManifoldPoint::Cartesian { .. } => {}
        ManifoldPoint::Cylindrical { theta, r, q, .. } => {
            let r = check_r(*r)?;
            let (px, py) = (r * theta.cos(), r * theta.sin());
            let r2 = r * r;
            let jpx = Matrix3::new(-py / r2, px / r2, 0.0, px / r, py / r, 0.0, 0.0, 0.0, 1.0);
            let rt = q.to_rotation_matrix().into_inner().transpose();
            let inner = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, py / r2, -px / r2, 0.0);
            j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jpx);
            j.fixed_view_mut::<3, 3>(3, 0).copy_from(&(rt * inner));
        }
        ManifoldPoint::Spherical { u, r, q } => {
            let r = check_r(*r)?;
            let ra = align_matrix(u);
            let jpx = Matrix3::from_diagonal(&Vector3::new(1.0 / r, 1.0 / r, 1.0)) * ra.transpose();
            // The third row carries the twist of the alignment frame about u.
            let k = 1.0 + u.z;
            let (tx, ty) = if k > 1e-12 { (u.x / k, u.y / k) } else { (0.0, 0.0) };
            let inner = Matrix3::new(0.0, 1.0 / r, 0.0, -1.0 / r, 0.0, 0.0, -ty / r, tx / r, 0.0);
            let rt = q.to_rotation_matrix().into_inner().transpose();
            j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jpx);
            j.fixed_view_mut::<3, 3>(3, 0).copy_from(&(rt * inner * ra.transpose()));
        }
        other => {
            return Err(VfError::ManifoldMismatch { expected: ManifoldId::M1, got: other.manifold() });
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn dv(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn log_of_self_is_zero() {
        for m in [ManifoldId::M1, ManifoldId::M2, ManifoldId::M3] {
            let x = ManifoldPoint::identity(m);
            assert_eq!(log(&x, &x).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn cylindrical_angular_step() {
        let x = ManifoldPoint::identity(ManifoldId::M2);
        let y = exp(&x, &dv(&[FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        match y {
            ManifoldPoint::Cylindrical { theta, r, .. } => {
                assert_relative_eq!(theta, FRAC_PI_2);
                assert_eq!(r, 1.0);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn conversions_by_hand() {
        let x = ManifoldPoint::m1(Vector3::new(0.0, 1.0, 0.0), Quat::identity());
        match convert(&x, ManifoldId::M2).unwrap() {
            ManifoldPoint::Cylindrical { theta, r, z, q } => {
                assert_relative_eq!(theta, FRAC_PI_2);
                assert_relative_eq!(r, 1.0);
                assert_eq!(z, 0.0);
                assert_relative_eq!(quat::log(&Quat::identity(), &q), Vector3::new(0.0, 0.0, -FRAC_PI_2), epsilon = 1e-15);
            }
            _ => panic!(),
        }
        let x = ManifoldPoint::m1(Vector3::new(0.0, 0.0, 2.0), Quat::identity());
        assert_eq!(
            convert(&x, ManifoldId::M3).unwrap(),
            ManifoldPoint::Spherical { u: Vector3::z(), r: 2.0, q: Quat::identity() }
        );
    }

    #[test]
    fn cylindrical_position_jacobian_on_x_axis() {
        let x = convert(&ManifoldPoint::m1(Vector3::new(1.0, 0.0, 0.0), Quat::identity()), ManifoldId::M2).unwrap();
        let j = manifold_jacobian(&x).unwrap();
        let expect = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(j.fixed_view::<3, 3>(0, 0).clone_owned(), expect, epsilon = 1e-15);
        assert_eq!(manifold_jacobian(&ManifoldPoint::identity(ManifoldId::M1)).unwrap(), Matrix6::identity());
    }

    #[test]
    fn chart_singularity_is_reported() {
        let x = ManifoldPoint::m1(Vector3::new(0.0, 0.0, 1.0), Quat::identity());
        assert!(matches!(convert(&x, ManifoldId::M2), Err(VfError::ChartSingularity { .. })));
    }

    #[test]
    fn squared_euclidean_distance() {
        let a = ManifoldPoint::identity(ManifoldId::M1);
        let b = ManifoldPoint::m1(Vector3::new(1.0, 2.0, 2.0), Quat::identity());
        assert_eq!(distance_weighted(&a, &b, &DMatrix::identity(6, 6)).unwrap(), 9.0);
    }

    #[test]
    fn theta_wraps_short_way() {
        let a = ManifoldPoint::Cylindrical { theta: 3.0, r: 1.0, z: 0.0, q: Quat::identity() };
        let b = ManifoldPoint::Cylindrical { theta: -3.0, r: 1.0, z: 0.0, q: Quat::identity() };
        assert_relative_eq!(log(&a, &b).unwrap()[0], 2.0 * PI - 6.0, epsilon = 1e-14);
    }

    #[test]
    fn mismatched_manifolds_error() {
        let a = ManifoldPoint::identity(ManifoldId::M1);
        let b = ManifoldPoint::identity(ManifoldId::M2);
        assert!(matches!(log(&a, &b), Err(VfError::ManifoldMismatch { .. })));
    }
}
