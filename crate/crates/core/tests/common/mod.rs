#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vfix::geometry::{quat, ManifoldId, ManifoldPoint, Quat};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal3(r: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(StandardNormal.sample(r), StandardNormal.sample(r), StandardNormal.sample(r))
}

pub fn random_quat(r: &mut ChaCha8Rng) -> Quat {
    let v: [f64; 4] = [StandardNormal.sample(r), StandardNormal.sample(r), StandardNormal.sample(r), StandardNormal.sample(r)];
    quat::from_xyzw(v[0], v[1], v[2], v[3])
}

pub fn random_unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    normal3(r).normalize()
}

/// Random pose-manifold point with radius in [0.05, 2]. Spherical points stay
/// at least 0.1 rad away from the -z pole, where the alignment frame flips.
pub fn random_point(r: &mut ChaCha8Rng, m: ManifoldId) -> ManifoldPoint {
    let q = random_quat(r);
    match m {
        ManifoldId::M1 => ManifoldPoint::m1(normal3(r), q),
        ManifoldId::M2 => ManifoldPoint::Cylindrical {
            theta: r.gen_range(-std::f64::consts::PI + 1e-3..std::f64::consts::PI - 1e-3),
            r: r.gen_range(0.05..2.0),
            z: r.gen_range(-1.0..1.0),
            q,
        },
        ManifoldId::M3 => loop {
            let u = random_unit(r);
            if u.z > (std::f64::consts::PI - 0.1).cos() {
                break ManifoldPoint::Spherical { u, r: r.gen_range(0.05..2.0), q };
            }
        },
        ManifoldId::R3Only => ManifoldPoint::Position(normal3(r)),
        ManifoldId::S3Only => ManifoldPoint::Rotation(q),
        ManifoldId::Rn(n) => ManifoldPoint::Euclidean(DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(r) })),
    }
}

/// Random tangent with the angular part well inside the injectivity radius.
pub fn random_tangent(r: &mut ChaCha8Rng, m: ManifoldId, scale: f64) -> DVector<f64> {
    DVector::from_fn(m.tangent_dim(), |_, _| r.gen_range(-1.0..1.0) * scale)
}

pub fn random_spd(r: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(r));
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

pub fn rot_about(axis: Vector3<f64>, angle: f64) -> Quat {
    quat::canonical(UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle))
}
