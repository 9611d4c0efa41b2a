//! Unit-quaternion helpers (scalar-last storage, body-frame tangents).

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};

pub type Quat = UnitQuaternion<f64>;

/// Flip to the hemisphere with `w >= 0`.
pub fn canonical(q: Quat) -> Quat {
    if q.w < 0.0 {
        Unit::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

pub fn from_xyzw(x: f64, y: f64, z: f64, w: f64) -> Quat {
    canonical(UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
}

pub fn to_xyzw(q: &Quat) -> [f64; 4] {
    [q.i, q.j, q.k, q.w]
}

/// Rotation vector of `q` after moving it to the `w >= 0` hemisphere.
pub fn log_identity(q: &Quat) -> Vector3<f64> {
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let n = v.norm();
    if n < 1e-8 {
        // 2*atan2(n, w)/n expanded around n = 0
        let s = 2.0 / w * (1.0 - n * n / (3.0 * w * w));
        return v * s;
    }
    v * (2.0 * n.atan2(w) / n)
}

pub fn exp_identity(omega: &Vector3<f64>) -> Quat {
    let theta = omega.norm();
    let half = 0.5 * theta;
    let (w, s) = if theta < 1e-8 {
        (1.0 - theta * theta / 8.0, 0.5 - theta * theta / 48.0)
    } else {
        (half.cos(), half.sin() / theta)
    };
    UnitQuaternion::from_quaternion(Quaternion::new(w, omega.x * s, omega.y * s, omega.z * s))
}

/// Body-frame logarithm `log(q1^-1 q2)`; antipodal inputs map to zero.
pub fn log(q1: &Quat, q2: &Quat) -> Vector3<f64> {
    log_identity(&(q1.inverse() * q2))
}

pub fn exp(q: &Quat, omega: &Vector3<f64>) -> Quat {
    canonical(q * exp_identity(omega))
}

pub fn rot_z(angle: f64) -> Quat {
    canonical(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
}

/// Minimal rotation taking `+z` onto the unit vector `u`.
/// At `u = -z` the rotation axis is fixed to `+x`.
pub fn align_z_to(u: &Vector3<f64>) -> Quat {
    let z = Vector3::z();
    let c = z.cross(u);
    let s = c.norm();
    let angle = s.atan2(u.z);
    if s < 1e-12 {
        if u.z > 0.0 {
            return Quat::identity();
        }
        return canonical(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    }
    canonical(UnitQuaternion::from_axis_angle(&Unit::new_unchecked(c / s), angle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_about_z() {
        let q = rot_z(FRAC_PI_2);
        assert_relative_eq!(log(&Quat::identity(), &q), Vector3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-15);
    }

    #[test]
    fn antipodal_is_zero() {
        let q = from_xyzw(0.3, -0.2, 0.5, 0.7);
        let neg = Unit::new_unchecked(-q.into_inner());
        assert_eq!(log(&q, &neg).norm(), 0.0);
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        for t in [1e-9, 1e-8 * 0.999, 1e-8 * 1.001, 1e-6] {
            let w = Vector3::new(t, -2.0 * t, 0.5 * t);
            assert_relative_eq!(log_identity(&exp_identity(&w)), w, max_relative = 1e-12);
        }
    }

    #[test]
    fn align_hits_target() {
        for u in [Vector3::new(1.0, 2.0, -0.5).normalize(), -Vector3::z(), Vector3::z()] {
            let q = align_z_to(&u);
            assert_relative_eq!(q * Vector3::z(), u, epsilon = 1e-14);
        }
    }
}
