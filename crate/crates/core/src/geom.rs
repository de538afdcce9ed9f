//! Small fixed-size linear algebra, unit quaternions and the rotated helical
//! director fields `Q N_tau(Q^T x)` with `N_tau(x) = (cos tau x3, sin tau x3, 0)`.

use core::ops::{Add, Mul, Neg, Sub};

use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);
    pub const E1: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const E2: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const E3: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(self) -> f64 {
        self.0[0]
    }

    pub fn y(self) -> f64 {
        self.0[1]
    }

    pub fn z(self) -> f64 {
        self.0[2]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [d, e, f] = o.0;
        Vec3([b * f - c * e, c * d - a * f, a * e - b * d])
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn scale(self, s: f64) -> Vec3 {
        self * s
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Quaternion `w + x i + y j + z k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (0.5 * angle).sin_cos();
        Quat::new(c, a.x() * s, a.y() * s, a.z() * s)
    }

    /// `exp(v / 2)` for a rotation vector `v`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-300 {
            return Quat::IDENTITY;
        }
        Quat::from_axis_angle(v, angle)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conj(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Representative with `w >= 0` (the sign is immaterial for rotations).
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Quat::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v + 2 q x (q x v + w v)
        let q = Vec3::new(self.x, self.y, self.z);
        let t = q.cross(v) * 2.0;
        v + t * self.w + q.cross(t)
    }

    pub fn matrix(self) -> [[f64; 3]; 3] {
        let Quat { w, x, y, z } = self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Rotation angle between the rotations represented by `self` and `o`.
    pub fn angle_to(self, o: Quat) -> f64 {
        let d = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs();
        2.0 * d.min(1.0).acos()
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Rotated helical director field `Q N_tau(Q^T x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectorRotation {
    pub quat: Quat,
    pub tau: f64,
}

impl DirectorRotation {
    /// Normalizes `quat`; rejects a degenerate quaternion or negative `tau`.
    pub fn new(quat: Quat, tau: f64) -> Result<Self> {
        let n = quat.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::NonUnit { norm: n });
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::invalid("tau", "must be nonnegative and finite"));
        }
        Ok(DirectorRotation {
            quat: quat.normalized(),
            tau,
        })
    }

    pub fn identity(tau: f64) -> Self {
        DirectorRotation {
            quat: Quat::IDENTITY,
            tau,
        }
    }
}

pub fn director_at(r: &DirectorRotation, x: Vec3) -> Vec3 {
    let local = r.quat.conj().rotate(x);
    let (s, c) = (r.tau * local.z()).sin_cos();
    let n = r.quat.rotate(Vec3::new(c, s, 0.0));
    // re-normalize away rounding from the two rotations
    n * (1.0 / n.norm())
}

/// Largest `|div n|` and `|curl n + tau n|` over the samples, by second-order
/// central differences with step `h`.
pub fn verify_c_tau(r: &DirectorRotation, samples: &[Vec3], h: f64) -> (f64, f64) {
    let mut div_max: f64 = 0.0;
    let mut curl_max: f64 = 0.0;
    let basis = [Vec3::E1, Vec3::E2, Vec3::E3];
    for &x in samples {
        // jac[i][j] = d n_i / d x_j
        let mut jac = [[0.0; 3]; 3];
        for (j, e) in basis.iter().enumerate() {
            let up = director_at(r, x + *e * h);
            let dn = director_at(r, x - *e * h);
            for i in 0..3 {
                jac[i][j] = (up.0[i] - dn.0[i]) / (2.0 * h);
            }
        }
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        let curl = Vec3::new(jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]);
        let res = curl + director_at(r, x) * r.tau;
        div_max = div_max.max(div.abs());
        curl_max = curl_max.max(res.norm());
    }
    (div_max, curl_max)
}

/// Angle in `[0, pi/2]` between `n` and the plane orthogonal to `normal`.
pub fn angle_nu(n: Vec3, normal: Vec3) -> Result<f64> {
    for v in [n, normal] {
        let norm = v.norm();
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(Error::NonUnit { norm });
        }
    }
    Ok(angle_nu_unchecked(n, normal))
}

pub(crate) fn angle_nu_unchecked(n: Vec3, normal: Vec3) -> f64 {
    n.dot(normal).abs().clamp(0.0, 1.0).asin()
}
