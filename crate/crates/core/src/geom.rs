//! Points, spherical coordinates and basis-tagged complex field vectors.
//!
//! The global frame places the transmit ball at the origin and the receive
//! ball centre on the +z axis, so `theta` is the polar angle measured from the
//! Tx→Rx axis and `phi` the azimuth in the x–y plane.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub type Vec3 = Vector3<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spherical coordinates of a point: radius, polar angle from +z, azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spherical {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Spherical {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    pub fn from_cartesian(p: &Vec3) -> Self {
        let r = p.norm();
        if r == 0.0 {
            return Self::new(0.0, 0.0, 0.0);
        }
        let theta = (p.z / r).clamp(-1.0, 1.0).acos();
        let mut phi = p.y.atan2(p.x);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        Self { r, theta, phi }
    }

    pub fn to_cartesian(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(self.r * st * cp, self.r * st * sp, self.r * ct)
    }

    /// Local orthonormal frame (r̂, θ̂, φ̂) expressed in Cartesian components.
    pub fn unit_vectors(&self) -> [Vec3; 3] {
        local_frame(self.theta, self.phi)
    }
}

pub fn local_frame(theta: f64, phi: f64) -> [Vec3; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        Vec3::new(st * cp, st * sp, ct),
        Vec3::new(ct * cp, ct * sp, -st),
        Vec3::new(-sp, cp, 0.0),
    ]
}

/// Which basis the three components of a [`ComplexVec3`] refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    Cartesian,
    /// Local (r̂, θ̂, φ̂) basis at the given angles.
    Spherical {
        theta: f64,
        phi: f64,
    },
}

/// Three complex components (a field or current sample) tagged with their basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexVec3 {
    pub c: [Complex64; 3],
    pub basis: Basis,
}

impl ComplexVec3 {
    pub fn zero() -> Self {
        Self::cartesian([ZERO; 3])
    }

    pub fn cartesian(c: [Complex64; 3]) -> Self {
        Self {
            c,
            basis: Basis::Cartesian,
        }
    }

    pub fn spherical(c: [Complex64; 3], theta: f64, phi: f64) -> Self {
        Self {
            c,
            basis: Basis::Spherical { theta, phi },
        }
    }

    pub fn from_real(v: &Vec3) -> Self {
        Self::cartesian([v.x.into(), v.y.into(), v.z.into()])
    }

    pub fn to_cartesian(&self) -> Self {
        match self.basis {
            Basis::Cartesian => *self,
            Basis::Spherical { theta, phi } => {
                let e = local_frame(theta, phi);
                let mut out = [ZERO; 3];
                for (comp, unit) in self.c.iter().zip(e.iter()) {
                    for (o, u) in out.iter_mut().zip(unit.iter()) {
                        *o += comp * *u;
                    }
                }
                Self::cartesian(out)
            }
        }
    }

    pub fn to_spherical(&self, theta: f64, phi: f64) -> Self {
        let cart = self.to_cartesian();
        let e = local_frame(theta, phi);
        let mut out = [ZERO; 3];
        for (o, unit) in out.iter_mut().zip(e.iter()) {
            *o = cart.c[0] * unit.x + cart.c[1] * unit.y + cart.c[2] * unit.z;
        }
        Self::spherical(out, theta, phi)
    }

    fn in_basis_of(&self, other: &Self) -> Self {
        if self.basis == other.basis {
            return *self;
        }
        match other.basis {
            Basis::Cartesian => self.to_cartesian(),
            Basis::Spherical { theta, phi } => self.to_spherical(theta, phi),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Σ aᵢ bᵢ* (Hermitian inner product, conjugate on the right).
    pub fn dot_conj(&self, other: &Self) -> Complex64 {
        let o = other.in_basis_of(self);
        self.c.iter().zip(o.c.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    /// Bilinear dot with a real direction (Cartesian).
    pub fn dot_real(&self, dir: &Vec3) -> Complex64 {
        let c = self.to_cartesian().c;
        c[0] * dir.x + c[1] * dir.y + c[2] * dir.z
    }

    /// n̂ × self for a real unit normal, result in Cartesian basis.
    pub fn cross_normal(&self, n: &Vec3) -> Self {
        let a = self.to_cartesian().c;
        Self::cartesian([
            a[2] * n.y - a[1] * n.z,
            a[0] * n.z - a[2] * n.x,
            a[1] * n.x - a[0] * n.y,
        ])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: [self.c[0] * s, self.c[1] * s, self.c[2] * s],
            basis: self.basis,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            c: [self.c[0].conj(), self.c[1].conj(), self.c[2].conj()],
            basis: self.basis,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for ComplexVec3 {
    type Output = ComplexVec3;
    fn add(self, rhs: Self) -> Self {
        let r = rhs.in_basis_of(&self);
        Self {
            c: [self.c[0] + r.c[0], self.c[1] + r.c[1], self.c[2] + r.c[2]],
            basis: self.basis,
        }
    }
}

impl AddAssign for ComplexVec3 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for ComplexVec3 {
    type Output = ComplexVec3;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for ComplexVec3 {
    type Output = ComplexVec3;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<Complex64> for ComplexVec3 {
    type Output = ComplexVec3;
    fn mul(self, s: Complex64) -> Self {
        Self {
            c: [self.c[0] * s, self.c[1] * s, self.c[2] * s],
            basis: self.basis,
        }
    }
}
