//! Free-space scalar and dyadic Green's functions.
//!
//! The dyad is split by powers of 1/r into far (1/r), middle (1/r²) and near
//! (1/r³) parts. All three carry the 1/(4π) prefactor of g so that
//! far + middle + near reproduces the full kernel exactly.

use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Vec3};
use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MODULE: &str = "green";

/// Which radial-order part of the dyadic kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Full,
    Far,
    Middle,
    Near,
}

/// 3×3 complex dyad in Cartesian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dyad(pub Matrix3<Complex64>);

impl Dyad {
    pub fn zero() -> Self {
        Dyad(Matrix3::zeros())
    }

    pub fn apply(&self, v: &ComplexVec3) -> ComplexVec3 {
        let c = v.to_cartesian().c;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[(i, 0)] * c[0] + self.0[(i, 1)] * c[1] + self.0[(i, 2)] * c[2];
        }
        ComplexVec3::cartesian(out)
    }

    pub fn transpose(&self) -> Self {
        Dyad(self.0.transpose())
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Add for Dyad {
    type Output = Dyad;
    fn add(self, rhs: Dyad) -> Dyad {
        Dyad(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Dyad {
    type Output = Dyad;
    fn sub(self, rhs: Dyad) -> Dyad {
        Dyad(self.0 - rhs.0)
    }
}

fn separation(r_field: &Vec3, r_source: &Vec3) -> Result<(f64, Vec3)> {
    let d = r_field - r_source;
    let r = d.norm();
    if !r.is_finite() {
        return Err(Error::domain(MODULE, "non-finite point"));
    }
    if r == 0.0 {
        return Err(Error::singular(MODULE, "field and source points coincide"));
    }
    Ok((r, d / r))
}

/// g = e^{ikr}/(4πr).
pub fn scalar_green(r_field: &Vec3, r_source: &Vec3, k: f64) -> Result<Complex64> {
    let (r, _) = separation(r_field, r_source)?;
    Ok(Complex64::from_polar(1.0 / (4.0 * PI * r), k * r))
}

/// Coefficients (α, β) such that the requested part equals (α I + β r̂r̂) g.
pub fn part_coefficients(part: Part, kr: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let inv = 1.0 / kr;
    let inv2 = inv * inv;
    match part {
        Part::Full => (1.0 + i * inv - inv2, -1.0 - 3.0 * i * inv + 3.0 * inv2),
        Part::Far => (Complex64::from(1.0), Complex64::from(-1.0)),
        Part::Middle => (i * inv, -3.0 * i * inv),
        Part::Near => (Complex64::from(-inv2), Complex64::from(3.0 * inv2)),
    }
}

/// Dyadic Green's function (I + ∇∇/k²) g or one of its radial-order parts.
pub fn dyadic_green(r_field: &Vec3, r_source: &Vec3, k: f64, part: Part) -> Result<Dyad> {
    let (r, u) = separation(r_field, r_source)?;
    let g = Complex64::from_polar(1.0 / (4.0 * PI * r), k * r);
    let (a, b) = part_coefficients(part, k * r);
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[(i, j)] = (a * delta + b * (u[i] * u[j])) * g;
        }
    }
    Ok(Dyad(m))
}

/// Sampled source current: quadrature nodes, weights and current values,
/// with the ball (centre, radius) that bounds the support.
#[derive(Debug, Clone)]
pub struct SampledSource<'a> {
    pub points: &'a [Vec3],
    pub weights: &'a [f64],
    pub current: &'a [ComplexVec3],
    pub center: Vec3,
    pub radius: f64,
}

/// E(r) = iωμ Σ wᵢ Ḡ(r, rᵢ) J(rᵢ): direct quadrature of the radiation
/// integral, the expansion-free reference field.
pub fn radiated_field_integral(
    src: &SampledSource<'_>,
    r_field: &Vec3,
    k: f64,
    omega: f64,
    mu: f64,
) -> Result<ComplexVec3> {
    if src.points.len() != src.weights.len() || src.points.len() != src.current.len() {
        return Err(Error::precondition(
            MODULE,
            "points, weights and current differ in length",
        ));
    }
    if (r_field - src.center).norm() <= src.radius {
        return Err(Error::singular(
            MODULE,
            "field point lies inside the source quadrature support",
        ));
    }
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for ((p, &w), j) in src.points.iter().zip(src.weights).zip(src.current) {
        let jc = j.to_cartesian().c;
        if jc.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let (r, u) = separation(r_field, p)?;
        let g = Complex64::from_polar(w / (4.0 * PI * r), k * r);
        let (a, b) = part_coefficients(Part::Full, k * r);
        let ud = jc[0] * u.x + jc[1] * u.y + jc[2] * u.z;
        for i in 0..3 {
            acc[i] += (a * jc[i] + b * ud * u[i]) * g;
        }
    }
    let s = Complex64::new(0.0, omega * mu);
    Ok(ComplexVec3::cartesian([acc[0] * s, acc[1] * s, acc[2] * s]))
}
