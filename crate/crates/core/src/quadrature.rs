//! Gauss–Legendre rules, sphere and ball product quadratures, and
//! Fibonacci point layouts.

use crate::geom::Vec3;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Product rule on the unit sphere: Gauss–Legendre in cos θ, trapezoid in φ.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    theta: Vec<f64>,
    theta_w: Vec<f64>,
    n_phi: usize,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        Self {
            theta: x.iter().map(|c| c.acos()).collect(),
            theta_w: w,
            n_phi,
        }
    }

    /// Exact for products of harmonics up to degree `band`.
    pub fn for_band(band: usize) -> Self {
        Self::new(band + 2, 2 * band + 2)
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// (θ, φ, weight) triples; weights sum to 4π.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let dphi = 2.0 * PI / self.n_phi as f64;
        self.theta
            .iter()
            .zip(self.theta_w.iter())
            .flat_map(move |(&t, &wt)| (0..self.n_phi).map(move |j| (t, j as f64 * dphi, wt * dphi)))
    }
}

/// Solid-ball rule about the origin: radial Gauss–Legendre (weight r²) times
/// a sphere rule.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    pub radius: f64,
    radial: Vec<f64>,
    radial_w: Vec<f64>,
    pub sphere: SphereQuadrature,
}

impl BallQuadrature {
    pub fn new(radius: f64, n_radial: usize, sphere: SphereQuadrature) -> Self {
        let (r, w) = gauss_legendre_interval(n_radial, 0.0, radius);
        let radial_w = r.iter().zip(w.iter()).map(|(r, w)| w * r * r).collect();
        Self {
            radius,
            radial: r,
            radial_w,
            sphere,
        }
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (r, θ, φ, weight) with weights summing to the ball volume.
    pub fn nodes(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for (&r, &wr) in self.radial.iter().zip(self.radial_w.iter()) {
            for (t, p, w) in self.sphere.nodes() {
                out.push((r, t, p, wr * w));
            }
        }
        out
    }
}

/// Quasi-uniform points on the unit sphere (golden-angle spiral), rotated
/// about a tilted axis by `rotation` radians so two layouts interleave.
pub fn fibonacci_sphere(n: usize, rotation: f64) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let axis = Vec3::new(1.0, 1.0, 1.0).normalize();
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rotation);
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            rot * Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}
