//! Vector spherical wave functions, mode indexing and the radiation operator.
//!
//! U_p uses the outgoing Hankel radial function and V_p the regular Bessel
//! one. With ψ = z_n(kr)·Y_nm the TE (l = 1) function is ∇×(rψ) and the TM
//! (l = 2) function is (1/k)∇×∇×(rψ); both are evaluated in closed form in
//! the local (r̂, θ̂, φ̂) basis:
//!
//! ```text
//! M = z_n [ θ̂ (im/sinθ) Y − φ̂ ∂θY ]
//! N = r̂ n(n+1) (z_n/x) Y + ((x z_n)'/x) [ θ̂ ∂θY + φ̂ (im/sinθ) Y ],  x = kr
//! ```
//!
//! The transmit ball is centred at the origin; the receive ball is centred
//! at distance D on the +z axis.

use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Spherical, Vec3};
use crate::quadrature::{gauss_legendre_interval, BallQuadrature, SphereQuadrature};
use crate::specfun::{harmonic_terms, spherical_h1_array, spherical_j_array, LegendreTable};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MODULE: &str = "swf";
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU0: f64 = 4.0e-7 * PI;
pub const EPS0: f64 = 1.0 / (MU0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// (n, m, l) address of one TE (l = 1) or TM (l = 2) mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SphIndex {
    pub n: u32,
    pub m: i32,
    pub l: u8,
}

impl SphIndex {
    pub fn new(n: u32, m: i32, l: u8) -> Result<Self> {
        if n == 0 || m.unsigned_abs() > n || !(l == 1 || l == 2) {
            return Err(Error::domain(MODULE, format!("invalid mode (n={n}, m={m}, l={l})")));
        }
        Ok(Self { n, m, l })
    }

    /// Flattened index p = 2(n(n+1) + m − 1) + l, starting at 1.
    pub fn flatten(&self) -> usize {
        let n = self.n as i64;
        (2 * (n * (n + 1) + self.m as i64 - 1) + self.l as i64) as usize
    }

    pub fn unflatten(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::domain(MODULE, "mode index p starts at 1"));
        }
        let l = if p % 2 == 1 { 1 } else { 2 };
        let q = (p - l as usize) / 2 + 1; // n(n+1) + m
        let mut n = (q as f64).sqrt() as usize;
        while n * n > q {
            n -= 1;
        }
        while (n + 1) * (n + 1) <= q {
            n += 1;
        }
        let m = q as i64 - (n * (n + 1)) as i64;
        Self::new(n as u32, m as i32, l)
    }

    /// Zero-based position in dense mode arrays.
    pub fn offset(&self) -> usize {
        self.flatten() - 1
    }

    pub fn is_te(&self) -> bool {
        self.l == 1
    }
}

/// Number of modes with degree ≤ nmax: 2·N·(N+2).
pub fn mode_count(nmax: usize) -> usize {
    2 * nmax * (nmax + 2)
}

/// Radial kernel of a spherical wave function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Radial {
    /// h_n⁽¹⁾, outgoing; singular at the origin.
    Outgoing,
    /// j_n, regular everywhere.
    Regular,
}

/// z_n(x), z_n(x)/x and (x z_n)'/x for n = 0 … nmax.
pub(crate) struct RadialTerms {
    pub z: Vec<Complex64>,
    pub z_over_x: Vec<Complex64>,
    pub dz: Vec<Complex64>,
}

pub(crate) fn radial_terms(kind: Radial, nmax: usize, x: f64) -> Result<RadialTerms> {
    let z: Vec<Complex64> = match kind {
        Radial::Outgoing => {
            if x <= 0.0 {
                return Err(Error::singular(MODULE, "outgoing wave evaluated at r = 0"));
            }
            spherical_h1_array(nmax + 1, x)?
        }
        Radial::Regular => spherical_j_array(nmax + 1, x)?
            .into_iter()
            .map(Complex64::from)
            .collect(),
    };
    let mut z_over_x = vec![ZERO; nmax + 1];
    let mut dz = vec![ZERO; nmax + 1];
    if x == 0.0 {
        // limits of j_n/x and (x j_n)'/x at the origin
        if nmax >= 1 {
            z_over_x[1] = Complex64::from(1.0 / 3.0);
            dz[1] = Complex64::from(2.0 / 3.0);
        }
        dz[0] = Complex64::from(1.0);
    } else {
        for n in 0..=nmax {
            z_over_x[n] = z[n] / x;
            dz[n] = if n == 0 {
                // (x z_0)'/x = z_0/x − z_1
                z[0] / x - z[1]
            } else {
                z[n - 1] - z[n] * (n as f64 / x)
            };
        }
    }
    Ok(RadialTerms {
        z: z[..=nmax].to_vec(),
        z_over_x,
        dz,
    })
}

fn phases(nmax: usize, phi: f64) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, phi);
    let mut out = Vec::with_capacity(nmax + 1);
    let mut cur = Complex64::new(1.0, 0.0);
    for m in 0..=nmax {
        if m > 0 {
            // refresh from the exact value every few steps to bound drift
            cur = if m % 8 == 0 {
                Complex64::from_polar(1.0, m as f64 * phi)
            } else {
                cur * step
            };
        }
        out.push(cur);
    }
    out
}

/// All mode vectors with degree ≤ nmax at one point, in the local spherical
/// basis (r, θ, φ components), indexed by p − 1.
pub fn eval_modes(kind: Radial, nmax: usize, k: f64, point: &Spherical) -> Result<Vec<[Complex64; 3]>> {
    let mut out = vec![[ZERO; 3]; mode_count(nmax)];
    eval_modes_into(kind, nmax, k, point, &mut out)?;
    Ok(out)
}

pub(crate) fn eval_modes_into(
    kind: Radial,
    nmax: usize,
    k: f64,
    point: &Spherical,
    out: &mut [[Complex64; 3]],
) -> Result<()> {
    if !(point.r.is_finite() && point.theta.is_finite() && point.phi.is_finite()) {
        return Err(Error::domain(MODULE, "non-finite evaluation point"));
    }
    let rad = radial_terms(kind, nmax, k * point.r)?;
    let table = LegendreTable::from_theta(nmax + 1, point.theta);
    let ph = phases(nmax, point.phi);
    for n in 1..=nmax {
        let nn1 = (n * (n + 1)) as f64;
        let (z, zx, dz) = (rad.z[n], rad.z_over_x[n], rad.dz[n]);
        for m in -(n as i32)..=(n as i32) {
            let phase = if m >= 0 {
                ph[m as usize]
            } else {
                ph[(-m) as usize].conj()
            };
            let h = harmonic_terms(&table, n, m, phase);
            let base = 2 * ((n * (n + 1)) as i64 + m as i64 - 1) as usize;
            if base + 1 >= out.len() {
                continue;
            }
            out[base] = [ZERO, z * h.im_over_sin, -(z * h.d_theta)];
            out[base + 1] = [zx * h.y * nn1, dz * h.d_theta, dz * h.im_over_sin];
        }
    }
    Ok(())
}

fn eval_single(kind: Radial, idx: SphIndex, point: &Spherical, k: f64) -> Result<ComplexVec3> {
    let n = idx.n as usize;
    let rad = radial_terms(kind, n, k * point.r)?;
    let table = LegendreTable::from_theta(n + 1, point.theta);
    let phase = Complex64::from_polar(1.0, idx.m as f64 * point.phi);
    let h = harmonic_terms(&table, n, idx.m, phase);
    let (z, zx, dz) = (rad.z[n], rad.z_over_x[n], rad.dz[n]);
    let c = if idx.is_te() {
        [ZERO, z * h.im_over_sin, -(z * h.d_theta)]
    } else {
        [zx * h.y * (n * (n + 1)) as f64, dz * h.d_theta, dz * h.im_over_sin]
    };
    Ok(ComplexVec3::spherical(c, point.theta, point.phi))
}

/// Outgoing wave function U_p at a point (local spherical basis).
#[allow(non_snake_case)]
pub fn eval_U(idx: SphIndex, point: &Spherical, k: f64) -> Result<ComplexVec3> {
    eval_single(Radial::Outgoing, idx, point, k)
}

/// Regular wave function V_p at a point (local spherical basis).
#[allow(non_snake_case)]
pub fn eval_V(idx: SphIndex, point: &Spherical, k: f64) -> ComplexVec3 {
    eval_single(Radial::Regular, idx, point, k).expect("regular wave functions are defined everywhere")
}

/// Tx/Rx ball geometry in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r_t: f64,
    pub r_r: f64,
    /// Distance between the Tx and Rx ball centres.
    pub distance: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_t > 0.0 && self.r_r > 0.0) {
            return Err(Error::domain(MODULE, "ball radii must be positive"));
        }
        if !(self.distance > self.r_t + self.r_r) {
            return Err(Error::domain(
                MODULE,
                format!(
                    "Tx and Rx balls overlap: D = {} m ≤ R_t + R_r = {} m",
                    self.distance,
                    self.r_t + self.r_r
                ),
            ));
        }
        Ok(())
    }

    pub fn rx_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.distance)
    }

    pub fn in_rx(&self, p: &Vec3) -> bool {
        (p - self.rx_center()).norm() <= self.r_r
    }
}

/// Homogeneous lossless medium and carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub frequency: f64,
    pub mu: f64,
    pub eps: f64,
}

impl Medium {
    pub fn vacuum(frequency: f64) -> Self {
        Self {
            frequency,
            mu: MU0,
            eps: EPS0,
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn k(&self) -> f64 {
        self.omega() * (self.mu * self.eps).sqrt()
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k()
    }
}

/// Default truncation degree ⌈kR⌉ + 10.
pub fn default_truncation(k: f64, radius: f64) -> usize {
    (k * radius).ceil() as usize + 10
}

/// ‖V_p‖ over a ball of radius `radius` centred at the origin, for every
/// mode up to nmax, with `n_radial` Gauss nodes (angular part exact).
pub fn ball_norms_regular(nmax: usize, k: f64, radius: f64, n_radial: usize) -> Result<Vec<f64>> {
    let (rs, ws) = gauss_legendre_interval(n_radial, 0.0, radius);
    let mut te = vec![0.0; nmax + 1];
    let mut tm = vec![0.0; nmax + 1];
    for (&r, &w) in rs.iter().zip(ws.iter()) {
        let rad = radial_terms(Radial::Regular, nmax, k * r)?;
        for n in 1..=nmax {
            let nn1 = (n * (n + 1)) as f64;
            te[n] += w * r * r * nn1 * rad.z[n].norm_sqr();
            tm[n] += w * r * r * nn1 * (nn1 * rad.z_over_x[n].norm_sqr() + rad.dz[n].norm_sqr());
        }
    }
    let mut out = vec![0.0; mode_count(nmax)];
    for (p, o) in out.iter_mut().enumerate() {
        let idx = SphIndex::unflatten(p + 1)?;
        let v = if idx.is_te() {
            te[idx.n as usize]
        } else {
            tm[idx.n as usize]
        };
        *o = v.sqrt();
    }
    Ok(out)
}

/// Axial product rule for a ball of radius `radius` whose centre sits at
/// distance `distance` > radius on the +z axis: (r, cos θ, weight) with the
/// weight carrying r² dr d(cos θ) (the φ integral is left to the caller).
pub fn offset_ball_axial(distance: f64, radius: f64, n_r: usize, n_c: usize) -> Vec<(f64, f64, f64)> {
    let (rs, wr) = gauss_legendre_interval(n_r, distance - radius, distance + radius);
    let mut out = Vec::with_capacity(n_r * n_c);
    for (&r, &w) in rs.iter().zip(wr.iter()) {
        let c_min = ((r * r + distance * distance - radius * radius) / (2.0 * r * distance)).clamp(-1.0, 1.0);
        let (cs, wc) = gauss_legendre_interval(n_c, c_min, 1.0);
        for (&c, &v) in cs.iter().zip(wc.iter()) {
            out.push((r, c, w * v * r * r));
        }
    }
    out
}

/// ‖U_p‖ over the receive ball (offset on +z) with the given node counts.
pub fn rx_norms_outgoing(nmax: usize, k: f64, geometry: &Geometry, n_r: usize, n_c: usize) -> Result<Vec<f64>> {
    let nodes = offset_ball_axial(geometry.distance, geometry.r_r, n_r, n_c);
    let count = mode_count(nmax);
    let acc = nodes
        .par_chunks(64)
        .map(|chunk| -> Result<Vec<f64>> {
            let mut local = vec![0.0; count];
            let mut buf = vec![[ZERO; 3]; count];
            for &(r, c, w) in chunk {
                let sp = Spherical::new(r, c.clamp(-1.0, 1.0).acos(), 0.0);
                eval_modes_into(Radial::Outgoing, nmax, k, &sp, &mut buf)?;
                for (l, v) in local.iter_mut().zip(buf.iter()) {
                    *l += w * (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr());
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; count];
    for part in acc {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|v| (2.0 * PI * v).sqrt()).collect())
}

fn max_rel_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / y.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max)
}

/// Runs `f(level)` with doubling node counts until successive results agree
/// to `target`; fails when the last change still exceeds `limit`.
fn converge<F>(what: &str, max_levels: usize, target: f64, limit: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let mut prev = f(0)?;
    let mut change = f64::INFINITY;
    for level in 1..=max_levels {
        let next = f(level)?;
        change = max_rel_change(&prev, &next);
        prev = next;
        if change < target {
            return Ok(prev);
        }
    }
    if change > limit {
        return Err(Error::Accuracy {
            module: MODULE,
            msg: format!("{what}: relative change {change:.3e} after node doubling"),
        });
    }
    Ok(prev)
}

/// Truncated singular system of the radiation operator between the Tx and
/// Rx balls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiationOperator {
    pub nmax: usize,
    pub geometry: Geometry,
    pub medium: Medium,
    pub k: f64,
    pub omega: f64,
    /// ‖U_p‖ over V_r, indexed by p − 1.
    pub u_norm: Vec<f64>,
    /// ‖V_p‖ over V_t, indexed by p − 1.
    pub v_norm: Vec<f64>,
    /// σ_p = −ωμk·‖U_p‖‖V_p‖/(n(n+1)).
    pub sigma: Vec<f64>,
}

impl RadiationOperator {
    /// Builds the operator; `n_trunc` defaults to ⌈kR_t⌉ + 10.
    pub fn new(geometry: Geometry, medium: Medium, n_trunc: Option<usize>) -> Result<Self> {
        geometry.validate()?;
        let k = medium.k();
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(MODULE, "wavenumber must be positive and finite"));
        }
        let nmax = n_trunc.unwrap_or_else(|| default_truncation(k, geometry.r_t));
        if nmax == 0 {
            return Err(Error::domain(MODULE, "truncation degree must be ≥ 1"));
        }
        let base_r = (k * geometry.r_t).ceil() as usize + nmax / 2 + 16;
        let v_norm = converge("transmit-ball norms", 3, 1e-12, 1e-6, |lvl| {
            ball_norms_regular(nmax, k, geometry.r_t, base_r << lvl)
        })?;
        let base_rx = (nmax + 8).max(12);
        let u_norm = converge("receive-ball norms", 4, 1e-10, 1e-6, |lvl| {
            rx_norms_outgoing(nmax, k, &geometry, base_rx << lvl, base_rx << lvl)
        })?;
        let omega = medium.omega();
        let sigma = (0..mode_count(nmax))
            .map(|i| {
                let n = SphIndex::unflatten(i + 1).map(|s| s.n as f64).unwrap_or(1.0);
                -omega * medium.mu * k * u_norm[i] * v_norm[i] / (n * (n + 1.0))
            })
            .collect::<Vec<_>>();
        if sigma.iter().any(|s| !s.is_finite() || *s == 0.0) {
            return Err(Error::Accuracy {
                module: MODULE,
                msg: "singular value underflowed or overflowed; reduce the truncation degree".into(),
            });
        }
        Ok(Self {
            nmax,
            geometry,
            medium,
            k,
            omega,
            u_norm,
            v_norm,
            sigma,
        })
    }

    pub fn mode_count(&self) -> usize {
        mode_count(self.nmax)
    }

    fn check_field_point(&self, p: &Vec3) -> Result<Spherical> {
        let sp = Spherical::from_cartesian(p);
        if !(sp.r > self.geometry.r_t) {
            return Err(Error::ExpansionValidity {
                radius: sp.r,
                source_radius: self.geometry.r_t,
            });
        }
        Ok(sp)
    }

    /// σ_p·u_p(r) for the first `count` modes, local spherical components.
    pub fn scaled_modes(&self, point: &Vec3, count: usize) -> Result<(Spherical, Vec<[Complex64; 3]>)> {
        if count > self.mode_count() {
            return Err(Error::Config(format!(
                "requested {count} modes but the operator holds {}",
                self.mode_count()
            )));
        }
        let sp = self.check_field_point(point)?;
        let n_needed = if count == 0 {
            1
        } else {
            SphIndex::unflatten(count)?.n as usize
        };
        let mut modes = eval_modes(Radial::Outgoing, n_needed, self.k, &sp)?;
        modes.truncate(count);
        for (i, v) in modes.iter_mut().enumerate() {
            let s = self.sigma[i] / self.u_norm[i];
            for c in v.iter_mut() {
                *c *= s;
            }
        }
        Ok((sp, modes))
    }

    /// Normalised field mode u_p = U_p/‖U_p‖_{V_r}.
    pub fn u(&self, idx: SphIndex, point: &Vec3) -> Result<ComplexVec3> {
        let sp = Spherical::from_cartesian(point);
        Ok(eval_U(idx, &sp, self.k)?.scale(1.0 / self.u_norm[idx.offset()]))
    }

    /// Normalised current mode v_p = V_p/‖V_p‖_{V_t}.
    pub fn v(&self, idx: SphIndex, point: &Vec3) -> ComplexVec3 {
        let sp = Spherical::from_cartesian(point);
        eval_V(idx, &sp, self.k).scale(1.0 / self.v_norm[idx.offset()])
    }

    /// E(r) = Σ σ_p j_p u_p(r) over the supplied coefficients.
    pub fn radiate(&self, j: &[Complex64], point: &Vec3) -> Result<ComplexVec3> {
        let (sp, modes) = self.scaled_modes(point, j.len())?;
        let mut c = [ZERO; 3];
        for (jp, m) in j.iter().zip(modes.iter()) {
            for a in 0..3 {
                c[a] += jp * m[a];
            }
        }
        Ok(ComplexVec3::spherical(c, sp.theta, sp.phi))
    }

    /// Ball quadrature on V_t used to sample currents for [`Self::expand_current`].
    pub fn current_grid(&self) -> CurrentGrid {
        let n_r = (self.k * self.geometry.r_t).ceil() as usize + self.nmax / 2 + 16;
        CurrentGrid::new(self.geometry.r_t, n_r, self.nmax)
    }

    /// Regularly normalised current modes v_p at every grid node.
    pub fn current_modes_on(&self, grid: &CurrentGrid, count: usize) -> Vec<Vec<[Complex64; 3]>> {
        grid.spherical
            .par_iter()
            .map(|sp| {
                let mut v = eval_modes(Radial::Regular, self.nmax, self.k, sp).expect("regular modes");
                v.truncate(count);
                for (i, m) in v.iter_mut().enumerate() {
                    let s = 1.0 / self.v_norm[i];
                    for c in m.iter_mut() {
                        *c *= s;
                    }
                }
                v
            })
            .collect()
    }

    /// j_p = ∫ J·v_p* over V_t for a current sampled on `grid`.
    pub fn expand_current(&self, grid: &CurrentGrid, current: &[ComplexVec3]) -> Result<Vec<Complex64>> {
        if current.len() != grid.len() {
            return Err(Error::precondition(
                MODULE,
                format!("current has {} samples, grid has {}", current.len(), grid.len()),
            ));
        }
        let count = self.mode_count();
        let parts = grid
            .spherical
            .par_iter()
            .zip(grid.weights.par_iter())
            .zip(current.par_iter())
            .fold(
                || vec![ZERO; count],
                |mut acc, ((sp, &w), cur)| {
                    let modes = eval_modes(Radial::Regular, self.nmax, self.k, sp).expect("regular modes");
                    let local = cur.to_spherical(sp.theta, sp.phi).c;
                    for (a, m) in acc.iter_mut().zip(modes.iter()) {
                        *a += (local[0] * m[0].conj() + local[1] * m[1].conj() + local[2] * m[2].conj()) * w;
                    }
                    acc
                },
            )
            .collect::<Vec<_>>();
        let mut j = vec![ZERO; count];
        for part in parts {
            for (a, b) in j.iter_mut().zip(part) {
                *a += b;
            }
        }
        for (a, n) in j.iter_mut().zip(self.v_norm.iter()) {
            *a /= *n;
        }
        Ok(j)
    }
}

/// ik Σ_{n ≤ nmax} U_p(r) V_p*(r')ᵀ / (n(n+1)) in Cartesian components;
/// valid for |r'| < |r|.
pub fn green_expansion(r_field: &Vec3, r_source: &Vec3, k: f64, nmax: usize) -> Result<nalgebra::Matrix3<Complex64>> {
    let f = Spherical::from_cartesian(r_field);
    let s = Spherical::from_cartesian(r_source);
    if !(s.r < f.r) {
        return Err(Error::ExpansionValidity {
            radius: f.r,
            source_radius: s.r,
        });
    }
    let u = eval_modes(Radial::Outgoing, nmax, k, &f)?;
    let v = eval_modes(Radial::Regular, nmax, k, &s)?;
    let ef = f.unit_vectors();
    let es = s.unit_vectors();
    let to_cart = |c: &[Complex64; 3], e: &[Vec3; 3]| -> [Complex64; 3] {
        let mut out = [ZERO; 3];
        for (a, o) in out.iter_mut().enumerate() {
            *o = c[0] * e[0][a] + c[1] * e[1][a] + c[2] * e[2][a];
        }
        out
    };
    let mut g = nalgebra::Matrix3::<Complex64>::zeros();
    for (i, (um, vm)) in u.iter().zip(v.iter()).enumerate() {
        let n = (SphIndex::unflatten(i + 1)?.n) as f64;
        let uc = to_cart(um, &ef);
        let vc = to_cart(vm, &es);
        let w = 1.0 / (n * (n + 1.0));
        for a in 0..3 {
            for b in 0..3 {
                g[(a, b)] += uc[a] * vc[b].conj() * w;
            }
        }
    }
    Ok(g * Complex64::new(0.0, k))
}

/// Quadrature nodes over the transmit ball.
#[derive(Debug, Clone)]
pub struct CurrentGrid {
    pub points: Vec<Vec3>,
    pub spherical: Vec<Spherical>,
    pub weights: Vec<f64>,
}

impl CurrentGrid {
    pub fn new(radius: f64, n_radial: usize, band: usize) -> Self {
        let q = BallQuadrature::new(radius, n_radial, SphereQuadrature::for_band(band));
        let mut points = Vec::with_capacity(q.len());
        let mut spherical = Vec::with_capacity(q.len());
        let mut weights = Vec::with_capacity(q.len());
        for (r, t, p, w) in q.nodes() {
            let sp = Spherical::new(r, t, p);
            points.push(sp.to_cartesian());
            spherical.push(sp);
            weights.push(w);
        }
        Self {
            points,
            spherical,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
