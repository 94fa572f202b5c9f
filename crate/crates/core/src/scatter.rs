//! Point-matching method of moments for perfectly conducting spheres.
//!
//! The surface current of scatterer q is Σ_d j_qd B_d with B_d a regular
//! spherical wave function in the scatterer's local frame. Because the
//! regular waves are orthogonal over a sphere, the field radiated by B_d has
//! the closed form
//!
//! ```text
//! E_d(r) = iωμ ∫_S Ḡ(r, r') B_d(r') dS' = −ωμk · (∫_S |B_d|² dS)/(n(n+1)) · U_d(r − c)
//! ```
//!
//! for |r − c| ≥ a. The tangential boundary condition n̂ × (E_inc + E_s) = 0
//! is enforced at Fibonacci points on each sphere and the overdetermined
//! system is solved in the least-squares sense through an SVD of the
//! column-equilibrated matrix.

use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Spherical, Vec3};
use crate::quadrature::fibonacci_sphere;
use crate::swf::{eval_modes, mode_count, Medium, Radial, SphIndex};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MODULE: &str = "scatter";
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const HOLDOUT_ROTATION: f64 = 0.61;

/// A perfectly conducting sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub id: u64,
    pub center: Vec3,
    pub radius: f64,
    pub alive: bool,
}

impl Scatterer {
    pub fn new(id: u64, center: Vec3, radius: f64) -> Self {
        Self {
            id,
            center,
            radius,
            alive: true,
        }
    }

    pub fn intersects(&self, center: &Vec3, radius: f64) -> bool {
        (self.center - center).norm() <= self.radius + radius
    }
}

/// Which regular waves form the surface-current basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisSet {
    /// B_d = V_d: TE and TM waves in flattened order.
    TeTm,
    /// B_d = V_{2d−1}: TE waves only.
    TeOnly,
}

/// Mode used for basis function d (1-based).
pub fn basis_mode(basis: BasisSet, d: usize) -> Result<SphIndex> {
    if d == 0 {
        return Err(Error::domain(MODULE, "basis index d starts at 1"));
    }
    match basis {
        BasisSet::TeTm => SphIndex::unflatten(d),
        BasisSet::TeOnly => SphIndex::unflatten(2 * d - 1),
    }
}

fn basis_modes(basis: BasisSet, count: usize) -> Result<(Vec<usize>, usize)> {
    let mut offsets = Vec::with_capacity(count);
    let mut nmax = 1;
    for d in 1..=count {
        let idx = basis_mode(basis, d)?;
        nmax = nmax.max(idx.n as usize);
        offsets.push(idx.offset());
    }
    Ok((offsets, nmax))
}

/// MoM discretisation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomConfig {
    pub basis_count: usize,
    pub match_points: usize,
    pub basis: BasisSet,
    pub condition_limit: f64,
}

impl Default for MomConfig {
    fn default() -> Self {
        Self {
            basis_count: 16,
            match_points: 64,
            basis: BasisSet::TeTm,
            condition_limit: 1e12,
        }
    }
}

/// −ωμk ∫_S|V_p|²dS/(n(n+1)) for every mode up to nmax at sphere radius a.
fn basis_weights(nmax: usize, medium: &Medium, a: f64) -> Vec<Complex64> {
    let k = medium.k();
    let x = k * a;
    let j = crate::specfun::spherical_j_array(nmax + 1, x).expect("finite radius");
    let mut out = vec![ZERO; mode_count(nmax)];
    for (i, o) in out.iter_mut().enumerate() {
        let idx = SphIndex::unflatten(i + 1).expect("valid index");
        let n = idx.n as usize;
        let nn1 = (n * (n + 1)) as f64;
        let surf = if idx.is_te() {
            nn1 * j[n] * j[n]
        } else {
            let zx = j[n] / x;
            let dz = j[n - 1] - n as f64 * j[n] / x;
            nn1 * (nn1 * zx * zx + dz * dz)
        };
        *o = Complex64::from(-medium.omega() * medium.mu * k * a * a * surf / nn1);
    }
    out
}

/// Fields of all basis functions of one scatterer at `r` (Cartesian), the
/// point being on or outside the sphere.
fn basis_fields_at(
    s: &Scatterer,
    offsets: &[usize],
    nmax: usize,
    weights: &[Complex64],
    k: f64,
    r: &Vec3,
) -> Result<Vec<ComplexVec3>> {
    let local = Spherical::from_cartesian(&(r - s.center));
    if local.r < s.radius * (1.0 - 1e-12) {
        return Err(Error::domain(MODULE, "field point inside a scatterer"));
    }
    let modes = eval_modes(Radial::Outgoing, nmax, k, &local)?;
    Ok(offsets
        .iter()
        .map(|&o| {
            let c = modes[o];
            let w = weights[o];
            ComplexVec3::spherical([c[0] * w, c[1] * w, c[2] * w], local.theta, local.phi).to_cartesian()
        })
        .collect())
}

/// Field radiated by basis function d of scatterer q; the point must lie
/// strictly outside the sphere.
pub fn basis_field(q: &Scatterer, d: usize, basis: BasisSet, r_field: &Vec3, medium: &Medium) -> Result<ComplexVec3> {
    if (r_field - q.center).norm() <= q.radius {
        return Err(Error::domain(MODULE, "field point on or inside the scatterer"));
    }
    let idx = basis_mode(basis, d)?;
    let nmax = idx.n as usize;
    let w = basis_weights(nmax, medium, q.radius);
    Ok(basis_fields_at(q, &[idx.offset()], nmax, &w, medium.k(), r_field)?[0])
}

/// Tangent pair (θ̂, φ̂) of the local sphere at unit direction `n`.
fn tangents(n: &Vec3) -> [Vec3; 2] {
    let sp = Spherical::from_cartesian(n);
    let e = sp.unit_vectors();
    [e[1], e[2]]
}

/// Induced-current coefficients with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceCurrentSolution {
    /// j_{qd}, scatterer-major.
    pub coefficients: Vec<Complex64>,
    pub basis_count: usize,
    pub scatterer_ids: Vec<u64>,
    /// max |n̂ × E_total| / max |n̂ × E_inc| over held-out points.
    pub residual: f64,
    /// max |n̂ × E_inc| over held-out points.
    pub incident_scale: f64,
    /// RMS |n̂ × E_total| / RMS |n̂ × E_inc| over held-out points.
    pub residual_rms: f64,
    pub condition: f64,
}

/// Held-out boundary-condition residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// max |n̂ × E_total| / max |n̂ × E_inc|.
    pub relative: f64,
    pub incident_max: f64,
    /// RMS |n̂ × E_total| / RMS |n̂ × E_inc|.
    pub relative_rms: f64,
}

/// Assembled and factorised point-matching system for a fixed scatterer set.
#[derive(Debug, Clone)]
pub struct MomSystem {
    scatterers: Vec<Scatterer>,
    medium: Medium,
    config: MomConfig,
    offsets: Vec<usize>,
    nmax: usize,
    weights: Vec<Vec<Complex64>>,
    match_points: Vec<Vec3>,
    match_tangents: Vec<[Vec3; 2]>,
    holdout_points: Vec<Vec3>,
    holdout_tangents: Vec<[Vec3; 2]>,
    u: DMatrix<Complex64>,
    inv_s: DVector<f64>,
    v: DMatrix<Complex64>,
    col_scale: DVector<f64>,
    condition: f64,
}

impl MomSystem {
    /// Builds and factorises the system for the alive scatterers.
    pub fn assemble(scatterers: &[Scatterer], medium: &Medium, config: MomConfig) -> Result<Self> {
        let alive: Vec<Scatterer> = scatterers.iter().copied().filter(|s| s.alive).collect();
        if config.basis_count == 0 {
            return Err(Error::precondition(MODULE, "basis count must be ≥ 1"));
        }
        if 2 * config.match_points < config.basis_count {
            return Err(Error::precondition(
                MODULE,
                format!(
                    "the sample points N_s on each scatterer need to be large enough: 2·N_s = {} < D = {}",
                    2 * config.match_points,
                    config.basis_count
                ),
            ));
        }
        for (i, a) in alive.iter().enumerate() {
            if !(a.radius > 0.0) {
                return Err(Error::domain(
                    MODULE,
                    format!("scatterer {} has non-positive radius", a.id),
                ));
            }
            for b in &alive[i + 1..] {
                if a.intersects(&b.center, b.radius) {
                    return Err(Error::precondition(
                        MODULE,
                        format!("scatterers {} and {} intersect", a.id, b.id),
                    ));
                }
            }
        }
        let (offsets, nmax) = basis_modes(config.basis, config.basis_count)?;
        let weights: Vec<Vec<Complex64>> = alive.iter().map(|s| basis_weights(nmax, medium, s.radius)).collect();
        let unit_match = fibonacci_sphere(config.match_points, 0.0);
        let unit_hold = fibonacci_sphere(config.match_points, HOLDOUT_ROTATION);
        let mut match_points = Vec::new();
        let mut match_tangents = Vec::new();
        let mut holdout_points = Vec::new();
        let mut holdout_tangents = Vec::new();
        for s in &alive {
            for u in &unit_match {
                match_points.push(s.center + u * s.radius);
                match_tangents.push(tangents(u));
            }
            for u in &unit_hold {
                holdout_points.push(s.center + u * s.radius);
                holdout_tangents.push(tangents(u));
            }
        }
        let k = medium.k();
        let dcount = config.basis_count;
        let rows = 2 * match_points.len();
        let cols = alive.len() * dcount;
        let mut a = DMatrix::<Complex64>::zeros(rows, cols);
        // each match point row-pair is independent; assemble in parallel
        let blocks: Vec<Vec<Complex64>> = match_points
            .par_iter()
            .zip(match_tangents.par_iter())
            .map(|(p, t)| -> Result<Vec<Complex64>> {
                let mut row = vec![ZERO; 2 * cols];
                for (q, s) in alive.iter().enumerate() {
                    let fields = basis_fields_at(s, &offsets, nmax, &weights[q], k, p)?;
                    for (d, f) in fields.iter().enumerate() {
                        row[q * dcount + d] = f.dot_real(&t[0]);
                        row[cols + q * dcount + d] = f.dot_real(&t[1]);
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, row) in blocks.iter().enumerate() {
            for c in 0..cols {
                a[(2 * i, c)] = row[c];
                a[(2 * i + 1, c)] = row[cols + c];
            }
        }
        let mut col_scale = DVector::<f64>::from_element(cols, 1.0);
        for c in 0..cols {
            let nrm = a.column(c).norm();
            if nrm > 0.0 {
                col_scale[c] = 1.0 / nrm;
                a.column_mut(c).scale_mut(1.0 / nrm);
            }
        }
        let (u, s, v, condition) = if cols == 0 {
            (DMatrix::zeros(rows, 0), DVector::zeros(0), DMatrix::zeros(0, 0), 1.0)
        } else {
            let svd = a.svd(true, true);
            let s = svd.singular_values.clone();
            let smax = s.max();
            let smin = s.min();
            let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !(condition <= config.condition_limit) {
                return Err(Error::IllConditioned {
                    condition,
                    msg: format!(
                        "{} scatterers, D = {}, N_s = {}: basis fields are nearly dependent at the match points",
                        alive.len(),
                        config.basis_count,
                        config.match_points
                    ),
                });
            }
            let u = svd.u.expect("requested U");
            let v = svd.v_t.expect("requested Vᵀ").adjoint();
            (u, s, v, condition)
        };
        let inv_s = s.map(|x| 1.0 / x);
        Ok(Self {
            scatterers: alive,
            medium: *medium,
            config,
            offsets,
            nmax,
            weights,
            match_points,
            match_tangents,
            holdout_points,
            holdout_tangents,
            u,
            inv_s,
            v,
            col_scale,
            condition,
        })
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn match_points(&self) -> &[Vec3] {
        &self.match_points
    }

    pub fn holdout_points(&self) -> &[Vec3] {
        &self.holdout_points
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn config(&self) -> &MomConfig {
        &self.config
    }

    fn rhs(&self, incident: &[ComplexVec3]) -> DVector<Complex64> {
        let mut b = DVector::<Complex64>::zeros(2 * incident.len());
        for (i, (e, t)) in incident.iter().zip(self.match_tangents.iter()).enumerate() {
            b[2 * i] = -e.dot_real(&t[0]);
            b[2 * i + 1] = -e.dot_real(&t[1]);
        }
        b
    }

    /// Least-squares coefficients for incident field samples at the match
    /// points (in [`Self::match_points`] order).
    pub fn solve_samples(&self, incident: &[ComplexVec3]) -> Result<Vec<Complex64>> {
        if incident.len() != self.match_points.len() {
            return Err(Error::precondition(
                MODULE,
                format!(
                    "{} incident samples for {} match points",
                    incident.len(),
                    self.match_points.len()
                ),
            ));
        }
        if self.scatterers.is_empty() {
            return Ok(Vec::new());
        }
        let b = self.rhs(incident);
        let mut y = self.u.adjoint() * b;
        for (yi, s) in y.iter_mut().zip(self.inv_s.iter()) {
            *yi *= *s;
        }
        let x = &self.v * y;
        Ok(x.iter().zip(self.col_scale.iter()).map(|(a, s)| a * *s).collect())
    }

    /// Scattered field Σ_q Σ_d j_qd E_qd(r) at a point outside every sphere.
    pub fn scattered_field(&self, coefficients: &[Complex64], r: &Vec3) -> Result<ComplexVec3> {
        self.field_inner(coefficients, r, false)
    }

    fn field_inner(&self, coefficients: &[Complex64], r: &Vec3, on_surface: bool) -> Result<ComplexVec3> {
        let mut acc = ComplexVec3::zero();
        let dcount = self.config.basis_count;
        for (q, s) in self.scatterers.iter().enumerate() {
            if !on_surface && (r - s.center).norm() <= s.radius {
                return Err(Error::domain(
                    MODULE,
                    format!("field point on or inside scatterer {}", s.id),
                ));
            }
            let coef = &coefficients[q * dcount..(q + 1) * dcount];
            if coef.iter().all(|c| *c == ZERO) {
                continue;
            }
            let fields = basis_fields_at(s, &self.offsets, self.nmax, &self.weights[q], self.medium.k(), r)?;
            for (f, c) in fields.iter().zip(coef) {
                acc += *f * *c;
            }
        }
        Ok(acc)
    }

    /// Solves for an incident-field evaluator and reports the held-out
    /// tangential residual.
    pub fn solve<F>(&self, incident: F) -> Result<SurfaceCurrentSolution>
    where
        F: Fn(&Vec3) -> Result<ComplexVec3> + Sync,
    {
        let inc_match = self
            .match_points
            .par_iter()
            .map(&incident)
            .collect::<Result<Vec<_>>>()?;
        let inc_hold = self
            .holdout_points
            .par_iter()
            .map(&incident)
            .collect::<Result<Vec<_>>>()?;
        let coefficients = self.solve_samples(&inc_match)?;
        let r = self.holdout_residual(&coefficients, &inc_hold)?;
        Ok(SurfaceCurrentSolution {
            coefficients,
            basis_count: self.config.basis_count,
            scatterer_ids: self.scatterers.iter().map(|s| s.id).collect(),
            residual: r.relative,
            incident_scale: r.incident_max,
            residual_rms: r.relative_rms,
            condition: self.condition,
        })
    }

    /// Tangential residual at the held-out points for incident samples
    /// given there.
    pub fn holdout_residual(&self, coefficients: &[Complex64], incident: &[ComplexVec3]) -> Result<Residual> {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        let mut ss_tot = 0.0f64;
        let mut ss_inc = 0.0f64;
        for ((p, t), e) in self.holdout_points.iter().zip(&self.holdout_tangents).zip(incident) {
            let es = self.field_inner(coefficients, p, true)?;
            let tot = *e + es;
            let tan = |v: &ComplexVec3| (v.dot_real(&t[0]).norm_sqr() + v.dot_real(&t[1]).norm_sqr()).sqrt();
            let (a, b) = (tan(&tot), tan(e));
            worst = worst.max(a);
            scale = scale.max(b);
            ss_tot += a * a;
            ss_inc += b * b;
        }
        Ok(Residual {
            relative: if scale > 0.0 { worst / scale } else { 0.0 },
            incident_max: scale,
            relative_rms: if ss_inc > 0.0 { (ss_tot / ss_inc).sqrt() } else { 0.0 },
        })
    }
}

/// One-shot solve: assemble, factorise and solve for `incident`.
pub fn solve_induced_currents<F>(
    scatterers: &[Scatterer],
    medium: &Medium,
    incident: F,
    config: MomConfig,
) -> Result<(MomSystem, SurfaceCurrentSolution)>
where
    F: Fn(&Vec3) -> Result<ComplexVec3> + Sync,
{
    let system = MomSystem::assemble(scatterers, medium, config)?;
    let sol = system.solve(incident)?;
    Ok((system, sol))
}
