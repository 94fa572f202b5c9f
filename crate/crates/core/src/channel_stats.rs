//! Discretised channel responses, temporal ACF, spatial CCF and radiation
//! patterns.
//!
//! The Tx ball is sampled on a cubic lattice. Each cell contributes
//! δ_t · Π sinc(k Δx_i δ_i / 2r) · Ḡ(r, r'_n) J(r'_n) to the field at r, the
//! sinc factors being the closed-form average of the phase over the cell.
//! Scattering adds the MoM field of the scatterers excited by that same
//! discretised source.

use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Spherical, Vec3};
use crate::green::{dyadic_green, part_coefficients, Dyad, Part};
use crate::scatter::{MomConfig, MomSystem, Scatterer};
use crate::stochastic_env::{draw_scene, evolve, EnvParams, Step};
use crate::swf::{Geometry, Medium, RadiationOperator};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MODULE: &str = "channel_stats";
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// sin x / x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Cubic-lattice points (one at the centre) inside a ball.
pub fn cubic_ball_points(center: &Vec3, radius: f64, spacing: f64) -> Result<Vec<Vec3>> {
    if !(spacing > 0.0 && radius > 0.0) {
        return Err(Error::domain(MODULE, "grid spacing and radius must be positive"));
    }
    let n = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for l in -n..=n {
                let d = Vec3::new(i as f64, j as f64, l as f64) * spacing;
                if d.norm() <= radius * (1.0 + 1e-12) {
                    out.push(center + d);
                }
            }
        }
    }
    Ok(out)
}

/// Tx and Rx sample points with their cell sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub tx_points: Vec<Vec3>,
    pub tx_cell: [f64; 3],
    pub rx_points: Vec<Vec3>,
    pub rx_cell: [f64; 3],
}

impl SampleGrid {
    /// Lattices of the given spacings over both balls.
    pub fn lattice(geometry: &Geometry, tx_spacing: f64, rx_spacing: f64) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            tx_points: cubic_ball_points(&Vec3::zeros(), geometry.r_t, tx_spacing)?,
            tx_cell: [tx_spacing; 3],
            rx_points: cubic_ball_points(&geometry.rx_center(), geometry.r_r, rx_spacing)?,
            rx_cell: [rx_spacing; 3],
        })
    }

    pub fn tx_volume(&self) -> f64 {
        self.tx_cell.iter().product()
    }

    pub fn rx_volume(&self) -> f64 {
        self.rx_cell.iter().product()
    }
}

fn sinc_product(d: &Vec3, r: f64, k: f64, cell: &[f64; 3]) -> f64 {
    (0..3).map(|i| sinc(k * d[i] * cell[i] / (2.0 * r))).product()
}

/// H_mn = δ_t δ_r Π sinc(k Δx_i δ_t^i / 2r_mn) Ḡ(r_m, r'_n).
pub fn channel_entry(r_m: &Vec3, r_n: &Vec3, tx_cell: &[f64; 3], rx_volume: f64, k: f64, model: Part) -> Result<Dyad> {
    if !matches!(model, Part::Full | Part::Far) {
        return Err(Error::domain(
            MODULE,
            "channel entries use the full or far-field kernel",
        ));
    }
    let g = dyadic_green(r_m, r_n, k, model)?;
    let d = r_m - r_n;
    let scale = tx_cell.iter().product::<f64>() * rx_volume * sinc_product(&d, d.norm(), k, tx_cell);
    Ok(Dyad(g.0 * Complex64::from(scale)))
}

/// Current sampled on the Tx lattice (Cartesian components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxCurrent {
    pub points: Vec<Vec3>,
    pub cell: [f64; 3],
    pub values: Vec<[Complex64; 3]>,
}

impl TxCurrent {
    /// J = ẑ everywhere.
    pub fn uniform_z(points: Vec<Vec3>, cell: [f64; 3]) -> Self {
        let values = vec![[ZERO, ZERO, Complex64::from(1.0)]; points.len()];
        Self { points, cell, values }
    }

    /// J = Σ j_p v_p sampled at the lattice points.
    pub fn from_modes(op: &RadiationOperator, j: &[Complex64], points: Vec<Vec3>, cell: [f64; 3]) -> Result<Self> {
        if j.len() > op.mode_count() {
            return Err(Error::Config(format!(
                "{} coefficients for {} modes",
                j.len(),
                op.mode_count()
            )));
        }
        let values = points
            .iter()
            .map(|p| {
                let mut acc = ComplexVec3::zero();
                for (q, jq) in j.iter().enumerate() {
                    if *jq != ZERO {
                        let idx = crate::swf::SphIndex::unflatten(q + 1)?;
                        acc += op.v(idx, p).to_cartesian() * *jq;
                    }
                }
                Ok(acc.to_cartesian().c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, cell, values })
    }

    /// Independent circular complex Gaussian components of unit variance.
    pub fn random_white<R: rand::Rng + ?Sized>(points: Vec<Vec3>, cell: [f64; 3], rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let values = points
            .iter()
            .map(|_| {
                let mut c = [ZERO; 3];
                for v in c.iter_mut() {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    *v = Complex64::new(re * s, im * s);
                }
                c
            })
            .collect();
        Self { points, cell, values }
    }

    pub fn volume(&self) -> f64 {
        self.cell.iter().product()
    }

    /// E(r) = iωμ Σ_n δ_t Π sinc · Ḡ(r, r'_n) J_n.
    pub fn field_at(&self, r: &Vec3, medium: &Medium, model: Part) -> Result<ComplexVec3> {
        let k = medium.k();
        let mut acc = [ZERO; 3];
        for (p, j) in self.points.iter().zip(&self.values) {
            let d = r - p;
            let dist = d.norm();
            if dist == 0.0 {
                return Err(Error::singular(MODULE, "field point coincides with a Tx sample point"));
            }
            let u = d / dist;
            let g = Complex64::from_polar(sinc_product(&d, dist, k, &self.cell) / (4.0 * PI * dist), k * dist);
            let (a, b) = part_coefficients(model, k * dist);
            let uj = j[0] * u[0] + j[1] * u[1] + j[2] * u[2];
            for i in 0..3 {
                acc[i] += (a * j[i] + b * uj * u[i]) * g;
            }
        }
        let c = Complex64::new(0.0, medium.omega() * medium.mu * self.volume());
        Ok(ComplexVec3::cartesian([acc[0] * c, acc[1] * c, acc[2] * c]))
    }
}

/// Total field (direct plus MoM-scattered) at `points`. Points inside a
/// conducting sphere carry zero field.
pub fn received_fields(
    current: &TxCurrent,
    scatterers: &[Scatterer],
    points: &[Vec3],
    medium: &Medium,
    mom: &MomConfig,
    model: Part,
) -> Result<Vec<ComplexVec3>> {
    let mut cache = None;
    fields_cached(current, scatterers, points, medium, mom, model, &mut cache)
}

/// Assembled MoM system for a set of live scatterers.
type SystemCache = Option<(Vec<Scatterer>, MomSystem)>;

/// `received_fields`, reusing the assembled system while the live set of
/// scatterers is unchanged.
fn fields_cached(
    current: &TxCurrent,
    scatterers: &[Scatterer],
    points: &[Vec3],
    medium: &Medium,
    mom: &MomConfig,
    model: Part,
    cache: &mut SystemCache,
) -> Result<Vec<ComplexVec3>> {
    let alive: Vec<Scatterer> = scatterers.iter().copied().filter(|s| s.alive).collect();
    let inside = |p: &Vec3| alive.iter().any(|s| (p - s.center).norm() <= s.radius);
    let mut out = points
        .iter()
        .map(|p| {
            if inside(p) {
                Ok(ComplexVec3::zero())
            } else {
                current.field_at(p, medium, model)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if alive.is_empty() {
        return Ok(out);
    }
    if cache.as_ref().is_none_or(|(set, _)| *set != alive) {
        *cache = Some((alive.clone(), MomSystem::assemble(&alive, medium, *mom)?));
    }
    let system = &cache.as_ref().expect("cache filled above").1;
    let inc = system
        .match_points()
        .iter()
        .map(|p| current.field_at(p, medium, model))
        .collect::<Result<Vec<_>>>()?;
    let x = system.solve_samples(&inc)?;
    for (o, p) in out.iter_mut().zip(points) {
        if !inside(p) {
            *o += system.scattered_field(&x, p)?;
        }
    }
    Ok(out)
}

/// Normalised correlation with jackknife standard error of its magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// Lags (s) or offsets (m).
    pub lags: Vec<f64>,
    pub value: Vec<Complex64>,
    pub magnitude: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ensemble_size: usize,
}

/// Per-realization terms of one correlation at each sample point m and lag
/// l: the cross product h_0ᴴh_l and the powers |h_0|² and |h_l|².
#[derive(Debug, Clone)]
struct PointSums {
    cross: Vec<Vec<Complex64>>,
    ref_power: Vec<f64>,
    lag_power: Vec<Vec<f64>>,
}

impl PointSums {
    fn zeros(points: usize, lags: usize) -> Self {
        Self {
            cross: vec![vec![ZERO; lags]; points],
            ref_power: vec![0.0; points],
            lag_power: vec![vec![0.0; lags]; points],
        }
    }

    /// Reference powers, with lags to be pushed per point.
    fn start(ref_power: Vec<f64>, lags: usize) -> Self {
        let points = ref_power.len();
        Self {
            cross: vec![Vec::with_capacity(lags); points],
            ref_power,
            lag_power: vec![Vec::with_capacity(lags); points],
        }
    }

    fn push(&mut self, m: usize, h0: &ComplexVec3, h: &ComplexVec3) {
        self.cross[m].push(h.dot_conj(h0));
        self.lag_power[m].push(h.norm_sqr());
    }

    fn add(&mut self, other: &Self, sign: f64) {
        for m in 0..self.ref_power.len() {
            self.ref_power[m] += sign * other.ref_power[m];
            for l in 0..self.cross[m].len() {
                self.cross[m][l] += other.cross[m][l] * sign;
                self.lag_power[m][l] += sign * other.lag_power[m][l];
            }
        }
    }

    /// Σh_0ᴴh_l / √(Σ|h_0|² Σ|h_l|²), which is 1 at zero lag and bounded by
    /// 1 (Cauchy–Schwarz).
    fn coefficient(&self, m: usize, l: usize) -> Complex64 {
        let d = (self.ref_power[m] * self.lag_power[m][l]).sqrt();
        if d > 0.0 {
            self.cross[m][l] / d
        } else {
            ZERO
        }
    }
}

/// Correlation coefficient per point, averaged over points (`value`, and
/// `magnitude` as the mean of per-point magnitudes), with a
/// leave-one-realization-out jackknife SE of `magnitude`.
fn assemble_estimate(lags: &[f64], per_real: &[PointSums]) -> CorrelationEstimate {
    let n = per_real.len();
    let points = per_real.first().map_or(0, |r| r.ref_power.len());
    let mut total = PointSums::zeros(points, lags.len());
    for r in per_real {
        total.add(r, 1.0);
    }
    let mean_magnitude =
        |sums: &PointSums, l: usize| (0..points).map(|m| sums.coefficient(m, l).norm()).sum::<f64>() / points as f64;
    let value = (0..lags.len())
        .map(|l| (0..points).map(|m| total.coefficient(m, l)).sum::<Complex64>() / points as f64)
        .collect();
    let magnitude = (0..lags.len()).map(|l| mean_magnitude(&total, l)).collect();
    let mut loo = vec![Vec::with_capacity(n); lags.len()];
    if n >= 2 {
        for r in per_real {
            let mut rest = total.clone();
            rest.add(r, -1.0);
            for (l, v) in loo.iter_mut().enumerate() {
                v.push(mean_magnitude(&rest, l));
            }
        }
    }
    let stderr = loo
        .iter()
        .map(|v| {
            if v.len() < 2 {
                return 0.0;
            }
            let mean = v.iter().sum::<f64>() / n as f64;
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64).sqrt()
        })
        .collect();
    CorrelationEstimate {
        lags: lags.to_vec(),
        value,
        magnitude,
        stderr,
        ensemble_size: n,
    }
}

/// Everything a correlation run needs besides the current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSetup {
    pub medium: Medium,
    pub geometry: Geometry,
    pub env: EnvParams,
    pub mom: MomConfig,
    /// Rx sample points at t = 0.
    pub rx_points: Vec<Vec3>,
    /// Rx translation velocity (m/s).
    pub velocity: Vec3,
    pub with_scattering: bool,
    pub model: Part,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// R_m(Δt) = 𝔼{h_m(t)ᴴ h_m(t+Δt)} / √(𝔼{|h_m(t)|²} 𝔼{|h_m(t+Δt)|²}) per Rx point over
/// environment realizations at reference time `t_ref`. `magnitude` is the
/// mean of |R_m| over points and `value` the mean of R_m.
pub fn temporal_acf(
    setup: &StatsSetup,
    current: &TxCurrent,
    t_ref: f64,
    lags: &[f64],
    ensemble_size: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    if ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be ≥ 1".into()));
    }
    if lags.iter().any(|l| !(*l >= 0.0)) || lags.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("lags must be non-negative and ascending".into()));
    }
    if !(t_ref >= 0.0) {
        return Err(Error::Config("reference time must be non-negative".into()));
    }
    let run = |index: usize| -> Result<PointSums> {
        let mut rng = stream(seed, index);
        let mut scene = if setup.with_scattering {
            draw_scene(&setup.env, &setup.geometry, setup.rx_points.clone(), &mut rng)?
        } else {
            crate::stochastic_env::Scene::empty(setup.geometry, setup.rx_points.clone(), setup.env)
        };
        let mut now = 0.0;
        let mut advance = |scene: &mut crate::stochastic_env::Scene, to: f64, rng: &mut ChaCha8Rng| -> Result<()> {
            scene.rx_offset = setup.velocity * to;
            if setup.with_scattering && to > now {
                *scene = evolve(scene, Step::time(to - now), rng)?.0;
            }
            scene.time = to;
            now = to;
            Ok(())
        };
        advance(&mut scene, t_ref, &mut rng)?;
        let mut cache = None;
        let mut fields = |scene: &crate::stochastic_env::Scene| {
            fields_cached(
                current,
                &scene.scatterers,
                &scene.user_positions(),
                &setup.medium,
                &setup.mom,
                setup.model,
                &mut cache,
            )
        };
        let h0 = fields(&scene)?;
        let mut sums = PointSums::start(h0.iter().map(|h| h.norm_sqr()).collect(), lags.len());
        for &lag in lags {
            advance(&mut scene, t_ref + lag, &mut rng)?;
            let h = if lag == 0.0 { h0.clone() } else { fields(&scene)? };
            for (m, (x, y)) in h0.iter().zip(&h).enumerate() {
                sums.push(m, x, y);
            }
        }
        Ok(sums)
    };
    let per_real = (0..ensemble_size)
        .into_par_iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_estimate(lags, &per_real))
}

fn check_offsets(setup: &StatsSetup, reference: &Vec3, offsets: &[Vec3]) -> Result<Vec<Vec3>> {
    let pts: Vec<Vec3> = offsets.iter().map(|o| reference + o).collect();
    if let Some(p) = pts
        .iter()
        .chain(std::iter::once(reference))
        .find(|p| !setup.geometry.in_rx(p))
    {
        return Err(Error::domain(
            MODULE,
            format!("offset point {:?} leaves the Rx ball", p.as_slice()),
        ));
    }
    Ok(pts)
}

/// ρ(Δr) = 𝔼{h(r)ᴴ h(r+Δr)} / √(𝔼{|h(r)|²} 𝔼{|h(r+Δr)|²}) for a spatially
/// white random current on the Tx lattice, with scattering per `setup`.
pub fn spatial_ccf(
    setup: &StatsSetup,
    tx_points: &[Vec3],
    tx_cell: [f64; 3],
    reference: &Vec3,
    offsets: &[Vec3],
    ensemble_size: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    if ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be ≥ 1".into()));
    }
    let pts = check_offsets(setup, reference, offsets)?;
    let mut all = vec![*reference];
    all.extend(pts.iter().copied());
    let run = |index: usize| -> Result<PointSums> {
        let mut rng = stream(seed, index);
        let current = TxCurrent::random_white(tx_points.to_vec(), tx_cell, &mut rng);
        let scatterers = if setup.with_scattering {
            draw_scene(&setup.env, &setup.geometry, setup.rx_points.clone(), &mut rng)?.scatterers
        } else {
            Vec::new()
        };
        let h = received_fields(&current, &scatterers, &all, &setup.medium, &setup.mom, setup.model)?;
        let mut sums = PointSums::start(vec![h[0].norm_sqr()], pts.len());
        for x in &h[1..] {
            sums.push(0, &h[0], x);
        }
        Ok(sums)
    };
    let per_real = (0..ensemble_size)
        .into_par_iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;
    let lags: Vec<f64> = offsets.iter().map(|o| o.norm()).collect();
    Ok(assemble_estimate(&lags, &per_real))
}

/// Free-space CCF from the kernel, A_n being the per-cell transfer dyad:
/// Σ_n tr(A_n(r)ᴴ A_n(r+Δr)) / √(Σ_n ‖A_n(r)‖² Σ_n ‖A_n(r+Δr)‖²).
pub fn ccf_analytic(
    setup: &StatsSetup,
    tx_points: &[Vec3],
    tx_cell: [f64; 3],
    reference: &Vec3,
    offsets: &[Vec3],
) -> Result<Vec<Complex64>> {
    let pts = check_offsets(setup, reference, offsets)?;
    let k = setup.medium.k();
    let entries = |r: &Vec3| -> Result<Vec<Dyad>> {
        tx_points
            .iter()
            .map(|p| channel_entry(r, p, &tx_cell, 1.0, k, setup.model))
            .collect()
    };
    let a0 = entries(reference)?;
    let norm: f64 = a0.iter().map(|a| a.frobenius().powi(2)).sum();
    pts.iter()
        .map(|p| {
            let a = entries(p)?;
            let s: Complex64 = a0.iter().zip(&a).map(|(x, y)| (x.0.adjoint() * y.0).trace()).sum();
            let n: f64 = a.iter().map(|a| a.frobenius().powi(2)).sum();
            Ok(s / (norm * n).sqrt())
        })
        .collect()
}

/// Great-circle cut for radiation patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Cut {
    /// θ sweeps 0..360° in the half-planes φ and φ + π.
    Theta { phi: f64 },
    /// φ sweeps 0..360° at fixed θ (a great circle when θ = 90°).
    Phi { theta: f64 },
}

/// One direction of a pattern cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub angle_deg: f64,
    pub e_r: f64,
    pub e_theta: f64,
    pub e_phi: f64,
}

impl PatternRow {
    pub fn total(&self) -> f64 {
        (self.e_r.powi(2) + self.e_theta.powi(2) + self.e_phi.powi(2)).sqrt()
    }
}

/// Default pattern radius: 100λ beyond the Rx shell.
pub fn default_pattern_radius(op: &RadiationOperator) -> f64 {
    op.geometry.distance + op.geometry.r_r + 100.0 * op.medium.wavelength()
}

/// |E_r|, |E_θ|, |E_φ| of Σσ_p j_p u_p on a cut at radius `radius`.
pub fn radiation_pattern(
    op: &RadiationOperator,
    j: &[Complex64],
    cut: Cut,
    resolution: usize,
    radius: f64,
) -> Result<Vec<PatternRow>> {
    if resolution == 0 {
        return Err(Error::Config("pattern resolution must be ≥ 1".into()));
    }
    (0..resolution)
        .into_par_iter()
        .map(|i| {
            let a = 2.0 * PI * i as f64 / resolution as f64;
            let dir = match cut {
                Cut::Theta { phi } => Vec3::new(a.sin() * phi.cos(), a.sin() * phi.sin(), a.cos()),
                Cut::Phi { theta } => Vec3::new(theta.sin() * a.cos(), theta.sin() * a.sin(), theta.cos()),
            };
            let p = dir * radius;
            let sp = Spherical::from_cartesian(&p);
            let e = op.radiate(j, &p)?.to_spherical(sp.theta, sp.phi);
            Ok(PatternRow {
                angle_deg: a.to_degrees(),
                e_r: e.c[0].norm(),
                e_theta: e.c[1].norm(),
                e_phi: e.c[2].norm(),
            })
        })
        .collect()
}
