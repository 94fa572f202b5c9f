//! Single-user and multi-user capacity.
//!
//! Single-user capacity water-fills over the singular values of the
//! radiation operator. Multi-user capacity draws users uniformly in the Rx
//! ball with unit-modulus symbols, optimises the current for those symbols
//! and sums log2(1 + |y_k|²/N) over the received scalars y_k = w_k·E(r_k).
//! The precoded variant replaces the symbol-matching current with MMSE or
//! SLNR beamformers and counts inter-user interference.

use crate::channel_stats::{channel_entry, cubic_ball_points};
use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Vec3};
use crate::green::Part;
use crate::optim::{
    build_beam_vectors, default_polarization, solve_p2, solve_p2_exact, symbols, water_fill, P1Solver, P2Method, Probe,
    ScatterResponse, UserTarget,
};
use crate::scatter::{MomConfig, MomSystem, Scatterer};
use crate::stochastic_env::{draw_scene, EnvParams};
use crate::swf::{Geometry, Medium, RadiationOperator};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MODULE: &str = "capacity";
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// P_T = 10^((dBm − 30)/10) in units where the noise power N is 1.
pub fn dbm_to_power(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Water-filling capacity over all modes of `op` and its active-mode count.
pub fn single_user_capacity(op: &RadiationOperator, p_t: f64, noise: f64) -> Result<(f64, usize)> {
    let sigma: Vec<f64> = op.sigma.iter().map(|s| s.abs()).collect();
    let alloc = water_fill(&sigma, p_t, noise)?;
    Ok((alloc.capacity(&sigma, noise), alloc.dof))
}

/// Precoding scheme for the interference-aware capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precoder {
    Mmse,
    Slnr,
}

/// Transmit-side degrees of freedom the users' channel rows are built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ChannelDomain {
    /// The first `svd_order` radiation modes.
    Modes,
    /// Cartesian current components on a cubic Tx lattice of the given
    /// spacing (m).
    Lattice { spacing: f64 },
}

/// Which variant a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub scattering: bool,
    pub precoder: Option<Precoder>,
    pub domain: ChannelDomain,
    pub p2_method: P2Method,
    pub efficiency: f64,
}

/// Capacity against transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub p_t_dbm: Vec<f64>,
    /// bits/s/Hz (ensemble mean for multi-user runs).
    pub capacity: Vec<f64>,
    /// Monte-Carlo standard error of the mean, when ensemble_size > 1.
    pub stderr: Option<Vec<f64>>,
    /// Active-mode count (single-user runs).
    pub dof: Option<Vec<usize>>,
    pub variant: Option<Variant>,
    pub ensemble_size: usize,
    /// Largest iteration count of the scattering-aware solver.
    pub max_p2_iterations: usize,
    /// Per-realization capacities, realization-major.
    pub samples: Vec<Vec<f64>>,
}

/// Single-user capacity and DoF over a power sweep.
pub fn single_user_sweep(op: &RadiationOperator, p_t_dbm: &[f64], noise: f64) -> Result<CapacityReport> {
    let mut capacity = Vec::new();
    let mut dof = Vec::new();
    for &d in p_t_dbm {
        let (c, n) = single_user_capacity(op, dbm_to_power(d), noise)?;
        capacity.push(c);
        dof.push(n);
    }
    Ok(CapacityReport {
        p_t_dbm: p_t_dbm.to_vec(),
        capacity,
        stderr: None,
        dof: Some(dof),
        variant: None,
        ensemble_size: 1,
        max_p2_iterations: 0,
        samples: Vec::new(),
    })
}

/// Everything a multi-user run needs besides the transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUserScenario {
    pub medium: Medium,
    pub geometry: Geometry,
    pub users: usize,
    pub polarization: [Complex64; 3],
    pub env: EnvParams,
    pub mom: MomConfig,
    pub noise: f64,
    pub eps1: f64,
    pub max_iter: usize,
    pub p2_method: P2Method,
    /// Radiation efficiency η ∈ (0, 1] scaling the transmit power.
    pub efficiency: f64,
}

impl MultiUserScenario {
    pub fn new(medium: Medium, geometry: Geometry, users: usize) -> Self {
        Self {
            medium,
            geometry,
            users,
            polarization: default_polarization(),
            env: EnvParams::default(),
            mom: MomConfig::default(),
            noise: 1.0,
            eps1: 1e-3,
            max_iter: 20,
            p2_method: P2Method::Iterative,
            efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.env.validate()?;
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise power must be positive".into()));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Config("efficiency must lie in (0, 1]".into()));
        }
        if !(self.eps1 > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("eps1 must be positive and max_iter ≥ 1".into()));
        }
        if self.polarization.iter().all(|w| *w == ZERO) {
            return Err(Error::Config("polarization gains must not all vanish".into()));
        }
        Ok(())
    }
}

/// Maps current coefficients to fields: radiation modes or lattice samples.
#[derive(Debug, Clone)]
pub enum Transmitter {
    Modes {
        op: RadiationOperator,
        order: usize,
    },
    Lattice {
        points: Vec<Vec3>,
        cell: [f64; 3],
        medium: Medium,
        model: Part,
    },
}

impl Transmitter {
    pub fn modes(op: RadiationOperator, order: usize) -> Result<Self> {
        if order == 0 || order > op.mode_count() {
            return Err(Error::Config(format!(
                "SVD order P = {order} outside 1..={}",
                op.mode_count()
            )));
        }
        Ok(Transmitter::Modes { op, order })
    }

    /// Lattice of spacing δ over the Tx ball; coefficient x = √δ³·J so that
    /// ‖x‖² is the current power ∫|J|².
    pub fn lattice(geometry: &Geometry, medium: Medium, spacing: f64, model: Part) -> Result<Self> {
        geometry.validate()?;
        if !matches!(model, Part::Full | Part::Far) {
            return Err(Error::Config(
                "lattice channels use the full or far-field kernel".into(),
            ));
        }
        Ok(Transmitter::Lattice {
            points: cubic_ball_points(&Vec3::zeros(), geometry.r_t, spacing)?,
            cell: [spacing; 3],
            medium,
            model,
        })
    }

    pub fn domain(&self) -> ChannelDomain {
        match self {
            Transmitter::Modes { .. } => ChannelDomain::Modes,
            Transmitter::Lattice { cell, .. } => ChannelDomain::Lattice { spacing: cell[0] },
        }
    }

    pub fn columns(&self) -> usize {
        match self {
            Transmitter::Modes { order, .. } => *order,
            Transmitter::Lattice { points, .. } => 3 * points.len(),
        }
    }

    fn lattice_dyad(&self, r: &Vec3, n: usize) -> Result<nalgebra::Matrix3<Complex64>> {
        let Transmitter::Lattice {
            points,
            cell,
            medium,
            model,
        } = self
        else {
            unreachable!("lattice_dyad on a modal transmitter")
        };
        let vol: f64 = cell.iter().product();
        let h = channel_entry(r, &points[n], cell, 1.0, medium.k(), *model)?;
        Ok(h.0 * Complex64::new(0.0, medium.omega() * medium.mu / vol.sqrt()))
    }

    /// K × columns matrix of received scalars per unit coefficient.
    pub fn beam_matrix(&self, users: &[UserTarget]) -> Result<DMatrix<Complex64>> {
        match self {
            Transmitter::Modes { op, order } => build_beam_vectors(users, op, *order),
            Transmitter::Lattice { points, .. } => {
                let rows = users
                    .par_iter()
                    .map(|u| {
                        let mut row = Vec::with_capacity(3 * points.len());
                        for n in 0..points.len() {
                            let a = self.lattice_dyad(&u.position, n)?;
                            for c in 0..3 {
                                let col = ComplexVec3::cartesian([a[(0, c)], a[(1, c)], a[(2, c)]]);
                                row.push(u.project(&col));
                            }
                        }
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DMatrix::from_fn(users.len(), self.columns(), |k, q| rows[k][q]))
            }
        }
    }

    /// MoM response of every column at the users.
    pub fn scatter_response(&self, users: &[UserTarget], system: MomSystem) -> Result<ScatterResponse> {
        match self {
            Transmitter::Modes { op, order } => ScatterResponse::new(op, users, *order, system),
            Transmitter::Lattice { .. } => ScatterResponse::from_columns(
                users,
                system,
                self.columns(),
                |q, _: Probe, pts| {
                    pts.iter()
                        .map(|p| {
                            let a = self.lattice_dyad(p, q / 3)?;
                            let c = q % 3;
                            Ok(ComplexVec3::cartesian([a[(0, c)], a[(1, c)], a[(2, c)]]))
                        })
                        .collect()
                },
                false,
            ),
        }
    }
}

/// Users, symbols and scatterers of one Monte-Carlo realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDraw {
    pub index: usize,
    pub users: Vec<UserTarget>,
    pub scatterers: Vec<Scatterer>,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Users uniform in the Rx ball, symbols e^{iφ} with φ uniform on [0, 2π),
/// then the scatterer scene, all from realization stream `index`. The
/// scene is drawn regardless of whether scattering is used so that user
/// draws match across variants.
pub fn draw_realization(sc: &MultiUserScenario, seed: u64, index: usize) -> Result<SceneDraw> {
    let mut rng = stream(seed, index);
    let c = sc.geometry.rx_center();
    let users: Vec<UserTarget> = (0..sc.users)
        .map(|_| {
            let u: [f64; 3] = UnitBall.sample(&mut rng);
            let pos = c + Vec3::from(u) * sc.geometry.r_r;
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            UserTarget {
                position: pos,
                symbol: Complex64::from_polar(1.0, phi),
                w: sc.polarization,
            }
        })
        .collect();
    let positions = users.iter().map(|u| u.position).collect();
    let scene = draw_scene(&sc.env, &sc.geometry, positions, &mut rng)?;
    Ok(SceneDraw {
        index,
        users,
        scatterers: scene.scatterers,
    })
}

/// Effective channel of one realization.
pub struct RealizedChannel {
    pub b: DMatrix<Complex64>,
    pub response: Option<ScatterResponse>,
}

impl RealizedChannel {
    pub fn build(sc: &MultiUserScenario, tx: &Transmitter, draw: &SceneDraw, with_scattering: bool) -> Result<Self> {
        let b = tx.beam_matrix(&draw.users)?;
        let alive: Vec<Scatterer> = draw.scatterers.iter().copied().filter(|s| s.alive).collect();
        let response = if with_scattering && !alive.is_empty() {
            let system = MomSystem::assemble(&alive, &sc.medium, sc.mom)?;
            Some(tx.scatter_response(&draw.users, system)?)
        } else {
            None
        };
        Ok(Self { b, response })
    }

    /// B + S, or B without scattering.
    pub fn effective(&self) -> DMatrix<Complex64> {
        match &self.response {
            Some(r) => &self.b + &r.s,
            None => self.b.clone(),
        }
    }
}

fn log_rate(y: &DVector<Complex64>, noise: f64) -> f64 {
    y.iter().map(|v| (1.0 + v.norm_sqr() / noise).log2()).sum()
}

/// Capacities of one realization over the sweep; returns the largest P2
/// iteration count alongside.
pub fn realization_capacity(
    sc: &MultiUserScenario,
    tx: &Transmitter,
    draw: &SceneDraw,
    p_t_dbm: &[f64],
    with_scattering: bool,
) -> Result<(Vec<f64>, usize)> {
    if draw.users.is_empty() {
        return Ok((vec![0.0; p_t_dbm.len()], 0));
    }
    let ch = RealizedChannel::build(sc, tx, draw, with_scattering)?;
    let s = symbols(&draw.users);
    let solver = P1Solver::new(&ch.b)?;
    let mut out = Vec::with_capacity(p_t_dbm.len());
    let mut iters = 0;
    for &d in p_t_dbm {
        let p_t = sc.efficiency * dbm_to_power(d);
        let j = match (&ch.response, sc.p2_method) {
            (None, _) => solver.solve(&s, p_t)?.j,
            (Some(r), P2Method::Iterative) => {
                let rep = solve_p2(&ch.b, &s, r, p_t, sc.eps1, sc.max_iter)?;
                iters = iters.max(rep.iterations);
                rep.j
            }
            (Some(r), P2Method::Exact) => solve_p2_exact(&ch.b, &s, r, p_t)?.j,
        };
        let mut y = &ch.b * DVector::from_column_slice(&j);
        if let Some(r) = &ch.response {
            y += r.scattered(&j);
        }
        out.push(log_rate(&y, sc.noise));
    }
    Ok((out, iters))
}

/// P × K precoder using total power P_T. MMSE is regularised channel
/// inversion with one common scale; SLNR gives each user P_T/K.
pub fn precoder_matrix(h: &DMatrix<Complex64>, precoder: Precoder, p_t: f64, noise: f64) -> Result<DMatrix<Complex64>> {
    let (k, p) = h.shape();
    if k == 0 || p_t == 0.0 {
        return Ok(DMatrix::zeros(p, k));
    }
    if !(p_t > 0.0 && p_t.is_finite() && noise > 0.0) {
        return Err(Error::domain(
            MODULE,
            "precoding needs positive transmit and noise power",
        ));
    }
    let alpha = k as f64 * noise / p_t;
    let hh = h.adjoint();
    let mut w = match precoder {
        Precoder::Mmse => {
            let g = h * &hh + DMatrix::identity(k, k) * Complex64::from(alpha);
            let chol = g
                .cholesky()
                .ok_or_else(|| Error::singular(MODULE, "regularised Gram matrix is not positive definite"))?;
            // W = Hᴴ(HHᴴ + αI)⁻¹
            let inv = chol.inverse();
            &hh * inv
        }
        Precoder::Slnr => {
            let mut w = DMatrix::zeros(p, k);
            for kk in 0..k {
                let hk = hh.column(kk).into_owned();
                let others: Vec<usize> = (0..k).filter(|u| *u != kk).collect();
                let col = if others.is_empty() {
                    hk
                } else {
                    // (αI + H̃ᴴH̃)⁻¹h = (h − H̃ᴴ(αI + H̃H̃ᴴ)⁻¹H̃h)/α, dropping 1/α
                    let ht = h.select_rows(&others);
                    let g = &ht * ht.adjoint() + DMatrix::identity(others.len(), others.len()) * Complex64::from(alpha);
                    let chol = g
                        .cholesky()
                        .ok_or_else(|| Error::singular(MODULE, "leakage-plus-noise matrix is not positive definite"))?;
                    let t = chol.solve(&(&ht * &hk));
                    &hk - ht.adjoint() * t
                };
                w.set_column(kk, &col);
            }
            w
        }
    };
    match precoder {
        Precoder::Mmse => {
            let n = w.norm();
            if n > 0.0 {
                w *= Complex64::from(p_t.sqrt() / n);
            }
        }
        Precoder::Slnr => {
            let per_user = p_t / k as f64;
            for mut c in w.column_iter_mut() {
                let n = c.norm();
                if n > 0.0 {
                    c *= Complex64::from(per_user.sqrt() / n);
                }
            }
        }
    }
    Ok(w)
}

/// SINR_k = |h_k w_k|² / (Σ_{u≠k} |h_k w_u|² + N).
pub fn sinr(h: &DMatrix<Complex64>, w: &DMatrix<Complex64>, noise: f64) -> Vec<f64> {
    let g = h * w;
    (0..h.nrows())
        .map(|k| {
            let sig = g[(k, k)].norm_sqr();
            let leak: f64 = (0..g.ncols()).filter(|u| *u != k).map(|u| g[(k, u)].norm_sqr()).sum();
            sig / (leak + noise)
        })
        .collect()
}

/// Σ_k log2(1 + SINR_k).
pub fn sum_rate(h: &DMatrix<Complex64>, w: &DMatrix<Complex64>, noise: f64) -> f64 {
    sinr(h, w, noise).iter().map(|x| (1.0 + x).log2()).sum()
}

/// Precoded sum rates of one realization over the sweep.
pub fn realization_capacity_precoded(
    sc: &MultiUserScenario,
    tx: &Transmitter,
    draw: &SceneDraw,
    precoder: Precoder,
    p_t_dbm: &[f64],
    with_scattering: bool,
) -> Result<Vec<f64>> {
    if draw.users.is_empty() {
        return Ok(vec![0.0; p_t_dbm.len()]);
    }
    let h = RealizedChannel::build(sc, tx, draw, with_scattering)?.effective();
    p_t_dbm
        .iter()
        .map(|&d| {
            let p_t = sc.efficiency * dbm_to_power(d);
            let w = precoder_matrix(&h, precoder, p_t, sc.noise)?;
            Ok(sum_rate(&h, &w, sc.noise))
        })
        .collect()
}

fn summarize(p_t_dbm: &[f64], samples: Vec<Vec<f64>>, variant: Variant, iters: usize) -> CapacityReport {
    let n = samples.len();
    let mut capacity = Vec::new();
    let mut stderr = Vec::new();
    for i in 0..p_t_dbm.len() {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / n as f64;
        capacity.push(mean);
        if n > 1 {
            let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            stderr.push((var / n as f64).sqrt());
        }
    }
    CapacityReport {
        p_t_dbm: p_t_dbm.to_vec(),
        capacity,
        stderr: (n > 1).then_some(stderr),
        dof: None,
        variant: Some(variant),
        ensemble_size: n,
        max_p2_iterations: iters,
        samples,
    }
}

fn check_ensemble(sc: &MultiUserScenario, ensemble_size: usize) -> Result<()> {
    sc.validate()?;
    if ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be ≥ 1".into()));
    }
    Ok(())
}

/// 𝔼{Σ_k log2(1 + |y_k|²/N)} over users, symbols and scenes.
pub fn multi_user_capacity(
    sc: &MultiUserScenario,
    tx: &Transmitter,
    p_t_dbm: &[f64],
    ensemble_size: usize,
    seed: u64,
    with_scattering: bool,
) -> Result<CapacityReport> {
    check_ensemble(sc, ensemble_size)?;
    let per = (0..ensemble_size)
        .into_par_iter()
        .map(|i| {
            let draw = draw_realization(sc, seed, i).map_err(|e| e.in_realization(i))?;
            realization_capacity(sc, tx, &draw, p_t_dbm, with_scattering).map_err(|e| e.in_realization(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let iters = per.iter().map(|p| p.1).max().unwrap_or(0);
    let variant = Variant {
        scattering: with_scattering,
        precoder: None,
        domain: tx.domain(),
        p2_method: sc.p2_method,
        efficiency: sc.efficiency,
    };
    Ok(summarize(
        p_t_dbm,
        per.into_iter().map(|p| p.0).collect(),
        variant,
        iters,
    ))
}

/// 𝔼{Σ_k log2(1 + SINR_k)} with MMSE or SLNR precoding.
pub fn multi_user_capacity_precoded(
    sc: &MultiUserScenario,
    tx: &Transmitter,
    precoder: Precoder,
    p_t_dbm: &[f64],
    ensemble_size: usize,
    seed: u64,
    with_scattering: bool,
) -> Result<CapacityReport> {
    check_ensemble(sc, ensemble_size)?;
    let samples = (0..ensemble_size)
        .into_par_iter()
        .map(|i| {
            let draw = draw_realization(sc, seed, i).map_err(|e| e.in_realization(i))?;
            realization_capacity_precoded(sc, tx, &draw, precoder, p_t_dbm, with_scattering)
                .map_err(|e| e.in_realization(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let variant = Variant {
        scattering: with_scattering,
        precoder: Some(precoder),
        domain: tx.domain(),
        p2_method: sc.p2_method,
        efficiency: sc.efficiency,
    };
    Ok(summarize(p_t_dbm, samples, variant, 0))
}
