//! Transmit-current optimisation.
//!
//! The received scalar at user k is E_k = b_kᵀ j with
//! b_k[p] = σ_p (w_r u_{r,p} + w_θ u_{θ,p} + w_φ u_{φ,p})(r_k). The
//! power-constrained least-squares problem min ‖Bj − s‖² s.t. ‖j‖² ≤ P_T
//! is solved through the SVD of B with bisection on the multiplier.
//! Scattering is folded in by iterating on the retargeted symbols
//! s − E_s(j), and single-user capacity uses water-filling.

use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Spherical, Vec3};
use crate::scatter::MomSystem;
use crate::swf::RadiationOperator;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MODULE: &str = "optim";
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// (1, 1, 1)/√3.
pub fn default_polarization() -> [Complex64; 3] {
    let c = Complex64::from(1.0 / 3f64.sqrt());
    [c, c, c]
}

/// A user: position, target symbol and polarisation gains (r, θ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTarget {
    pub position: Vec3,
    pub symbol: Complex64,
    pub w: [Complex64; 3],
}

impl UserTarget {
    pub fn new(position: Vec3, symbol: Complex64) -> Self {
        Self {
            position,
            symbol,
            w: default_polarization(),
        }
    }

    /// w · E with E given in any basis.
    pub fn project(&self, e: &ComplexVec3) -> Complex64 {
        let sp = Spherical::from_cartesian(&self.position);
        let loc = e.to_spherical(sp.theta, sp.phi);
        self.w[0] * loc.c[0] + self.w[1] * loc.c[1] + self.w[2] * loc.c[2]
    }
}

/// Rows b_kᵀ for the first `p` modes.
pub fn build_beam_vectors(users: &[UserTarget], op: &RadiationOperator, p: usize) -> Result<DMatrix<Complex64>> {
    if p == 0 || p > op.mode_count() {
        return Err(Error::Config(format!(
            "SVD order P = {p} outside 1..={}",
            op.mode_count()
        )));
    }
    if users.iter().any(|u| u.w.iter().all(|w| *w == ZERO)) {
        return Err(Error::domain(MODULE, "polarisation gain vector must be nonzero"));
    }
    let rows = users
        .par_iter()
        .map(|u| {
            let (_, modes) = op.scaled_modes(&u.position, p)?;
            Ok(modes
                .iter()
                .map(|c| u.w[0] * c[0] + u.w[1] * c[1] + u.w[2] * c[2])
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(users.len(), p, |k, q| rows[k][q]))
}

pub fn symbols(users: &[UserTarget]) -> DVector<Complex64> {
    DVector::from_iterator(users.len(), users.iter().map(|u| u.symbol))
}

/// Solution of the power-constrained least-squares problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct P1Solution {
    pub j: Vec<Complex64>,
    /// Multiplier λ ≥ 0.
    pub lambda: f64,
    /// ‖j‖².
    pub power: f64,
    /// Σ|Bj − s|² / Σ|s|².
    pub err: f64,
    /// K > P: exact recovery is not possible in general.
    pub underdetermined: bool,
}

/// Thin SVD of B cached for repeated right-hand sides.
#[derive(Debug, Clone)]
pub struct P1Solver {
    b: DMatrix<Complex64>,
    u: DMatrix<Complex64>,
    s: DVector<f64>,
    v: DMatrix<Complex64>,
}

impl P1Solver {
    pub fn new(b: &DMatrix<Complex64>) -> Result<Self> {
        if b.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::domain(MODULE, "beam vectors contain non-finite entries"));
        }
        if b.nrows() == 0 || b.ncols() == 0 {
            return Ok(Self {
                b: b.clone(),
                u: DMatrix::zeros(b.nrows(), 0),
                s: DVector::zeros(0),
                v: DMatrix::zeros(b.ncols(), 0),
            });
        }
        let svd = b.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᵀ").adjoint();
        Ok(Self {
            b: b.clone(),
            u,
            s: svd.singular_values,
            v,
        })
    }

    pub fn beams(&self) -> &DMatrix<Complex64> {
        &self.b
    }

    fn cutoff(&self) -> f64 {
        self.s.iter().cloned().fold(0.0, f64::max) * 1e-14 * self.b.nrows().max(self.b.ncols()) as f64
    }

    /// ‖j(λ)‖² from the projected target c = Uᴴs.
    fn power_at(&self, c: &DVector<Complex64>, lambda: f64) -> f64 {
        let cut = self.cutoff();
        self.s
            .iter()
            .zip(c.iter())
            .filter(|(s, _)| **s > cut || lambda > 0.0)
            .map(|(s, c)| {
                let g = s / (s * s + lambda);
                g * g * c.norm_sqr()
            })
            .sum()
    }

    fn j_at(&self, c: &DVector<Complex64>, lambda: f64) -> DVector<Complex64> {
        let cut = self.cutoff();
        let mut y = DVector::<Complex64>::zeros(self.s.len());
        for i in 0..self.s.len() {
            let s = self.s[i];
            if s > cut || lambda > 0.0 {
                y[i] = c[i] * (s / (s * s + lambda));
            }
        }
        &self.v * y
    }

    /// j = (BᴴB + λI)⁻¹Bᴴs with the smallest λ ≥ 0 meeting ‖j‖² ≤ P_T.
    pub fn solve(&self, s: &DVector<Complex64>, p_t: f64) -> Result<P1Solution> {
        if !(p_t > 0.0 && p_t.is_finite()) {
            return Err(Error::domain(
                MODULE,
                format!("transmit power must be positive and finite, got {p_t}"),
            ));
        }
        if s.len() != self.b.nrows() {
            return Err(Error::precondition(MODULE, "symbol count differs from user count"));
        }
        if s.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::domain(MODULE, "symbols contain non-finite entries"));
        }
        let underdetermined = self.b.nrows() > self.b.ncols();
        let c = self.u.adjoint() * s;
        let mut lambda = 0.0;
        if self.power_at(&c, 0.0) > p_t {
            let smax = self.s.iter().cloned().fold(0.0, f64::max);
            let mut hi = (smax * smax).max(f64::MIN_POSITIVE);
            while self.power_at(&c, hi) >= p_t {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::domain(MODULE, "multiplier bracket overflowed"));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.power_at(&c, mid) > p_t {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if p_t - self.power_at(&c, hi) <= 1e-12 * p_t {
                    break;
                }
            }
            lambda = hi;
        }
        let j = self.j_at(&c, lambda);
        let power = j.norm_squared();
        let err = relative_error(&(&self.b * &j), s);
        Ok(P1Solution {
            j: j.iter().copied().collect(),
            lambda,
            power,
            err,
            underdetermined,
        })
    }
}

/// One-shot [`P1Solver::solve`].
pub fn solve_p1(b: &DMatrix<Complex64>, s: &DVector<Complex64>, p_t: f64) -> Result<P1Solution> {
    P1Solver::new(b)?.solve(s, p_t)
}

fn relative_error(e: &DVector<Complex64>, s: &DVector<Complex64>) -> f64 {
    let den = s.norm_squared();
    if den == 0.0 {
        return 0.0;
    }
    (e - s).norm_squared() / den
}

/// Σ|E_k + E_s,k − s_k|² / Σ|s_k|² for received scalars `e` (direct) and
/// optional scattered contributions.
pub fn signal_error(
    b: &DMatrix<Complex64>,
    j: &[Complex64],
    s: &DVector<Complex64>,
    scattered: Option<&DVector<Complex64>>,
) -> f64 {
    let jv = DVector::from_column_slice(j);
    let mut e = b * jv;
    if let Some(es) = scattered {
        e += es;
    }
    relative_error(&e, s)
}

/// Which MoM point set an incident-field request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Match,
    Holdout,
}

/// Linear map from current coefficients to scattered scalars at the users,
/// with per-column MoM solutions kept for residual checks.
#[derive(Debug, Clone)]
pub struct ScatterResponse {
    /// K × P: column p is w·E_s at each user for j = e_p.
    pub s: DMatrix<Complex64>,
    /// MoM coefficients per column.
    coefficients: Vec<Vec<Complex64>>,
    /// Incident fields per column at the held-out points, when retained.
    holdout: Option<Vec<Vec<ComplexVec3>>>,
    system: MomSystem,
}

impl ScatterResponse {
    /// Solves the MoM problem once per radiation mode.
    pub fn new(op: &RadiationOperator, users: &[UserTarget], p: usize, system: MomSystem) -> Result<Self> {
        let mode_fields = |pts: &[Vec3]| -> Result<Vec<Vec<ComplexVec3>>> {
            pts.par_iter()
                .map(|pt| {
                    let (sp, modes) = op.scaled_modes(pt, p)?;
                    Ok(modes
                        .iter()
                        .map(|c| ComplexVec3::spherical(*c, sp.theta, sp.phi).to_cartesian())
                        .collect::<Vec<_>>())
                })
                .collect()
        };
        let matched = mode_fields(system.match_points())?;
        let holdout = mode_fields(system.holdout_points())?;
        let pick = |per_point: &[Vec<ComplexVec3>], q: usize| per_point.iter().map(|v| v[q]).collect::<Vec<_>>();
        Self::from_columns(
            users,
            system.clone(),
            p,
            |q, probe, _| match probe {
                Probe::Match => Ok(pick(&matched, q)),
                Probe::Holdout => Ok(pick(&holdout, q)),
            },
            true,
        )
    }

    /// Builds the response from an incident-field evaluator per column:
    /// `incident(q, probe, points)` is the field of j = e_q at `points`,
    /// which are the match or held-out points as tagged by `probe`.
    pub fn from_columns<F>(
        users: &[UserTarget],
        system: MomSystem,
        columns: usize,
        incident: F,
        keep_holdout: bool,
    ) -> Result<Self>
    where
        F: Fn(usize, Probe, &[Vec3]) -> Result<Vec<ComplexVec3>> + Sync,
    {
        let per_column = (0..columns)
            .into_par_iter()
            .map(|q| {
                let x = system.solve_samples(&incident(q, Probe::Match, system.match_points())?)?;
                let col = users
                    .iter()
                    .map(|u| Ok(u.project(&system.scattered_field(&x, &u.position)?)))
                    .collect::<Result<Vec<_>>>()?;
                let held = if keep_holdout {
                    Some(incident(q, Probe::Holdout, system.holdout_points())?)
                } else {
                    None
                };
                Ok((x, col, held))
            })
            .collect::<Result<Vec<_>>>()?;
        let s = DMatrix::from_fn(users.len(), columns, |k, q| per_column[q].1[k]);
        let mut coefficients = Vec::with_capacity(columns);
        let mut held = Vec::with_capacity(columns);
        for (x, _, h) in per_column {
            coefficients.push(x);
            held.push(h);
        }
        let holdout = if keep_holdout {
            held.into_iter().collect::<Option<Vec<_>>>()
        } else {
            None
        };
        Ok(Self {
            s,
            coefficients,
            holdout,
            system,
        })
    }

    pub fn system(&self) -> &MomSystem {
        &self.system
    }

    /// Scattered scalars at the users for current `j`.
    pub fn scattered(&self, j: &[Complex64]) -> DVector<Complex64> {
        &self.s * DVector::from_column_slice(j)
    }

    /// Surface-current coefficients excited by current `j`.
    pub fn surface_coefficients(&self, j: &[Complex64]) -> Vec<Complex64> {
        let n = self.coefficients.first().map_or(0, |c| c.len());
        let mut x = vec![ZERO; n];
        for (jq, c) in j.iter().zip(&self.coefficients) {
            for (a, b) in x.iter_mut().zip(c) {
                *a += b * jq;
            }
        }
        x
    }

    /// Held-out relative tangential residual of the MoM solution for `j`;
    /// `None` when the held-out incident fields were not retained.
    pub fn residual(&self, j: &[Complex64]) -> Result<Option<f64>> {
        if self.system.is_empty() {
            return Ok(Some(0.0));
        }
        let Some(holdout) = &self.holdout else {
            return Ok(None);
        };
        let x = self.surface_coefficients(j);
        let mut inc = vec![ComplexVec3::zero(); self.system.holdout_points().len()];
        for (jq, h) in j.iter().zip(holdout) {
            for (a, b) in inc.iter_mut().zip(h) {
                *a += *b * *jq;
            }
        }
        Ok(Some(self.system.holdout_residual(&x, &inc)?.relative))
    }
}

/// Result of the scattering-aware iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct P2Report {
    pub j: Vec<Complex64>,
    pub lambda: f64,
    pub power: f64,
    pub iterations: usize,
    /// err with scattering at j⁰, j¹, …
    pub err_trace: Vec<f64>,
    pub change_trace: Vec<f64>,
    /// err of the scatter-blind solution evaluated with scattering.
    pub err_blind: f64,
    pub blind: P1Solution,
    /// Held-out MoM residual at the final current, when tracked.
    pub mom_residual: Option<f64>,
}

/// Iterates j^i = P1(s − E_s(j^{i−1})) from the scatter-blind j⁰ until the
/// relative change falls below `eps1`.
pub fn solve_p2(
    b: &DMatrix<Complex64>,
    s: &DVector<Complex64>,
    response: &ScatterResponse,
    p_t: f64,
    eps1: f64,
    max_iter: usize,
) -> Result<P2Report> {
    if response.s.shape() != b.shape() {
        return Err(Error::precondition(
            MODULE,
            "scatter response and beam matrix differ in shape",
        ));
    }
    let solver = P1Solver::new(b)?;
    let blind = solver.solve(s, p_t)?;
    let err_of = |j: &[Complex64]| signal_error(b, j, s, Some(&response.scattered(j)));
    let err_blind = err_of(&blind.j);
    let mut err_trace = vec![err_blind];
    let mut change_trace = Vec::new();
    let mut current = blind.clone();
    for it in 1..=max_iter {
        let target = s - response.scattered(&current.j);
        let next = solver.solve(&target, p_t)?;
        let diff: f64 = next
            .j
            .iter()
            .zip(&current.j)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let base = current.power.sqrt().max(f64::MIN_POSITIVE);
        let change = if current.power == 0.0 && next.power == 0.0 {
            0.0
        } else {
            diff / base
        };
        err_trace.push(err_of(&next.j));
        change_trace.push(change);
        current = next;
        if change < eps1 {
            let mom_residual = response.residual(&current.j)?;
            return Ok(P2Report {
                j: current.j,
                lambda: current.lambda,
                power: current.power,
                iterations: it,
                err_trace,
                change_trace,
                err_blind,
                blind,
                mom_residual,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_change: change_trace.last().copied().unwrap_or(f64::NAN),
        residual_trace: err_trace,
    })
}

/// How the scattering-aware problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P2Method {
    /// Fixed-point retargeting iteration.
    #[default]
    Iterative,
    /// Direct power-constrained least squares on the effective channel B + S.
    Exact,
}

/// Minimises ‖(B + S)j − s‖² s.t. ‖j‖² ≤ P_T. Total fields are linear in j,
/// so this is the exact optimum of the scattering-aware problem.
pub fn solve_p2_exact(
    b: &DMatrix<Complex64>,
    s: &DVector<Complex64>,
    response: &ScatterResponse,
    p_t: f64,
) -> Result<P1Solution> {
    if response.s.shape() != b.shape() {
        return Err(Error::precondition(
            MODULE,
            "scatter response and beam matrix differ in shape",
        ));
    }
    solve_p1(&(b + &response.s), s, p_t)
}

/// One row of an SVD-order sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub err: f64,
    pub power: f64,
    pub lambda: f64,
}

/// err and ‖j_opt‖² for each SVD order in `orders`.
pub fn sweep_svd_order(
    users: &[UserTarget],
    op: &RadiationOperator,
    orders: &[usize],
    p_t: f64,
) -> Result<Vec<SweepRow>> {
    let pmax = orders.iter().copied().max().unwrap_or(0);
    if pmax == 0 {
        return Ok(Vec::new());
    }
    let b = build_beam_vectors(users, op, pmax)?;
    let s = symbols(users);
    orders
        .par_iter()
        .map(|&p| {
            if p == 0 {
                return Err(Error::Config("SVD order must be ≥ 1".into()));
            }
            let sol = solve_p1(&b.columns(0, p).into_owned(), &s, p_t)?;
            Ok(SweepRow {
                p,
                err: sol.err,
                power: sol.power,
                lambda: sol.lambda,
            })
        })
        .collect()
}

/// Water-filling allocation over parallel modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// |j_p|².
    pub power: Vec<f64>,
    pub water_level: f64,
    pub dof: usize,
}

impl PowerAllocation {
    /// Σ log2(1 + σ_p²|j_p|²/N).
    pub fn capacity(&self, sigma: &[f64], noise: f64) -> f64 {
        self.power
            .iter()
            .zip(sigma)
            .map(|(p, s)| (1.0 + s * s * p / noise).log2())
            .sum()
    }
}

/// |j_p|² = max(wl − N/σ_p², 0) with Σ|j_p|² = P_T, by sorted thresholds.
pub fn water_fill(sigma: &[f64], p_t: f64, noise: f64) -> Result<PowerAllocation> {
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::domain(MODULE, "noise power must be positive"));
    }
    if !(p_t >= 0.0 && p_t.is_finite()) {
        return Err(Error::domain(MODULE, "transmit power must be non-negative"));
    }
    if sigma.iter().any(|s| !(s.abs() > 0.0 && s.is_finite())) {
        return Err(Error::domain(MODULE, "singular values must be nonzero and finite"));
    }
    let floors: Vec<f64> = sigma.iter().map(|s| noise / (s * s)).collect();
    if p_t == 0.0 || sigma.is_empty() {
        return Ok(PowerAllocation {
            power: vec![0.0; sigma.len()],
            water_level: floors.iter().cloned().fold(f64::INFINITY, f64::min),
            dof: 0,
        });
    }
    let mut sorted = floors.clone();
    sorted.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut wl = 0.0;
    for (m, f) in sorted.iter().enumerate() {
        acc += f;
        let level = (p_t + acc) / (m + 1) as f64;
        if m + 1 < sorted.len() && level <= sorted[m + 1] {
            wl = level;
            break;
        }
        wl = level;
    }
    let power: Vec<f64> = floors.iter().map(|f| (wl - f).max(0.0)).collect();
    let dof = power.iter().filter(|p| **p > 0.0).count();
    Ok(PowerAllocation {
        power,
        water_level: wl,
        dof,
    })
}
