//! Stochastic scatterer placement and birth-death evolution.
//!
//! Scatterer counts are Poisson, positions follow an anisotropic Gaussian
//! centred just behind the Rx ball, and survivors over a time step or
//! sampling displacement are thinned with an exponential survival law while
//! newborns arrive as a Poisson count.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scatter::Scatterer;
use crate::swf::Geometry;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

const MODULE: &str = "stochastic_env";

/// Birth-death and placement parameters. Lengths in metres, rates in 1/m,
/// speeds in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    /// Generation rate λ_B.
    pub lambda_b: f64,
    /// Recombination rate λ_D.
    pub lambda_d: f64,
    /// Proportion of moving scatterers P_f.
    pub p_f: f64,
    /// Relative speed on the Tx side Δv^T.
    pub dv_t: f64,
    /// Relative speed on the Rx side Δv^R.
    pub dv_r: f64,
    /// Coherence distance D_c.
    pub d_c: f64,
    /// Placement spread along the Tx→Rx axis.
    pub sigma_ds: f64,
    /// Placement spread along x (azimuth).
    pub sigma_as: f64,
    /// Placement spread along y (elevation).
    pub sigma_es: f64,
    /// Mean initial scatterer count Q̄.
    pub mean_count: f64,
    /// Scatterer radius a.
    pub radius: f64,
    /// Distance of the placement centre behind the Rx-ball centre; `None`
    /// means R_r + 3a.
    pub placement_offset: Option<f64>,
    /// Reject positions overlapping the balls or other scatterers.
    pub enforce_constraints: bool,
    /// Rejection attempts per scatterer before a packing error.
    pub max_attempts: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            lambda_b: 4.0,
            lambda_d: 4.0,
            p_f: 0.3,
            dv_t: 0.0,
            dv_r: 1.0,
            d_c: 30.0,
            sigma_ds: 0.1,
            sigma_as: 0.1,
            sigma_es: 0.1,
            mean_count: 5.0,
            radius: 0.005,
            placement_offset: None,
            enforce_constraints: true,
            max_attempts: 10_000,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_b", self.lambda_b),
            ("lambda_d", self.lambda_d),
            ("d_c", self.d_c),
            ("sigma_ds", self.sigma_ds),
            ("sigma_as", self.sigma_as),
            ("sigma_es", self.sigma_es),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(
                    MODULE,
                    format!("{name} must be positive and finite, got {v}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.p_f) {
            return Err(Error::domain(
                MODULE,
                format!("p_f must lie in [0, 1], got {}", self.p_f),
            ));
        }
        if !(self.dv_t >= 0.0 && self.dv_r >= 0.0) {
            return Err(Error::domain(MODULE, "relative speeds must be non-negative"));
        }
        if !(self.mean_count >= 0.0 && self.mean_count.is_finite()) {
            return Err(Error::domain(MODULE, "mean scatterer count must be non-negative"));
        }
        if self.max_attempts == 0 {
            return Err(Error::domain(MODULE, "max_attempts must be ≥ 1"));
        }
        Ok(())
    }
}

/// Scatterers and users at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub geometry: Geometry,
    pub scatterers: Vec<Scatterer>,
    /// User positions (absolute, at `rx_offset = 0`).
    pub users: Vec<Vec3>,
    pub params: EnvParams,
    /// Scene time in seconds.
    pub time: f64,
    /// Translation of the Rx ball and its users from mobility.
    pub rx_offset: Vec3,
    pub next_id: u64,
}

impl Scene {
    /// Scene with no scatterers.
    pub fn empty(geometry: Geometry, users: Vec<Vec3>, params: EnvParams) -> Self {
        Self {
            geometry,
            scatterers: Vec::new(),
            users,
            params,
            time: 0.0,
            rx_offset: Vec3::zeros(),
            next_id: 0,
        }
    }

    pub fn alive(&self) -> impl Iterator<Item = &Scatterer> {
        self.scatterers.iter().filter(|s| s.alive)
    }

    pub fn rx_center(&self) -> Vec3 {
        self.geometry.rx_center() + self.rx_offset
    }

    /// User positions including the mobility offset.
    pub fn user_positions(&self) -> Vec<Vec3> {
        self.users.iter().map(|u| u + self.rx_offset).collect()
    }

    /// Centre of the Gaussian placement density.
    pub fn placement_center(&self) -> Vec3 {
        let off = self
            .params
            .placement_offset
            .unwrap_or(self.geometry.r_r + 3.0 * self.params.radius);
        let axis = self.geometry.rx_center().normalize();
        self.rx_center() + axis * off
    }

    fn admissible(&self, p: &Vec3) -> bool {
        let a = self.params.radius;
        if (p - self.rx_center()).norm() <= self.geometry.r_r + a {
            return false;
        }
        if p.norm() <= self.geometry.r_t + a {
            return false;
        }
        self.alive().all(|s| !s.intersects(p, a))
    }

    fn place<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Result<()> {
        let p = &self.params;
        let nx = Normal::new(0.0, p.sigma_as).map_err(|e| Error::domain(MODULE, e.to_string()))?;
        let ny = Normal::new(0.0, p.sigma_es).map_err(|e| Error::domain(MODULE, e.to_string()))?;
        let nz = Normal::new(0.0, p.sigma_ds).map_err(|e| Error::domain(MODULE, e.to_string()))?;
        let c = self.placement_center();
        for _ in 0..count {
            let index = self.next_id;
            let mut placed = false;
            for _ in 0..self.params.max_attempts {
                let pos = c + Vec3::new(nx.sample(rng), ny.sample(rng), nz.sample(rng));
                if !self.params.enforce_constraints || self.admissible(&pos) {
                    self.scatterers.push(Scatterer::new(index, pos, self.params.radius));
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Packing {
                    index: index as usize,
                    attempts: self.params.max_attempts,
                });
            }
            self.next_id += 1;
        }
        Ok(())
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::domain(MODULE, e.to_string()))?;
    Ok(d.sample(rng) as usize)
}

/// Draws a fresh scene: Poisson(Q̄) scatterers with Gaussian placement.
pub fn draw_scene<R: Rng + ?Sized>(
    params: &EnvParams,
    geometry: &Geometry,
    users: Vec<Vec3>,
    rng: &mut R,
) -> Result<Scene> {
    params.validate()?;
    geometry.validate()?;
    let mut scene = Scene::empty(*geometry, users, *params);
    let count = poisson(params.mean_count, rng)?;
    scene.place(count, rng)?;
    Ok(scene)
}

/// Survival probability of a scatterer over a time step Δt and Tx/Rx
/// sampling displacements δ_t, δ_r seen at elevations β_E^T, β_E^R.
pub fn survival_probability(params: &EnvParams, dt: f64, delta_t: f64, delta_r: f64, beta_t: f64, beta_r: f64) -> f64 {
    let time = (-params.lambda_d * params.p_f * (params.dv_r + params.dv_t) * dt / params.d_c).exp();
    let space = (-params.lambda_d * (delta_t * beta_t.cos() + delta_r * beta_r.cos()) / params.d_c).exp();
    (time * space).clamp(0.0, 1.0)
}

/// Elevation of a sample point above the plane normal to the Tx→Rx axis,
/// measured from its ball centre.
pub fn elevation_from_axis(point: &Vec3, ball_center: &Vec3, axis: &Vec3) -> f64 {
    let d = point - ball_center;
    let n = d.norm();
    if n == 0.0 {
        return 0.0;
    }
    (d.dot(&axis.normalize()) / n).clamp(-1.0, 1.0).asin()
}

/// Increment applied by [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Step {
    pub dt: f64,
    pub delta_t: f64,
    pub delta_r: f64,
    pub beta_t: f64,
    pub beta_r: f64,
}

impl Step {
    pub fn time(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// Outcome counts of one evolution step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepCounts {
    pub died: usize,
    pub born: usize,
}

/// Advances the scene: survivors thinned with the survival probability,
/// Poisson((λ_B/λ_D)(1 − P_sur)) births placed as in [`draw_scene`].
pub fn evolve<R: Rng + ?Sized>(scene: &Scene, step: Step, rng: &mut R) -> Result<(Scene, StepCounts)> {
    if !(step.dt >= 0.0 && step.delta_t >= 0.0 && step.delta_r >= 0.0) {
        return Err(Error::domain(
            MODULE,
            "time step and displacements must be non-negative",
        ));
    }
    let p = scene.params;
    let p_sur = survival_probability(&p, step.dt, step.delta_t, step.delta_r, step.beta_t, step.beta_r);
    let mut next = scene.clone();
    next.time += step.dt;
    let mut counts = StepCounts::default();
    if p_sur >= 1.0 {
        return Ok((next, counts));
    }
    next.scatterers.retain(|s| s.alive);
    next.scatterers.retain(|_| {
        let keep = rng.random::<f64>() < p_sur;
        if !keep {
            counts.died += 1;
        }
        keep
    });
    let births = poisson(p.lambda_b / p.lambda_d * (1.0 - p_sur), rng)?;
    next.place(births, rng)?;
    counts.born = births;
    Ok((next, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometry() -> Geometry {
        Geometry {
            r_t: 0.02,
            r_r: 0.2,
            distance: 2.0,
        }
    }

    #[test]
    fn survival_examples() {
        let p = EnvParams {
            lambda_d: 10.0,
            p_f: 0.5,
            dv_r: 1.0,
            dv_t: 1.0,
            d_c: 50.0,
            ..EnvParams::default()
        };
        assert_eq!(survival_probability(&p, 0.0, 0.0, 0.0, 0.3, 0.2), 1.0);
        assert!((survival_probability(&p, 1.0, 0.0, 0.0, 0.0, 0.0) - (-0.2f64).exp()).abs() < 1e-15);
        let one = survival_probability(&p, 0.7, 0.0, 0.0, 0.0, 0.0);
        let two = survival_probability(&p, 1.4, 0.0, 0.0, 0.0, 0.0);
        assert!((two - one * one).abs() < 1e-15);
    }

    #[test]
    fn survival_strictly_decreasing() {
        let p = EnvParams::default();
        let base = survival_probability(&p, 1.0, 0.1, 0.1, 0.2, 0.3);
        assert!(survival_probability(&p, 1.1, 0.1, 0.1, 0.2, 0.3) < base);
        assert!(survival_probability(&p, 1.0, 0.2, 0.1, 0.2, 0.3) < base);
        assert!(survival_probability(&p, 1.0, 0.1, 0.2, 0.2, 0.3) < base);
        assert!(base > 0.0 && base <= 1.0);
    }

    #[test]
    fn near_zero_rate_gives_empty_scenes() {
        let p = EnvParams {
            mean_count: 1e-6,
            ..EnvParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = (0..1000)
            .filter(|_| {
                draw_scene(&p, &geometry(), vec![], &mut rng)
                    .unwrap()
                    .scatterers
                    .is_empty()
            })
            .count();
        assert!(empty >= 999);
    }

    #[test]
    fn mean_count_matches() {
        let p = EnvParams {
            mean_count: 5.0,
            enforce_constraints: false,
            ..EnvParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let total: usize = (0..n)
            .map(|_| draw_scene(&p, &geometry(), vec![], &mut rng).unwrap().scatterers.len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((4.8..=5.2).contains(&mean), "{mean}");
    }

    #[test]
    fn per_axis_spread_matches() {
        let p = EnvParams {
            mean_count: 1.0,
            sigma_as: 0.3,
            sigma_es: 0.2,
            sigma_ds: 0.5,
            enforce_constraints: false,
            ..EnvParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = geometry();
        let mut scene = Scene::empty(g, vec![], p);
        let c = scene.placement_center();
        scene.place(10_000, &mut rng).unwrap();
        let pts: Vec<Vec3> = scene.scatterers.iter().map(|s| s.center - c).collect();
        let n = pts.len() as f64;
        for (axis, want) in [(0usize, 0.3), (1, 0.2), (2, 0.5)] {
            let mean = pts.iter().map(|p| p[axis]).sum::<f64>() / n;
            let var = pts.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var.sqrt() / want - 1.0).abs() < 0.05, "axis {axis}");
        }
    }

    #[test]
    fn constraints_hold() {
        let p = EnvParams {
            mean_count: 20.0,
            ..EnvParams::default()
        };
        let g = geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = draw_scene(&p, &g, vec![], &mut rng).unwrap();
            for (i, a) in s.scatterers.iter().enumerate() {
                assert!((a.center - g.rx_center()).norm() > g.r_r + a.radius);
                assert!(a.center.norm() > g.r_t + a.radius);
                for b in &s.scatterers[i + 1..] {
                    assert!(!a.intersects(&b.center, b.radius));
                }
            }
        }
    }

    #[test]
    fn packing_failure_reported() {
        let p = EnvParams {
            mean_count: 50.0,
            radius: 0.3,
            sigma_as: 0.01,
            sigma_es: 0.01,
            sigma_ds: 0.01,
            max_attempts: 20,
            ..EnvParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            draw_scene(&p, &geometry(), vec![], &mut rng),
            Err(Error::Packing { .. })
        ));
    }

    #[test]
    fn zero_step_leaves_scene_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = draw_scene(&EnvParams::default(), &geometry(), vec![], &mut rng).unwrap();
        let (n, c) = evolve(&s, Step::time(0.0), &mut rng).unwrap();
        assert_eq!(n.scatterers, s.scatterers);
        assert_eq!(c, StepCounts::default());
    }

    #[test]
    fn birth_mean_matches() {
        let p = EnvParams {
            lambda_b: 40.0,
            lambda_d: 4.0,
            mean_count: 0.0,
            enforce_constraints: false,
            ..EnvParams::default()
        };
        let g = geometry();
        let step = Step::time(5.0);
        let p_sur = survival_probability(&p, step.dt, 0.0, 0.0, 0.0, 0.0);
        let want = p.lambda_b / p.lambda_d * (1.0 - p_sur);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = Scene::empty(g, vec![], p);
        let n = 10_000;
        let total: usize = (0..n).map(|_| evolve(&s, step, &mut rng).unwrap().1.born).sum();
        let mean = total as f64 / n as f64;
        assert!((mean / want - 1.0).abs() < 0.03, "{mean} vs {want}");
    }

    #[test]
    fn alive_count_is_stationary() {
        let p = EnvParams {
            lambda_b: 40.0,
            lambda_d: 4.0,
            mean_count: 10.0,
            enforce_constraints: false,
            ..EnvParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = draw_scene(&p, &geometry(), vec![], &mut rng).unwrap();
        let mut counts = Vec::new();
        for _ in 0..300 {
            s = evolve(&s, Step::time(20.0), &mut rng).unwrap().0;
            counts.push(s.scatterers.len() as f64);
        }
        let a = counts[100..200].iter().sum::<f64>() / 100.0;
        let b = counts[200..300].iter().sum::<f64>() / 100.0;
        assert!((a / b - 1.0).abs() < 0.2, "{a} vs {b}");
    }

    #[test]
    fn survivors_keep_ids_and_runs_are_deterministic() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = draw_scene(
                &EnvParams::default(),
                &geometry(),
                vec![Vec3::new(0.0, 0.0, 2.0)],
                &mut rng,
            )
            .unwrap();
            let mut out = vec![serde_json::to_string(&s).unwrap()];
            for _ in 0..10 {
                let before: Vec<Scatterer> = s.scatterers.clone();
                s = evolve(&s, Step::time(20.0), &mut rng).unwrap().0;
                for sc in &s.scatterers {
                    if let Some(b) = before.iter().find(|b| b.id == sc.id) {
                        assert_eq!(b.center, sc.center);
                    }
                }
                out.push(serde_json::to_string(&s).unwrap());
            }
            out
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn elevation_examples() {
        let c = Vec3::zeros();
        let z = Vec3::z();
        assert!((elevation_from_axis(&Vec3::new(0.0, 0.0, 1.0), &c, &z) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(elevation_from_axis(&Vec3::new(1.0, 0.0, 0.0), &c, &z), 0.0);
    }
}
