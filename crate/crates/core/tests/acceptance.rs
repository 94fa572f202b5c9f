//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are never captured.
//! Numeric arguments select criteria (`cargo test --test acceptance -- 4 9`).
//! Criteria in `KNOWN_FAILURES` are reported as FAIL without failing the
//! run; if one of them passes the run fails, so the list cannot go stale.

use emchan::capacity::{
    dbm_to_power, draw_realization, multi_user_capacity, multi_user_capacity_precoded, single_user_sweep,
    CapacityReport, MultiUserScenario, Precoder, RealizedChannel, Transmitter,
};
use emchan::cli::{run, Command};
use emchan::geom::{ComplexVec3, Spherical, Vec3};
use emchan::green::{dyadic_green, radiated_field_integral, Part, SampledSource};
use emchan::optim::{solve_p1, solve_p2, sweep_svd_order, symbols, water_fill};
use emchan::quadrature::SphereQuadrature;
use emchan::scatter::{solve_induced_currents, MomConfig, Scatterer};
use emchan::specfun::{
    assoc_legendre, bessel_j, derivative_from_array, spherical_h1, spherical_harmonic, spherical_j, spherical_j_array,
    spherical_y, spherical_y_array,
};
use emchan::swf::{eval_V, green_expansion, mode_count, Geometry, Medium, RadiationOperator, SphIndex};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitBall, UnitSphere};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Criteria that do not hold for this implementation; the analysis for each
/// is in the README.
const KNOWN_FAILURES: &[u32] = &[6, 7, 9];

const FREQ: f64 = 30e9;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Counts individual checks and keeps the first few failures.
#[derive(Default)]
struct Tally {
    checks: usize,
    failed: usize,
    first: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.first.len() < 16 {
                self.first.push(what());
            }
        }
    }

    fn outcome(self, extra: &str) -> Outcome {
        let detail = if self.failed == 0 {
            format!("{} checks ok{extra}", self.checks)
        } else {
            format!(
                "{} of {} checks failed{extra}; {}",
                self.failed,
                self.checks,
                self.first.join("; ")
            )
        };
        Outcome {
            pass: self.failed == 0,
            detail,
        }
    }
}

type Criterion = fn() -> Result<Outcome, String>;

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, Duration, Criterion); 10] = [
        (1, "special functions", secs(10), c1_specfun),
        (2, "Green expansion", secs(30), c2_green_expansion),
        (3, "radiation oracle", secs(60), c3_radiation),
        (4, "optimization", secs(30), c4_optimization),
        (5, "err vs SVD order", secs(120), c5_err_sweep),
        (6, "power vs SVD order", secs(120), c6_power_sweep),
        (7, "MoM validity", secs(300), c7_mom),
        (8, "channel statistics", secs(600), c8_statistics),
        (9, "capacity orderings", secs(600), c9_capacity),
        (10, "determinism", secs(120), c10_determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, limit, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = f().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let took = t.elapsed();
        let in_time = took <= limit;
        let pass = out.pass && in_time;
        let timing = if in_time {
            format!("{:.1} s", took.as_secs_f64())
        } else {
            format!("{:.1} s, over the {} s limit", took.as_secs_f64(), limit.as_secs())
        };
        let known = KNOWN_FAILURES.contains(&id);
        let note = match (pass, known) {
            (false, true) => " [known failure]",
            (true, true) => " [listed as a known failure but passed]",
            _ => "",
        };
        println!(
            "criterion {id} {name}: {} ({timing}) {}{note}",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
        if pass == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn medium() -> Medium {
    Medium::vacuum(FREQ)
}

fn paper_geometry(l: f64) -> Geometry {
    Geometry {
        r_t: 2.0 * l,
        r_r: 20.0 * l,
        distance: 10.0,
    }
}

fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2f64.sqrt()
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::from(UnitSphere.sample(rng))
}

fn ball_point(rng: &mut ChaCha8Rng, center: Vec3, radius: f64) -> Vec3 {
    center + Vec3::from(UnitBall.sample(rng)) * radius
}

fn frobenius(m: &nalgebra::Matrix3<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------- 1

/// Power series for J_n, independent of the library's recurrences.
fn bessel_series(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..300 {
        term *= -(x * x / 4.0) / (f64::from(k) * f64::from(k + n));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn c1_specfun() -> Result<Outcome, String> {
    let mut t = Tally::default();
    let close = |t: &mut Tally, what: &str, got: f64, want: f64, tol: f64| {
        t.check((got - want).abs() <= tol, || format!("{what}: {got} vs {want}"));
    };

    // Bessel J_n: origin limits, series, first zero of J_0 by bisection
    close(&mut t, "J0(0)", bessel_j(0, 0.0).map_err(err)?, 1.0, 0.0);
    close(&mut t, "J1(0)", bessel_j(1, 0.0).map_err(err)?, 0.0, 0.0);
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_series(0, lo) * bessel_series(0, mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    close(&mut t, "J0 root", bessel_j(0, root).map_err(err)?, 0.0, 1e-10);
    close(
        &mut t,
        "J0(2.404825557695773)",
        bessel_j(0, 2.404825557695773).map_err(err)?,
        0.0,
        1e-10,
    );
    for n in 0..10 {
        for &x in &[0.2, 1.0, 3.7, 8.0, 12.5] {
            close(
                &mut t,
                &format!("J{n}({x})"),
                bessel_j(n, x).map_err(err)?,
                bessel_series(n, x),
                1e-12,
            );
        }
    }
    t.check(bessel_j(0, f64::NAN).is_err(), || "J0(NaN) accepted".into());

    // j_n, y_n closed forms for n ≤ 2; tolerance scaled by the largest term
    for &x in &[1.0, 2.5, 7.0, 19.0, 50.0, 100.0] {
        let (s, c) = (f64::sin(x), f64::cos(x));
        let x2 = x * x;
        let j = [s / x, s / x2 - c / x, (3.0 / x2 - 1.0) * s / x - 3.0 * c / x2];
        let y = [-c / x, -c / x2 - s / x, (-3.0 / x2 + 1.0) * c / x - 3.0 * s / x2];
        let scale = [1.0 / x, 1.0 / x2 + 1.0 / x, 3.0 / (x2 * x) + 1.0 / x + 3.0 / x2];
        for n in 0..3u32 {
            let tol = 1e-14 * scale[n as usize].max(1e-300) * 10.0;
            close(
                &mut t,
                &format!("j{n}({x})"),
                spherical_j(n, x).map_err(err)?,
                j[n as usize],
                tol,
            );
            close(
                &mut t,
                &format!("y{n}({x})"),
                spherical_y(n, x).map_err(err)?,
                y[n as usize],
                tol,
            );
            let h = spherical_h1(n, x).map_err(err)?;
            t.check(
                h.re == spherical_j(n, x).unwrap() && h.im == spherical_y(n, x).unwrap(),
                || format!("h{n}({x}) is not j + iy"),
            );
        }
    }
    close(
        &mut t,
        "j0(1)",
        spherical_j(0, 1.0).map_err(err)?,
        0.8414709848078965,
        1e-15,
    );
    close(
        &mut t,
        "j1(1)",
        spherical_j(1, 1.0).map_err(err)?,
        0.3011686789397568,
        1e-15,
    );
    close(&mut t, "j5(0)", spherical_j(5, 0.0).map_err(err)?, 0.0, 0.0);
    close(&mut t, "j0(0)", spherical_j(0, 0.0).map_err(err)?, 1.0, 0.0);
    close(
        &mut t,
        "y0(1)",
        spherical_y(0, 1.0).map_err(err)?,
        -0.5403023058681398,
        1e-15,
    );
    let h = spherical_h1(0, PI).map_err(err)?;
    close(&mut t, "Re h0(π)", h.re, 0.0, 1e-15);
    close(&mut t, "Im h0(π)", h.im, 1.0 / PI, 1e-15);
    t.check(spherical_y(1, 0.0).is_err(), || "y1(0) accepted".into());
    t.check(spherical_j(0, f64::INFINITY).is_err(), || "j0(inf) accepted".into());

    // three-term recurrence, n ≤ 30, x ∈ [0.1, 100]
    let xs: Vec<f64> = (0..40).map(|i| 0.1 * 1000f64.powf(f64::from(i) / 39.0)).collect();
    for &x in &xs {
        let j = spherical_j_array(31, x).map_err(err)?;
        for n in 1..=30 {
            let lhs = (2 * n + 1) as f64 * j[n];
            let rhs = x * (j[n - 1] + j[n + 1]);
            let scale = lhs.abs().max(x * j[n - 1].abs()).max(1e-300);
            t.check((lhs - rhs).abs() / scale < 1e-10, || format!("recurrence n={n} x={x}"));
        }
    }

    // Wronskian with analytic derivatives, then by finite differences
    for &x in &[0.3, 1.0, 2.7, 8.0, 30.0, 75.0] {
        let j = spherical_j_array(16, x).map_err(err)?;
        let y = spherical_y_array(16, x).map_err(err)?;
        for n in 0..15 {
            let w = j[n] * derivative_from_array(&y, n, x) - derivative_from_array(&j, n, x) * y[n];
            let want = 1.0 / (x * x);
            t.check(((w - want) / want).abs() < 1e-9, || {
                format!("Wronskian n={n} x={x}: {w}")
            });
        }
    }
    let (n, x, step) = (3u32, 2.7, 1e-5);
    let fd =
        |f: fn(u32, f64) -> emchan::Result<f64>| (f(n, x + step).unwrap() - f(n, x - step).unwrap()) / (2.0 * step);
    let w = spherical_j(n, x).map_err(err)? * fd(spherical_y) - fd(spherical_j) * spherical_y(n, x).map_err(err)?;
    close(&mut t, "finite-difference Wronskian", w, 1.0 / (x * x), 1e-7);

    // associated Legendre closed forms
    for &x in &[-1.0, -0.2, 0.0, 0.7, 1.0] {
        close(&mut t, "P00", assoc_legendre(0, 0, x).map_err(err)?, 1.0, 0.0);
    }
    close(
        &mut t,
        "P11(0.5)",
        assoc_legendre(1, 1, 0.5).map_err(err)?,
        0.75f64.sqrt(),
        1e-15,
    );
    close(
        &mut t,
        "P20(0.3)",
        assoc_legendre(2, 0, 0.3).map_err(err)?,
        -0.365,
        1e-15,
    );
    for &x in &[-0.9f64, -0.37, 0.0, 0.37, 0.81] {
        let s = (1.0 - x * x).sqrt();
        let cases = [
            (2, 1, 3.0 * x * s),
            (2, 2, 3.0 * s * s),
            (3, 0, 0.5 * (5.0 * x * x * x - 3.0 * x)),
            (3, 1, 1.5 * (5.0 * x * x - 1.0) * s),
            (3, 2, 15.0 * x * s * s),
            (3, 3, 15.0 * s * s * s),
            (4, 0, (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0),
        ];
        for (n, m, want) in cases {
            close(
                &mut t,
                &format!("P{n}{m}({x})"),
                assoc_legendre(n, m, x).map_err(err)?,
                want,
                1e-13,
            );
        }
    }
    t.check(assoc_legendre(2, 1, 1.5).is_err(), || "|x| > 1 accepted".into());

    // spherical harmonics
    close(
        &mut t,
        "Y00",
        spherical_harmonic(0, 0, 1.2, 0.4).re,
        0.28209479177387814,
        1e-15,
    );
    close(
        &mut t,
        "Y10(0)",
        spherical_harmonic(1, 0, 0.0, 0.0).re,
        (3.0 / (4.0 * PI)).sqrt(),
        1e-15,
    );
    for n in 0..10u32 {
        for m in 1..=n as i32 {
            let a = spherical_harmonic(n, m, 0.9, 2.2);
            let b = spherical_harmonic(n, -m, 0.9, 2.2);
            t.check(a.conj() == b, || format!("conjugation n={n} m={m}"));
        }
    }
    let q = SphereQuadrature::for_band(3);
    let s: f64 = q
        .nodes()
        .map(|(th, ph, w)| spherical_harmonic(3, 2, th, ph).norm_sqr() * w)
        .sum();
    close(&mut t, "∫|Y32|²", s, 1.0, 1e-10);
    let nmax = 12u32;
    let q = SphereQuadrature::for_band(nmax as usize);
    let nodes: Vec<_> = q.nodes().collect();
    let modes: Vec<(u32, i32)> = (0..=nmax)
        .flat_map(|n| (-(n as i32)..=n as i32).map(move |m| (n, m)))
        .collect();
    let vals: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|&(n, m)| {
            nodes
                .iter()
                .map(|&(th, ph, _)| spherical_harmonic(n, m, th, ph))
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for a in 0..modes.len() {
        for b in a..modes.len() {
            let s: Complex64 = (0..nodes.len())
                .map(|i| vals[a][i] * vals[b][i].conj() * nodes[i].2)
                .sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - want).norm());
        }
    }
    t.check(worst < 1e-9, || format!("orthonormality deviation {worst:.2e}"));
    Ok(t.outcome(&format!(", orthonormality deviation {worst:.1e}")))
}

// ---------------------------------------------------------------- 2

fn c2_green_expansion() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = medium().k();
    let mut t = Tally::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let rs = unit_vector(&mut rng) * rng.random_range(0.0..=2.0) / k;
        let rf = unit_vector(&mut rng) * rng.random_range(10.0..40.0) / k;
        let exp = green_expansion(&rf, &rs, k, 25).map_err(err)?;
        let closed = dyadic_green(&rf, &rs, k, Part::Full).map_err(err)?.0;
        let rel = frobenius(&(exp - closed)) / frobenius(&closed);
        worst = worst.max(rel);
        t.check(rel < 1e-4, || format!("pair {i}: relative error {rel:.2e}"));
    }
    Ok(t.outcome(&format!(", worst relative error {worst:.2e}")))
}

// ---------------------------------------------------------------- 3

fn c3_radiation() -> Result<Outcome, String> {
    let m = medium();
    let l = m.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = Tally::default();
    let mut worst = 0.0f64;
    let cases = [
        (
            Geometry {
                r_t: l,
                r_r: 3.0 * l,
                distance: 10.0 * l,
            },
            3usize,
        ),
        (
            Geometry {
                r_t: 2.0 * l,
                r_r: 5.0 * l,
                distance: 40.0 * l,
            },
            6,
        ),
    ];
    for (g, band) in cases {
        let op = RadiationOperator::new(g, m, None).map_err(err)?;
        let grid = op.current_grid();
        let used = mode_count(band);
        let vm = op.current_modes_on(&grid, used);
        for trial in 0..4 {
            let j: Vec<Complex64> = (0..op.mode_count())
                .map(|p| {
                    if p < used {
                        cnormal(&mut rng)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let current: Vec<ComplexVec3> = grid
                .spherical
                .iter()
                .zip(&vm)
                .map(|(sp, modes)| {
                    let mut c = [Complex64::new(0.0, 0.0); 3];
                    for (p, a) in j.iter().take(used).enumerate() {
                        for i in 0..3 {
                            c[i] += a * modes[p][i];
                        }
                    }
                    ComplexVec3::spherical(c, sp.theta, sp.phi)
                })
                .collect();
            let src = SampledSource {
                points: &grid.points,
                weights: &grid.weights,
                current: &current,
                center: Vec3::zeros(),
                radius: g.r_t,
            };
            for _ in 0..5 {
                let pt = ball_point(&mut rng, g.rx_center(), g.r_r);
                let a = op.radiate(&j, &pt).map_err(err)?;
                let b = radiated_field_integral(&src, &pt, op.k, op.omega, op.medium.mu).map_err(err)?;
                let rel = (a - b).norm() / b.norm();
                worst = worst.max(rel);
                t.check(rel < 1e-3, || format!("R_t = {}λ trial {trial}: {rel:.2e}", g.r_t / l));
            }
        }
    }
    Ok(t.outcome(&format!(", worst relative error {worst:.2e}")))
}

// ---------------------------------------------------------------- 4

/// Accelerated projected gradient on ‖Bj − s‖² over ‖j‖² ≤ P_T.
fn projected_gradient(b: &DMatrix<Complex64>, s: &DVector<Complex64>, p_t: f64) -> DVector<Complex64> {
    let smax = b.singular_values().max();
    let step = 1.0 / (2.0 * smax * smax);
    let radius = p_t.sqrt();
    let project = |x: DVector<Complex64>| {
        let n = x.norm();
        if n > radius {
            x * Complex64::from(radius / n)
        } else {
            x
        }
    };
    let mut x = DVector::zeros(b.ncols());
    let mut y = x.clone();
    let mut tk = 1.0f64;
    for _ in 0..400_000 {
        let g = b.adjoint() * (b * &y - s) * Complex64::from(2.0);
        let next = project(&y - g * Complex64::from(step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let moved = (&next - &x).norm();
        // restart momentum when the objective would increase
        let restart = (b * &next - s).norm_squared() > (b * &x - s).norm_squared();
        y = if restart {
            tk = 1.0;
            next.clone()
        } else {
            &next + (&next - &x) * Complex64::from((tk - 1.0) / t_next)
        };
        if !restart {
            tk = t_next;
        }
        x = next;
        if moved < 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

fn c4_optimization() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut t = Tally::default();
    let mut worst_obj = 0.0f64;
    for inst in 0..20 {
        let k = rng.random_range(2..=6usize);
        let p = [k - 1, k, 2 * k, 3 * k][inst % 4];
        let b = DMatrix::from_fn(k, p, |_, _| cnormal(&mut rng));
        let s = DVector::from_fn(k, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)));
        let free = solve_p1(&b, &s, 1e30).map_err(err)?.power;
        let p_t = free * [0.05, 0.4, 0.9, 3.0][(inst / 4) % 4];
        let sol = solve_p1(&b, &s, p_t).map_err(err)?;
        let j = DVector::from_column_slice(&sol.j);
        let bh_s = b.adjoint() * &s;
        let stationarity = (b.adjoint() * (&b * &j) + &j * Complex64::from(sol.lambda) - &bh_s).norm() / bh_s.norm();
        t.check(stationarity < 1e-8, || {
            format!("instance {inst}: stationarity {stationarity:.2e}")
        });
        let slack = (sol.lambda * (j.norm_squared() - p_t)).abs();
        t.check(slack < 1e-6 * p_t, || {
            format!("instance {inst}: slackness {slack:.2e} vs P_T {p_t:.2e}")
        });
        t.check(sol.lambda >= 0.0, || format!("instance {inst}: λ < 0"));
        t.check(j.norm_squared() <= p_t * (1.0 + 1e-9), || {
            format!("instance {inst}: power above P_T")
        });
        let x = projected_gradient(&b, &s, p_t);
        let err_pg = (&b * &x - &s).norm_squared() / s.norm_squared();
        let gap = (sol.err - err_pg).abs();
        worst_obj = worst_obj.max(gap);
        t.check(gap < 1e-5, || {
            format!("instance {inst}: err {} vs gradient oracle {err_pg}", sol.err)
        });
    }
    let mut worst_wf = 0.0f64;
    for inst in 0..20 {
        let sigma: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
        let p_t = rng.random_range(0.1..10.0);
        let alloc = water_fill(&sigma, p_t, 1.0).map_err(err)?;
        let c_wf = alloc.capacity(&sigma, 1.0);
        let cap = |p: [f64; 3]| -> f64 { (0..3).map(|i| (1.0 + sigma[i] * sigma[i] * p[i]).log2()).sum() };
        let g = 800;
        let mut best = f64::NEG_INFINITY;
        for a in 0..=g {
            for c in 0..=(g - a) {
                let p1 = p_t * a as f64 / g as f64;
                let p2 = p_t * c as f64 / g as f64;
                best = best.max(cap([p1, p2, (p_t - p1 - p2).max(0.0)]));
            }
        }
        let gap = (c_wf - best).abs();
        worst_wf = worst_wf.max(gap);
        t.check(gap < 1e-3, || {
            format!("water-fill instance {inst}: {c_wf} vs grid {best}")
        });
        let total: f64 = alloc.power.iter().sum();
        t.check((total - p_t).abs() < 1e-9 * p_t, || {
            format!("water-fill instance {inst}: power {total}")
        });
    }
    Ok(t.outcome(&format!(
        ", worst err gap {worst_obj:.1e}, worst water-fill gap {worst_wf:.1e}"
    )))
}

// ---------------------------------------------------------------- 5, 6

/// Transmit power large enough that the power constraint never binds.
const HUGE_DBM: f64 = 300.0;
const PLATEAU_ORDERS: [usize; 8] = [50, 100, 200, 300, 500, 700, 900, 1150];

/// SVD orders with the err and ‖j‖² reached at each.
type Sweep = (Vec<usize>, Vec<f64>, Vec<f64>);

fn svd_sweep(k: usize) -> Result<Sweep, String> {
    let m = medium();
    let g = paper_geometry(m.wavelength());
    let op = RadiationOperator::new(g, m, None).map_err(err)?;
    let sc = MultiUserScenario::new(m, g, k);
    let draw = draw_realization(&sc, 5, 0).map_err(err)?;
    let mut orders: Vec<usize> = (1..=4 * k).collect();
    orders.extend(
        PLATEAU_ORDERS
            .iter()
            .copied()
            .filter(|&p| p > 4 * k && p <= op.mode_count()),
    );
    let rows = sweep_svd_order(&draw.users, &op, &orders, dbm_to_power(HUGE_DBM)).map_err(err)?;
    Ok((
        orders,
        rows.iter().map(|r| r.err).collect(),
        rows.iter().map(|r| r.power).collect(),
    ))
}

fn c5_err_sweep() -> Result<Outcome, String> {
    let mut t = Tally::default();
    let mut ratios = Vec::new();
    for k in [2usize, 6, 10] {
        let (orders, e, _) = svd_sweep(k)?;
        for i in 1..orders.len() {
            // round-off floor once err reaches machine zero
            t.check(e[i] <= e[i - 1] + 1e-12, || {
                format!("K={k}: err rises at P={}", orders[i])
            });
        }
        let at = |p: usize| e[orders.iter().position(|&o| o == p).unwrap()];
        let ratio = at(k + 2) / at(k - 1);
        ratios.push(format!("K={k}: {ratio:.1e}"));
        t.check(ratio < 0.1, || format!("K={k}: err(K+2)/err(K−1) = {ratio:.3}"));
    }
    Ok(t.outcome(&format!(", err(K+2)/err(K−1) {}", ratios.join(", "))))
}

fn c6_power_sweep() -> Result<Outcome, String> {
    let mut t = Tally::default();
    let mut notes = Vec::new();
    for k in [2usize, 6, 10] {
        let (orders, _, pw) = svd_sweep(k)?;
        let peak = orders[(0..pw.len()).max_by(|&a, &b| pw[a].total_cmp(&pw[b])).unwrap()];
        t.check(peak + 1 >= k && peak <= k + 1, || format!("K={k}: peak at P={peak}"));
        let plateau = *pw.last().unwrap();
        let at3k = pw[orders.iter().position(|&o| o == 3 * k).unwrap()];
        let dev = (at3k - plateau).abs() / plateau;
        notes.push(format!("K={k}: peak P={peak}, ‖j‖²(3K)/plateau {:.3}", at3k / plateau));
        t.check(dev <= 0.1, || {
            format!(
                "K={k}: ‖j‖²(3K) = {at3k:.4e} is {:.0}% from the plateau {plateau:.4e} (P={})",
                100.0 * dev,
                orders.last().unwrap()
            )
        });
    }
    Ok(t.outcome(&format!(", {}", notes.join("; "))))
}

// ---------------------------------------------------------------- 7

fn c7_mom() -> Result<Outcome, String> {
    let m = medium();
    let (k, l) = (m.k(), m.wavelength());
    let mut t = Tally::default();

    // one small scatterer under single regular-mode incident fields
    let a = 0.3 / k;
    let centres = [
        Vec3::new(3.0 * l, 2.0 * l, 5.0 * l),
        Vec3::new(-1.5 * l, 0.7 * l, 2.0 * l),
        Vec3::new(0.4 * l, -2.2 * l, -3.1 * l),
    ];
    let mut worst = 0.0f64;
    for c in centres {
        for p in [1usize, 2, 5, 9, 14] {
            let idx = SphIndex::unflatten(p).map_err(err)?;
            let inc = move |r: &Vec3| Ok(eval_V(idx, &Spherical::from_cartesian(r), k).to_cartesian());
            let cfg = MomConfig {
                basis_count: 16,
                match_points: 64,
                ..MomConfig::default()
            };
            let (_, sol) = solve_induced_currents(&[Scatterer::new(0, c, a)], &m, inc, cfg).map_err(err)?;
            worst = worst.max(sol.residual);
            t.check(sol.residual < 0.01, || {
                format!("mode {p}: held-out residual {:.2}%", 100.0 * sol.residual)
            });
        }
    }

    // scattering-aware iteration on the default multi-scatterer scene
    let g = paper_geometry(l);
    let sc = MultiUserScenario::new(m, g, 10);
    let draw = draw_realization(&sc, 1, 0).map_err(err)?;
    let op = RadiationOperator::new(g, m, None).map_err(err)?;
    let tx = Transmitter::modes(op, 30).map_err(err)?;
    let ch = RealizedChannel::build(&sc, &tx, &draw, true).map_err(err)?;
    let response = ch.response.as_ref().ok_or("default scene has no live scatterers")?;
    let s = symbols(&draw.users);
    let mut max_iter = 0;
    let mut worst_gain = f64::NEG_INFINITY;
    for dbm in [0.0, 10.0, 20.0, 30.0, 40.0, 50.0] {
        match solve_p2(&ch.b, &s, response, dbm_to_power(dbm), 1e-3, 20) {
            Ok(rep) => {
                max_iter = max_iter.max(rep.iterations);
                let fin = *rep.err_trace.last().unwrap();
                worst_gain = worst_gain.max(fin - rep.err_blind);
                t.check(fin <= rep.err_blind, || {
                    format!(
                        "{dbm} dBm: final err {fin:.6e} above scatter-blind {:.6e}",
                        rep.err_blind
                    )
                });
            }
            Err(e) => t.check(false, || format!("{dbm} dBm: {e}")),
        }
    }
    Ok(t.outcome(&format!(
        ", worst single-scatterer residual {:.2}%, at most {max_iter} iterations, max(err − err_blind) {worst_gain:.1e}",
        100.0 * worst
    )))
}

// ---------------------------------------------------------------- 8

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Rows of a result table as column name → value.
fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, f64>>, String> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(err)?;
    let head = rd.headers().map_err(err)?.clone();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(err)?;
        let mut row = BTreeMap::new();
        for (h, v) in head.iter().zip(rec.iter()) {
            if let Ok(x) = v.parse::<f64>() {
                row.insert(h.to_string(), x);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn run_table(cmd: Command, config: &str, overrides: &[&str], file: &str) -> Result<Vec<BTreeMap<String, f64>>, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    run(&cmd, &config_path(config), &ov, Some(dir.path())).map_err(err)?;
    read_table(&dir.path().join(file))
}

/// ACF rows keyed by (scattering, t_ref, lag) → (magnitude, stderr).
fn acf_map(rows: &[BTreeMap<String, f64>]) -> BTreeMap<(u8, u64, u64), (f64, f64)> {
    rows.iter()
        .map(|r| {
            let key = (r["scattering"] as u8, r["t_ref_s"].to_bits(), r["lag_ms"].to_bits());
            (key, (r["magnitude"], r["stderr"]))
        })
        .collect()
}

fn apart(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs() / (a.1 * a.1 + b.1 * b.1).sqrt().max(f64::MIN_POSITIVE)
}

fn c8_statistics() -> Result<Outcome, String> {
    let mut t = Tally::default();
    let half = acf_map(&run_table(Command::Acf, "acf_scattering.toml", &[], "acf.csv")?);
    let quarter = acf_map(&run_table(
        Command::Acf,
        "acf_scattering.toml",
        &["grid.tx_spacing=0.25λ", "stats.t_refs=[0.0]"],
        "acf.csv",
    )?);
    let ccf = run_table(Command::Ccf, "ccf_scattering.toml", &[], "ccf.csv")?;

    // (a) faster decay with scatterers
    for (&(scat, tr, lag), &(mag, _)) in &half {
        if scat == 1 && f64::from_bits(lag) > 0.0 {
            let free = half[&(0, tr, lag)].0;
            t.check(mag < free, || {
                format!(
                    "ACF t={} lag={} ms: {mag} not below free {free}",
                    f64::from_bits(tr),
                    f64::from_bits(lag)
                )
            });
        }
    }
    for r in &ccf {
        if r["offset_wavelengths"] > 0.0 {
            let (s, f) = (r["scattering_magnitude"], r["free_magnitude"]);
            t.check(s < f, || {
                format!("CCF {}λ: {s} not below free {f}", r["offset_wavelengths"])
            });
        }
    }

    // (b) λ/2 and λ/4 Tx sampling agree within 2 standard errors
    let mut worst_b = 0.0f64;
    for (key, &q) in quarter.iter().filter(|(k, _)| k.0 == 1) {
        let h = *half.get(key).ok_or("λ/4 run has a row the λ/2 run lacks")?;
        let z = apart(h, q);
        let z = if h.0 == q.0 { 0.0 } else { z };
        worst_b = worst_b.max(z);
        t.check(z <= 2.0, || {
            format!("λ/2 vs λ/4 lag {} ms: {z:.2} SE apart", f64::from_bits(key.2))
        });
    }

    // (c) non-stationarity: t = 0 and t = 2 s differ somewhere
    let mut best_c = 0.0f64;
    for (&(scat, tr, lag), &v) in &half {
        if scat == 1 && f64::from_bits(tr) == 0.0 {
            if let Some(&w) = half.get(&(1, 2f64.to_bits(), lag)) {
                best_c = best_c.max(apart(v, w));
            }
        }
    }
    t.check(best_c > 2.0, || format!("t=0 vs t=2 s at most {best_c:.2} SE apart"));
    Ok(t.outcome(&format!(
        ", λ/2 vs λ/4 at most {worst_b:.2} SE, t=0 vs t=2 s up to {best_c:.1} SE"
    )))
}

// ---------------------------------------------------------------- 9

const DBM: [f64; 6] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0];
const ENSEMBLE: usize = 100;
const SEED9: u64 = 9;

fn mu_setup(r_t_wl: f64, distance: f64) -> Result<(MultiUserScenario, Transmitter), String> {
    let m = medium();
    let l = m.wavelength();
    let g = Geometry {
        r_t: r_t_wl * l,
        r_r: 20.0 * l,
        distance,
    };
    let op = RadiationOperator::new(g, m, None).map_err(err)?;
    Ok((
        MultiUserScenario::new(m, g, 10),
        Transmitter::modes(op, 30).map_err(err)?,
    ))
}

fn mu(r_t_wl: f64, distance: f64, scattering: bool) -> Result<CapacityReport, String> {
    let (sc, tx) = mu_setup(r_t_wl, distance)?;
    multi_user_capacity(&sc, &tx, &DBM, ENSEMBLE, SEED9, scattering).map_err(err)
}

fn increasing(t: &mut Tally, what: &str, c: &[f64]) {
    for i in 1..c.len() {
        t.check(c[i] > c[i - 1], || {
            format!("{what}: {:.4} then {:.4} at {} dBm", c[i - 1], c[i], DBM[i])
        });
    }
}

fn c9_capacity() -> Result<Outcome, String> {
    let mut t = Tally::default();
    let m = medium();
    let l = m.wavelength();

    // single user against P_T and R_t
    let mut su = Vec::new();
    for r_t in [0.5, 1.0, 1.5] {
        let g = Geometry {
            r_t: r_t * l,
            r_r: 10.0 * l,
            distance: 10.0,
        };
        let op = RadiationOperator::new(g, m, None).map_err(err)?;
        let rep = single_user_sweep(&op, &DBM, 1.0).map_err(err)?;
        increasing(&mut t, &format!("single user R_t={r_t}λ vs P_T"), &rep.capacity);
        su.push(rep.capacity);
    }
    for i in 0..DBM.len() {
        let col: Vec<f64> = su.iter().map(|c| c[i]).collect();
        increasing(&mut t, &format!("single user vs R_t at {} dBm", DBM[i]), &col);
    }

    // multi user against P_T, R_t and D, with scatterers
    let base = mu(2.0, 10.0, true)?;
    increasing(&mut t, "multi user vs P_T", &base.capacity);
    let by_rt = [mu(1.0, 10.0, true)?, base.clone(), mu(3.0, 10.0, true)?];
    let by_d = [mu(2.0, 5.0, true)?, base.clone(), mu(2.0, 20.0, true)?];
    for (i, dbm) in DBM.iter().enumerate() {
        let rt: Vec<f64> = by_rt.iter().map(|r| r.capacity[i]).collect();
        increasing(&mut t, &format!("multi user vs R_t at {dbm} dBm"), &rt);
        let d: Vec<f64> = by_d.iter().rev().map(|r| r.capacity[i]).collect();
        increasing(&mut t, &format!("multi user vs shrinking D at {dbm} dBm"), &d);
    }

    // with against without scatterers on matched seeds
    let without = mu(2.0, 10.0, false)?;
    let ratios: Vec<f64> = base
        .capacity
        .iter()
        .zip(&without.capacity)
        .map(|(a, b)| a / b)
        .collect();
    for (i, r) in ratios.iter().enumerate() {
        t.check(*r > 1.5, || format!("with/without scatterers {r:.3} at {} dBm", DBM[i]));
    }

    // SLNR against MMSE precoding
    let (sc, tx) = mu_setup(2.0, 10.0)?;
    let slnr = multi_user_capacity_precoded(&sc, &tx, Precoder::Slnr, &DBM, ENSEMBLE, SEED9, true).map_err(err)?;
    let mmse = multi_user_capacity_precoded(&sc, &tx, Precoder::Mmse, &DBM, ENSEMBLE, SEED9, true).map_err(err)?;
    for (i, dbm) in DBM.iter().enumerate() {
        let (a, b) = (slnr.capacity[i], mmse.capacity[i]);
        t.check(a >= b, || format!("SLNR {a:.4} below MMSE {b:.4} at {dbm} dBm"));
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    Ok(t.outcome(&format!(
        ", with/without ratio {} over {} dBm",
        fmt(&ratios),
        DBM.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("/")
    )))
}

// ---------------------------------------------------------------- 10

const SMALL_SCENARIO: &str = r#"
seed = 10

[geometry]
r_t = "1λ"
r_r = "5λ"
distance = "20λ"

[users]
count = 2

[environment]
sigma_ds = 0.02
sigma_as = 0.02
sigma_es = 0.02

[power]
dbm = [10.0, 30.0]

[stats]
ensemble_size = 4
with_scattering = true
t_refs = [0.0, 0.5]
lags_ms = [0.0, 1.0]
offsets_wavelengths = [0.0, 0.5]

[capacity]
ensemble_size = 3
with_scattering = true

[sweep]
max_order = 8

[pattern]
resolution = 24
"#;

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(err)? {
        let e = e.map_err(err)?;
        out.insert(
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path()).map_err(err)?,
        );
    }
    Ok(out)
}

fn c10_determinism() -> Result<Outcome, String> {
    let root = tempfile::tempdir().map_err(err)?;
    let config = root.path().join("scenario.toml");
    std::fs::write(&config, SMALL_SCENARIO).map_err(err)?;
    let scene = root.path().join("scene").join("scene-0.json");
    let commands = [
        ("scene", Command::SceneDump { index: 0 }),
        ("acf", Command::Acf),
        ("ccf", Command::Ccf),
        ("su", Command::CapacitySu),
        ("mu", Command::CapacityMu { scene: None }),
        ("mu-scene", Command::CapacityMu { scene: Some(scene) }),
        ("dof", Command::Dof),
        ("pattern", Command::Pattern),
        ("sweep", Command::SweepSvd),
        ("validate", Command::Validate),
    ];
    let mut t = Tally::default();
    for (name, cmd) in commands {
        let out = root.path().join(name);
        let mut seen = Vec::new();
        for _ in 0..2 {
            if out.exists() {
                std::fs::remove_dir_all(&out).map_err(err)?;
            }
            let res = run(&cmd, &config, &[], Some(&out)).map_err(err)?;
            let files = if out.exists() { snapshot(&out)? } else { BTreeMap::new() };
            seen.push((res.report, files));
        }
        t.check(!seen[0].1.is_empty() || seen[0].0.is_some(), || {
            format!("{name}: produced nothing")
        });
        t.check(seen[0] == seen[1], || format!("{name}: reruns differ"));
    }
    Ok(t.outcome(""))
}
