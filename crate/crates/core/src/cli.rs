//! Subcommand orchestration and result files.
//!
//! Every table is written as comma-separated values preceded by `# ` lines
//! carrying the artifact version, units and the fully resolved scenario,
//! then a single column-header line. A JSON manifest listing the outputs
//! is written next to them. Output depends only on (scenario, seed,
//! version): realizations use per-index RNG streams and are reduced in
//! index order, so the worker-thread count does not change any byte.

use crate::capacity::{
    dbm_to_power, draw_realization, multi_user_capacity, multi_user_capacity_precoded, realization_capacity,
    realization_capacity_precoded, single_user_capacity, single_user_sweep, CapacityReport, SceneDraw, Transmitter,
};
use crate::channel_stats::{
    ccf_analytic, cubic_ball_points, default_pattern_radius, radiation_pattern, spatial_ccf, temporal_acf,
    CorrelationEstimate, StatsSetup, TxCurrent,
};
use crate::config::{CurrentChoice, DomainChoice, Resolved, Scenario};
use crate::error::{Error, Result};
use crate::geom::{ComplexVec3, Vec3};
use crate::optim::{build_beam_vectors, solve_p1, sweep_svd_order, symbols, water_fill};
use crate::scatter::{solve_induced_currents, Scatterer};
use crate::swf::{mode_count, RadiationOperator, SphIndex};
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "EMCHAN_THREADS";

const TOLERANCE_NOTE: &str = "bit-identical for identical scenario, seed and version on one platform; \
     across platforms expect relative differences near 1e-12 from libm and summation order in linear algebra kernels";

/// A subcommand and its specific options.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Acf,
    Ccf,
    CapacitySu,
    CapacityMu { scene: Option<PathBuf> },
    Dof,
    Pattern,
    SweepSvd,
    SceneDump { index: usize },
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Acf => "acf",
            Command::Ccf => "ccf",
            Command::CapacitySu => "capacity-su",
            Command::CapacityMu { .. } => "capacity-mu",
            Command::Dof => "dof",
            Command::Pattern => "pattern",
            Command::SweepSvd => "sweep-svd",
            Command::SceneDump { .. } => "scene-dump",
            Command::Validate => "validate",
        }
    }
}

/// Files written by a run, or the report printed by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub report: Option<String>,
}

/// A table with a one-line header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest representation that reads back to the same f64, in exponent
/// form outside [1e-4, 1e7).
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    subcommand: &'a str,
    seed: u64,
    seed_defaulted: bool,
    tolerance: &'a str,
    outputs: Vec<String>,
    notes: &'a [String],
    config: &'a Resolved,
}

struct Writer<'a> {
    dir: PathBuf,
    cmd: &'a str,
    resolved: &'a Resolved,
    files: Vec<PathBuf>,
    notes: Vec<String>,
}

impl<'a> Writer<'a> {
    fn new(dir: PathBuf, cmd: &'a str, resolved: &'a Resolved) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            cmd,
            resolved,
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    fn config_json(&self) -> Result<String> {
        serde_json::to_string(self.resolved).map_err(|e| Error::Config(e.to_string()))
    }

    fn csv(&mut self, name: &str, units: &str, table: &Table) -> Result<()> {
        let mut head = String::new();
        writeln!(head, "# emchan {VERSION} {}", self.cmd).unwrap();
        writeln!(head, "# units: {units}").unwrap();
        writeln!(head, "# tolerance: {TOLERANCE_NOTE}").unwrap();
        for n in &self.notes {
            writeln!(head, "# note: {n}").unwrap();
        }
        writeln!(head, "# config: {}", self.config_json()?).unwrap();
        let mut w = csv::WriterBuilder::new().from_writer(head.into_bytes());
        w.write_record(&table.columns).map_err(csv_err)?;
        for r in &table.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            version: VERSION,
            subcommand: self.cmd,
            seed: self.resolved.seed,
            seed_defaulted: self.resolved.seed_defaulted,
            tolerance: TOLERANCE_NOTE,
            outputs: self
                .files
                .iter()
                .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
            notes: &self.notes,
            config: self.resolved,
        };
        let name = format!("{}.manifest.json", self.cmd);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(&name, text.as_bytes())?;
        Ok(self.files)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn operator(r: &Resolved) -> Result<RadiationOperator> {
    RadiationOperator::new(r.geometry, r.medium, Some(r.n_trunc))
}

fn transmitter(r: &Resolved) -> Result<Transmitter> {
    match r.scenario.solver.domain {
        DomainChoice::Modes => Transmitter::modes(operator(r)?, r.svd_order),
        DomainChoice::Lattice => Transmitter::lattice(&r.geometry, r.medium, r.tx_spacing, r.scenario.grid.field_model),
    }
}

const POWER_UNITS: &str = "P_T in dBm with P_T = 10^((dBm-30)/10) relative to noise power N; capacity in bit/s/Hz";

/// Runs `cmd` on the scenario at `config` with `overrides`; `out` replaces
/// the scenario's output directory when given.
pub fn run(cmd: &Command, config: &Path, overrides: &[String], out: Option<&Path>) -> Result<RunOutput> {
    let scenario = Scenario::load(config, overrides)?;
    run_scenario(cmd, &scenario, out)
}

pub fn run_scenario(cmd: &Command, scenario: &Scenario, out: Option<&Path>) -> Result<RunOutput> {
    let r = scenario.resolve()?;
    if let Command::Validate = cmd {
        return Ok(RunOutput {
            files: Vec::new(),
            report: Some(validate_report(&r)),
        });
    }
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&r.scenario.output.dir));
    let mut w = Writer::new(dir, cmd.name(), &r)?;
    if r.seed_defaulted {
        w.notes.push(format!("seed not set; using default {}", r.seed));
    }
    match cmd {
        Command::CapacitySu => capacity_su(&r, &mut w)?,
        Command::Dof => dof(&r, &mut w)?,
        Command::CapacityMu { scene } => capacity_mu(&r, scene.as_deref(), &mut w)?,
        Command::SceneDump { index } => {
            let draw = draw_realization(&r.multi_user(), r.seed, *index)?;
            w.json(&format!("scene-{index}.json"), &draw)?;
        }
        Command::SweepSvd => sweep(&r, &mut w)?,
        Command::Pattern => pattern(&r, &mut w)?,
        Command::Acf => acf(&r, &mut w)?,
        Command::Ccf => ccf(&r, &mut w)?,
        Command::Validate => unreachable!(),
    }
    Ok(RunOutput {
        files: w.finish()?,
        report: None,
    })
}

/// Schema, geometry and cost summary; runs no simulation.
pub fn validate_report(r: &Resolved) -> String {
    let l = r.medium.wavelength();
    let g = r.geometry;
    let tx_pts = cubic_ball_points(&Vec3::zeros(), g.r_t, r.tx_spacing).map_or(0, |p| p.len());
    let rx_pts = cubic_ball_points(&g.rx_center(), g.r_r, r.rx_spacing).map_or(0, |p| p.len());
    let mut s = String::new();
    writeln!(s, "scenario ok").unwrap();
    writeln!(s, "wavelength: {} m (k = {} rad/m)", num(l), num(r.medium.k())).unwrap();
    writeln!(
        s,
        "geometry: R_t = {} m ({}λ), R_r = {} m ({}λ), D = {} m, Rayleigh distance 2(2R_t)²/λ = {} m",
        num(g.r_t),
        num(g.r_t / l),
        num(g.r_r),
        num(g.r_r / l),
        num(g.distance),
        num(8.0 * g.r_t * g.r_t / l)
    )
    .unwrap();
    writeln!(
        s,
        "truncation: N_trunc = {}, P_max = {}",
        r.n_trunc,
        mode_count(r.n_trunc)
    )
    .unwrap();
    writeln!(
        s,
        "svd order: P = {} for K = {} users",
        r.svd_order, r.scenario.users.count
    )
    .unwrap();
    writeln!(s, "lattices: {tx_pts} Tx points, {rx_pts} Rx points").unwrap();
    let mom = r.scenario.mom;
    writeln!(
        s,
        "mom: {} basis functions and {} match points per scatterer, mean {} scatterers",
        mom.basis_count, mom.match_points, r.scenario.environment.mean_count
    )
    .unwrap();
    match mom_resolution(r) {
        Ok(res) if res > MOM_RESIDUAL_FLAG => writeln!(
            s,
            "flag: single-scatterer held-out residual {} exceeds {}; raise mom.basis_count or lower environment.radius",
            num(res),
            num(MOM_RESIDUAL_FLAG)
        )
        .unwrap(),
        Ok(res) => writeln!(s, "mom residual: {} (single scatterer, plane wave)", num(res)).unwrap(),
        Err(e) => writeln!(s, "flag: mom resolution check failed: {e}").unwrap(),
    }
    let cost = mode_count(r.n_trunc) as f64 * (r.n_trunc as f64 + 8.0).powi(2);
    writeln!(s, "cost: operator build ~ {cost:.2e} mode-node evaluations").unwrap();
    if r.seed_defaulted {
        writeln!(s, "flag: seed not set; default {} used", r.seed).unwrap();
    } else {
        writeln!(s, "seed: {}", r.seed).unwrap();
    }
    s
}

/// Held-out residual above which `validate` flags the MoM discretisation.
pub const MOM_RESIDUAL_FLAG: f64 = 0.05;

/// Held-out residual for one scatterer of the configured radius under an
/// x-polarised plane wave travelling along z.
pub fn mom_resolution(r: &Resolved) -> Result<f64> {
    let k = r.medium.k();
    let q = Scatterer::new(0, Vec3::zeros(), r.scenario.environment.radius);
    let (_, sol) = solve_induced_currents(
        &[q],
        &r.medium,
        |p: &Vec3| {
            let ph = Complex64::from_polar(1.0, k * p.z);
            Ok(ComplexVec3::cartesian([ph, Complex64::from(0.0), Complex64::from(0.0)]))
        },
        r.scenario.mom,
    )?;
    Ok(sol.residual)
}

fn capacity_su(r: &Resolved, w: &mut Writer) -> Result<()> {
    let op = operator(r)?;
    let rep = single_user_sweep(&op, &r.scenario.power.dbm, r.scenario.power.noise)?;
    let mut t = Table::new(&["p_t_dbm", "p_t", "capacity", "dof"]);
    let dof = rep.dof.clone().unwrap_or_default();
    for (i, d) in rep.p_t_dbm.iter().enumerate() {
        t.push(vec![
            num(*d),
            num(dbm_to_power(*d)),
            num(rep.capacity[i]),
            dof[i].to_string(),
        ]);
    }
    w.csv("capacity-su.csv", POWER_UNITS, &t)
}

fn dof(r: &Resolved, w: &mut Writer) -> Result<()> {
    let op = operator(r)?;
    let noise = r.scenario.power.noise;
    let sigma: Vec<f64> = op.sigma.iter().map(|s| s.abs()).collect();
    let mut t = Table::new(&["p_t_dbm", "p_t", "dof", "water_level", "capacity"]);
    for &d in &r.scenario.power.dbm {
        let p_t = dbm_to_power(d);
        let alloc = water_fill(&sigma, p_t, noise)?;
        let (c, _) = single_user_capacity(&op, p_t, noise)?;
        t.push(vec![
            num(d),
            num(p_t),
            alloc.dof.to_string(),
            num(alloc.water_level),
            num(c),
        ]);
    }
    w.csv("dof.csv", POWER_UNITS, &t)?;
    let mut sv = Table::new(&["p", "n", "m", "l", "sigma"]);
    for (i, s) in op.sigma.iter().enumerate() {
        let idx = SphIndex::unflatten(i + 1)?;
        sv.push(vec![
            (i + 1).to_string(),
            idx.n.to_string(),
            idx.m.to_string(),
            idx.l.to_string(),
            num(*s),
        ]);
    }
    w.csv(
        "singular-values.csv",
        "sigma_p in V/A (field per unit current coefficient)",
        &sv,
    )
}

fn report_table(rep: &CapacityReport) -> Table {
    let mut t = Table::new(&["p_t_dbm", "p_t", "capacity", "stderr"]);
    for (i, d) in rep.p_t_dbm.iter().enumerate() {
        let se = rep.stderr.as_ref().map(|s| s[i]);
        t.push(vec![num(*d), num(dbm_to_power(*d)), num(rep.capacity[i]), opt(se)]);
    }
    t
}

fn capacity_mu(r: &Resolved, scene: Option<&Path>, w: &mut Writer) -> Result<()> {
    let sc = r.multi_user();
    let tx = transmitter(r)?;
    let cfg = &r.scenario.capacity;
    let dbm = &r.scenario.power.dbm;
    let rep = match scene {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let draw: SceneDraw =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if draw.users.len() != sc.users {
                return Err(Error::Config(format!(
                    "scene has {} users but the scenario sets users.count = {}",
                    draw.users.len(),
                    sc.users
                )));
            }
            w.notes.push(format!(
                "evaluated on scene file {} (realization {})",
                path.display(),
                draw.index
            ));
            let caps = match cfg.precoder {
                Some(p) => realization_capacity_precoded(&sc, &tx, &draw, p, dbm, cfg.with_scattering)?,
                None => realization_capacity(&sc, &tx, &draw, dbm, cfg.with_scattering)?.0,
            };
            CapacityReport {
                p_t_dbm: dbm.clone(),
                capacity: caps.clone(),
                stderr: None,
                dof: None,
                variant: None,
                ensemble_size: 1,
                max_p2_iterations: 0,
                samples: vec![caps],
            }
        }
        None => match cfg.precoder {
            Some(p) => multi_user_capacity_precoded(&sc, &tx, p, dbm, cfg.ensemble_size, r.seed, cfg.with_scattering)?,
            None => multi_user_capacity(&sc, &tx, dbm, cfg.ensemble_size, r.seed, cfg.with_scattering)?,
        },
    };
    w.notes.push(format!(
        "scattering = {}, precoder = {}, ensemble_size = {}, max P2 iterations = {}",
        cfg.with_scattering,
        cfg.precoder.map_or("none".into(), |p| format!("{p:?}").to_lowercase()),
        rep.ensemble_size,
        rep.max_p2_iterations
    ));
    w.csv("capacity-mu.csv", POWER_UNITS, &report_table(&rep))?;
    if scene.is_none() {
        let mut t = Table::new(&["realization", "p_t_dbm", "capacity"]);
        for (i, s) in rep.samples.iter().enumerate() {
            for (d, c) in dbm.iter().zip(s) {
                t.push(vec![i.to_string(), num(*d), num(*c)]);
            }
        }
        w.csv("capacity-mu-samples.csv", POWER_UNITS, &t)?;
    }
    Ok(())
}

fn sweep(r: &Resolved, w: &mut Writer) -> Result<()> {
    let op = operator(r)?;
    let k = r.scenario.users.count;
    let pmax = r.scenario.sweep.max_order.unwrap_or(4 * k.max(1)).min(op.mode_count());
    let draw = draw_realization(&r.multi_user(), r.seed, 0)?;
    let orders: Vec<usize> = (1..=pmax).collect();
    let p_t = dbm_to_power(r.scenario.sweep.p_t_dbm);
    let rows = sweep_svd_order(&draw.users, &op, &orders, p_t)?;
    w.notes.push(format!(
        "K = {k}, P_T = {} dBm, users of realization 0",
        num(r.scenario.sweep.p_t_dbm)
    ));
    let mut t = Table::new(&["p", "err", "power", "lambda"]);
    for row in rows {
        t.push(vec![row.p.to_string(), num(row.err), num(row.power), num(row.lambda)]);
    }
    w.csv("sweep-svd.csv", "err is relative squared error; power is ‖j‖²", &t)
}

fn optimized_current(
    r: &Resolved,
    op: &RadiationOperator,
    p_t: f64,
) -> Result<(SceneDraw, Vec<num_complex::Complex64>)> {
    let draw = draw_realization(&r.multi_user(), r.seed, 0)?;
    if draw.users.is_empty() {
        return Err(Error::Config("an optimised current needs users.count ≥ 1".into()));
    }
    let b = build_beam_vectors(&draw.users, op, r.svd_order)?;
    let sol = solve_p1(&b, &symbols(&draw.users), p_t)?;
    Ok((draw, sol.j))
}

fn pattern(r: &Resolved, w: &mut Writer) -> Result<()> {
    let op = operator(r)?;
    let cfg = &r.scenario.pattern;
    let (draw, j) = optimized_current(r, &op, dbm_to_power(cfg.p_t_dbm))?;
    for (i, u) in draw.users.iter().enumerate() {
        let p = u.position;
        w.notes.push(format!(
            "user {i} at ({}, {}, {}) m, polar angle {} deg, azimuth {} deg",
            num(p.x),
            num(p.y),
            num(p.z),
            num((p.z / p.norm()).clamp(-1.0, 1.0).acos().to_degrees()),
            num(p.y.atan2(p.x).to_degrees())
        ));
    }
    let radius = r.pattern_radius.unwrap_or_else(|| default_pattern_radius(&op));
    let rows = radiation_pattern(&op, &j, cfg.cut, cfg.resolution, radius)?;
    let mut t = Table::new(&["angle_deg", "e_r", "e_theta", "e_phi"]);
    for row in rows {
        t.push(vec![num(row.angle_deg), num(row.e_r), num(row.e_theta), num(row.e_phi)]);
    }
    w.csv(
        "pattern.csv",
        "angle in degrees along the cut; field magnitudes in V/m",
        &t,
    )
}

fn stats_setup(r: &Resolved, with_scattering: bool, rx_points: Vec<Vec3>) -> StatsSetup {
    StatsSetup {
        medium: r.medium,
        geometry: r.geometry,
        env: r.scenario.environment,
        mom: r.scenario.mom,
        rx_points,
        velocity: r.velocity(),
        with_scattering,
        model: r.scenario.grid.field_model,
    }
}

fn acf(r: &Resolved, w: &mut Writer) -> Result<()> {
    let cfg = &r.scenario.stats;
    let tx_points = cubic_ball_points(&Vec3::zeros(), r.geometry.r_t, r.tx_spacing)?;
    let cell = [r.tx_spacing; 3];
    let draw = draw_realization(&r.multi_user(), r.seed, 0)?;
    let rx: Vec<Vec3> = draw.users.iter().map(|u| u.position).collect();
    if rx.is_empty() {
        return Err(Error::Config("the ACF needs users.count ≥ 1 Rx sample points".into()));
    }
    let current = match cfg.current {
        CurrentChoice::UniformZ => TxCurrent::uniform_z(tx_points, cell),
        CurrentChoice::Optimized => {
            let op = operator(r)?;
            let (_, j) = optimized_current(r, &op, dbm_to_power(*r.scenario.power.dbm.last().unwrap_or(&30.0)))?;
            TxCurrent::from_modes(&op, &j, tx_points, cell)?
        }
    };
    let lags: Vec<f64> = cfg.lags_ms.iter().map(|l| l * 1e-3).collect();
    let mut variants = vec![false];
    if cfg.with_scattering {
        variants.push(true);
    }
    let mut t = Table::new(&["scattering", "t_ref_s", "lag_ms", "re", "im", "magnitude", "stderr"]);
    for &scat in &variants {
        let setup = stats_setup(r, scat, rx.clone());
        for &t_ref in &cfg.t_refs {
            let est = temporal_acf(&setup, &current, t_ref, &lags, cfg.ensemble_size, r.seed)?;
            for (i, l) in cfg.lags_ms.iter().enumerate() {
                t.push(vec![
                    u8::from(scat).to_string(),
                    num(t_ref),
                    num(*l),
                    num(est.value[i].re),
                    num(est.value[i].im),
                    num(est.magnitude[i]),
                    num(est.stderr[i]),
                ]);
            }
        }
    }
    w.notes.push(format!(
        "Tx lattice spacing {} m, {} Rx points, ensemble_size {}",
        num(r.tx_spacing),
        rx.len(),
        cfg.ensemble_size
    ));
    w.csv(
        "acf.csv",
        "t_ref in s, lag in ms; correlation normalised at zero lag",
        &t,
    )
}

fn ccf(r: &Resolved, w: &mut Writer) -> Result<()> {
    let cfg = &r.scenario.stats;
    let l = r.medium.wavelength();
    let tx_points = cubic_ball_points(&Vec3::zeros(), r.geometry.r_t, r.tx_spacing)?;
    let cell = [r.tx_spacing; 3];
    let reference = r.geometry.rx_center();
    let offsets: Vec<Vec3> = cfg
        .offsets_wavelengths
        .iter()
        .map(|o| Vec3::new(o * l, 0.0, 0.0))
        .collect();
    let draw = draw_realization(&r.multi_user(), r.seed, 0)?;
    let rx: Vec<Vec3> = draw.users.iter().map(|u| u.position).collect();
    let free_setup = stats_setup(r, false, rx.clone());
    let analytic = ccf_analytic(&free_setup, &tx_points, cell, &reference, &offsets)?;
    let free = spatial_ccf(
        &free_setup,
        &tx_points,
        cell,
        &reference,
        &offsets,
        cfg.ensemble_size,
        r.seed,
    )?;
    let scat: Option<CorrelationEstimate> = if cfg.with_scattering {
        Some(spatial_ccf(
            &stats_setup(r, true, rx),
            &tx_points,
            cell,
            &reference,
            &offsets,
            cfg.ensemble_size,
            r.seed,
        )?)
    } else {
        None
    };
    let mut t = Table::new(&[
        "offset_wavelengths",
        "analytic_re",
        "analytic_im",
        "analytic_magnitude",
        "free_re",
        "free_im",
        "free_magnitude",
        "free_stderr",
        "scattering_re",
        "scattering_im",
        "scattering_magnitude",
        "scattering_stderr",
    ]);
    for (i, o) in cfg.offsets_wavelengths.iter().enumerate() {
        let s = scat.as_ref();
        t.push(vec![
            num(*o),
            num(analytic[i].re),
            num(analytic[i].im),
            num(analytic[i].norm()),
            num(free.value[i].re),
            num(free.value[i].im),
            num(free.magnitude[i]),
            num(free.stderr[i]),
            opt(s.map(|e| e.value[i].re)),
            opt(s.map(|e| e.value[i].im)),
            opt(s.map(|e| e.magnitude[i])),
            opt(s.map(|e| e.stderr[i])),
        ]);
    }
    w.notes.push(format!(
        "spatially white Tx current on a {} m lattice ({} points), offsets along x from the Rx centre",
        num(r.tx_spacing),
        tx_points.len()
    ));
    w.csv(
        "ccf.csv",
        "offset in wavelengths; correlation normalised at zero offset",
        &t,
    )
}
