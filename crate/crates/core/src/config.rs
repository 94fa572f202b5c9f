//! TOML scenario files.
//!
//! Lengths are written either as plain numbers (metres) or as strings with
//! a unit: `"2λ"`, `"2 lambda"`, `"0.5 m"`, `"5 mm"`. Unknown keys are
//! rejected. `--set a.b=value` overrides are applied to the parsed document
//! before it is checked, so they obey the same schema.

use crate::capacity::{MultiUserScenario, Precoder};
use crate::channel_stats::Cut;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::green::Part;
use crate::optim::{default_polarization, P2Method};
use crate::scatter::MomConfig;
use crate::stochastic_env::EnvParams;
use crate::swf::{default_truncation, mode_count, Geometry, Medium};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Seed used when the scenario omits one.
pub const DEFAULT_SEED: u64 = 1;

/// A length in metres or with an explicit unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Metres(f64),
    Text(String),
}

impl Length {
    pub fn wavelengths(x: f64) -> Self {
        Length::Text(format!("{x}λ"))
    }

    /// Value in metres for carrier wavelength `lambda`.
    pub fn resolve(&self, lambda: f64) -> Result<f64> {
        let v = match self {
            Length::Metres(v) => *v,
            Length::Text(s) => {
                let t = s.trim();
                let (num, unit) = split_unit(t);
                let x: f64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot read length {s:?}")))?;
                let scale = match unit.trim() {
                    "" | "m" => 1.0,
                    "mm" => 1e-3,
                    "cm" => 1e-2,
                    "λ" | "lambda" | "wl" => lambda,
                    u => return Err(Error::Config(format!("unknown length unit {u:?} in {s:?}"))),
                };
                x * scale
            }
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("length {self:?} is not finite")));
        }
        Ok(v)
    }
}

fn split_unit(t: &str) -> (&str, &str) {
    let idx = t
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    // an exponent marker must be followed by a digit to count as numeric
    let (num, unit) = t.split_at(idx);
    if let Some(stripped) = num.strip_suffix(['e', 'E']) {
        return (stripped, &t[stripped.len()..]);
    }
    (num, unit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumConfig {
    /// Carrier frequency (Hz).
    pub frequency: f64,
    /// Permeability (H/m); vacuum when absent.
    pub mu: Option<f64>,
    /// Permittivity (F/m); vacuum when absent.
    pub eps: Option<f64>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        Self {
            frequency: 30e9,
            mu: None,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub r_t: Length,
    pub r_r: Length,
    /// Distance between the ball centres.
    pub distance: Length,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            r_t: Length::wavelengths(2.0),
            r_r: Length::wavelengths(20.0),
            distance: Length::Metres(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersConfig {
    /// Number of users K, drawn uniformly in the Rx ball.
    pub count: usize,
    /// Polarisation gains (r, θ, φ) as [re, im] pairs; (1, 1, 1)/√3 when absent.
    pub polarization: Option<[[f64; 2]; 3]>,
}

impl Default for UsersConfig {
    fn default() -> Self {
        Self {
            count: 10,
            polarization: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainChoice {
    #[default]
    Modes,
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Tx lattice spacing δ_t.
    pub tx_spacing: Length,
    /// Rx lattice spacing δ_r.
    pub rx_spacing: Length,
    /// Kernel used by lattice channels.
    pub field_model: Part,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            tx_spacing: Length::wavelengths(0.5),
            rx_spacing: Length::wavelengths(0.5),
            field_model: Part::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// SVD order P; 3K when absent.
    pub svd_order: Option<usize>,
    /// Truncation degree; ⌈kR_t⌉ + 10 when absent.
    pub n_trunc: Option<usize>,
    pub eps1: f64,
    pub max_iter: usize,
    pub p2_method: P2Method,
    /// Channel rows from radiation modes or from the Tx lattice.
    pub domain: DomainChoice,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            svd_order: None,
            n_trunc: None,
            eps1: 1e-3,
            max_iter: 20,
            p2_method: P2Method::Iterative,
            domain: DomainChoice::Modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    /// Transmit powers (dBm, relative to noise N at 30 dBm = 1).
    pub dbm: Vec<f64>,
    pub noise: f64,
    /// Radiation efficiency η ∈ (0, 1].
    pub efficiency: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            dbm: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            noise: 1.0,
            efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurrentChoice {
    /// Symbol-matching current of the first realization's users.
    #[default]
    Optimized,
    UniformZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub ensemble_size: usize,
    pub with_scattering: bool,
    /// Reference times (s).
    pub t_refs: Vec<f64>,
    /// Non-negative ascending lags (ms).
    pub lags_ms: Vec<f64>,
    /// Rx velocity (m/s).
    pub velocity: [f64; 3],
    /// CCF offsets along x from the Rx centre (wavelengths).
    pub offsets_wavelengths: Vec<f64>,
    pub current: CurrentChoice,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 200,
            with_scattering: true,
            t_refs: vec![0.0, 2.0],
            lags_ms: vec![0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0],
            velocity: [1.0, 0.0, 0.0],
            offsets_wavelengths: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            current: CurrentChoice::Optimized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub ensemble_size: usize,
    pub with_scattering: bool,
    pub precoder: Option<Precoder>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 100,
            with_scattering: true,
            precoder: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Largest SVD order; 4K when absent.
    pub max_order: Option<usize>,
    pub p_t_dbm: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_order: None,
            p_t_dbm: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub cut: Cut,
    pub resolution: usize,
    /// Evaluation radius; 100λ beyond the Rx shell when absent.
    pub radius: Option<Length>,
    /// Transmit power of the optimised current (dBm).
    pub p_t_dbm: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            cut: Cut::Theta { phi: 0.0 },
            resolution: 360,
            radius: None,
            p_t_dbm: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// A complete scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub medium: MediumConfig,
    pub geometry: GeometryConfig,
    pub users: UsersConfig,
    pub environment: EnvParams,
    pub mom: MomConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub power: PowerConfig,
    pub stats: StatsConfig,
    pub capacity: CapacityConfig,
    pub sweep: SweepConfig,
    pub pattern: PatternConfig,
    pub output: OutputConfig,
}

/// Scenario with every length in metres and defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub seed_defaulted: bool,
    pub medium: Medium,
    pub geometry: Geometry,
    pub n_trunc: usize,
    pub svd_order: usize,
    pub tx_spacing: f64,
    pub rx_spacing: f64,
    pub pattern_radius: Option<f64>,
    pub scenario: Scenario,
}

impl Resolved {
    pub fn multi_user(&self) -> MultiUserScenario {
        let s = &self.scenario;
        let mut mu = MultiUserScenario::new(self.medium, self.geometry, s.users.count);
        mu.polarization = s
            .users
            .polarization
            .map(|w| w.map(|c| Complex64::new(c[0], c[1])))
            .unwrap_or_else(default_polarization);
        mu.env = s.environment;
        mu.mom = s.mom;
        mu.noise = s.power.noise;
        mu.eps1 = s.solver.eps1;
        mu.max_iter = s.solver.max_iter;
        mu.p2_method = s.solver.p2_method;
        mu.efficiency = s.power.efficiency;
        mu
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::from(self.scenario.stats.velocity)
    }

    /// Mode count P_max implied by the truncation degree.
    pub fn mode_count(&self) -> usize {
        mode_count(self.n_trunc)
    }
}

impl Scenario {
    /// Parses TOML text, applies `key.path=value` overrides and checks the
    /// schema.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolves units and defaults and checks physical consistency.
    pub fn resolve(&self) -> Result<Resolved> {
        let m = &self.medium;
        let vac = Medium::vacuum(m.frequency);
        let medium = Medium {
            frequency: m.frequency,
            mu: m.mu.unwrap_or(vac.mu),
            eps: m.eps.unwrap_or(vac.eps),
        };
        if !(medium.frequency > 0.0 && medium.mu > 0.0 && medium.eps > 0.0) {
            return Err(Error::Config("frequency, mu and eps must be positive".into()));
        }
        let lambda = medium.wavelength();
        let g = &self.geometry;
        let geometry = Geometry {
            r_t: g.r_t.resolve(lambda)?,
            r_r: g.r_r.resolve(lambda)?,
            distance: g.distance.resolve(lambda)?,
        };
        geometry.validate()?;
        self.environment.validate()?;
        let n_trunc = self
            .solver
            .n_trunc
            .unwrap_or_else(|| default_truncation(medium.k(), geometry.r_t));
        if n_trunc == 0 {
            return Err(Error::Config("solver.n_trunc must be ≥ 1".into()));
        }
        let k = self.users.count;
        let svd_order = self.solver.svd_order.unwrap_or(3 * k.max(1));
        if svd_order == 0 || svd_order > mode_count(n_trunc) {
            return Err(Error::Config(format!(
                "solver.svd_order = {svd_order} outside 1..={}",
                mode_count(n_trunc)
            )));
        }
        let tx_spacing = self.grid.tx_spacing.resolve(lambda)?;
        let rx_spacing = self.grid.rx_spacing.resolve(lambda)?;
        if !(tx_spacing > 0.0 && rx_spacing > 0.0) {
            return Err(Error::Config("grid spacings must be positive".into()));
        }
        let pattern_radius = self.pattern.radius.as_ref().map(|r| r.resolve(lambda)).transpose()?;
        let resolved = Resolved {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            seed_defaulted: self.seed.is_none(),
            medium,
            geometry,
            n_trunc,
            svd_order,
            tx_spacing,
            rx_spacing,
            pattern_radius,
            scenario: self.clone(),
        };
        resolved.multi_user().validate()?;
        Ok(resolved)
    }
}

/// Sets `a.b.c = value` in a TOML table, creating intermediate tables.
/// The value is read as TOML when possible, otherwise as a bare string.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {spec:?}: {key} is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
