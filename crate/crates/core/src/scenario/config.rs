//! Scenario configuration: TOML schema, defaults and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mesh::{Disc, Point, SideTags};

/// Microscopic-to-macroscopic unit factor (km/h per m/s, and s per h / 1000).
pub const GAMMA1: f64 = 3.6;
/// Scales a km/h² acceleration to m/s².
pub const GAMMA2: f64 = 1e-3 / (3.6 * 3.6);

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("line {line}: key `{key}` lacks a `# [unit]` annotation")]
    MissingUnit { line: usize, key: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CityKind {
    Dense,
    Disperse,
}

impl CityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Disperse => "disperse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: String,
    pub city: CityKind,
    /// Label used for the summary table row; derived from `city` and the
    /// speed limit when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub threads: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "city".into(),
            city: CityKind::Dense,
            label: None,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    /// Final time [h].
    pub t_end: f64,
    /// Snapshot cadence [h].
    pub output_every: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_end: 2.0,
            output_every: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectedDisc {
    pub name: String,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    /// External MSH file; the synthetic generator is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub width: f64,
    pub height: f64,
    pub city_radius: f64,
    pub h: f64,
    pub sides: SideTags,
    pub obstacles: Vec<Disc>,
    pub selected: Vec<SelectedDisc>,
}

impl Default for MeshSection {
    fn default() -> Self {
        let sel = |name: &str, x: f64, y: f64, r: f64| SelectedDisc {
            name: name.into(),
            center: [x, y],
            radius: r,
        };
        Self {
            file: None,
            width: 40.0,
            height: 30.0,
            city_radius: 10.0,
            h: 1.0,
            sides: SideTags::default(),
            obstacles: vec![
                Disc {
                    center: [5.0, 6.0],
                    radius: 2.0,
                },
                Disc {
                    center: [34.0, 24.0],
                    radius: 2.5,
                },
            ],
            selected: vec![
                sel("industrial", 14.5, 11.5, 1.8),
                sel("campus", 25.0, 18.5, 1.6),
                sel("park_north", 19.0, 21.5, 1.4),
                sel("park_east", 26.5, 11.0, 1.4),
                sel("park_west", 12.5, 18.0, 1.4),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PorositySection {
    pub dense_center: f64,
    pub disperse_center: f64,
    pub layout: f64,
    pub rural: f64,
    pub selected: f64,
}

impl Default for PorositySection {
    fn default() -> Self {
        Self {
            dense_center: 0.38,
            disperse_center: 0.68,
            layout: 0.82,
            rural: 1.0,
            selected: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermeabilityModel {
    /// `K = k_ref ε³/(1−ε)²`, capped at `k_max`.
    KozenyCarman,
    /// `K = k_ref` everywhere.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumSection {
    pub permeability: PermeabilityModel,
    /// [km²]
    pub k_ref: f64,
    /// [km²]
    pub k_max: f64,
    /// Forchheimer coefficient shared by traffic and air [1].
    pub forchheimer: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        Self {
            permeability: PermeabilityModel::KozenyCarman,
            k_ref: 0.1,
            k_max: 1000.0,
            forchheimer: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    Ring,
    Peak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialDensity {
    pub mode: DensityMode,
    /// [veh/km²]
    pub peak: f64,
    /// [km]
    pub ring_radius: f64,
    /// [km]
    pub spread: f64,
    /// Defaults to the city centroid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
}

impl Default for InitialDensity {
    fn default() -> Self {
        Self {
            mode: DensityMode::Ring,
            peak: 300.0,
            ring_radius: 6.5,
            spread: 1.5,
            center: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// [km/h]
    pub u_max: f64,
    /// [veh/km²]
    pub rho_max: f64,
    /// Anticipation factor; `c² = θ/ρ_max` [1].
    pub theta: f64,
    /// [km²/h]
    pub nu: f64,
    /// [1/h]
    pub kappa0: f64,
    /// [km]
    pub kappa_spread: f64,
    /// [h]
    pub tau: f64,
    /// [km²/h]
    pub mu: f64,
    /// Traffic demand on the solid phase [veh/km²/h].
    pub demand: f64,
    /// Keeps the `c²ρ(∇·u)(1,1)` term; off for sensitivity studies.
    pub pressure_term: bool,
    /// Adds the minimal symmetric diffusion that makes the advective operators
    /// local-extremum diminishing.
    pub upwind: bool,
    pub cfl_safety: f64,
    /// Run ends early once `∫ερ` drops below this [veh].
    pub vehicle_epsilon: f64,
    pub initial: InitialDensity,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            u_max: 45.0,
            rho_max: 800.0,
            theta: 20.0,
            nu: 0.05,
            kappa0: 3.0,
            kappa_spread: 4.0,
            tau: 0.05,
            mu: 1.0,
            demand: 0.0,
            pressure_term: true,
            upwind: true,
            cfl_safety: 0.4,
            vehicle_epsilon: 500.0,
            initial: InitialDensity::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingSection {
    /// Regularization length [km]; a tenth of the domain diameter when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Attraction strength [1/km²].
    pub g0: f64,
    /// [km]
    pub g_spread: f64,
    /// Recompute the route every this many traffic steps.
    pub refresh_every: usize,
    /// Attraction point; defaults to the city centroid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
}

impl Default for RoutingSection {
    fn default() -> Self {
        Self {
            eta: None,
            g0: 1.0,
            g_spread: 1.5,
            refresh_every: 10,
            center: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AirSection {
    /// [km/h]
    pub inlet: [f64; 2],
    /// [kg/km³]
    pub rho: f64,
    /// Eddy viscosity [km²/h].
    pub mu: f64,
    /// [km/h per h]
    pub steady_tol: f64,
    pub max_steps: usize,
    pub cfl_safety: f64,
    /// Carry the previous pressure in the tentative step and solve for its
    /// increment.
    pub incremental: bool,
    /// Snapshot file for the converged wind, relative to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl Default for AirSection {
    fn default() -> Self {
        Self {
            inlet: [5.0, -5.0],
            rho: 1.2e9,
            mu: 1.0,
            steady_tol: 1e-4,
            max_steps: 200_000,
            cfl_safety: 0.4,
            incremental: true,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    pub species: String,
    /// [km²/h]
    pub mu_phi: f64,
    /// [1/h]
    pub sigma: f64,
    /// [h]
    pub dt: f64,
    /// Second stabilization parameter; not supported, must stay zero.
    pub zeta2: f64,
    pub reuse_matrix: bool,
    pub rel_tol: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            species: "co2".into(),
            mu_phi: 0.5,
            sigma: 0.1,
            dt: 0.01,
            zeta2: 0.0,
            reuse_matrix: true,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionCoefficients {
    /// `f₁…f₆` of the regression polynomial in (U [m/s], a [m/s²]).
    pub f: [f64; 6],
    pub provenance: String,
}

impl EmissionCoefficients {
    /// Petrol passenger car, CO₂ [g/s].
    pub fn petrol_car_co2() -> Self {
        Self {
            f: [0.553, 0.161, -0.00289, 0.266, 0.511, 0.183],
            provenance: "Int Panis, Broekx, Liu (2006), Sci. Total Environ. 371:270-285, \
                         petrol car CO2"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub vtk: bool,
    /// Shared summary table across runs, relative to `dir`'s parent when relative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: true,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub time: TimeSection,
    pub mesh: MeshSection,
    pub porosity: PorositySection,
    pub medium: MediumSection,
    pub traffic: TrafficSection,
    pub routing: RoutingSection,
    pub air: AirSection,
    pub transport: TransportSection,
    pub emissions: BTreeMap<String, EmissionCoefficients>,
    pub output: OutputSection,
}

/// The scenario shipped with the repository.
pub const SHIPPED_SCENARIO: &str = include_str!("../../../../scenarios/city.toml");

impl ScenarioConfig {
    /// Built-in defaults plus the shipped CO₂ coefficient set.
    pub fn with_shipped_emissions() -> Self {
        let mut c = Self::default();
        c.emissions
            .insert("co2".into(), EmissionCoefficients::petrol_car_co2());
        c
    }

    /// Parses, lints unit annotations and validates.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        check_unit_annotations(text)?;
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(file), Some(dir)) = (cfg.mesh.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn center_porosity(&self) -> f64 {
        match self.scenario.city {
            CityKind::Dense => self.porosity.dense_center,
            CityKind::Disperse => self.porosity.disperse_center,
        }
    }

    /// `c² = θ/ρ_max`.
    pub fn c_squared(&self) -> f64 {
        self.traffic.theta / self.traffic.rho_max
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.scenario.label {
            return l.clone();
        }
        let base = self.scenario.city.as_str().to_string();
        if (self.traffic.u_max - TrafficSection::default().u_max).abs() > 1e-12 {
            format!("{base}-u{}", self.traffic.u_max)
        } else {
            base
        }
    }

    pub fn emission_set(&self) -> Result<&EmissionCoefficients, ConfigError> {
        let key = &self.transport.species;
        self.emissions
            .get(key)
            .ok_or_else(|| ConfigError::MissingKey(format!("emissions.{key}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        };
        let nonneg = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be non-negative, got {v}")))
            }
        };

        if self.scenario.threads == 0 {
            return Err(invalid("scenario.threads", "must be at least 1"));
        }
        nonneg("time.t_end", self.time.t_end)?;
        pos("time.output_every", self.time.output_every)?;

        if self.mesh.file.is_none() {
            pos("mesh.width", self.mesh.width)?;
            pos("mesh.height", self.mesh.height)?;
            pos("mesh.city_radius", self.mesh.city_radius)?;
            pos("mesh.h", self.mesh.h)?;
        }

        let p = &self.porosity;
        for (key, v) in [
            ("porosity.dense_center", p.dense_center),
            ("porosity.disperse_center", p.disperse_center),
            ("porosity.layout", p.layout),
            ("porosity.selected", p.selected),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(key, format!("must lie in (0, 1], got {v}")));
            }
        }
        if p.rural != 1.0 {
            return Err(invalid("porosity.rural", "must equal 1.0"));
        }
        if p.dense_center > p.layout || p.disperse_center > p.layout {
            return Err(invalid(
                "porosity.layout",
                "center porosity must not exceed the layout value",
            ));
        }

        pos("medium.k_ref", self.medium.k_ref)?;
        pos("medium.k_max", self.medium.k_max)?;
        nonneg("medium.forchheimer", self.medium.forchheimer)?;

        let t = &self.traffic;
        pos("traffic.u_max", t.u_max)?;
        pos("traffic.rho_max", t.rho_max)?;
        nonneg("traffic.theta", t.theta)?;
        nonneg("traffic.nu", t.nu)?;
        nonneg("traffic.kappa0", t.kappa0)?;
        pos("traffic.kappa_spread", t.kappa_spread)?;
        pos("traffic.tau", t.tau)?;
        nonneg("traffic.mu", t.mu)?;
        nonneg("traffic.demand", t.demand)?;
        nonneg("traffic.vehicle_epsilon", t.vehicle_epsilon)?;
        if !(t.cfl_safety > 0.0 && t.cfl_safety <= 1.0) {
            return Err(invalid("traffic.cfl_safety", "must lie in (0, 1]"));
        }
        if t.initial.peak < 0.0 || !t.initial.peak.is_finite() {
            return Err(invalid("traffic.initial.peak", "must be non-negative"));
        }
        pos("traffic.initial.spread", t.initial.spread)?;
        nonneg("traffic.initial.ring_radius", t.initial.ring_radius)?;

        if let Some(eta) = self.routing.eta {
            pos("routing.eta", eta)?;
        }
        pos("routing.g0", self.routing.g0)?;
        pos("routing.g_spread", self.routing.g_spread)?;
        if self.routing.refresh_every == 0 {
            return Err(invalid("routing.refresh_every", "must be at least 1"));
        }

        let a = &self.air;
        if !(a.inlet[0].is_finite() && a.inlet[1].is_finite()) {
            return Err(invalid("air.inlet", "must be finite"));
        }
        pos("air.rho", a.rho)?;
        nonneg("air.mu", a.mu)?;
        pos("air.steady_tol", a.steady_tol)?;
        if a.max_steps == 0 {
            return Err(invalid("air.max_steps", "must be at least 1"));
        }
        if !(a.cfl_safety > 0.0 && a.cfl_safety <= 1.0) {
            return Err(invalid("air.cfl_safety", "must lie in (0, 1]"));
        }

        let tr = &self.transport;
        nonneg("transport.mu_phi", tr.mu_phi)?;
        nonneg("transport.sigma", tr.sigma)?;
        pos("transport.dt", tr.dt)?;
        pos("transport.rel_tol", tr.rel_tol)?;
        if tr.zeta2 != 0.0 {
            return Err(invalid(
                "transport.zeta2",
                "the second stabilization term is not implemented; set 0",
            ));
        }

        let set = self.emission_set()?;
        if set.f.iter().any(|v| !v.is_finite()) {
            return Err(invalid(
                &format!("emissions.{}.f", tr.species),
                "coefficients must be finite",
            ));
        }
        if set.provenance.trim().is_empty() {
            return Err(ConfigError::MissingKey(format!(
                "emissions.{}.provenance",
                tr.species
            )));
        }
        Ok(())
    }
}

/// Every `key = <number>` or `key = [<numbers>]` line must end with a
/// `# [unit]` comment.
pub fn check_unit_annotations(text: &str) -> Result<(), ConfigError> {
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let Some((key, rest)) = line.split_once('=') else {
            continue;
        };
        let value = rest.split('#').next().unwrap_or("").trim();
        let numeric = value
            .trim_start_matches(['[', '{', ' '])
            .starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        if !numeric {
            continue;
        }
        let annotated = rest
            .split_once('#')
            .map(|(_, c)| {
                let c = c.trim();
                c.starts_with('[') && c.contains(']')
            })
            .unwrap_or(false);
        if !annotated {
            return Err(ConfigError::MissingUnit {
                line: k + 1,
                key: key.trim().to_string(),
            });
        }
    }
    Ok(())
}
