//! End-to-end scenario run: mesh, coefficient fields, traffic with routing,
//! emissions, steady wind, pollutant transport, diagnostics.
//!
//! Outputs land in `<output.dir>/<label>/`; the steady wind is cached in
//! `<output.dir>` under a key derived from everything the wind depends on, and
//! one summary row per label is kept in the shared table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::airflow::{read_wind_cache, write_wind_cache, WindModel};
use crate::diagnostics::{
    format_sci, mean_over_triangles, write_csv, write_vtk, zone_column_names, zone_means,
    FieldBundle, ZoneSeries,
};
use crate::eikonal::{default_eta, EikonalSolver};
use crate::emissions::EmissionFields;
use crate::mesh::{Mesh, ZoneMap};
use crate::scenario::{load_mesh, ConfigError, ScenarioConfig, ScenarioFields, TrafficDomain};
use crate::traffic::{run_traffic, TrafficCoefficients, TrafficModel, TrafficParams, TrafficRunOptions};
use crate::transport::{run_transport, EmissionSeries, TransportParams};

/// Environment variable overriding `scenario.threads`.
pub const THREADS_ENV: &str = "POROUS_CITY_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Mesh,
    Fields,
    Traffic,
    Emissions,
    Wind,
    Transport,
    Diagnostics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Mesh => "mesh",
            Self::Fields => "fields",
            Self::Traffic => "traffic",
            Self::Emissions => "emissions",
            Self::Wind => "wind",
            Self::Transport => "transport",
            Self::Diagnostics => "diagnostics",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

fn stage_err<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub wind_converged: bool,
    pub wind_steps: usize,
    pub wind_from_cache: bool,
    pub traffic_steps: usize,
    pub evacuation_time_h: Option<f64>,
    pub clamp_events: usize,
    pub node_steps: usize,
    pub max_budget_residual: f64,
    pub max_wall_normal_speed: f64,
    pub transport_steps: usize,
    pub transport_max_iterations: usize,
    pub transport_worst_undershoot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub label: String,
    pub config_hash: String,
    pub mesh_identity: String,
    pub module_versions: BTreeMap<String, String>,
    pub threads: usize,
    /// Wall time per stage [s], in execution order.
    pub stage_seconds: Vec<(Stage, f64)>,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub convergence: Convergence,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    /// Column names matching `time_means`: `city`, then urban and selected zones.
    pub zones: Vec<String>,
    /// Time-averaged zone concentration [kg/km²].
    pub time_means: Vec<f64>,
    pub evacuation_time_h: Option<f64>,
    /// Mean wind speed over the city [km/h].
    pub city_wind_speed: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: SummaryRow,
    pub series: Vec<ZoneSeries>,
}

/// `scenario.threads`, unless the environment variable sets a positive count.
pub fn resolve_threads(cfg: &ScenarioConfig) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(cfg.scenario.threads)
}

/// Key of the wind snapshot: mesh plus every input the wind depends on.
pub fn wind_cache_key(cfg: &ScenarioConfig, mesh: &Mesh) -> String {
    use sha2::{Digest, Sha256};
    let mut air = cfg.air.clone();
    air.cache = None;
    let inputs = serde_json::json!({
        "mesh": mesh.identity_hash(),
        "air": air,
        "medium": cfg.medium,
        "porosity": cfg.porosity,
        "city": cfg.scenario.city,
    });
    let digest = Sha256::digest(inputs.to_string().as_bytes());
    hex::encode(&digest[..8])
}

fn city_mean_speed(mesh: &Mesh, zones: &ZoneMap, v: &[[f64; 2]]) -> f64 {
    let speed: Vec<f64> = v.iter().map(|w| w[0].hypot(w[1])).collect();
    mean_over_triangles(mesh, &speed, &zones.city_triangles(), "city").unwrap_or(0.0)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let threads = resolve_threads(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(stage_err(Stage::Mesh))?;
    pool.install(|| run_in_pool(cfg, threads))
}

fn run_in_pool(cfg: &ScenarioConfig, threads: usize) -> Result<RunOutcome, PipelineError> {
    let label = cfg.label();
    let out_root = cfg.output.dir.clone();
    let run_dir = out_root.join(&label);
    std::fs::create_dir_all(&run_dir).map_err(stage_err(Stage::Diagnostics))?;
    let mut stage_seconds = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, seconds: &mut Vec<(Stage, f64)>| {
        seconds.push((stage, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let (mesh, zones) = load_mesh(cfg).map_err(stage_err(Stage::Mesh))?;
    lap(Stage::Mesh, &mut stage_seconds);

    let fields = ScenarioFields::build(&mesh, &zones, cfg).map_err(stage_err(Stage::Fields))?;
    let domain = TrafficDomain::build(&mesh, &zones, &fields, cfg).map_err(stage_err(Stage::Fields))?;
    let coeffs = cfg.emission_set()?.clone();
    lap(Stage::Fields, &mut stage_seconds);

    let sub = domain.mesh();
    let model = TrafficModel::new(
        sub,
        TrafficCoefficients {
            porosity: domain.porosity.clone(),
            permeability: domain.permeability.clone(),
            parking: domain.parking.clone(),
            demand: domain.demand.clone(),
        },
        TrafficParams::from_config(cfg),
    );
    let eta = cfg.routing.eta.unwrap_or_else(|| default_eta(&mesh));
    let mut router = EikonalSolver::new(sub, &domain.attraction, eta);
    let traffic = run_traffic(
        &model,
        &mut router,
        &domain.urban_mask,
        domain.initial_density.clone(),
        &TrafficRunOptions::from_config(cfg),
    )
    .map_err(stage_err(Stage::Traffic))?;
    lap(Stage::Traffic, &mut stage_seconds);

    let n = mesh.n_nodes();
    let emission: Vec<EmissionFields> = traffic
        .snapshots
        .par_iter()
        .map(|s| EmissionFields::compute(&s.rho, &s.u, &s.accel, &coeffs))
        .collect();
    let ec_fields: Vec<Vec<f64>> = emission
        .iter()
        .map(|e| domain.sub.prolong(&e.concentration, n, 0.0))
        .collect();
    let ec_times: Vec<f64> = traffic.snapshots.iter().map(|s| s.t).collect();
    let ec_series = EmissionSeries::new(ec_times, ec_fields).map_err(stage_err(Stage::Emissions))?;
    lap(Stage::Emissions, &mut stage_seconds);

    let key = wind_cache_key(cfg, &mesh);
    let cache_path = match &cfg.air.cache {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => out_root.join(p),
        None => out_root.join(format!("wind-{key}.bin")),
    };
    let wind_model = WindModel::from_scenario(&mesh, &fields, cfg);
    let (wind, wind_steps, wind_converged, from_cache) = match read_wind_cache(&cache_path, n) {
        Ok(c) => (c.v, c.steps, c.converged, true),
        Err(_) => {
            let run = wind_model.run_to_steady().map_err(stage_err(Stage::Wind))?;
            write_wind_cache(&cache_path, &run).map_err(stage_err(Stage::Wind))?;
            (run.state.v, run.steps, run.converged, false)
        }
    };
    lap(Stage::Wind, &mut stage_seconds);

    let tparams = TransportParams::from_config(cfg).map_err(stage_err(Stage::Transport))?;
    let transport = run_transport(
        &mesh,
        &wind,
        &fields.porosity,
        &ec_series,
        vec![0.0; n],
        &tparams,
        cfg.time.t_end,
        cfg.time.output_every,
    )
    .map_err(stage_err(Stage::Transport))?;
    lap(Stage::Transport, &mut stage_seconds);

    let names = zone_column_names(&zones);
    let means: Vec<Vec<f64>> = transport
        .snapshots
        .par_iter()
        .map(|s| zone_means(&mesh, &zones, &s.phi))
        .collect::<Result<_, _>>()
        .map_err(stage_err(Stage::Diagnostics))?;
    let mut series: Vec<ZoneSeries> = names.iter().map(ZoneSeries::new).collect();
    for (s, m) in transport.snapshots.iter().zip(&means) {
        for (z, v) in series.iter_mut().zip(m) {
            z.push(s.t, *v).map_err(stage_err(Stage::Diagnostics))?;
        }
    }
    let mut outputs = Vec::new();
    write_csv(&run_dir.join("zones.csv"), &series).map_err(stage_err(Stage::Diagnostics))?;
    outputs.push("zones.csv".to_string());

    let mut vehicles = ZoneSeries::new("vehicles");
    for s in &traffic.snapshots {
        vehicles
            .push(s.t, model.vehicles(&s.rho))
            .map_err(stage_err(Stage::Diagnostics))?;
    }
    write_csv(&run_dir.join("vehicles.csv"), &[vehicles]).map_err(stage_err(Stage::Diagnostics))?;
    outputs.push("vehicles.csv".to_string());

    if cfg.output.vtk {
        for (k, s) in transport.snapshots.iter().enumerate() {
            let traffic_snap = traffic.snapshots.iter().find(|q| (q.t - s.t).abs() < 1e-9);
            let mut bundle = FieldBundle::default()
                .scalar("phi", s.phi.clone())
                .scalar("ec", ec_series.at(s.t))
                .scalar("porosity", fields.porosity.clone());
            if let Some(q) = traffic_snap {
                bundle = bundle
                    .scalar("rho", domain.sub.prolong(&q.rho, n, 0.0))
                    .vector("u", domain.sub.prolong(&q.u, n, [0.0; 2]));
            }
            bundle = bundle.vector("wind", wind.clone());
            let name = format!("fields_{k:04}.vtk");
            write_vtk(&run_dir.join(&name), &mesh, &bundle, &format!("{label} t={:.4} h", s.t))
                .map_err(stage_err(Stage::Diagnostics))?;
            outputs.push(name);
        }
    }

    let time_means: Vec<f64> = if series.first().is_some_and(|s| s.times.len() >= 2) {
        series
            .iter()
            .map(|s| s.time_mean())
            .collect::<Result<_, _>>()
            .map_err(stage_err(Stage::Diagnostics))?
    } else {
        series.iter().map(|s| s.values.first().copied().unwrap_or(0.0)).collect()
    };
    let summary = SummaryRow {
        label: label.clone(),
        zones: names,
        time_means,
        evacuation_time_h: traffic.evacuation_time,
        city_wind_speed: city_mean_speed(&mesh, &zones, &wind),
    };
    let table = match &cfg.output.table {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => out_root.join(p),
        None => out_root.join("table1.csv"),
    };
    upsert_summary(&table, &summary).map_err(stage_err(Stage::Diagnostics))?;
    lap(Stage::Diagnostics, &mut stage_seconds);

    let manifest = RunManifest {
        label,
        config_hash: cfg.hash(),
        mesh_identity: mesh.identity_hash(),
        module_versions: BTreeMap::from([(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
        threads,
        stage_seconds,
        outputs: {
            let mut o = outputs;
            o.push("manifest.json".into());
            o
        },
        convergence: Convergence {
            wind_converged,
            wind_steps,
            wind_from_cache: from_cache,
            traffic_steps: traffic.steps,
            evacuation_time_h: traffic.evacuation_time,
            clamp_events: traffic.clamp_events,
            node_steps: traffic.node_steps,
            max_budget_residual: traffic.max_budget_residual,
            max_wall_normal_speed: traffic.max_wall_normal_speed,
            transport_steps: transport.steps,
            transport_max_iterations: transport.max_iterations,
            transport_worst_undershoot: transport.worst_undershoot,
        },
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(stage_err(Stage::Diagnostics))?;
    std::fs::write(run_dir.join("manifest.json"), json + "\n").map_err(stage_err(Stage::Diagnostics))?;
    Ok(RunOutcome {
        run_dir,
        manifest,
        summary,
        series,
    })
}

const TABLE_TAIL: [&str; 2] = ["evacuation_h", "city_wind_kmh"];

fn summary_header(row: &SummaryRow) -> String {
    let mut cols = vec!["label".to_string()];
    cols.extend(row.zones.iter().map(|z| format!("Phi_{z}")));
    cols.extend(TABLE_TAIL.iter().map(|s| s.to_string()));
    cols.join(",")
}

fn summary_line(row: &SummaryRow) -> String {
    let mut cols = vec![row.label.clone()];
    cols.extend(row.time_means.iter().map(|v| format_sci(*v)));
    cols.push(row.evacuation_time_h.map(format_sci).unwrap_or_else(|| "none".into()));
    cols.push(format_sci(row.city_wind_speed));
    cols.join(",")
}

/// Replaces the row carrying `row.label` or appends it. A table with another
/// header is started afresh.
pub fn upsert_summary(path: &Path, row: &SummaryRow) -> std::io::Result<()> {
    let header = summary_header(row);
    let line = summary_line(row);
    let mut lines: Vec<String> = match std::fs::read_to_string(path) {
        Ok(text) if text.lines().next() == Some(header.as_str()) => {
            text.lines().skip(1).map(str::to_string).collect()
        }
        _ => Vec::new(),
    };
    let prefix = format!("{},", row.label);
    match lines.iter_mut().find(|l| l.starts_with(&prefix)) {
        Some(l) => *l = line,
        None => lines.push(line),
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = header + "\n";
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    std::fs::write(path, text)
}

/// Reads a summary table back as `(label, values)` rows.
pub fn read_summary(path: &Path) -> std::io::Result<(Vec<String>, Vec<(String, Vec<String>)>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| {
            let mut it = l.split(',').map(str::to_string);
            let label = it.next().unwrap_or_default();
            (label, it.collect())
        })
        .collect();
    Ok((header, rows))
}
