//! Whole-pipeline runs on a coarse city, the wind snapshot cache and plume
//! transport under a uniform wind.

use porous_city::airflow::{read_wind_cache, write_wind_cache, WindModel};
use porous_city::diagnostics::{parse_csv, plume_centroid};
use porous_city::mesh::{structured_rectangle, BoundaryTag, SideTags};
use porous_city::pipeline::{read_summary, run_scenario};
use porous_city::scenario::{load_mesh, ScenarioConfig, ScenarioFields, SHIPPED_SCENARIO};
use porous_city::transport::{run_transport, EmissionSeries, TransportParams};

fn coarse(dir: &std::path::Path) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_toml_str(SHIPPED_SCENARIO).unwrap();
    cfg.mesh.h = 3.0;
    cfg.time.t_end = 0.3;
    cfg.time.output_every = 0.1;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

#[test]
fn coarse_run_writes_every_listed_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse(dir.path());
    let out = run_scenario(&cfg).unwrap();
    let m = &out.manifest;
    assert_eq!(m.config_hash, cfg.hash());
    assert_eq!(m.stage_seconds.len(), 7);
    for name in &m.outputs {
        let len = std::fs::metadata(out.run_dir.join(name)).map(|md| md.len()).unwrap_or(0);
        assert!(len > 0, "{name} missing or empty");
    }
    assert_eq!(m.outputs.iter().filter(|o| o.ends_with(".vtk")).count(), 4);
    let zones = parse_csv(&std::fs::read_to_string(out.run_dir.join("zones.csv")).unwrap()).unwrap();
    assert_eq!(zones[0].zone, "city");
    assert_eq!(zones[0].times.len(), 4);
    assert!(m.convergence.wind_converged);
    // The scheme is not monotone; the worst min/max ratio over all steps is
    // reported, not enforced.
    let undershoot = m.convergence.transport_worst_undershoot;
    assert!(undershoot.is_finite() && undershoot <= 0.0);
    assert!(out.series.iter().all(|s| s.values.iter().all(|v| v.is_finite())));
    assert!(m.convergence.max_wall_normal_speed <= 1e-10);
    for s in &out.series {
        let lo = s.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = out.summary.zones.iter().position(|z| *z == s.zone).unwrap();
        let mean = out.summary.time_means[k];
        assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12);
    }
    let (header, rows) = read_summary(&dir.path().join("table1.csv")).unwrap();
    assert_eq!(header[0], "label");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, "dense");
}

#[test]
fn cached_wind_replays_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse(dir.path());
    let first = run_scenario(&cfg).unwrap();
    let csv_first = std::fs::read(first.run_dir.join("zones.csv")).unwrap();
    let second = run_scenario(&cfg).unwrap();
    assert!(!first.manifest.convergence.wind_from_cache);
    assert!(second.manifest.convergence.wind_from_cache);
    assert_eq!(csv_first, std::fs::read(second.run_dir.join("zones.csv")).unwrap());
    assert_eq!(first.summary, second.summary);
}

#[test]
fn coarse_city_wind_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse(dir.path());
    let (mesh, zones) = load_mesh(&cfg).unwrap();
    let fields = ScenarioFields::build(&mesh, &zones, &cfg).unwrap();
    let model = WindModel::from_scenario(&mesh, &fields, &cfg);
    let run = model.run_to_steady().unwrap();
    assert!(run.converged);
    assert!(run.max_wall_normal_speed <= 1e-10);
    for &i in mesh.inlet_nodes() {
        assert_eq!(run.state.v[i], cfg.air.inlet);
    }
    let area = mesh.total_area();
    let mean: f64 = run
        .state
        .v
        .iter()
        .zip(mesh.node_area())
        .map(|(v, m)| m * v[0].hypot(v[1]))
        .sum::<f64>()
        / area;
    // Pressure-space divergence; see the README for the elementwise norm.
    assert!(run.weak_divergence <= 1e-3 * mean * area.sqrt(), "{}", run.weak_divergence);
    assert!(run.divergence.is_finite());

    let path = dir.path().join("wind.bin");
    write_wind_cache(&path, &run).unwrap();
    let back = read_wind_cache(&path, mesh.n_nodes()).unwrap();
    assert_eq!(back.v, run.state.v);
    assert!(read_wind_cache(&path, mesh.n_nodes() + 1).is_err());
}

#[test]
fn zero_horizon_writes_only_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = coarse(dir.path());
    cfg.time.t_end = 0.0;
    let out = run_scenario(&cfg).unwrap();
    let mut outputs = out.manifest.outputs.clone();
    outputs.sort();
    assert_eq!(outputs, ["fields_0000.vtk", "manifest.json", "vehicles.csv", "zones.csv"]);
    let zones = parse_csv(&std::fs::read_to_string(out.run_dir.join("zones.csv")).unwrap()).unwrap();
    assert_eq!(zones[0].times, [0.0]);
    assert!(zones.iter().all(|z| z.values == [0.0]));
}

#[test]
fn plume_drifts_downwind() {
    let tags = SideTags {
        left: BoundaryTag::Outlet,
        right: BoundaryTag::Outlet,
        bottom: BoundaryTag::Outlet,
        top: BoundaryTag::Outlet,
    };
    let mesh = structured_rectangle([0.0, 0.0], [20.0, 20.0], 40, 40, tags);
    let n = mesh.n_nodes();
    let wind = [5.0, -5.0];
    let source = [6.0, 14.0];
    let pulse: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| 100.0 * (-((p[0] - source[0]).powi(2) + (p[1] - source[1]).powi(2)) / 0.5).exp())
        .collect();
    let ec = EmissionSeries::new(vec![0.0, 0.1, 0.2], vec![pulse.clone(), pulse, vec![0.0; n]]).unwrap();
    let params = TransportParams {
        mu_phi: 0.5,
        sigma: 0.1,
        dt: 0.01,
        reuse_matrix: true,
        rel_tol: 1e-10,
        stabilize: true,
    };
    let run = run_transport(&mesh, &vec![wind; n], &vec![1.0; n], &ec, vec![0.0; n], &params, 1.0, 0.5).unwrap();
    let last = run.snapshots.last().unwrap();
    assert!((last.t - 1.0).abs() < 1e-12);
    let c = plume_centroid(&mesh, &last.phi).unwrap();
    let d = [c[0] - source[0], c[1] - source[1]];
    let cos = (d[0] * wind[0] + d[1] * wind[1]) / (d[0].hypot(d[1]) * wind[0].hypot(wind[1]));
    assert!(cos >= 15f64.to_radians().cos(), "centroid {c:?}");
    assert!(d[0].hypot(d[1]) > 2.0);
}
