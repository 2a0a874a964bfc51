//! Exit codes and output of the `porous-city` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SHIPPED: &str = include_str!("../../../scenarios/city.toml");

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_porous-city"))
}

fn shipped_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/city.toml")
}

fn write_variant(dir: &Path, from: &str, to: &str) -> PathBuf {
    assert!(SHIPPED.contains(from), "{from}");
    let path = dir.join("variant.toml");
    std::fs::write(&path, SHIPPED.replacen(from, to, 1)).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_the_shipped_scenario() {
    let out = bin().arg("validate").arg(shipped_path()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# U_max = 45 km/h"), "{text}");
    assert!(text.contains("# label = dense"), "{text}");
}

#[test]
fn porosity_above_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "dense_center = 0.38", "dense_center = 1.2");
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_coefficients_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "[emissions.co2]", "[emissions.nox]");
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("emissions.co2"), "{}", stderr(&out));
}

#[test]
fn missing_unit_annotation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "t_end = 2.0               # [h]", "t_end = 2.0");
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synthesized_mesh_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "h = 1.0                   # [km]", "h = 3.0 # [km]");
    for legacy in [false, true] {
        let msh = dir.path().join(format!("city-{legacy}.msh"));
        let mut synth = bin();
        synth.args(["mesh", "synth", "--config"]).arg(&cfg).arg("--output").arg(&msh);
        if legacy {
            synth.arg("--legacy");
        }
        let out = synth.output().unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        let wrote = stdout(&out);
        let nodes: usize = wrote.split('(').nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();

        let info = bin().args(["mesh", "info"]).arg(&msh).output().unwrap();
        assert!(info.status.success(), "{}", stderr(&info));
        let text = stdout(&info);
        assert!(text.contains(&format!("nodes {nodes}\n")), "{text}");
        for key in ["edges inlet", "edges outlet", "edges wall", "zone urban", "zone rural", "zone industrial"] {
            assert!(text.contains(key), "{key} missing in {text}");
        }
    }
}

#[test]
fn truncated_mesh_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "h = 1.0                   # [km]", "h = 3.0 # [km]");
    let msh = dir.path().join("city.msh");
    let out = bin()
        .args(["mesh", "synth", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&msh)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&msh).unwrap();
    std::fs::write(&msh, &text[..text.len() / 2]).unwrap();
    let info = bin().args(["mesh", "info"]).arg(&msh).output().unwrap();
    assert!(!info.status.success());
    assert!(!stderr(&info).is_empty());
}

#[test]
fn short_run_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(dir.path(), "h = 1.0                   # [km]", "h = 3.0 # [km]");
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .args(["--scenario", "disperse", "--speed-limit", "30", "--t-end", "0.2", "--no-vtk", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Phi[city]"), "{text}");
    let table = std::fs::read_to_string(out_dir.join("table1.csv")).unwrap();
    assert!(table.starts_with("label,"), "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("disperse-u30,"), "{table}");
    let run_dir = out_dir.join("disperse-u30");
    assert!(run_dir.join("manifest.json").exists());
    assert!(!std::fs::read_dir(&run_dir)
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "vtk")));
}

#[test]
fn nonpositive_speed_limit_fails_as_config() {
    let out = bin()
        .arg("run")
        .args(["--speed-limit", "0", "--t-end", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
