//! Legacy VTK fields and zone-series CSV.

use std::path::Path;

use super::{DiagnosticsError, ZoneSeries};
use crate::mesh::Mesh;

/// `printf("%.6e")` formatting: six decimals, signed exponent of at least two
/// digits.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", e.abs())
}

/// Nodal arrays written together to one VTK file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldBundle {
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 2]>)>,
}

impl FieldBundle {
    pub fn scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.scalars.push((name.to_string(), values));
        self
    }

    pub fn vector(mut self, name: &str, values: Vec<[f64; 2]>) -> Self {
        self.vectors.push((name.to_string(), values));
        self
    }
}

pub fn render_vtk(mesh: &Mesh, bundle: &FieldBundle, title: &str) -> Result<String, DiagnosticsError> {
    use std::fmt::Write;
    let n = mesh.n_nodes();
    for (name, v) in &bundle.scalars {
        if v.len() != n {
            return Err(DiagnosticsError::ShapeMismatch(format!("{name}: {} values for {n} nodes", v.len())));
        }
    }
    for (name, v) in &bundle.vectors {
        if v.len() != n {
            return Err(DiagnosticsError::ShapeMismatch(format!("{name}: {} values for {n} nodes", v.len())));
        }
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(s, "# vtk DataFile Version 2.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {n} double").unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{:e} {:e} 0", p[0], p[1]).unwrap();
    }
    let nt = mesh.n_triangles();
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    writeln!(s, "POINT_DATA {n}").unwrap();
    for (name, v) in &bundle.scalars {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for x in v {
            writeln!(s, "{x:e}").unwrap();
        }
    }
    for (name, v) in &bundle.vectors {
        writeln!(s, "VECTORS {name} double").unwrap();
        for x in v {
            writeln!(s, "{:e} {:e} 0", x[0], x[1]).unwrap();
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, bundle: &FieldBundle, title: &str) -> Result<(), DiagnosticsError> {
    std::fs::write(path, render_vtk(mesh, bundle, title)?)?;
    Ok(())
}

/// Header `time_h,<zone>...`, one row per sample, values as `%.6e`. All
/// series must share their sample times.
pub fn render_csv(series: &[ZoneSeries]) -> Result<String, DiagnosticsError> {
    let times = series.first().map(|s| s.times.clone()).unwrap_or_default();
    if let Some(s) = series.iter().find(|s| s.times != times || s.values.len() != times.len()) {
        return Err(DiagnosticsError::ShapeMismatch(format!("series '{}' has its own sample times", s.zone)));
    }
    let csv_err = |e: csv::Error| DiagnosticsError::Csv(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["time_h".to_string()];
    header.extend(series.iter().map(|s| s.zone.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for (k, &t) in times.iter().enumerate() {
        let mut row = vec![format_sci(t)];
        row.extend(series.iter().map(|s| format_sci(s.values[k])));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| DiagnosticsError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn write_csv(path: &Path, series: &[ZoneSeries]) -> Result<(), DiagnosticsError> {
    std::fs::write(path, render_csv(series)?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ZoneSeries>, DiagnosticsError> {
    let csv_err = |e: csv::Error| DiagnosticsError::Csv(e.to_string());
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("time_h") {
        return Err(DiagnosticsError::Csv("first column must be time_h".into()));
    }
    let mut series: Vec<ZoneSeries> = header.iter().skip(1).map(ZoneSeries::new).collect();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| DiagnosticsError::Csv(format!("'{f}': {e}"))))
            .collect::<Result<_, _>>()?;
        for (s, &v) in series.iter_mut().zip(&nums[1..]) {
            s.push(nums[0], v)?;
        }
    }
    Ok(series)
}
