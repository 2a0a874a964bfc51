//! Zone means, time averages, plume centroid and file export.

mod export;

pub use export::{
    format_sci, parse_csv, render_csv, render_vtk, write_csv, write_vtk, FieldBundle,
};

use crate::mesh::{Mesh, Point, Zone, ZoneMap, ZoneRole};

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("zone '{0}' has no triangles")]
    EmptyZone(String),
    #[error("time mean needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times must increase strictly")]
    UnorderedSamples,
    #[error("fields do not match the mesh: {0}")]
    ShapeMismatch(String),
    #[error("i/o: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
}

/// `(1/|Ω_k|) ∫_{Ω_k} φ`, exact for P1 `φ`.
pub fn mean_over_triangles(
    mesh: &Mesh,
    phi: &[f64],
    triangles: &[usize],
    name: &str,
) -> Result<f64, DiagnosticsError> {
    if triangles.is_empty() {
        return Err(DiagnosticsError::EmptyZone(name.to_string()));
    }
    let (mut integral, mut area) = (0.0, 0.0);
    for &t in triangles {
        let tri = mesh.triangles()[t];
        let a = mesh.area(t);
        integral += a * (phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0;
        area += a;
    }
    Ok(integral / area)
}

pub fn spatial_mean(mesh: &Mesh, phi: &[f64], zone: &Zone) -> Result<f64, DiagnosticsError> {
    mean_over_triangles(mesh, phi, &zone.triangles, &zone.name)
}

/// Name of the column holding the mean over urban and selected zones together.
pub const CITY_COLUMN: &str = "city";

/// Columns reported per snapshot: the whole city, then every urban and
/// selected zone in declaration order.
pub fn report_zones(zones: &ZoneMap) -> Vec<&Zone> {
    zones
        .zones()
        .iter()
        .filter(|z| z.role != ZoneRole::Rural)
        .collect()
}

/// City mean followed by the mean of each zone from [`report_zones`].
pub fn zone_means(mesh: &Mesh, zones: &ZoneMap, phi: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let mut out = vec![mean_over_triangles(mesh, phi, &zones.city_triangles(), CITY_COLUMN)?];
    for z in report_zones(zones) {
        out.push(spatial_mean(mesh, phi, z)?);
    }
    Ok(out)
}

pub fn zone_column_names(zones: &ZoneMap) -> Vec<String> {
    std::iter::once(CITY_COLUMN.to_string())
        .chain(report_zones(zones).iter().map(|z| z.name.clone()))
        .collect()
}

/// `(1/T) ∫₀ᵀ φ_k dt` by the trapezoid rule over the sample span.
pub fn time_mean(times: &[f64], values: &[f64]) -> Result<f64, DiagnosticsError> {
    if times.len() < 2 || values.len() != times.len() {
        return Err(DiagnosticsError::TooFewSamples(times.len().min(values.len())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiagnosticsError::UnorderedSamples);
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
    }
    Ok(acc / (times[times.len() - 1] - times[0]))
}

/// Spatial means of one zone over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSeries {
    pub zone: String,
    /// [h]
    pub times: Vec<f64>,
    /// [kg/km²]
    pub values: Vec<f64>,
}

impl ZoneSeries {
    pub fn new(zone: impl Into<String>) -> Self {
        Self {
            zone: zone.into(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<(), DiagnosticsError> {
        if self.times.last().is_some_and(|&last| !(t > last)) {
            return Err(DiagnosticsError::UnorderedSamples);
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn time_mean(&self) -> Result<f64, DiagnosticsError> {
        time_mean(&self.times, &self.values)
    }
}

/// `∫ x φ / ∫ φ`, exact for P1 `φ`; `None` when `∫ φ` vanishes.
pub fn plume_centroid(mesh: &Mesh, phi: &[f64]) -> Option<Point> {
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t);
        let p = tri.map(|v| mesh.nodes()[v]);
        let f = tri.map(|v| phi[v]);
        let sf: f64 = f.iter().sum();
        m += a * sf / 3.0;
        // ∫ λ_a λ_b = A/12 (1 + δ_ab)
        for c in 0..2 {
            let sx: f64 = p.iter().map(|q| q[c]).sum();
            let dot: f64 = (0..3).map(|k| f[k] * p[k][c]).sum();
            let val = a / 12.0 * (sf * sx + dot);
            if c == 0 {
                mx += val;
            } else {
                my += val;
            }
        }
    }
    if m.abs() < f64::MIN_POSITIVE {
        None
    } else {
        Some([mx / m, my / m])
    }
}
