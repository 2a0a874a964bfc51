//! Coefficient fields of a scenario: porosity, permeability, parking rate,
//! attraction source and the initial traffic density.

use crate::fem::ScalarField;
use crate::mesh::{BoundaryTag, Mesh, MeshError, Point, SubMesh, ZoneMap, ZoneRole};

use super::config::{DensityMode, InitialDensity, PermeabilityModel, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("urban zone has no triangles")]
    EmptyUrbanZone,
    #[error("initial density peak is negative ({0})")]
    NegativePeak(f64),
}

/// Area-weighted centroid of the city (urban and selected triangles).
pub fn urban_centroid(mesh: &Mesh, zones: &ZoneMap) -> Result<Point, ScenarioError> {
    let mut a = 0.0;
    let mut c = [0.0; 2];
    for t in zones.city_triangles() {
        let w = mesh.area(t);
        let m = mesh.centroid(t);
        a += w;
        c[0] += w * m[0];
        c[1] += w * m[1];
    }
    if a == 0.0 {
        return Err(ScenarioError::EmptyUrbanZone);
    }
    Ok([c[0] / a, c[1] / a])
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Porosity: rural nodes `ε_rural`, selected zones `ε_selected`, urban nodes
/// linear in the distance to the city centroid from `ε_center` to `ε_layout`.
pub fn build_porosity(
    mesh: &Mesh,
    zones: &ZoneMap,
    cfg: &ScenarioConfig,
) -> Result<ScalarField, ScenarioError> {
    let center = urban_centroid(mesh, zones)?;
    let urban: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&v| zones.node_role(v) == ZoneRole::Urban)
        .collect();
    let radius = urban
        .iter()
        .map(|&v| dist(mesh.nodes()[v], center))
        .fold(0.0, f64::max);
    let (e0, e1) = (cfg.center_porosity(), cfg.porosity.layout);
    let values = (0..mesh.n_nodes())
        .map(|v| match zones.node_role(v) {
            ZoneRole::Rural => cfg.porosity.rural,
            ZoneRole::Selected => cfg.porosity.selected,
            ZoneRole::Urban => {
                let r = if radius > 0.0 {
                    dist(mesh.nodes()[v], center) / radius
                } else {
                    0.0
                };
                (e0 + (e1 - e0) * r).clamp(e0.min(e1), e0.max(e1))
            }
        })
        .collect();
    Ok(ScalarField::new(values, "1").expect("finite porosity"))
}

/// Permeability from porosity, shared by the traffic and air models.
pub fn permeability_field(porosity: &[f64], cfg: &ScenarioConfig) -> ScalarField {
    let m = &cfg.medium;
    let values = porosity
        .iter()
        .map(|&e| match m.permeability {
            PermeabilityModel::Constant => m.k_ref,
            PermeabilityModel::KozenyCarman => {
                if e >= 1.0 {
                    m.k_max
                } else {
                    (m.k_ref * e.powi(3) / ((1.0 - e) * (1.0 - e))).min(m.k_max)
                }
            }
        })
        .collect();
    ScalarField::new(values, "km^2").expect("finite permeability")
}

/// Gaussian bump or ring of initial density; the ring vanishes outside `mask`.
pub fn gaussian_initial_density(
    mesh: &Mesh,
    center: Point,
    spec: &InitialDensity,
    mask: Option<&[bool]>,
) -> Result<ScalarField, ScenarioError> {
    if spec.peak < 0.0 {
        return Err(ScenarioError::NegativePeak(spec.peak));
    }
    let s2 = 2.0 * spec.spread * spec.spread;
    let values = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let r = dist(p, center);
            match spec.mode {
                DensityMode::Peak => spec.peak * (-r * r / s2).exp(),
                DensityMode::Ring => {
                    if mask.map_or(true, |m| m[v]) {
                        let d = r - spec.ring_radius;
                        spec.peak * (-d * d / s2).exp()
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    Ok(ScalarField::new(values, "veh/km^2").expect("finite density"))
}

/// Nodes where traffic runs with urban rules (urban zone proper, selected
/// zones excluded).
pub fn traffic_urban_mask(zones: &ZoneMap) -> Vec<bool> {
    (0..zones.node_zone().len())
        .map(|v| zones.node_role(v) == ZoneRole::Urban)
        .collect()
}

/// Off-street parking rate: Gaussian around `x_c` on urban nodes, zero elsewhere.
pub fn parking_rate_field(mesh: &Mesh, zones: &ZoneMap, cfg: &ScenarioConfig, xc: Point) -> ScalarField {
    let t = &cfg.traffic;
    let s2 = 2.0 * t.kappa_spread * t.kappa_spread;
    let values = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            if zones.node_role(v) == ZoneRole::Urban {
                let r = dist(p, xc);
                t.kappa0 * (-r * r / s2).exp()
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(values, "1/h").expect("finite parking rate")
}

/// Attraction source `G = −g₀ exp(−‖x−x_c‖²/(2 s_G²))`.
pub fn attraction_field(mesh: &Mesh, xc: Point, g0: f64, spread: f64) -> Vec<f64> {
    let s2 = 2.0 * spread * spread;
    mesh.nodes()
        .iter()
        .map(|&p| {
            let r = dist(p, xc);
            -g0 * (-r * r / s2).exp()
        })
        .collect()
}

/// All coefficient fields a run needs, built once per scenario.
#[derive(Debug, Clone)]
pub struct ScenarioFields {
    pub center: Point,
    pub porosity: Vec<f64>,
    pub permeability: Vec<f64>,
    pub parking: Vec<f64>,
    pub demand: Vec<f64>,
    pub urban_mask: Vec<bool>,
    pub attraction: Vec<f64>,
    pub initial_density: Vec<f64>,
}

impl ScenarioFields {
    pub fn build(mesh: &Mesh, zones: &ZoneMap, cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let centroid = urban_centroid(mesh, zones)?;
        let porosity = build_porosity(mesh, zones, cfg)?.into_values();
        let permeability = permeability_field(&porosity, cfg).into_values();
        let xc = cfg.routing.center.unwrap_or(centroid);
        let parking = parking_rate_field(mesh, zones, cfg, xc).into_values();
        let urban_mask = traffic_urban_mask(zones);
        let demand = vec![cfg.traffic.demand; mesh.n_nodes()];
        let attraction = attraction_field(mesh, xc, cfg.routing.g0, cfg.routing.g_spread);
        let ic_center = cfg.traffic.initial.center.unwrap_or(centroid);
        let initial_density =
            gaussian_initial_density(mesh, ic_center, &cfg.traffic.initial, Some(&urban_mask))?
                .into_values();
        Ok(Self {
            center: xc,
            porosity,
            permeability,
            parking,
            demand,
            urban_mask,
            attraction,
            initial_density,
        })
    }
}

/// The traffic model runs on the mesh without the selected zones; their
/// perimeters become walls.
#[derive(Debug, Clone)]
pub struct TrafficDomain {
    pub sub: SubMesh,
    /// Nodes touching an urban triangle.
    pub urban_mask: Vec<bool>,
    pub porosity: Vec<f64>,
    pub permeability: Vec<f64>,
    pub parking: Vec<f64>,
    pub demand: Vec<f64>,
    pub attraction: Vec<f64>,
    pub initial_density: Vec<f64>,
}

impl TrafficDomain {
    pub fn build(
        mesh: &Mesh,
        zones: &ZoneMap,
        fields: &ScenarioFields,
        cfg: &ScenarioConfig,
    ) -> Result<Self, TrafficDomainError> {
        let keep: Vec<bool> = (0..mesh.n_triangles())
            .map(|t| zones.triangle_role(t) != ZoneRole::Selected)
            .collect();
        let sub = mesh.submesh(&keep, BoundaryTag::Wall)?;
        let m = &sub.mesh;
        let mut urban_mask = vec![false; m.n_nodes()];
        for (t, tri) in m.triangles().iter().enumerate() {
            if zones.triangle_role(sub.triangle_map[t]) == ZoneRole::Urban {
                for &v in tri {
                    urban_mask[v] = true;
                }
            }
        }
        let t = &cfg.traffic;
        let s2 = 2.0 * t.kappa_spread * t.kappa_spread;
        let parking = m
            .nodes()
            .iter()
            .zip(&urban_mask)
            .map(|(&p, &u)| {
                if u {
                    let r = dist(p, fields.center);
                    t.kappa0 * (-r * r / s2).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let centroid = urban_centroid(mesh, zones)?;
        let ic_center = t.initial.center.unwrap_or(centroid);
        let initial_density =
            gaussian_initial_density(m, ic_center, &t.initial, Some(&urban_mask))?.into_values();
        Ok(Self {
            porosity: sub.restrict(&fields.porosity),
            permeability: sub.restrict(&fields.permeability),
            demand: sub.restrict(&fields.demand),
            attraction: sub.restrict(&fields.attraction),
            urban_mask,
            parking,
            initial_density,
            sub,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.sub.mesh
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrafficDomainError {
    #[error("cannot cut selected zones from the mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{synthetic_city_mesh, Disc, SideTags, SyntheticCity};
    use crate::scenario::config::CityKind;

    fn city() -> (Mesh, ZoneMap) {
        synthetic_city_mesh(&SyntheticCity {
            width: 40.0,
            height: 30.0,
            city_radius: 10.0,
            obstacles: vec![],
            h: 1.0,
            sides: SideTags::default(),
            selected: vec![(
                "park".into(),
                Disc {
                    center: [24.0, 15.0],
                    radius: 1.5,
                },
            )],
        })
        .unwrap()
    }

    #[test]
    fn porosity_values_at_landmarks() {
        let (mesh, zones) = city();
        let mut cfg = ScenarioConfig::with_shipped_emissions();
        let center = urban_centroid(&mesh, &zones).unwrap();
        let closest = (0..mesh.n_nodes())
            .filter(|&v| zones.node_role(v) == ZoneRole::Urban)
            .min_by(|&a, &b| {
                dist(mesh.nodes()[a], center).total_cmp(&dist(mesh.nodes()[b], center))
            })
            .unwrap();
        // the normalizing radius is at least 9 km for a 10 km city at h = 1
        let r0 = dist(mesh.nodes()[closest], center) / 9.0;
        for (kind, e0) in [(CityKind::Dense, 0.38), (CityKind::Disperse, 0.68)] {
            cfg.scenario.city = kind;
            let eps = build_porosity(&mesh, &zones, &cfg).unwrap();
            // nearest node sits within one mesh size of the centroid
            assert!((eps.values()[closest] - e0).abs() <= (0.82 - e0) * r0 + 1e-12);
            for v in 0..mesh.n_nodes() {
                match zones.node_role(v) {
                    ZoneRole::Rural | ZoneRole::Selected => assert_eq!(eps.values()[v], 1.0),
                    ZoneRole::Urban => assert!((e0..=0.82).contains(&eps.values()[v])),
                }
            }
        }
    }

    #[test]
    fn kozeny_carman_monotone_and_capped() {
        let cfg = ScenarioConfig::default();
        let k = permeability_field(&[0.38, 0.68, 0.82, 1.0], &cfg).into_values();
        assert!(k[0] < k[1] && k[1] < k[2] && k[2] < k[3]);
        assert_eq!(k[3], cfg.medium.k_max);
    }

    #[test]
    fn ring_density_peaks_on_ring() {
        let (mesh, _) = city();
        let spec = InitialDensity {
            mode: DensityMode::Ring,
            peak: 250.0,
            ring_radius: 0.0,
            spread: 2.0,
            center: None,
        };
        let c = mesh.nodes()[7];
        let rho = gaussian_initial_density(&mesh, c, &spec, None).unwrap();
        assert_eq!(rho.values()[7], 250.0);
        let zero = InitialDensity { peak: 0.0, ..spec.clone() };
        let rho0 = gaussian_initial_density(&mesh, c, &zero, None).unwrap();
        assert!(rho0.values().iter().all(|&v| v == 0.0));
        let neg = InitialDensity { peak: -1.0, ..spec };
        assert_eq!(
            gaussian_initial_density(&mesh, c, &neg, None),
            Err(ScenarioError::NegativePeak(-1.0))
        );
    }

    #[test]
    fn parking_rate_zero_in_rural() {
        let (mesh, zones) = city();
        let cfg = ScenarioConfig::default();
        let xc = urban_centroid(&mesh, &zones).unwrap();
        let k = parking_rate_field(&mesh, &zones, &cfg, xc);
        for v in 0..mesh.n_nodes() {
            if zones.node_role(v) == ZoneRole::Rural {
                assert_eq!(k.values()[v], 0.0);
            }
            assert!(k.values()[v] <= cfg.traffic.kappa0);
        }
        let mut off = cfg.clone();
        off.traffic.kappa0 = 0.0;
        assert!(parking_rate_field(&mesh, &zones, &off, xc)
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }
}
