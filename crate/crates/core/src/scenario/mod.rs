//! Scenario parameters and the coefficient fields derived from them.

mod config;
mod fields;

pub use config::{
    check_unit_annotations, AirSection, CityKind, ConfigError, DensityMode, EmissionCoefficients,
    InitialDensity, MediumSection, MeshSection, OutputSection, PermeabilityModel, PorositySection,
    RoutingSection, ScenarioConfig, ScenarioSection, SelectedDisc, TimeSection, TrafficSection,
    TransportSection, GAMMA1, GAMMA2, SHIPPED_SCENARIO,
};
pub use fields::{
    attraction_field, build_porosity, gaussian_initial_density, parking_rate_field,
    permeability_field, traffic_urban_mask, urban_centroid, ScenarioError, ScenarioFields,
    TrafficDomain, TrafficDomainError,
};

use crate::mesh::{synthetic_city_mesh, Disc, Mesh, MeshError, SyntheticCity, ZoneMap};

/// Loads the mesh named by the config, or generates the synthetic city.
pub fn load_mesh(cfg: &ScenarioConfig) -> Result<(Mesh, ZoneMap), MeshError> {
    match &cfg.mesh.file {
        Some(path) => {
            let bytes = std::fs::read(path)?;
            let mesh = crate::mesh::parse_msh(&bytes)?;
            let zones = ZoneMap::from_mesh(&mesh);
            Ok((mesh, zones))
        }
        None => synthetic_city_mesh(&synthetic_params(cfg)),
    }
}

pub fn synthetic_params(cfg: &ScenarioConfig) -> SyntheticCity {
    let m = &cfg.mesh;
    SyntheticCity {
        width: m.width,
        height: m.height,
        city_radius: m.city_radius,
        obstacles: m.obstacles.clone(),
        h: m.h,
        sides: m.sides,
        selected: m
            .selected
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    Disc {
                        center: s.center,
                        radius: s.radius,
                    },
                )
            })
            .collect(),
    }
}
