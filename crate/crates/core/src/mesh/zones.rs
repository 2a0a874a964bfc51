//! Named zones: rural, urban and selected sub-areas of the city.

use serde::{Deserialize, Serialize};

use super::{majority_node_zone, Mesh, MeshError, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneRole {
    Rural,
    Urban,
    Selected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub name: String,
    pub role: ZoneRole,
    pub nodes: Vec<usize>,
    pub triangles: Vec<usize>,
    pub area: f64,
}

/// Closed simple polygon; the first point is repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    points: Vec<Point>,
}

impl Polygon {
    pub fn new(name: &str, points: Vec<Point>) -> Result<Self, MeshError> {
        if points.len() < 4 || points.first() != points.last() {
            return Err(MeshError::OpenPolygon(name.to_string()));
        }
        Ok(Self { points })
    }

    /// Regular polygon inscribed in a circle.
    pub fn disc(center: Point, radius: f64, segments: usize) -> Self {
        let n = segments.max(3);
        let mut points: Vec<Point> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        points.push(points[0]);
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Even-odd ray casting.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedZone {
    pub name: String,
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSpec {
    pub urban: Polygon,
    pub selected: Vec<SelectedZone>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMap {
    zones: Vec<Zone>,
    triangle_zone: Vec<usize>,
    node_zone: Vec<usize>,
}

/// Assigns every triangle by centroid: the first selected polygon containing
/// it, else urban, else rural. Zone ids are 0 rural, 1 urban, 2.. selected.
pub fn build_zone_map(mesh: &Mesh, spec: &ZoneSpec) -> Result<ZoneMap, MeshError> {
    let mut names = vec!["rural".to_string(), "urban".to_string()];
    let mut roles = vec![ZoneRole::Rural, ZoneRole::Urban];
    for s in &spec.selected {
        names.push(s.name.clone());
        roles.push(ZoneRole::Selected);
    }
    let triangle_zone: Vec<usize> = (0..mesh.n_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            if let Some(k) = spec.selected.iter().position(|s| s.polygon.contains(c)) {
                2 + k
            } else if spec.urban.contains(c) {
                1
            } else {
                0
            }
        })
        .collect();
    for (z, name) in names.iter().enumerate().skip(1) {
        if !triangle_zone.contains(&z) {
            return Err(MeshError::ZoneOutsideDomain(name.clone()));
        }
    }
    Ok(ZoneMap::assemble(mesh, names, roles, triangle_zone))
}

impl ZoneMap {
    /// Zone map from the membership stored in the mesh itself. Roles follow
    /// the names: `rural`, `urban` (or the catch-all `domain`), anything else
    /// is a selected zone.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let roles = mesh
            .zone_names()
            .iter()
            .map(|n| match n.as_str() {
                "rural" => ZoneRole::Rural,
                "urban" | "domain" => ZoneRole::Urban,
                _ => ZoneRole::Selected,
            })
            .collect();
        Self::assemble(
            mesh,
            mesh.zone_names().to_vec(),
            roles,
            mesh.triangle_zone().to_vec(),
        )
    }

    fn assemble(
        mesh: &Mesh,
        names: Vec<String>,
        roles: Vec<ZoneRole>,
        triangle_zone: Vec<usize>,
    ) -> Self {
        let node_zone =
            majority_node_zone(mesh.n_nodes(), mesh.triangles(), &triangle_zone, names.len());
        let mut zones: Vec<Zone> = names
            .into_iter()
            .zip(roles)
            .map(|(name, role)| Zone {
                name,
                role,
                nodes: Vec::new(),
                triangles: Vec::new(),
                area: 0.0,
            })
            .collect();
        for (t, &z) in triangle_zone.iter().enumerate() {
            zones[z].triangles.push(t);
            zones[z].area += mesh.area(t);
        }
        for (v, &z) in node_zone.iter().enumerate() {
            zones[z].nodes.push(v);
        }
        Self {
            zones,
            triangle_zone,
            node_zone,
        }
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, name: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.name == name)
    }

    pub fn triangle_zone(&self) -> &[usize] {
        &self.triangle_zone
    }

    pub fn node_zone(&self) -> &[usize] {
        &self.node_zone
    }

    pub fn node_role(&self, v: usize) -> ZoneRole {
        self.zones[self.node_zone[v]].role
    }

    pub fn triangle_role(&self, t: usize) -> ZoneRole {
        self.zones[self.triangle_zone[t]].role
    }

    /// Indicator of the city: urban and selected zones together.
    pub fn is_city_node(&self, v: usize) -> bool {
        self.node_role(v) != ZoneRole::Rural
    }

    /// Triangles of the city (urban plus selected zones).
    pub fn city_triangles(&self) -> Vec<usize> {
        (0..self.triangle_zone.len())
            .filter(|&t| self.triangle_role(t) != ZoneRole::Rural)
            .collect()
    }

    pub fn city_area(&self) -> f64 {
        self.zones
            .iter()
            .filter(|z| z.role != ZoneRole::Rural)
            .map(|z| z.area)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::unit_square;

    fn square(x0: f64, x1: f64) -> Polygon {
        Polygon::new(
            "p",
            vec![[x0, -0.1], [x1, -0.1], [x1, 1.1], [x0, 1.1], [x0, -0.1]],
        )
        .unwrap()
    }

    #[test]
    fn whole_square_urban() {
        let mesh = unit_square(6);
        let zm = build_zone_map(
            &mesh,
            &ZoneSpec {
                urban: square(-0.1, 1.1),
                selected: vec![],
            },
        )
        .unwrap();
        assert!(zm.zones()[0].triangles.is_empty());
        assert!((zm.zones()[1].area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn left_half_urban() {
        let mesh = unit_square(8);
        let zm = build_zone_map(
            &mesh,
            &ZoneSpec {
                urban: square(-0.1, 0.5),
                selected: vec![],
            },
        )
        .unwrap();
        let tri_area = 1.0 / 128.0;
        assert!((zm.zones()[1].area - 0.5).abs() <= tri_area);
        let total: f64 = zm.zones().iter().map(|z| z.area).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_polygon_and_outside_zone() {
        assert!(matches!(
            Polygon::new("x", vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
            Err(MeshError::OpenPolygon(_))
        ));
        let mesh = unit_square(4);
        let far = Polygon::disc([5.0, 5.0], 0.5, 16);
        let err = build_zone_map(
            &mesh,
            &ZoneSpec {
                urban: square(-0.1, 1.1),
                selected: vec![SelectedZone {
                    name: "park".into(),
                    polygon: far,
                }],
            },
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::ZoneOutsideDomain(n) if n == "park"));
    }

    #[test]
    fn disc_contains_center_not_outside() {
        let d = Polygon::disc([1.0, 2.0], 1.0, 32);
        assert!(d.contains([1.0, 2.0]));
        assert!(d.contains([1.9, 2.0]));
        assert!(!d.contains([2.1, 2.0]));
    }
}
