//! Synthetic concentric city: a rectangle of countryside with a circular city
//! in the middle and optional disc-shaped natural obstacles.

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::zones::{build_zone_map, Polygon, SelectedZone, ZoneMap, ZoneSpec};
use super::{BoundaryTag, Mesh, MeshError, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

/// Boundary tag of each side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideTags {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl Default for SideTags {
    /// Sides facing a north-westerly wind are inlets, the others outlets.
    fn default() -> Self {
        Self {
            left: BoundaryTag::Inlet,
            top: BoundaryTag::Inlet,
            right: BoundaryTag::Outlet,
            bottom: BoundaryTag::Outlet,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub width: f64,
    pub height: f64,
    pub city_radius: f64,
    pub obstacles: Vec<Disc>,
    /// Target edge length.
    pub h: f64,
    pub sides: SideTags,
    pub selected: Vec<(String, Disc)>,
}

impl SyntheticCity {
    pub fn center(&self) -> Point {
        [self.width / 2.0, self.height / 2.0]
    }
}

fn degenerate(msg: impl Into<String>) -> MeshError {
    MeshError::DegenerateGeometry(msg.into())
}

fn check_params(p: &SyntheticCity) -> Result<(), MeshError> {
    if !(p.h > 0.0) || !(p.width > 0.0) || !(p.height > 0.0) {
        return Err(degenerate("edge length and rectangle size must be positive"));
    }
    if !(p.city_radius > 0.0) {
        return Err(degenerate("city radius must be positive"));
    }
    for (k, o) in p.obstacles.iter().enumerate() {
        let [x, y] = o.center;
        let clear = (x - o.radius).min(y - o.radius).min(p.width - x - o.radius);
        if !(o.radius > 0.0) || clear.min(p.height - y - o.radius) <= 0.0 {
            return Err(degenerate(format!("obstacle {k} not strictly inside")));
        }
        for (j, q) in p.obstacles.iter().enumerate().take(k) {
            let d = (x - q.center[0]).hypot(y - q.center[1]);
            if d <= o.radius + q.radius {
                return Err(degenerate(format!("obstacles {j} and {k} overlap")));
            }
        }
    }
    Ok(())
}

fn circle_segments(radius: f64, h: f64) -> usize {
    ((2.0 * std::f64::consts::PI * radius / h).ceil() as usize).max(8)
}

/// Triangulates the rectangle minus the obstacle discs and builds its zone map.
pub fn synthetic_city_mesh(p: &SyntheticCity) -> Result<(Mesh, ZoneMap), MeshError> {
    check_params(p)?;
    let (w, hgt, h) = (p.width, p.height, p.h);

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, q: Point| {
        cdt.insert(Point2::new(q[0], q[1]))
            .map_err(|e| degenerate(format!("insertion failed: {e:?}")))
    };

    // Perimeter, counterclockwise from the origin.
    let nx = (w / h).ceil() as usize;
    let ny = (hgt / h).ceil() as usize;
    let mut perimeter = Vec::new();
    for i in 0..nx {
        perimeter.push([w * i as f64 / nx as f64, 0.0]);
    }
    for j in 0..ny {
        perimeter.push([w, hgt * j as f64 / ny as f64]);
    }
    for i in (1..=nx).rev() {
        perimeter.push([w * i as f64 / nx as f64, hgt]);
    }
    for j in (1..=ny).rev() {
        perimeter.push([0.0, hgt * j as f64 / ny as f64]);
    }
    let mut loops = vec![perimeter];
    let mut holes = Vec::new();
    for o in &p.obstacles {
        let poly = Polygon::disc(o.center, o.radius, circle_segments(o.radius, h));
        let pts = poly.points()[..poly.points().len() - 1].to_vec();
        loops.push(pts);
        holes.push(poly);
    }

    for lp in &loops {
        let handles = lp
            .iter()
            .map(|&q| insert(&mut cdt, q))
            .collect::<Result<Vec<_>, _>>()?;
        for k in 0..handles.len() {
            let added = cdt.try_add_constraint(handles[k], handles[(k + 1) % handles.len()]);
            if added.is_empty() {
                return Err(degenerate("boundary constraints intersect"));
            }
        }
    }

    // Interior points on a triangular lattice, kept half a spacing away from
    // every boundary curve.
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (hgt / dy).floor() as usize;
    for j in 1..=rows {
        let y = j as f64 * dy;
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        let mut x = shift;
        while x < w {
            let q = [x, y];
            let near_side = x < 0.5 * h || w - x < 0.5 * h || y < 0.5 * h || hgt - y < 0.5 * h;
            let near_obstacle = p.obstacles.iter().any(|o| {
                (x - o.center[0]).hypot(y - o.center[1]) < o.radius + 0.5 * h
            });
            if !near_side && !near_obstacle {
                insert(&mut cdt, q)?;
            }
            x += h;
        }
    }

    let positions: Vec<Point> = cdt
        .vertices()
        .map(|v| {
            let q = v.position();
            [q.x, q.y]
        })
        .collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices().map(|v| v.fix().index());
        let c = [
            (positions[vs[0]][0] + positions[vs[1]][0] + positions[vs[2]][0]) / 3.0,
            (positions[vs[0]][1] + positions[vs[1]][1] + positions[vs[2]][1]) / 3.0,
        ];
        if holes.iter().any(|hole| hole.contains(c)) {
            continue;
        }
        triangles.push(vs);
    }
    if triangles.is_empty() {
        return Err(degenerate("no triangles produced"));
    }

    // Compact the node numbering to the vertices actually used.
    let mut remap = vec![usize::MAX; positions.len()];
    let mut nodes = Vec::new();
    for tri in triangles.iter_mut() {
        for v in tri.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = nodes.len();
                nodes.push(positions[*v]);
            }
            *v = remap[*v];
        }
    }

    let edges = tag_boundary(&nodes, &triangles, w, hgt, &p.sides);
    let nt = triangles.len();
    let mesh = Mesh::new(nodes, triangles, edges, vec!["domain".into()], vec![0; nt])?;

    let center = p.center();
    let spec = ZoneSpec {
        urban: Polygon::disc(center, p.city_radius, 256),
        selected: p
            .selected
            .iter()
            .map(|(name, d)| SelectedZone {
                name: name.clone(),
                polygon: Polygon::disc(d.center, d.radius, 128),
            })
            .collect(),
    };
    let zones = build_zone_map(&mesh, &spec)?;
    let mesh = mesh.with_zones(&zones);
    Ok((mesh, zones))
}

/// Tags the topological boundary by geometry: rectangle sides get their
/// configured tag, everything else (obstacle outlines) is wall.
fn tag_boundary(
    nodes: &[Point],
    triangles: &[[usize; 3]],
    w: f64,
    hgt: f64,
    sides: &SideTags,
) -> Vec<([usize; 2], BoundaryTag)> {
    use std::collections::BTreeMap;
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let tol = 1e-9 * w.max(hgt);
    count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|((a, b), _)| {
            let (pa, pb) = (nodes[a], nodes[b]);
            let on = |f: &dyn Fn(Point) -> bool| f(pa) && f(pb);
            let tag = if on(&|q| q[0].abs() < tol) {
                sides.left
            } else if on(&|q| (q[0] - w).abs() < tol) {
                sides.right
            } else if on(&|q| q[1].abs() < tol) {
                sides.bottom
            } else if on(&|q| (q[1] - hgt).abs() < tol) {
                sides.top
            } else {
                BoundaryTag::Wall
            };
            ([a, b], tag)
        })
        .collect()
}

/// Structured grid of a rectangle, each cell split along the same diagonal.
/// Side tags are given as (left, right, bottom, top). Single zone `domain`.
pub fn structured_rectangle(
    origin: Point,
    size: [f64; 2],
    nx: usize,
    ny: usize,
    sides: SideTags,
) -> Mesh {
    let [x0, y0] = origin;
    let [w, h] = size;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                x0 + w * i as f64 / nx as f64,
                y0 + h * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            tris.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
            tris.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut edges = Vec::new();
    for j in 0..ny {
        edges.push(([id(0, j), id(0, j + 1)], sides.left));
        edges.push(([id(nx, j), id(nx, j + 1)], sides.right));
    }
    for i in 0..nx {
        edges.push(([id(i, 0), id(i + 1, 0)], sides.bottom));
        edges.push(([id(i, ny), id(i + 1, ny)], sides.top));
    }
    let nt = tris.len();
    Mesh::new(nodes, tris, edges, vec!["domain".into()], vec![0; nt])
        .expect("structured rectangle is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(h: f64, obstacles: Vec<Disc>) -> SyntheticCity {
        SyntheticCity {
            width: 40.0,
            height: 30.0,
            city_radius: 10.0,
            obstacles,
            h,
            sides: SideTags {
                left: BoundaryTag::Inlet,
                right: BoundaryTag::Outlet,
                bottom: BoundaryTag::Wall,
                top: BoundaryTag::Wall,
            },
            selected: vec![],
        }
    }

    #[test]
    fn perimeter_partitioned_by_tags() {
        let (mesh, zones) = synthetic_city_mesh(&plain(2.0, vec![])).unwrap();
        let len = |t| mesh.edges_with_tag(t).map(|e| e.length).sum::<f64>();
        assert!((len(BoundaryTag::Inlet) - 30.0).abs() < 1e-9);
        assert!((len(BoundaryTag::Outlet) - 30.0).abs() < 1e-9);
        assert!((len(BoundaryTag::Wall) - 80.0).abs() < 1e-9);
        assert!((mesh.total_area() - 1200.0).abs() < 1e-9);
        assert_eq!(zones.zones().len(), 2);
    }

    #[test]
    fn obstacle_wall_loop_closes() {
        let obstacle = Disc {
            center: [8.0, 8.0],
            radius: 2.0,
        };
        let (mesh, _) = synthetic_city_mesh(&plain(1.0, vec![obstacle])).unwrap();
        let walls: Vec<_> = mesh
            .edges_with_tag(BoundaryTag::Wall)
            .filter(|e| {
                let p = mesh.nodes()[e.nodes[0]];
                (p[0] - 8.0).hypot(p[1] - 8.0) < 2.5
            })
            .collect();
        // Sum of exterior turning angles along the loop.
        let mut next = std::collections::HashMap::new();
        for e in &walls {
            next.insert(e.nodes[0], e.nodes[1]);
        }
        let start = walls[0].nodes[0];
        let mut v = start;
        let mut turning = 0.0;
        let dir = |a: usize, b: usize| {
            let (p, q) = (mesh.nodes()[a], mesh.nodes()[b]);
            (q[1] - p[1]).atan2(q[0] - p[0])
        };
        let mut steps = 0;
        loop {
            let w = next[&v];
            let u = next[&w];
            let mut d = dir(w, u) - dir(v, w);
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            turning += d;
            v = w;
            steps += 1;
            if v == start {
                break;
            }
        }
        assert_eq!(steps, walls.len());
        assert!((turning.abs() - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn halving_h_quadruples_triangles() {
        let (coarse, _) = synthetic_city_mesh(&plain(2.0, vec![])).unwrap();
        let (fine, _) = synthetic_city_mesh(&plain(1.0, vec![])).unwrap();
        let ratio = fine.n_triangles() as f64 / coarse.n_triangles() as f64;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(
            synthetic_city_mesh(&plain(0.0, vec![])),
            Err(MeshError::DegenerateGeometry(_))
        ));
        let outside = Disc {
            center: [39.5, 10.0],
            radius: 1.0,
        };
        assert!(matches!(
            synthetic_city_mesh(&plain(1.0, vec![outside])),
            Err(MeshError::DegenerateGeometry(_))
        ));
    }
}
