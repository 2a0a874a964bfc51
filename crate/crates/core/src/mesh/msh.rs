//! Gmsh MSH 2.2 and 4.1 ASCII reader and writer.
//!
//! Physical groups carry the semantics: `bnd:<tag>` on line elements and
//! `zone:<name>` on triangles. Point elements are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{BoundaryTag, Mesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MshVersion {
    V22,
    V41,
}

const LINE: u32 = 1;
const TRIANGLE: u32 = 2;
const POINT: u32 = 15;

enum Group {
    Boundary(BoundaryTag),
    Zone(String),
}

fn malformed(msg: impl Into<String>) -> MeshError {
    MeshError::MalformedHeader(msg.into())
}

struct Tokens<'a> {
    it: std::iter::Peekable<std::slice::Iter<'a, &'a str>>,
    section: &'static str,
}

impl<'a> Tokens<'a> {
    fn new(lines: &'a [&'a str], section: &'static str) -> Self {
        Self {
            it: lines.iter().peekable(),
            section,
        }
    }

    fn line(&mut self) -> Result<Vec<&'a str>, MeshError> {
        loop {
            match self.it.next() {
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => return Ok(l.split_whitespace().collect()),
                None => return Err(malformed(format!("{} section truncated", self.section))),
            }
        }
    }
}

fn num<T: std::str::FromStr>(s: Option<&&str>, what: &str) -> Result<T, MeshError> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(format!("bad or missing {what}")))
}

fn split_sections(text: &str) -> Result<HashMap<String, Vec<&str>>, MeshError> {
    let mut out: HashMap<String, Vec<&str>> = HashMap::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for raw in text.lines() {
        let line = raw.trim_end_matches('\r');
        if let Some(name) = line.trim().strip_prefix('$') {
            match current.take() {
                None => {
                    if name.starts_with("End") {
                        return Err(malformed(format!("unexpected ${name}")));
                    }
                    current = Some((name.to_string(), Vec::new()));
                }
                Some((open, body)) => {
                    if name != format!("End{open}") {
                        return Err(malformed(format!("section ${open} not closed")));
                    }
                    out.insert(open, body);
                }
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some((open, _)) = current {
        return Err(malformed(format!("section ${open} not closed")));
    }
    Ok(out)
}

fn parse_group_name(name: &str) -> Result<Group, MeshError> {
    if let Some(tag) = name.strip_prefix("bnd:") {
        return tag
            .parse()
            .map(Group::Boundary)
            .map_err(|_| MeshError::UnknownPhysicalGroup(name.to_string()));
    }
    if let Some(zone) = name.strip_prefix("zone:") {
        if !zone.is_empty() {
            return Ok(Group::Zone(zone.to_string()));
        }
    }
    Err(MeshError::UnknownPhysicalGroup(name.to_string()))
}

fn parse_physical_names(lines: &[&str]) -> Result<BTreeMap<(u32, i64), Group>, MeshError> {
    let mut t = Tokens::new(lines, "PhysicalNames");
    let count: usize = num(t.line()?.first(), "physical name count")?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let l = loop {
            match t.it.next() {
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => break *l,
                None => return Err(malformed("PhysicalNames section truncated")),
            }
        };
        let mut parts = l.trim().splitn(3, char::is_whitespace);
        let dim: u32 = num(parts.next().as_ref(), "physical dimension")?;
        let tag: i64 = num(parts.next().as_ref(), "physical tag")?;
        let name = parts
            .next()
            .map(|s| s.trim().trim_matches('"'))
            .ok_or_else(|| malformed("physical name missing"))?;
        out.insert((dim, tag), parse_group_name(name)?);
    }
    Ok(out)
}

struct RawElement {
    kind: u32,
    physical: Option<i64>,
    nodes: Vec<u64>,
}

/// Parses an ASCII MSH 2.2 or 4.1 file.
pub fn parse_msh(bytes: &[u8]) -> Result<Mesh, MeshError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| MeshError::UnsupportedVersion("non-UTF-8 content (binary?)".into()))?;
    let sections = split_sections(text)?;
    let format = sections
        .get("MeshFormat")
        .ok_or_else(|| malformed("missing $MeshFormat"))?;
    let header = Tokens::new(format, "MeshFormat").line()?;
    let version = match header.first().copied() {
        Some("2.2") => MshVersion::V22,
        Some("4.1") => MshVersion::V41,
        Some(v) => return Err(MeshError::UnsupportedVersion(v.to_string())),
        None => return Err(malformed("empty $MeshFormat")),
    };
    if header.get(1).copied() != Some("0") {
        return Err(MeshError::UnsupportedVersion("binary encoding".into()));
    }

    let names = match sections.get("PhysicalNames") {
        Some(lines) => parse_physical_names(lines)?,
        None => BTreeMap::new(),
    };
    let node_lines = sections.get("Nodes").ok_or_else(|| malformed("missing $Nodes"))?;
    let elem_lines = sections
        .get("Elements")
        .ok_or_else(|| malformed("missing $Elements"))?;

    let (node_tags, coords, elements) = match version {
        MshVersion::V22 => {
            let (tags, coords) = parse_nodes_22(node_lines)?;
            (tags, coords, parse_elements_22(elem_lines)?)
        }
        MshVersion::V41 => {
            let entities = match sections.get("Entities") {
                Some(lines) => parse_entities_41(lines)?,
                None => HashMap::new(),
            };
            let (tags, coords) = parse_nodes_41(node_lines)?;
            (tags, coords, parse_elements_41(elem_lines, &entities)?)
        }
    };

    let index: HashMap<u64, usize> = node_tags.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    if index.len() != node_tags.len() {
        return Err(malformed("duplicate node tag"));
    }

    let any_zone = names.values().any(|g| matches!(g, Group::Zone(_)));
    let mut zone_ids: BTreeMap<i64, usize> = BTreeMap::new();
    let mut zone_names = Vec::new();
    for (&(dim, tag), g) in &names {
        if let (2, Group::Zone(name)) = (dim, g) {
            zone_ids.insert(tag, zone_names.len());
            zone_names.push(name.clone());
        }
    }
    if !any_zone {
        zone_names.push("domain".to_string());
    }

    let mut triangles = Vec::new();
    let mut triangle_zone = Vec::new();
    let mut edges = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        let mut idx = Vec::with_capacity(el.nodes.len());
        for &tag in &el.nodes {
            match index.get(&tag) {
                Some(&i) => idx.push(i),
                None => {
                    return Err(MeshError::DanglingNodeReference {
                        element: e,
                        node: tag as usize,
                    })
                }
            }
        }
        match el.kind {
            TRIANGLE => {
                if idx.len() != 3 {
                    return Err(malformed("triangle needs 3 nodes"));
                }
                let zone = if any_zone {
                    let z = el
                        .physical
                        .and_then(|p| zone_ids.get(&p).copied())
                        .ok_or(MeshError::UnzonedTriangle(triangles.len()))?;
                    if let Some(p) = el.physical {
                        if !names.contains_key(&(2, p)) {
                            return Err(MeshError::UnknownPhysicalGroup(format!("2:{p}")));
                        }
                    }
                    z
                } else {
                    0
                };
                triangles.push([idx[0], idx[1], idx[2]]);
                triangle_zone.push(zone);
            }
            LINE => {
                if idx.len() != 2 {
                    return Err(malformed("line needs 2 nodes"));
                }
                let Some(p) = el.physical else {
                    continue;
                };
                match names.get(&(1, p)) {
                    Some(Group::Boundary(tag)) => edges.push(([idx[0], idx[1]], *tag)),
                    Some(Group::Zone(z)) => {
                        return Err(MeshError::UnknownPhysicalGroup(format!("zone:{z} on a line")))
                    }
                    None => return Err(MeshError::UnknownPhysicalGroup(format!("1:{p}"))),
                }
            }
            _ => {}
        }
    }

    Mesh::new(coords, triangles, edges, zone_names, triangle_zone)
}

fn parse_nodes_22(lines: &[&str]) -> Result<(Vec<u64>, Vec<[f64; 2]>), MeshError> {
    let mut t = Tokens::new(lines, "Nodes");
    let count: usize = num(t.line()?.first(), "node count")?;
    let mut tags = Vec::with_capacity(count);
    let mut coords = Vec::with_capacity(count);
    for _ in 0..count {
        let l = t.line()?;
        tags.push(num(l.first(), "node tag")?);
        coords.push([num(l.get(1), "x")?, num(l.get(2), "y")?]);
    }
    if t.line().is_ok() {
        return Err(malformed("more nodes than declared"));
    }
    Ok((tags, coords))
}

fn parse_elements_22(lines: &[&str]) -> Result<Vec<RawElement>, MeshError> {
    let mut t = Tokens::new(lines, "Elements");
    let count: usize = num(t.line()?.first(), "element count")?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let l = t.line()?;
        let kind: u32 = num(l.get(1), "element type")?;
        let ntags: usize = num(l.get(2), "tag count")?;
        let physical = if ntags > 0 {
            Some(num::<i64>(l.get(3), "physical tag")?).filter(|&p| p != 0)
        } else {
            None
        };
        let expect = match kind {
            LINE => 2,
            TRIANGLE => 3,
            POINT => 1,
            other => return Err(MeshError::UnsupportedElement(other)),
        };
        let start = 3 + ntags;
        if l.len() != start + expect {
            return Err(malformed(format!("element line has {} fields", l.len())));
        }
        let nodes = l[start..]
            .iter()
            .map(|s| num(Some(s), "element node"))
            .collect::<Result<_, _>>()?;
        if kind != POINT {
            out.push(RawElement {
                kind,
                physical,
                nodes,
            });
        }
    }
    if t.line().is_ok() {
        return Err(malformed("more elements than declared"));
    }
    Ok(out)
}

fn parse_entities_41(lines: &[&str]) -> Result<HashMap<(u32, i64), Option<i64>>, MeshError> {
    let mut t = Tokens::new(lines, "Entities");
    let head = t.line()?;
    let counts: Vec<usize> = (0..4)
        .map(|k| num(head.get(k), "entity count"))
        .collect::<Result<_, _>>()?;
    let mut out = HashMap::new();
    for (dim, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let l = t.line()?;
            let tag: i64 = num(l.first(), "entity tag")?;
            // points carry one coordinate triple, higher entities a bounding box
            let nphys_at = if dim == 0 { 4 } else { 7 };
            let nphys: usize = num(l.get(nphys_at), "physical tag count")?;
            let phys = if nphys > 0 {
                Some(num::<i64>(l.get(nphys_at + 1), "physical tag")?)
            } else {
                None
            };
            out.insert((dim as u32, tag), phys);
        }
    }
    Ok(out)
}

fn parse_nodes_41(lines: &[&str]) -> Result<(Vec<u64>, Vec<[f64; 2]>), MeshError> {
    let mut t = Tokens::new(lines, "Nodes");
    let head = t.line()?;
    let blocks: usize = num(head.first(), "node block count")?;
    let count: usize = num(head.get(1), "node count")?;
    let mut tags = Vec::with_capacity(count);
    let mut coords = Vec::with_capacity(count);
    for _ in 0..blocks {
        let b = t.line()?;
        let parametric: u32 = num(b.get(2), "parametric flag")?;
        if parametric != 0 {
            return Err(MeshError::UnsupportedVersion("parametric nodes".into()));
        }
        let n: usize = num(b.get(3), "block node count")?;
        let start = tags.len();
        for _ in 0..n {
            tags.push(num(t.line()?.first(), "node tag")?);
        }
        for k in 0..n {
            let l = t.line()?;
            coords.push([num(l.first(), "x")?, num(l.get(1), "y")?]);
            debug_assert_eq!(coords.len(), start + k + 1);
        }
    }
    if tags.len() != count {
        return Err(malformed(format!(
            "header declares {count} nodes, found {}",
            tags.len()
        )));
    }
    Ok((tags, coords))
}

fn parse_elements_41(
    lines: &[&str],
    entities: &HashMap<(u32, i64), Option<i64>>,
) -> Result<Vec<RawElement>, MeshError> {
    let mut t = Tokens::new(lines, "Elements");
    let head = t.line()?;
    let blocks: usize = num(head.first(), "element block count")?;
    let count: usize = num(head.get(1), "element count")?;
    let mut seen = 0;
    let mut out = Vec::new();
    for _ in 0..blocks {
        let b = t.line()?;
        let dim: u32 = num(b.first(), "entity dimension")?;
        let entity: i64 = num(b.get(1), "entity tag")?;
        let kind: u32 = num(b.get(2), "element type")?;
        let n: usize = num(b.get(3), "block element count")?;
        let expect = match kind {
            LINE => 2,
            TRIANGLE => 3,
            POINT => 1,
            other => return Err(MeshError::UnsupportedElement(other)),
        };
        let physical = entities.get(&(dim, entity)).copied().flatten();
        for _ in 0..n {
            let l = t.line()?;
            if l.len() != 1 + expect {
                return Err(malformed(format!("element line has {} fields", l.len())));
            }
            let nodes = l[1..]
                .iter()
                .map(|s| num(Some(s), "element node"))
                .collect::<Result<_, _>>()?;
            if kind != POINT {
                out.push(RawElement {
                    kind,
                    physical,
                    nodes,
                });
            }
        }
        seen += n;
    }
    if seen != count {
        return Err(malformed(format!(
            "header declares {count} elements, found {seen}"
        )));
    }
    Ok(out)
}

fn boundary_phys(tag: BoundaryTag) -> i64 {
    match tag {
        BoundaryTag::Inlet => 1,
        BoundaryTag::Outlet => 2,
        BoundaryTag::Wall => 3,
        BoundaryTag::Exit => 4,
    }
}

/// Serializes `mesh` with boundary groups 1–4 and zone groups 10 + zone id.
pub fn write_msh(mesh: &Mesh, version: MshVersion) -> String {
    let mut s = String::new();
    let used_tags: Vec<BoundaryTag> = BoundaryTag::ALL
        .into_iter()
        .filter(|t| mesh.edges_with_tag(*t).next().is_some())
        .collect();
    let header = match version {
        MshVersion::V22 => "2.2",
        MshVersion::V41 => "4.1",
    };
    let _ = writeln!(s, "$MeshFormat\n{header} 0 8\n$EndMeshFormat");
    let _ = writeln!(
        s,
        "$PhysicalNames\n{}",
        used_tags.len() + mesh.zone_names().len()
    );
    for t in &used_tags {
        let _ = writeln!(s, "1 {} \"bnd:{}\"", boundary_phys(*t), t);
    }
    for (z, name) in mesh.zone_names().iter().enumerate() {
        let _ = writeln!(s, "2 {} \"zone:{}\"", 10 + z, name);
    }
    s.push_str("$EndPhysicalNames\n");

    let n_edges = mesh.boundary_edges().len();
    match version {
        MshVersion::V22 => {
            let _ = writeln!(s, "$Nodes\n{}", mesh.n_nodes());
            for (i, p) in mesh.nodes().iter().enumerate() {
                let _ = writeln!(s, "{} {:?} {:?} 0", i + 1, p[0], p[1]);
            }
            s.push_str("$EndNodes\n");
            let _ = writeln!(s, "$Elements\n{}", n_edges + mesh.n_triangles());
            let mut id = 1;
            for e in mesh.boundary_edges() {
                let p = boundary_phys(e.tag);
                let _ = writeln!(s, "{id} 1 2 {p} {p} {} {}", e.nodes[0] + 1, e.nodes[1] + 1);
                id += 1;
            }
            for (t, tri) in mesh.triangles().iter().enumerate() {
                let p = 10 + mesh.triangle_zone()[t];
                let _ = writeln!(
                    s,
                    "{id} 2 2 {p} {p} {} {} {}",
                    tri[0] + 1,
                    tri[1] + 1,
                    tri[2] + 1
                );
                id += 1;
            }
            s.push_str("$EndElements\n");
        }
        MshVersion::V41 => {
            let nz = mesh.zone_names().len();
            let _ = writeln!(s, "$Entities\n0 {} {} 0", used_tags.len(), nz);
            for t in &used_tags {
                let p = boundary_phys(*t);
                let _ = writeln!(s, "{p} 0 0 0 0 0 0 1 {p} 0");
            }
            for z in 0..nz {
                let _ = writeln!(s, "{} 0 0 0 0 0 0 1 {} 0", z + 1, 10 + z);
            }
            s.push_str("$EndEntities\n");
            let n = mesh.n_nodes();
            let _ = writeln!(s, "$Nodes\n1 {n} 1 {n}\n2 1 0 {n}");
            for i in 0..n {
                let _ = writeln!(s, "{}", i + 1);
            }
            for p in mesh.nodes() {
                let _ = writeln!(s, "{:?} {:?} 0", p[0], p[1]);
            }
            s.push_str("$EndNodes\n");

            let mut blocks: Vec<(u32, i64, u32, Vec<String>)> = Vec::new();
            let mut id = 1;
            for t in &used_tags {
                let lines = mesh
                    .edges_with_tag(*t)
                    .map(|e| {
                        let l = format!("{id} {} {}", e.nodes[0] + 1, e.nodes[1] + 1);
                        id += 1;
                        l
                    })
                    .collect();
                blocks.push((1, boundary_phys(*t), LINE, lines));
            }
            for z in 0..nz {
                let lines = mesh
                    .triangles()
                    .iter()
                    .zip(mesh.triangle_zone())
                    .filter(|(_, &tz)| tz == z)
                    .map(|(tri, _)| {
                        let l = format!("{id} {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
                        id += 1;
                        l
                    })
                    .collect();
                blocks.push((2, z as i64 + 1, TRIANGLE, lines));
            }
            let total = id - 1;
            let _ = writeln!(s, "$Elements\n{} {total} 1 {total}", blocks.len());
            for (dim, ent, kind, lines) in blocks {
                let _ = writeln!(s, "{dim} {ent} {kind} {}", lines.len());
                for l in lines {
                    s.push_str(&l);
                    s.push('\n');
                }
            }
            s.push_str("$EndElements\n");
        }
    }
    s
}
