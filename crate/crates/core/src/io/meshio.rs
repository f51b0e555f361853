//! Mesh file formats: the native text format and a Gmsh MSH 2.2 ASCII
//! subset.
//!
//! Native format:
//! ```text
//! dim n_nodes n_elems n_bfacets
//! <n_nodes lines of coordinates>
//! <n_elems lines of 0-based node indices>
//! <n_bfacets lines of facet node indices followed by a label>
//! ```

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh_string(mesh: &SimplicialMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        mesh.dim(),
        mesh.n_nodes(),
        mesh.n_elements(),
        mesh.n_boundary_facets()
    );
    for i in 0..mesh.n_nodes() {
        let p = mesh.node(i);
        for (q, x) in p.iter().enumerate() {
            if q > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    for e in 0..mesh.n_elements() {
        let verts = mesh.element(e);
        for (q, v) in verts.iter().enumerate() {
            if q > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    for f in 0..mesh.n_boundary_facets() {
        let (verts, label) = mesh.boundary_facet(f);
        for v in verts {
            let _ = write!(out, "{v} ");
        }
        out.push_str(label);
        out.push('\n');
    }
    out
}

pub fn write_mesh(mesh: &SimplicialMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

/// Stable content hash of a mesh (over its native serialization).
pub fn mesh_content_hash(mesh: &SimplicialMesh) -> u64 {
    super::fnv1a64(write_mesh_string(mesh).as_bytes())
}

fn bad_line(line_no: usize, what: &str) -> Error {
    Error::Mesh(format!("mesh file line {line_no}: {what}"))
}

pub fn parse_mesh_str(text: &str) -> Result<SimplicialMesh> {
    let mut lines = text.lines().enumerate();
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::Mesh("empty mesh file".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad_line(line_no + 1, "expected 'dim n_nodes n_elems n_bfacets'"))?;
    if head.len() != 4 {
        return Err(bad_line(line_no + 1, "expected 4 header fields"));
    }
    let (dim, n_nodes, n_elems, n_bfacets) = (head[0], head[1], head[2], head[3]);
    if dim != 2 && dim != 3 {
        return Err(bad_line(line_no + 1, "dim must be 2 or 3"));
    }

    let mut coords = Vec::with_capacity(n_nodes * dim);
    for _ in 0..n_nodes {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::Mesh("unexpected end of file in node block".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad_line(ln + 1, "bad node coordinate"))?;
        if vals.len() != dim {
            return Err(bad_line(ln + 1, "wrong number of coordinates"));
        }
        coords.extend_from_slice(&vals);
    }

    let mut elements = Vec::with_capacity(n_elems * (dim + 1));
    for _ in 0..n_elems {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::Mesh("unexpected end of file in element block".into()))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad_line(ln + 1, "bad element index"))?;
        if vals.len() != dim + 1 {
            return Err(bad_line(ln + 1, "wrong number of element vertices"));
        }
        elements.extend_from_slice(&vals);
    }

    let mut facets = Vec::with_capacity(n_bfacets);
    for _ in 0..n_bfacets {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::Mesh("unexpected end of file in facet block".into()))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dim + 1 {
            return Err(bad_line(ln + 1, "expected facet indices and a label"));
        }
        let verts: Vec<usize> = tokens[..dim]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad_line(ln + 1, "bad facet index"))?;
        facets.push((verts, tokens[dim].to_string()));
    }

    SimplicialMesh::new(dim, coords, elements, facets)
}

pub fn read_mesh(path: &Path) -> Result<SimplicialMesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Mesh(format!("cannot read mesh file {}: {e}", path.display())))?;
    if text.trim_start().starts_with("$MeshFormat") {
        return parse_gmsh_str(&text);
    }
    parse_mesh_str(&text)
}

/// Reads the ASCII Gmsh 2.2 subset: `$Nodes`, `$Elements` (line, triangle,
/// tetrahedron), and optional `$PhysicalNames` for boundary labels.
pub fn read_gmsh(path: &Path) -> Result<SimplicialMesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Mesh(format!("cannot read mesh file {}: {e}", path.display())))?;
    parse_gmsh_str(&text)
}

fn parse_gmsh_str(text: &str) -> Result<SimplicialMesh> {
    let mut lines = text.lines().peekable();
    let mut phys_names: Vec<(usize, i64, String)> = Vec::new(); // (dim, tag, name)
    let mut node_ids: Vec<i64> = Vec::new();
    let mut node_coords: Vec<[f64; 3]> = Vec::new();
    // (type, physical tag, nodes)
    let mut raw_elements: Vec<(u32, i64, Vec<i64>)> = Vec::new();

    while let Some(line) = lines.next() {
        match line.trim() {
            "$MeshFormat" => {
                let header = lines
                    .next()
                    .ok_or_else(|| Error::Mesh("truncated $MeshFormat".into()))?;
                let version = header.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(Error::Mesh(format!(
                        "unsupported Gmsh format version '{version}' (need 2.x ASCII)"
                    )));
                }
                expect_section_end(&mut lines, "$EndMeshFormat")?;
            }
            "$PhysicalNames" => {
                let count: usize = parse_count(lines.next(), "$PhysicalNames")?;
                for _ in 0..count {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::Mesh("truncated $PhysicalNames".into()))?;
                    let tokens: Vec<&str> = line.split_whitespace().collect();
                    if tokens.len() < 3 {
                        return Err(Error::Mesh("bad physical name line".into()));
                    }
                    let pdim: usize = tokens[0]
                        .parse()
                        .map_err(|_| Error::Mesh("bad physical dim".into()))?;
                    let tag: i64 = tokens[1]
                        .parse()
                        .map_err(|_| Error::Mesh("bad physical tag".into()))?;
                    let name = tokens[2..].join(" ").trim_matches('"').to_string();
                    phys_names.push((pdim, tag, name));
                }
                expect_section_end(&mut lines, "$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let count: usize = parse_count(lines.next(), "$Nodes")?;
                for _ in 0..count {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::Mesh("truncated $Nodes".into()))?;
                    let tokens: Vec<&str> = line.split_whitespace().collect();
                    if tokens.len() < 4 {
                        return Err(Error::Mesh("bad node line".into()));
                    }
                    let id: i64 = tokens[0]
                        .parse()
                        .map_err(|_| Error::Mesh("bad node id".into()))?;
                    let mut p = [0.0f64; 3];
                    for q in 0..3 {
                        p[q] = tokens[1 + q]
                            .parse()
                            .map_err(|_| Error::Mesh("bad node coordinate".into()))?;
                    }
                    node_ids.push(id);
                    node_coords.push(p);
                }
                expect_section_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let count: usize = parse_count(lines.next(), "$Elements")?;
                for _ in 0..count {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::Mesh("truncated $Elements".into()))?;
                    let tokens: Vec<i64> = line
                        .split_whitespace()
                        .map(|t| t.parse::<i64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Mesh("bad element line".into()))?;
                    if tokens.len() < 3 {
                        return Err(Error::Mesh("bad element line".into()));
                    }
                    let etype = tokens[1] as u32;
                    let ntags = tokens[2] as usize;
                    let phys = if ntags >= 1 { tokens[3] } else { 0 };
                    let nodes = tokens[3 + ntags..].to_vec();
                    raw_elements.push((etype, phys, nodes));
                }
                expect_section_end(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // skip unknown sections
                let end = format!("$End{}", &other[1..]);
                for skipped in lines.by_ref() {
                    if skipped.trim() == end {
                        break;
                    }
                }
            }
            _ => {}
        }
    }

    if node_ids.is_empty() {
        return Err(Error::Mesh("Gmsh file has no $Nodes section".into()));
    }
    let has_tets = raw_elements.iter().any(|(t, _, _)| *t == 4);
    let dim = if has_tets { 3 } else { 2 };
    let (cell_type, facet_type) = if has_tets { (4u32, 2u32) } else { (2u32, 1u32) };

    let mut id_map = std::collections::HashMap::new();
    for (k, &id) in node_ids.iter().enumerate() {
        id_map.insert(id, k);
    }
    let mut coords = Vec::with_capacity(node_coords.len() * dim);
    for p in &node_coords {
        coords.extend_from_slice(&p[..dim]);
    }

    let map_nodes = |nodes: &[i64]| -> Result<Vec<usize>> {
        nodes
            .iter()
            .map(|id| {
                id_map
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Mesh(format!("element references unknown node {id}")))
            })
            .collect()
    };

    let label_for = |phys: i64| -> String {
        phys_names
            .iter()
            .find(|(pdim, tag, _)| *pdim == dim - 1 && *tag == phys)
            .map(|(_, _, name)| name.clone())
            .unwrap_or_else(|| format!("phys{phys}"))
    };

    let mut elements = Vec::new();
    let mut facets = Vec::new();
    for (etype, phys, nodes) in &raw_elements {
        if *etype == cell_type {
            elements.extend(map_nodes(nodes)?);
        } else if *etype == facet_type {
            facets.push((map_nodes(nodes)?, label_for(*phys)));
        }
        // other element types (points, higher order) are ignored
    }
    if elements.is_empty() {
        return Err(Error::Mesh("Gmsh file contains no volume elements".into()));
    }
    SimplicialMesh::new(dim, coords, elements, facets)
}

fn parse_count(line: Option<&str>, section: &str) -> Result<usize> {
    line.and_then(|l| l.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Mesh(format!("bad count in {section}")))
}

fn expect_section_end<'b>(
    lines: &mut impl Iterator<Item = &'b str>,
    end: &str,
) -> Result<()> {
    match lines.next() {
        Some(l) if l.trim() == end => Ok(()),
        _ => Err(Error::Mesh(format!("expected {end}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, MeshPattern};

    #[test]
    fn native_roundtrip_byte_identical() {
        for mesh in [
            generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 3, MeshPattern::Crisscross).unwrap(),
            generate_box_mesh(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 2, MeshPattern::Kuhn).unwrap(),
        ] {
            let text = write_mesh_string(&mesh);
            let back = parse_mesh_str(&text).unwrap();
            let text2 = write_mesh_string(&back);
            assert_eq!(text, text2);
            assert_eq!(mesh_content_hash(&mesh), mesh_content_hash(&back));
        }
    }

    #[test]
    fn native_parse_errors_carry_line_numbers() {
        let bad = "2 2 0 0\n0 0\nnot a number\n";
        let err = parse_mesh_str(bad).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn gmsh_triangle_square() {
        let text = r#"$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 10 "bottom"
1 11 "rest"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
6
1 1 2 10 1 1 2
2 1 2 11 2 2 3
3 1 2 11 3 3 4
4 1 2 11 4 4 1
5 2 2 99 5 1 2 3
6 2 2 99 5 1 3 4
$EndElements
"#;
        let mesh = parse_gmsh_str(text).unwrap();
        assert_eq!(mesh.dim(), 2);
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(mesh.n_boundary_facets(), 4);
        assert_eq!(mesh.boundary_nodes(&["bottom"]).len(), 2);
        assert_eq!(mesh.boundary_nodes(&["rest"]).len(), 4);
    }

    #[test]
    fn gmsh_tet_cube_with_default_labels() {
        // one cube as five tets, facet physical tags without names
        let text = r#"$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
8
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
5 0 0 1
6 1 0 1
7 1 1 1
8 0 1 1
$EndNodes
$Elements
17
1 4 1 1 1 2 4 5
2 4 1 1 2 3 4 7
3 4 1 1 2 4 5 7
4 4 1 1 5 6 7 2
5 4 1 1 4 7 8 5
6 2 1 7 1 2 4
7 2 1 7 2 3 4
8 2 1 7 1 5 2
9 2 1 7 2 5 6
10 2 1 7 2 6 7
11 2 1 7 2 7 3
12 2 1 7 3 7 4
13 2 1 7 4 7 8
14 2 1 7 4 8 5
15 2 1 7 1 4 5
16 2 1 7 5 6 7
17 2 1 7 5 7 8
$EndElements
"#;
        let mesh = parse_gmsh_str(text).unwrap();
        assert_eq!(mesh.dim(), 3);
        assert_eq!(mesh.n_elements(), 5);
        assert_eq!(mesh.n_boundary_facets(), 12);
        assert!(mesh.labels().contains(&"phys7".to_string()));
    }

    #[test]
    fn gmsh_rejects_wrong_version() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        assert!(parse_gmsh_str(text).is_err());
    }
}
