//! JSON mesh files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Edge, Point3, Tetrahedron, TrussMesh};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<Point3>,
    tets: Vec<Tetrahedron>,
    gamma: GammaFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chunks: Option<Vec<Vec<usize>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaFile {
    default: f64,
    #[serde(default)]
    edges: Vec<(usize, usize, f64)>,
}

/// Parse a mesh; errors name the offending field path.
pub fn read_mesh_json<R: Read>(reader: R) -> Result<TrussMesh> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let file: MeshFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| Error::Format(format!("at `{}`: {}", e.path(), e.inner())))?;
    de.end().map_err(|e| Error::Format(e.to_string()))?;

    let n = file.vertices.len();
    let mut overrides = std::collections::BTreeMap::new();
    for (k, &(i, j, g)) in file.gamma.edges.iter().enumerate() {
        if i >= n || j >= n {
            return Err(Error::Format(format!("at `gamma.edges[{k}]`: vertex index out of range")));
        }
        overrides.insert(Edge::new(i, j), g);
    }
    for (t, tet) in file.tets.iter().enumerate() {
        if let Some(&v) = tet.0.iter().find(|&&v| v >= n) {
            return Err(Error::Format(format!("at `tets[{t}]`: vertex index {v} out of range (n = {n})")));
        }
    }
    let mesh = TrussMesh::new(file.vertices, file.tets, file.gamma.default)?.with_gamma_overrides(overrides)?;
    match file.chunks {
        Some(chunks) => mesh.with_chunks(chunks),
        None => Ok(mesh),
    }
}

/// Write a mesh as compact JSON followed by a newline.
pub fn write_mesh_json<W: Write>(mesh: &TrussMesh, mut writer: W) -> Result<()> {
    let file = MeshFile {
        vertices: mesh.points().to_vec(),
        tets: mesh.tets().to_vec(),
        gamma: GammaFile {
            default: mesh.gamma_default(),
            edges: mesh.gamma_overrides().iter().map(|(e, &g)| (e.0, e.1, g)).collect(),
        },
        chunks: mesh.declared_chunks().map(<[_]>::to_vec),
    };
    serde_json::to_writer(&mut writer, &file).map_err(|e| Error::Format(e.to_string()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_union, place_along, GlueAxis};

    #[test]
    fn round_trip() {
        let shapes = place_along(&[[2, 1, 1], [1, 1, 1]], GlueAxis::Y);
        let m = generate_union(&shapes, 1.5).unwrap();
        let e = m.edges()[3];
        let m = m.with_gamma_overrides([(e, 0.75)].into_iter().collect()).unwrap();
        let mut buf = Vec::new();
        write_mesh_json(&m, &mut buf).unwrap();
        let back = read_mesh_json(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn field_names_are_exact() {
        let json = r#"{"vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]], "tets": [[0,1,2,3]], "gamma": {"default": 1.0, "edges": [[0,1,2.0]]}}"#;
        let m = read_mesh_json(json.as_bytes()).unwrap();
        assert_eq!(m.n_tets(), 1);
        assert_eq!(m.gamma(Edge(0, 1)), 2.0);
        assert_eq!(m.gamma(Edge(2, 3)), 1.0);
        assert_eq!(m.num_chunks(), 1);
    }

    #[test]
    fn error_names_field() {
        let json = r#"{"vertices": [[0,0,0],[1,0,"a"]], "tets": [], "gamma": {"default": 1.0}}"#;
        let err = read_mesh_json(json.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("vertices[1]"), "{err}");
        let json = r#"{"vertices": [[0,0,0]], "tets": [[0,1,2,3]], "gamma": {"default": 1.0}}"#;
        let err = read_mesh_json(json.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("tets[0]"), "{err}");
        let json = r#"{"vertices": [], "tets": []}"#;
        let err = read_mesh_json(json.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }
}
