//! ASCII OBJ and ASCII STL reading and writing.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{SurfaceMesh, Vec3};
use crate::error::{IppError, Result};

/// Load an ASCII OBJ or ASCII STL file. STL is detected by extension or by a
/// leading `solid` keyword; binary STL is rejected.
pub fn load_mesh(path: &Path) -> Result<SurfaceMesh> {
    let bytes = std::fs::read(path).map_err(|e| IppError::io(path, e))?;
    let is_stl = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("stl"));
    let text = String::from_utf8(bytes).map_err(|_| IppError::Parse {
        line: 0,
        msg: "file is not ASCII text (binary formats are not supported)".into(),
    })?;
    if is_stl || text.trim_start().starts_with("solid") {
        parse_stl(&text)
    } else {
        parse_obj(&text)
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| IppError::Parse {
        line,
        msg: "missing coordinate".into(),
    })?;
    tok.parse().map_err(|_| IppError::Parse {
        line,
        msg: format!("bad number `{tok}`"),
    })
}

/// Parse `v` and `f` records; other record types are ignored. Face indices
/// are 1-based, negative indices count back from the latest vertex.
pub fn parse_obj(text: &str) -> Result<SurfaceMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line)?;
                let y = parse_f64(toks.next(), line)?;
                let z = parse_f64(toks.next(), line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(IppError::NonTriangleFace {
                        line,
                        count: refs.len(),
                    });
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| IppError::Parse {
                        line,
                        msg: format!("bad face index `{r}`"),
                    })?;
                    let resolved = match idx {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => (vertices.len() as i64 + i).try_into().ok(),
                    };
                    *slot = resolved.filter(|&i| i < vertices.len()).ok_or_else(|| IppError::Parse {
                        line,
                        msg: format!("face index {idx} out of range"),
                    })?;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(IppError::Parse {
            line: 0,
            msg: "no faces found".into(),
        });
    }
    SurfaceMesh::from_triangles(vertices, faces)
}

/// Parse ASCII STL. Vertices are welded by exact coordinate equality.
pub fn parse_stl(text: &str) -> Result<SurfaceMesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut loop_verts: Vec<usize> = Vec::new();
    let mut loop_start = 0;
    let mut saw_solid = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("solid") => saw_solid = true,
            Some("outer") => {
                loop_verts.clear();
                loop_start = line;
            }
            Some("vertex") => {
                let p = Vec3::new(
                    parse_f64(toks.next(), line)?,
                    parse_f64(toks.next(), line)?,
                    parse_f64(toks.next(), line)?,
                );
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                let idx = *lookup.entry(key).or_insert_with(|| {
                    vertices.push(p);
                    vertices.len() - 1
                });
                loop_verts.push(idx);
            }
            Some("endloop") => {
                if loop_verts.len() != 3 {
                    return Err(IppError::NonTriangleFace {
                        line: loop_start,
                        count: loop_verts.len(),
                    });
                }
                faces.push([loop_verts[0], loop_verts[1], loop_verts[2]]);
            }
            Some("facet" | "endfacet" | "endsolid") | None => {}
            Some(other) => {
                return Err(IppError::Parse {
                    line,
                    msg: format!("unexpected keyword `{other}`"),
                })
            }
        }
    }
    if !saw_solid || faces.is_empty() {
        return Err(IppError::Parse {
            line: 0,
            msg: "not an ASCII STL solid".into(),
        });
    }
    SurfaceMesh::from_triangles(vertices, faces)
}

/// Serialize as OBJ. Coordinates use Rust's shortest round-trip formatting.
pub fn write_obj(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.facets() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_stl(mesh: &SurfaceMesh, name: &str) -> String {
    let mut out = format!("solid {name}\n");
    for (f, n) in mesh.facets().iter().zip(mesh.normals()) {
        let _ = writeln!(out, "  facet normal {:?} {:?} {:?}", n.x, n.y, n.z);
        out.push_str("    outer loop\n");
        for &i in f {
            let v = mesh.vertices()[i];
            let _ = writeln!(out, "      vertex {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(out, "endsolid {name}");
    out
}
