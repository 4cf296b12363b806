//! Wavefront OBJ meshes, per-face label sidecars and XYZ point clouds.

use std::fs;
use std::path::Path;

use super::mesh::vec3;
use super::{GeometryError, TriangleMesh, Vec3};

fn read(path: &Path) -> Result<String, GeometryError> {
    fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an OBJ mesh; if `labels` is given, attaches the per-face label sidecar.
pub fn load_mesh(path: &Path, labels: Option<&Path>) -> Result<TriangleMesh, GeometryError> {
    let mesh = parse_obj(&read(path)?)?;
    match labels {
        Some(lp) => {
            let l = parse_labels(&read(lp)?)?;
            mesh.with_labels(Some(l))
        }
        None => Ok(mesh),
    }
}

/// Parses `v` and `f` records. Polygons are fan-triangulated around their
/// first vertex; `v/vt/vn` index forms and negative (relative) indices are
/// accepted. Everything else is ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // (line number, polygon) kept until all vertices are known
    let mut face_lines: Vec<(usize, Vec<i64>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| GeometryError::Parse {
                            line,
                            message: format!("bad vertex coordinate `{t}`"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: "vertex needs 3 coordinates".into(),
                    });
                }
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(GeometryError::NonFinite { record: line });
                }
                vertices.push(vec3(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| GeometryError::Parse {
                        line,
                        message: format!("bad face index `{t}`"),
                    })?;
                    // relative indices refer to vertices read so far
                    let resolved = if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        idx - 1
                    };
                    if idx == 0 || resolved < 0 {
                        return Err(GeometryError::IndexOutOfRange {
                            record: line,
                            index: idx,
                            count: vertices.len(),
                        });
                    }
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                face_lines.push((line, poly));
            }
            _ => {}
        }
    }

    let count = vertices.len();
    for (line, poly) in face_lines {
        if let Some(&bad) = poly.iter().find(|&&i| i as usize >= count) {
            return Err(GeometryError::IndexOutOfRange {
                record: line,
                index: bad + 1,
                count,
            });
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
        }
    }
    TriangleMesh::new(vertices, faces, None)
}

/// One integer label per face, newline separated.
pub fn parse_labels(text: &str) -> Result<Vec<u32>, GeometryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<u32>().map_err(|_| GeometryError::Parse {
                line: i + 1,
                message: format!("bad label `{}`", l.trim()),
            })
        })
        .collect()
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

pub fn write_labels(labels: &[u32]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

/// A point cloud, optionally with per-point normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

/// XYZ text: `x y z [nx ny nz]` per line. Normals must be present on every
/// line or on none.
pub fn parse_xyz(text: &str) -> Result<PointCloud, GeometryError> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut with_normals: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let vals: Vec<f64> = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| GeometryError::Parse {
                    line,
                    message: format!("bad number `{t}`"),
                })
            })
            .collect::<Result<_, _>>()?;
        let has_n = match vals.len() {
            3 => false,
            6 => true,
            n => {
                return Err(GeometryError::Parse {
                    line,
                    message: format!("expected 3 or 6 values, found {n}"),
                })
            }
        };
        if *with_normals.get_or_insert(has_n) != has_n {
            return Err(GeometryError::Parse {
                line,
                message: "normals must be given on every line or none".into(),
            });
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite { record: line });
        }
        points.push(vec3(vals[0], vals[1], vals[2]));
        if has_n {
            let n = vec3(vals[3], vals[4], vals[5]);
            let len = n.norm();
            normals.push(if len > 0.0 { n / len } else { n });
        }
    }
    Ok(PointCloud {
        points,
        normals: with_normals.unwrap_or(false).then_some(normals),
    })
}

pub fn load_xyz(path: &Path) -> Result<PointCloud, GeometryError> {
    parse_xyz(&read(path)?)
}
