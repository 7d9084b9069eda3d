//! Triangle meshes and Wavefront OBJ input/output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: face index {index} out of range ({count} {kind} records)")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        count: usize,
        kind: &'static str,
    },
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("face {face} references vertex {index}, mesh has {count}")]
    BadFace { face: usize, index: usize, count: usize },
}

/// One triangle. Texture and normal indices are carried through untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub v: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vt: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vn: Option<[usize; 3]>,
}

impl Face {
    pub fn new(v: [usize; 3]) -> Self {
        Self { v, vt: None, vn: None }
    }
}

/// Vertex positions are in meters, model space. All indices are zero-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Face>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub texcoords: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub normals: Vec<[f64; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<Face>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            faces,
            texcoords: Vec::new(),
            normals: Vec::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if let Some(i) = self
            .vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        let count = self.vertices.len();
        for (fi, face) in self.faces.iter().enumerate() {
            if let Some(&index) = face.v.iter().find(|&&i| i >= count) {
                return Err(MeshError::BadFace { face: fi, index, count });
            }
        }
        Ok(())
    }

    /// Same topology and attributes with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<[f64; 3]>) -> Mesh {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Mesh {
            vertices,
            faces: self.faces.clone(),
            texcoords: self.texcoords.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Parses Wavefront OBJ text. Polygons are fan-triangulated; records other
    /// than `v`, `vt`, `vn` and `f` are ignored.
    pub fn from_obj(text: &str) -> Result<Mesh, MeshError> {
        let mut mesh = Mesh::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut parts = content.split_whitespace();
            let Some(tag) = parts.next() else { continue };
            let args: Vec<&str> = parts.collect();
            match tag {
                "v" => {
                    let nums = parse_floats(&args, line)?;
                    if !(3..=4).contains(&nums.len()) {
                        return Err(parse_err(line, "`v` needs 3 coordinates"));
                    }
                    if !nums.iter().all(|c| c.is_finite()) {
                        return Err(parse_err(line, "non-finite vertex coordinate"));
                    }
                    mesh.vertices.push([nums[0], nums[1], nums[2]]);
                }
                "vt" => {
                    let nums = parse_floats(&args, line)?;
                    if nums.is_empty() || nums.len() > 3 {
                        return Err(parse_err(line, "`vt` needs 1 to 3 coordinates"));
                    }
                    mesh.texcoords.push(nums);
                }
                "vn" => {
                    let nums = parse_floats(&args, line)?;
                    if nums.len() != 3 {
                        return Err(parse_err(line, "`vn` needs 3 coordinates"));
                    }
                    mesh.normals.push([nums[0], nums[1], nums[2]]);
                }
                "f" => {
                    if args.len() < 3 {
                        return Err(parse_err(line, "`f` needs at least 3 vertices"));
                    }
                    let corners = args
                        .iter()
                        .map(|a| parse_corner(a, line, &mesh))
                        .collect::<Result<Vec<_>, _>>()?;
                    let has_vt = corners.iter().all(|c| c.1.is_some());
                    let has_vn = corners.iter().all(|c| c.2.is_some());
                    for k in 1..corners.len() - 1 {
                        let tri = [corners[0], corners[k], corners[k + 1]];
                        mesh.faces.push(Face {
                            v: tri.map(|c| c.0),
                            vt: has_vt.then(|| tri.map(|c| c.1.unwrap_or_default())),
                            vn: has_vn.then(|| tri.map(|c| c.2.unwrap_or_default())),
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }

    /// Writes OBJ text with 1-based indices. Output is deterministic.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for vt in &self.texcoords {
            out.push_str("vt");
            for c in vt {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
        for vn in &self.normals {
            let _ = writeln!(out, "vn {} {} {}", vn[0], vn[1], vn[2]);
        }
        for f in &self.faces {
            out.push('f');
            for k in 0..3 {
                let _ = write!(out, " {}", f.v[k] + 1);
                match (f.vt, f.vn) {
                    (Some(t), Some(n)) => {
                        let _ = write!(out, "/{}/{}", t[k] + 1, n[k] + 1);
                    }
                    (Some(t), None) => {
                        let _ = write!(out, "/{}", t[k] + 1);
                    }
                    (None, Some(n)) => {
                        let _ = write!(out, "//{}", n[k] + 1);
                    }
                    (None, None) => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

fn parse_floats(args: &[&str], line: usize) -> Result<Vec<f64>, MeshError> {
    args.iter()
        .map(|a| {
            a.parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid number `{a}`")))
        })
        .collect()
}

type Corner = (usize, Option<usize>, Option<usize>);

fn parse_corner(token: &str, line: usize, mesh: &Mesh) -> Result<Corner, MeshError> {
    let mut fields = token.split('/');
    let v = fields.next().unwrap_or("");
    let vt = fields.next().filter(|s| !s.is_empty());
    let vn = fields.next().filter(|s| !s.is_empty());
    if fields.next().is_some() {
        return Err(parse_err(line, format!("malformed face corner `{token}`")));
    }
    let v = resolve_index(v, line, mesh.vertices.len(), "v")?;
    let vt = vt
        .map(|s| resolve_index(s, line, mesh.texcoords.len(), "vt"))
        .transpose()?;
    let vn = vn
        .map(|s| resolve_index(s, line, mesh.normals.len(), "vn"))
        .transpose()?;
    Ok((v, vt, vn))
}

/// OBJ indices are 1-based; negative values count back from the latest record.
fn resolve_index(s: &str, line: usize, count: usize, kind: &'static str) -> Result<usize, MeshError> {
    let raw: i64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("invalid index `{s}`")))?;
    let out_of_range = || MeshError::IndexOutOfRange { line, index: raw, count, kind };
    let resolved = match raw {
        0 => return Err(out_of_range()),
        r if r > 0 => r - 1,
        r => count as i64 + r,
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(out_of_range());
    }
    Ok(resolved as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

    #[test]
    fn minimal_triangle() {
        let m = Mesh::from_obj(TRI).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces, vec![Face::new([0, 1, 2])]);
    }

    #[test]
    fn out_of_range_face() {
        let err = Mesh::from_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n").unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { line: 4, index: 5, .. }));
    }

    #[test]
    fn quad_is_fanned() {
        let m = Mesh::from_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces, vec![Face::new([0, 1, 2]), Face::new([0, 2, 3])]);
    }

    #[test]
    fn malformed_vertex_reports_line() {
        let err = Mesh::from_obj("# header\nv 0 0 0\nv 1 zero 0\n").unwrap_err();
        assert_eq!(
            err,
            MeshError::Parse { line: 3, msg: "invalid number `zero`".into() }
        );
    }

    #[test]
    fn negative_and_slashed_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf -3/1/1 -2/2/1 -1/3/1\n";
        let m = Mesh::from_obj(text).unwrap();
        assert_eq!(m.faces[0].v, [0, 1, 2]);
        assert_eq!(m.faces[0].vt, Some([0, 1, 2]));
        assert_eq!(m.faces[0].vn, Some([0, 0, 0]));
        let again = Mesh::from_obj(&m.to_obj()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn ignores_unrelated_records() {
        let text = format!("mtllib a.mtl\no face\ng g1\ns off\nusemtl skin\n{TRI}");
        assert_eq!(Mesh::from_obj(&text).unwrap().faces.len(), 1);
    }
}
