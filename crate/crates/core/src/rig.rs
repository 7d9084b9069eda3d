//! Rigs: eighteen anchors, each bound to a weighted vertex region of a mesh.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::feature::{Feature, FeatureDisplacements, Zxy, FEATURE_COUNT};
use crate::mesh::Mesh;

pub const RIG_FORMAT: &str = "emotemesh-rig/1";

#[derive(Debug, Error, PartialEq)]
pub enum RigError {
    #[error("invalid rig document: {0}")]
    Json(String),
    #[error("unsupported rig format `{0}`, expected `{RIG_FORMAT}`")]
    Format(String),
    #[error("units must be \"meters\", found `{0}`")]
    Units(String),
    #[error("invalid axes: {0}")]
    Axes(String),
    #[error("missing anchor: {0}")]
    MissingAnchor(Feature),
    #[error("unknown anchor: {0}")]
    UnknownAnchor(String),
    #[error("anchor {0}: weight map is empty")]
    EmptyWeights(Feature),
    #[error("anchor {anchor}: weight {weight} for vertex {vertex} outside [0, 1]")]
    WeightRange { anchor: Feature, vertex: usize, weight: f64 },
    #[error("anchor {anchor}: invalid vertex index `{key}`")]
    VertexKey { anchor: Feature, key: String },
    #[error("anchor {0}: rest position is not finite")]
    NonFiniteRest(Feature),
    #[error("anchor {anchor}: vertex {vertex} out of range for mesh with {count} vertices")]
    VertexOutOfRange { anchor: Feature, vertex: usize, count: usize },
    #[error("displacement for {0} is not finite")]
    NonFiniteDisplacement(Feature),
    #[error("radius must be positive, got {0}")]
    Radius(f64),
}

/// Signed mesh axis, e.g. `-y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisDir {
    pub axis: usize,
    pub sign: i8,
}

impl FromStr for AxisDir {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (1, &s[1..]),
            Some(b'-') => (-1, &s[1..]),
            _ => (1, s),
        };
        let axis = match rest {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Err(format!("`{s}` is not a signed axis")),
        };
        Ok(AxisDir { axis, sign })
    }
}

impl fmt::Display for AxisDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign < 0 { '-' } else { '+' };
        write!(f, "{sign}{}", ["x", "y", "z"][self.axis])
    }
}

/// Where feature-space front, right and down point in the mesh's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axes {
    pub front: AxisDir,
    pub right: AxisDir,
    pub down: AxisDir,
}

impl Default for Axes {
    fn default() -> Self {
        Axes {
            front: AxisDir { axis: 2, sign: 1 },
            right: AxisDir { axis: 0, sign: 1 },
            down: AxisDir { axis: 1, sign: 1 },
        }
    }
}

impl Axes {
    pub fn new(front: AxisDir, right: AxisDir, down: AxisDir) -> Result<Self, RigError> {
        let mut used = [false; 3];
        for a in [front, right, down] {
            if std::mem::replace(&mut used[a.axis], true) {
                return Err(RigError::Axes("front, right and down must use distinct axes".into()));
            }
        }
        Ok(Axes { front, right, down })
    }

    /// Y-up mesh facing +z with the character's left on +x.
    pub fn y_up() -> Self {
        Axes {
            front: AxisDir { axis: 2, sign: 1 },
            right: AxisDir { axis: 0, sign: 1 },
            down: AxisDir { axis: 1, sign: -1 },
        }
    }

    pub fn to_mesh(&self, d: Zxy) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (dir, value) in [(self.front, d.z), (self.right, d.x), (self.down, d.y)] {
            out[dir.axis] = if dir.sign < 0 { -value } else { value };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub feature: Feature,
    pub rest: [f64; 3],
    pub weights: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub mesh_ref: String,
    pub axes: Axes,
    anchors: Vec<Anchor>,
    pub metadata: BTreeMap<String, String>,
}

impl Rig {
    /// Builds a rig from exactly one anchor per feature.
    pub fn new(
        mesh_ref: impl Into<String>,
        axes: Axes,
        anchors: impl IntoIterator<Item = Anchor>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Rig, RigError> {
        let mut slots: Vec<Option<Anchor>> = vec![None; FEATURE_COUNT];
        for a in anchors {
            let i = a.feature.index();
            if slots[i].is_some() {
                return Err(RigError::Json(format!("duplicate anchor: {}", a.feature)));
            }
            slots[i] = Some(a);
        }
        let mut out = Vec::with_capacity(FEATURE_COUNT);
        for (feature, slot) in Feature::ALL.into_iter().zip(slots) {
            let anchor = slot.ok_or(RigError::MissingAnchor(feature))?;
            check_anchor(&anchor)?;
            out.push(anchor);
        }
        Ok(Rig {
            mesh_ref: mesh_ref.into(),
            axes,
            anchors: out,
            metadata,
        })
    }

    pub fn anchor(&self, f: Feature) -> &Anchor {
        &self.anchors[f.index()]
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Count of distinct vertices with any anchor weight.
    pub fn weighted_vertex_count(&self) -> usize {
        let mut all: Vec<usize> = self
            .anchors
            .iter()
            .flat_map(|a| a.weights.keys().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    /// Checks that every weighted vertex exists in `mesh`.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<(), RigError> {
        let count = mesh.vertex_count();
        for a in &self.anchors {
            if let Some((&vertex, _)) = a.weights.range(count..).next() {
                return Err(RigError::VertexOutOfRange { anchor: a.feature, vertex, count });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Rig, RigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| RigError::Json(e.to_string()))?;
        Rig::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Rig, RigError> {
        let doc: RigDocument =
            serde_json::from_value(value.clone()).map_err(|e| RigError::Json(e.to_string()))?;
        if doc.format != RIG_FORMAT {
            return Err(RigError::Format(doc.format));
        }
        if doc.units != "meters" {
            return Err(RigError::Units(doc.units));
        }
        let axes = match doc.axes {
            None => Axes::default(),
            Some(a) => {
                let parse = |s: &str| s.parse::<AxisDir>().map_err(RigError::Axes);
                Axes::new(parse(&a.front)?, parse(&a.right)?, parse(&a.down)?)?
            }
        };
        if let Some(name) = doc.anchors.keys().find(|k| k.parse::<Feature>().is_err()) {
            return Err(RigError::UnknownAnchor(name.clone()));
        }
        let mut anchors = Vec::with_capacity(FEATURE_COUNT);
        for feature in Feature::ALL {
            let a = doc
                .anchors
                .get(feature.name())
                .ok_or(RigError::MissingAnchor(feature))?;
            let mut weights = BTreeMap::new();
            for (key, &w) in &a.weights {
                let vertex = key.parse::<usize>().map_err(|_| RigError::VertexKey {
                    anchor: feature,
                    key: key.clone(),
                })?;
                weights.insert(vertex, w);
            }
            anchors.push(Anchor { feature, rest: a.rest, weights });
        }
        Rig::new(doc.mesh, axes, anchors, doc.metadata)
    }

    pub fn to_value(&self) -> Value {
        let doc = RigDocument {
            format: RIG_FORMAT.into(),
            units: "meters".into(),
            mesh: self.mesh_ref.clone(),
            axes: Some(AxesDocument {
                front: self.axes.front.to_string(),
                right: self.axes.right.to_string(),
                down: self.axes.down.to_string(),
            }),
            anchors: self
                .anchors
                .iter()
                .map(|a| {
                    let weights = a.weights.iter().map(|(v, w)| (v.to_string(), *w)).collect();
                    (a.feature.name().to_string(), AnchorDocument { rest: a.rest, weights })
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_value(doc).expect("rig document serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("rig document serializes")
    }
}

fn check_anchor(a: &Anchor) -> Result<(), RigError> {
    if a.weights.is_empty() {
        return Err(RigError::EmptyWeights(a.feature));
    }
    for (&vertex, &weight) in &a.weights {
        if !(0.0..=1.0).contains(&weight) {
            return Err(RigError::WeightRange { anchor: a.feature, vertex, weight });
        }
    }
    if !a.rest.iter().all(|c| c.is_finite()) {
        return Err(RigError::NonFiniteRest(a.feature));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AxesDocument {
    front: String,
    right: String,
    down: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnchorDocument {
    rest: [f64; 3],
    weights: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RigDocument {
    format: String,
    units: String,
    mesh: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axes: Option<AxesDocument>,
    anchors: BTreeMap<String, AnchorDocument>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

/// Vertex offsets produced by `displacements`, or `None` for untouched vertices.
pub fn vertex_offsets(
    rig: &Rig,
    vertex_count: usize,
    displacements: &FeatureDisplacements,
) -> Result<Vec<Option<[f64; 3]>>, RigError> {
    let mut offsets: Vec<Option<[f64; 3]>> = vec![None; vertex_count];
    for (feature, d) in displacements.iter() {
        if !d.is_finite() {
            return Err(RigError::NonFiniteDisplacement(feature));
        }
        if d.is_zero() {
            continue;
        }
        let anchor = rig.anchor(feature);
        let dm = rig.axes.to_mesh(d);
        for (&v, &w) in &anchor.weights {
            if w == 0.0 {
                continue;
            }
            let slot = offsets.get_mut(v).ok_or(RigError::VertexOutOfRange {
                anchor: feature,
                vertex: v,
                count: vertex_count,
            })?;
            let o = slot.get_or_insert([0.0; 3]);
            for k in 0..3 {
                o[k] += w * dm[k];
            }
        }
    }
    Ok(offsets)
}

/// Moves each vertex by the weighted sum of its anchors' displacements.
/// Overlapping regions add; vertices outside every region keep their exact bits.
pub fn displace(mesh: &Mesh, rig: &Rig, displacements: &FeatureDisplacements) -> Result<Mesh, RigError> {
    let offsets = vertex_offsets(rig, mesh.vertex_count(), displacements)?;
    let vertices = mesh
        .vertices
        .iter()
        .zip(&offsets)
        .map(|(v, o)| match o {
            Some(o) => [v[0] + o[0], v[1] + o[1], v[2] + o[2]],
            None => *v,
        })
        .collect();
    Ok(mesh.with_vertices(vertices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Falloff {
    Linear,
    Smoothstep,
}

impl Falloff {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Falloff::Linear => u,
            Falloff::Smoothstep => u * u * (3.0 - 2.0 * u),
        }
    }
}

/// Radial weights around `center`: `falloff(1 - dist/radius)` for vertices
/// strictly inside the radius.
pub fn generate_weights(
    mesh: &Mesh,
    center: [f64; 3],
    radius: f64,
    falloff: Falloff,
) -> Result<BTreeMap<usize, f64>, RigError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(RigError::Radius(radius));
    }
    let mut out = BTreeMap::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        let dist = ((v[0] - center[0]).powi(2) + (v[1] - center[1]).powi(2) + (v[2] - center[2]).powi(2)).sqrt();
        if dist < radius {
            let w = falloff.apply(1.0 - dist / radius);
            if w > 0.0 {
                out.insert(i, w.min(1.0));
            }
        }
    }
    Ok(out)
}
