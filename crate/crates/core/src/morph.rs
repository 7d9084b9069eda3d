//! Morph targets baked from a rig: per-label vertex deltas at intensity 1.
//!
//! Because synthesis is linear in the intensities, mixing the baked deltas
//! with the frame's weights reproduces direct displacement of the rig.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Intensities;
use crate::feature::Feature;
use crate::mesh::Mesh;
use crate::rig::{displace, Rig, RigError};
use crate::table::{ExpressionTable, TableError};

pub const MORPH_FORMAT: &str = "emotemesh-morphs/1";

#[derive(Debug, Error, PartialEq)]
pub enum MorphError {
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid morph document: {0}")]
    Json(String),
    #[error("unsupported morph format `{0}`, expected `{MORPH_FORMAT}`")]
    Format(String),
    #[error("no morph target for {0}")]
    UnknownTarget(String),
    #[error("target {label} has {found} deltas, rest mesh has {expected} vertices")]
    VertexCount { label: String, found: usize, expected: usize },
}

pub type DeltaField = Vec<[f64; 3]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphTargetSet {
    pub format: String,
    /// Identifier of the rest mesh the deltas apply to.
    pub rest: String,
    pub targets: BTreeMap<String, DeltaField>,
    /// Same deltas with the jaw anchor excluded, for mood weights.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mood_targets: BTreeMap<String, DeltaField>,
    /// Table synonyms mapped to target names.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

fn delta(rest: &Mesh, moved: &Mesh) -> DeltaField {
    rest.vertices
        .iter()
        .zip(&moved.vertices)
        .map(|(a, b)| [b[0] - a[0], b[1] - a[1], b[2] - a[2]])
        .collect()
}

/// One delta field per table label, plus a jaw-free variant of each.
pub fn bake_morph_targets(rig: &Rig, mesh: &Mesh, table: &ExpressionTable) -> Result<MorphTargetSet, MorphError> {
    rig.check_mesh(mesh)?;
    let mut targets = BTreeMap::new();
    let mut mood_targets = BTreeMap::new();
    for label in table.labels() {
        let mut vectors = table.vectors(label)?;
        targets.insert(label.to_string(), delta(mesh, &displace(mesh, rig, &vectors)?));
        vectors[Feature::Jaw] = Default::default();
        mood_targets.insert(label.to_string(), delta(mesh, &displace(mesh, rig, &vectors)?));
    }
    let aliases = crate::table::alias_pairs()
        .filter(|(alias, _)| table.resolve(alias).is_some())
        .map(|(alias, _)| (alias.to_string(), table.resolve(alias).unwrap().to_string()))
        .collect();
    Ok(MorphTargetSet {
        format: MORPH_FORMAT.to_string(),
        rest: rig.mesh_ref.clone(),
        targets,
        mood_targets,
        aliases,
    })
}

impl MorphTargetSet {
    fn key<'a>(&'a self, label: &'a str) -> Result<&'a str, MorphError> {
        if self.targets.contains_key(label) {
            return Ok(label);
        }
        self.aliases
            .get(label)
            .map(String::as_str)
            .filter(|k| self.targets.contains_key(*k))
            .ok_or_else(|| MorphError::UnknownTarget(label.to_string()))
    }

    pub fn target(&self, label: &str) -> Result<&DeltaField, MorphError> {
        Ok(&self.targets[self.key(label)?])
    }

    /// Rest mesh plus weighted deltas. Mood weights use the jaw-free fields.
    pub fn apply(&self, rest: &Mesh, intensities: &Intensities) -> Result<Mesh, MorphError> {
        let n = rest.vertex_count();
        let mut offsets: Vec<Option<[f64; 3]>> = vec![None; n];
        let channels = [(&intensities.emotion, &self.targets), (&intensities.mood, &self.mood_targets)];
        for (weights, fields) in channels {
            for (label, &w) in weights {
                if w == 0.0 {
                    continue;
                }
                let key = self.key(label)?;
                let field = fields
                    .get(key)
                    .ok_or_else(|| MorphError::UnknownTarget(label.to_string()))?;
                if field.len() != n {
                    return Err(MorphError::VertexCount {
                        label: key.to_string(),
                        found: field.len(),
                        expected: n,
                    });
                }
                for (o, d) in offsets.iter_mut().zip(field) {
                    if d == &[0.0; 3] {
                        continue;
                    }
                    let o = o.get_or_insert([0.0; 3]);
                    for k in 0..3 {
                        o[k] += w * d[k];
                    }
                }
            }
        }
        let vertices = rest
            .vertices
            .iter()
            .zip(offsets)
            .map(|(v, o)| match o {
                Some(o) => [v[0] + o[0], v[1] + o[1], v[2] + o[2]],
                None => *v,
            })
            .collect();
        Ok(rest.with_vertices(vertices))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("morph set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MorphError> {
        let set: MorphTargetSet = serde_json::from_str(text).map_err(|e| MorphError::Json(e.to_string()))?;
        if set.format != MORPH_FORMAT {
            return Err(MorphError::Format(set.format));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::sample_face;

    #[test]
    fn zero_weights_leave_rest_exact() {
        let (mesh, rig) = sample_face();
        let table = ExpressionTable::builtin();
        let set = bake_morph_targets(&rig, &mesh, &table).unwrap();
        let mut i = Intensities::default();
        for l in table.labels() {
            i.emotion.insert(l.to_string(), 0.0);
        }
        let out = set.apply(&mesh, &i).unwrap();
        for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn ten_targets_and_round_trip() {
        let (mesh, rig) = sample_face();
        let set = bake_morph_targets(&rig, &mesh, &ExpressionTable::builtin()).unwrap();
        assert_eq!(set.targets.len(), 10);
        assert_eq!(set.mood_targets.len(), 10);
        assert_eq!(MorphTargetSet::from_json(&set.to_json()).unwrap(), set);
    }

    #[test]
    fn aliases_resolve_to_targets() {
        let (mesh, rig) = sample_face();
        let set = bake_morph_targets(&rig, &mesh, &ExpressionTable::builtin()).unwrap();
        assert_eq!(set.target("joy").unwrap(), set.target("happy").unwrap());
        assert!(matches!(set.target("rage"), Err(MorphError::UnknownTarget(_))));
    }
}
