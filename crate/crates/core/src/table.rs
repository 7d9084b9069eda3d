//! Prototype expression vectors, blends, and intensity scaling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature::{Feature, FeatureDisplacements, Zxy};

pub const TABLE_FORMAT: &str = "emotemesh-table/1";

/// The six basic expressions, in table column order.
pub const BASIC_LABELS: [&str; 6] = ["surprise", "happy", "sad", "angry", "disgust", "fear"];

/// Largest component magnitude a table may hold before it is flagged.
pub const MAGNITUDE_WARNING_M: f64 = 0.05;

/// Common synonyms accepted wherever an expression label is looked up.
const ALIASES: &[(&str, &str)] = &[
    ("joy", "happy"),
    ("happiness", "happy"),
    ("surprised", "surprise"),
    ("sadness", "sad"),
    ("anger", "angry"),
    ("disgusted", "disgust"),
    ("afraid", "fear"),
    ("fearful", "fear"),
    ("enthusiasm", "enthusiastic"),
    ("frustration", "frustrated"),
];

/// `(synonym, label)` pairs accepted by [`ExpressionTable::resolve`].
pub fn alias_pairs() -> impl Iterator<Item = (&'static str, &'static str)> {
    ALIASES.iter().copied()
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("invalid table document: {0}")]
    Json(String),
    #[error("unsupported table format `{0}`, expected `{TABLE_FORMAT}`")]
    Format(String),
    #[error("missing basic expression: {0}")]
    MissingBasic(String),
    #[error("unknown basic expression: {0}")]
    UnknownBasic(String),
    #[error("unknown expression: {0}")]
    UnknownLabel(String),
    #[error("blend {0}: component weights must not all be zero")]
    ZeroBlend(String),
    #[error("blend {label}: weight {weight} for {component} is negative or not finite")]
    BlendWeight { label: String, component: String, weight: f64 },
    #[error("{0} is a basic expression and cannot be redefined as a blend")]
    BlendShadowsBasic(String),
    #[error("{label}: displacement for {feature} is not finite")]
    NonFinite { label: String, feature: Feature },
    #[error("intensity must be finite and non-negative, got {0}")]
    Intensity(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpressionKind {
    Basic,
    Blend(Vec<(String, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionVectorSet {
    pub label: String,
    pub vectors: FeatureDisplacements,
    pub kind: ExpressionKind,
}

impl ExpressionVectorSet {
    /// Displacements at `intensity` times the prototype.
    pub fn scale(&self, intensity: f64) -> Result<FeatureDisplacements, TableError> {
        scale(&self.vectors, intensity)
    }
}

pub fn scale(vectors: &FeatureDisplacements, intensity: f64) -> Result<FeatureDisplacements, TableError> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(TableError::Intensity(intensity));
    }
    Ok(vectors.scaled(intensity))
}

/// A left/right feature pair whose vectors are not mirror images.
#[derive(Debug, Clone, PartialEq)]
pub struct Asymmetry {
    pub expression: String,
    pub left: Feature,
    pub right: Feature,
    pub left_value: Zxy,
    pub right_value: Zxy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeWarning {
    pub label: String,
    pub feature: Feature,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTable {
    basics: BTreeMap<String, FeatureDisplacements>,
    blends: BTreeMap<String, Vec<(String, f64)>>,
}

impl Default for ExpressionTable {
    fn default() -> Self {
        Self::builtin()
    }
}

const fn v(z: f64, x: f64, y: f64) -> Zxy {
    Zxy::new(z, x, y)
}

/// Rows in feature order, columns surprise, happy, sad, angry, disgust, fear.
#[rustfmt::skip]
const PROTOTYPES: [[Zxy; 6]; 18] = [
    // Jaw
    [v(-0.005, 0.0, 0.01), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(-0.001, 0.0, 0.001), v(-0.002, 0.0, 0.003)],
    // Nostrils
    [v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, -0.008), v(0.0, 0.0, 0.0)],
    // LipLowerLeft
    [v(0.0, -0.001, -0.001), v(-0.002, 0.001, 0.001), v(0.0, 0.001, 0.001), v(0.0, -0.002, 0.0), v(-0.004, 0.002, 0.002), v(0.0, 0.0, 0.002)],
    // LipLowerRight
    [v(0.0, 0.001, -0.001), v(-0.002, -0.001, 0.001), v(0.0, -0.001, 0.001), v(0.0, 0.002, 0.0), v(-0.004, -0.002, 0.0025), v(0.0, 0.0, 0.002)],
    // LipUpperLeft
    [v(0.0, -0.002, -0.001), v(-0.001, 0.001, -0.001), v(0.0, 0.001, 0.001), v(0.0, -0.002, -0.002), v(-0.002, 0.002, -0.0045), v(0.0, 0.0, -0.002)],
    // LipUpperRight
    [v(0.0, 0.002, -0.001), v(-0.001, -0.001, -0.001), v(0.0, -0.001, 0.001), v(0.0, 0.002, -0.002), v(-0.002, -0.002, -0.0045), v(0.0, 0.0, -0.002)],
    // LipCornerLeft
    [v(0.0, -0.001, 0.0), v(-0.005, 0.009, -0.007), v(0.0, 0.002, 0.007), v(0.0, -0.004, 0.0), v(0.0, -0.001, 0.0), v(0.0, 0.002, 0.003)],
    // LipCornerRight
    [v(0.0, 0.001, 0.0), v(-0.005, -0.009, -0.007), v(0.0, -0.002, 0.007), v(0.0, 0.004, 0.0), v(0.0, 0.001, 0.0), v(0.0, -0.002, 0.003)],
    // CheekLeft
    [v(0.0, 0.0, 0.004), v(0.0, 0.0, -0.011), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, -0.003), v(0.0, 0.0, 0.0)],
    // CheekRight
    [v(0.0, 0.0, 0.004), v(0.0, 0.0, -0.011), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 0.0, -0.003), v(0.0, 0.0, 0.0)],
    // LidLowerLeft
    [v(0.0, 0.0, 0.001), v(0.0, 0.0, -0.0017), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.001), v(0.0, 0.0, -0.0025), v(0.0, 0.0, 0.002)],
    // LidLowerRight
    [v(0.0, 0.0, 0.001), v(0.0, 0.0, -0.0017), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.001), v(0.0, 0.0, -0.0025), v(0.0, 0.0, 0.002)],
    // LidUpperLeft
    [v(0.0, 0.0, -0.003), v(0.0, 0.0, 0.0015), v(0.0, 0.0, 0.001), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.002), v(0.0, 0.0, -0.003)],
    // LidUpperRight
    [v(0.0, 0.0, -0.003), v(0.0, 0.0, 0.0015), v(0.0, 0.0, 0.001), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.002), v(0.0, 0.0, -0.003)],
    // BrowInnerLeft (happy printed as four zeros; taken as the zero vector)
    [v(0.0, 0.0, -0.005), v(0.0, 0.0, 0.0), v(0.0, 0.0, -0.005), v(0.0, -0.013, 0.012), v(0.0, -0.013, 0.004), v(0.0, -0.008, -0.006)],
    // BrowInnerRight
    [v(0.0, 0.0, -0.005), v(0.0, 0.0, 0.0), v(0.0, 0.0, -0.005), v(0.0, 0.013, 0.012), v(0.0, 0.013, 0.004), v(0.0, 0.008, -0.006)],
    // BrowOuterLeft
    [v(0.0, 0.0, -0.005), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.006), v(0.0, 0.0, 0.003), v(0.0, -0.002, 0.0), v(0.0, 0.0, 0.004)],
    // BrowOuterRight
    [v(0.0, 0.0, -0.005), v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.006), v(0.0, 0.0, 0.003), v(0.0, 0.002, 0.0), v(0.0, 0.0, 0.004)],
];

/// The shipped blends as `(label, components)`.
pub fn builtin_blend_specs() -> Vec<(&'static str, Vec<(&'static str, f64)>)> {
    vec![
        ("evil", vec![("angry", 0.5), ("happy", 0.5)]),
        ("frustrated", vec![("sad", 0.5), ("angry", 0.5)]),
        ("enthusiastic", vec![("happy", 0.5), ("surprise", 0.5)]),
        ("furious", vec![("angry", 0.5), ("surprise", 0.5)]),
    ]
}

impl ExpressionTable {
    /// The six basic prototypes and the four shipped blends.
    pub fn builtin() -> Self {
        let mut table = Self::basics_only();
        for (label, components) in builtin_blend_specs() {
            let components = components.into_iter().map(|(l, w)| (l.to_string(), w)).collect();
            table
                .insert_blend(label.to_string(), components)
                .expect("builtin blends are well formed");
        }
        table
    }

    /// The six basic prototypes without blends.
    pub fn basics_only() -> Self {
        let basics = BASIC_LABELS
            .iter()
            .enumerate()
            .map(|(col, label)| {
                let vectors = FeatureDisplacements::from_fn(|f| PROTOTYPES[f.index()][col]);
                (label.to_string(), vectors)
            })
            .collect();
        ExpressionTable { basics, blends: BTreeMap::new() }
    }

    /// The builtin blend vector sets.
    pub fn builtin_blends(&self) -> Vec<ExpressionVectorSet> {
        builtin_blend_specs()
            .into_iter()
            .filter_map(|(label, _)| self.get(label))
            .collect()
    }

    pub fn is_basic(&self, label: &str) -> bool {
        self.basics.contains_key(label)
    }

    /// Basic labels first, then blends; each group sorted.
    pub fn labels(&self) -> Vec<&str> {
        self.basics
            .keys()
            .chain(self.blends.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn basic_labels(&self) -> impl Iterator<Item = &str> {
        self.basics.keys().map(String::as_str)
    }

    pub fn blend_components(&self, label: &str) -> Option<&[(String, f64)]> {
        self.blends.get(label).map(Vec::as_slice)
    }

    /// Maps a label or synonym to the label stored in the table.
    pub fn resolve<'a>(&'a self, label: &'a str) -> Option<&'a str> {
        if self.basics.contains_key(label) || self.blends.contains_key(label) {
            return Some(label);
        }
        ALIASES
            .iter()
            .find(|(alias, _)| *alias == label)
            .map(|(_, target)| *target)
            .filter(|t| self.basics.contains_key(*t) || self.blends.contains_key(*t))
    }

    /// Prototype displacements at intensity 1 for `label` or a synonym.
    pub fn vectors(&self, label: &str) -> Result<FeatureDisplacements, TableError> {
        let key = self
            .resolve(label)
            .ok_or_else(|| TableError::UnknownLabel(label.to_string()))?;
        if let Some(v) = self.basics.get(key) {
            return Ok(*v);
        }
        let components = &self.blends[key];
        Ok(self.combine(components))
    }

    pub fn get(&self, label: &str) -> Option<ExpressionVectorSet> {
        let key = self.resolve(label)?;
        let vectors = self.vectors(key).ok()?;
        let kind = match self.blends.get(key) {
            Some(c) => ExpressionKind::Blend(c.clone()),
            None => ExpressionKind::Basic,
        };
        Some(ExpressionVectorSet { label: key.to_string(), vectors, kind })
    }

    fn combine(&self, components: &[(String, f64)]) -> FeatureDisplacements {
        let mut out = FeatureDisplacements::zero();
        for (label, w) in components {
            out.add_scaled(*w, &self.basics[label]);
        }
        out
    }

    fn check_components(&self, label: &str, components: &[(String, f64)]) -> Result<(), TableError> {
        for (c, w) in components {
            if !self.basics.contains_key(c) {
                return Err(TableError::UnknownBasic(c.clone()));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(TableError::BlendWeight {
                    label: label.to_string(),
                    component: c.clone(),
                    weight: *w,
                });
            }
        }
        if !components.iter().any(|(_, w)| *w > 0.0) {
            return Err(TableError::ZeroBlend(label.to_string()));
        }
        Ok(())
    }

    fn insert_blend(&mut self, label: String, components: Vec<(String, f64)>) -> Result<(), TableError> {
        if self.basics.contains_key(&label) {
            return Err(TableError::BlendShadowsBasic(label));
        }
        self.check_components(&label, &components)?;
        self.blends.insert(label, components);
        Ok(())
    }

    /// Registers `label` as the weighted sum of basic prototypes and returns it.
    pub fn blend(
        &mut self,
        label: &str,
        components: &[(&str, f64)],
    ) -> Result<ExpressionVectorSet, TableError> {
        let components: Vec<(String, f64)> =
            components.iter().map(|(l, w)| (l.to_string(), *w)).collect();
        self.insert_blend(label.to_string(), components)?;
        Ok(self.get(label).expect("just inserted"))
    }

    /// Replaces a basic prototype; blends over it follow.
    pub fn set_basic(&mut self, label: &str, vectors: FeatureDisplacements) -> Result<(), TableError> {
        if let Some((feature, _)) = vectors.iter().find(|(_, v)| !v.is_finite()) {
            return Err(TableError::NonFinite { label: label.to_string(), feature });
        }
        self.basics.insert(label.to_string(), vectors);
        Ok(())
    }

    /// Left/right pairs of basic expressions that are not mirror images:
    /// x must flip sign, z and y must match.
    pub fn symmetry_audit(&self) -> Vec<Asymmetry> {
        let mut out = Vec::new();
        for (expression, vectors) in &self.basics {
            for (left, right) in Feature::mirror_pairs() {
                let (l, r) = (vectors[left], vectors[right]);
                if l.x != -r.x || l.z != r.z || l.y != r.y {
                    out.push(Asymmetry {
                        expression: expression.clone(),
                        left,
                        right,
                        left_value: l,
                        right_value: r,
                    });
                }
            }
        }
        out
    }

    /// Components whose magnitude exceeds [`MAGNITUDE_WARNING_M`].
    pub fn magnitude_warnings(&self) -> Vec<MagnitudeWarning> {
        let mut out = Vec::new();
        for label in self.labels() {
            let vectors = self.vectors(label).expect("label from table");
            for (feature, v) in vectors.iter() {
                if v.max_abs() > MAGNITUDE_WARNING_M {
                    out.push(MagnitudeWarning {
                        label: label.to_string(),
                        feature,
                        value: v.max_abs(),
                    });
                }
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let doc: TableDocument = serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))?;
        if doc.format != TABLE_FORMAT {
            return Err(TableError::Format(doc.format));
        }
        for label in BASIC_LABELS {
            if !doc.basics.contains_key(label) {
                return Err(TableError::MissingBasic(label.to_string()));
            }
        }
        let mut table = ExpressionTable { basics: BTreeMap::new(), blends: BTreeMap::new() };
        for (label, vectors) in doc.basics {
            table.set_basic(&label, vectors)?;
        }
        for (label, components) in doc.blends {
            table.insert_blend(label, components)?;
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let doc = TableDocument {
            format: TABLE_FORMAT.to_string(),
            basics: self.basics.clone(),
            blends: self.blends.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("table serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TableDocument {
    format: String,
    basics: BTreeMap<String, FeatureDisplacements>,
    #[serde(default)]
    blends: BTreeMap<String, Vec<(String, f64)>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let t = ExpressionTable::builtin();
        let happy = t.vectors("happy").unwrap();
        assert_eq!(happy[Feature::LipCornerLeft], Zxy::new(-0.005, 0.009, -0.007));
        assert_eq!(t.vectors("surprise").unwrap()[Feature::Jaw], Zxy::new(-0.005, 0.0, 0.01));
        assert_eq!(t.vectors("sad").unwrap()[Feature::CheekLeft], Zxy::ZERO);
    }

    #[test]
    fn aliases_resolve() {
        let t = ExpressionTable::builtin();
        assert_eq!(t.resolve("joy"), Some("happy"));
        assert_eq!(t.resolve("afraid"), Some("fear"));
        assert_eq!(t.resolve("rage"), None);
        assert_eq!(t.vectors("joy").unwrap(), t.vectors("happy").unwrap());
    }

    #[test]
    fn scale_rejects_negative() {
        let t = ExpressionTable::builtin();
        let fear = t.get("fear").unwrap();
        assert_eq!(fear.scale(-0.1).unwrap_err(), TableError::Intensity(-0.1));
        assert_eq!(fear.scale(1.0).unwrap()[Feature::LidUpperLeft], Zxy::new(0.0, 0.0, -0.003));
        assert!(fear.scale(0.0).unwrap().is_zero());
    }

    #[test]
    fn blend_errors() {
        let mut t = ExpressionTable::builtin();
        assert_eq!(
            t.blend("z", &[("happy", 0.0), ("sad", 0.0)]).unwrap_err(),
            TableError::ZeroBlend("z".into())
        );
        assert_eq!(
            t.blend("z", &[("rage", 1.0)]).unwrap_err(),
            TableError::UnknownBasic("rage".into())
        );
        assert!(matches!(t.blend("happy", &[("sad", 1.0)]), Err(TableError::BlendShadowsBasic(_))));
    }

    #[test]
    fn replaced_basic_propagates_to_blends() {
        let mut t = ExpressionTable::builtin();
        t.set_basic("happy", FeatureDisplacements::zero()).unwrap();
        let evil = t.vectors("evil").unwrap();
        let angry = t.vectors("angry").unwrap();
        assert_eq!(evil, angry.scaled(0.5));
    }

    #[test]
    fn document_errors() {
        let t = ExpressionTable::builtin();
        let mut doc: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        doc["basics"].as_object_mut().unwrap().remove("disgust");
        assert_eq!(
            ExpressionTable::from_json(&doc.to_string()).unwrap_err(),
            TableError::MissingBasic("disgust".into())
        );

        let mut doc: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        doc["blends"]["wrath"] = serde_json::json!([["rage", 0.5], ["angry", 0.5]]);
        let err = ExpressionTable::from_json(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("rage"));
    }

    #[test]
    fn builtin_has_no_magnitude_warnings() {
        let t = ExpressionTable::builtin();
        assert!(t.magnitude_warnings().is_empty());
        let max = t
            .labels()
            .iter()
            .map(|l| t.vectors(l).unwrap().max_abs_component())
            .fold(0.0, f64::max);
        assert_eq!(max, 0.013);

        let mut loud = t.clone();
        let mut v = FeatureDisplacements::zero();
        v[Feature::Jaw] = Zxy::new(0.0, 0.0, 0.06);
        loud.set_basic("sad", v).unwrap();
        let w = loud.magnitude_warnings();
        assert!(w.iter().any(|w| w.label == "sad" && w.feature == Feature::Jaw));
    }
}
