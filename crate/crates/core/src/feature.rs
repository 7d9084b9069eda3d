//! The eighteen facial features and displacement maps over them.
//!
//! Displacements are stored in feature space order `[z, x, y]`, where positive
//! z, x and y move a feature to the front, to the right and down. Conversion to
//! a mesh's own axes happens in [`crate::rig::Axes`].

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul};
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the eighteen anchor features, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Jaw,
    Nostrils,
    LipLowerLeft,
    LipLowerRight,
    LipUpperLeft,
    LipUpperRight,
    LipCornerLeft,
    LipCornerRight,
    CheekLeft,
    CheekRight,
    LidLowerLeft,
    LidLowerRight,
    LidUpperLeft,
    LidUpperRight,
    BrowInnerLeft,
    BrowInnerRight,
    BrowOuterLeft,
    BrowOuterRight,
}

pub const FEATURE_COUNT: usize = 18;

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Jaw,
        Feature::Nostrils,
        Feature::LipLowerLeft,
        Feature::LipLowerRight,
        Feature::LipUpperLeft,
        Feature::LipUpperRight,
        Feature::LipCornerLeft,
        Feature::LipCornerRight,
        Feature::CheekLeft,
        Feature::CheekRight,
        Feature::LidLowerLeft,
        Feature::LidLowerRight,
        Feature::LidUpperLeft,
        Feature::LidUpperRight,
        Feature::BrowInnerLeft,
        Feature::BrowInnerRight,
        Feature::BrowOuterLeft,
        Feature::BrowOuterRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Jaw => "Jaw",
            Feature::Nostrils => "Nostrils",
            Feature::LipLowerLeft => "LipLowerLeft",
            Feature::LipLowerRight => "LipLowerRight",
            Feature::LipUpperLeft => "LipUpperLeft",
            Feature::LipUpperRight => "LipUpperRight",
            Feature::LipCornerLeft => "LipCornerLeft",
            Feature::LipCornerRight => "LipCornerRight",
            Feature::CheekLeft => "CheekLeft",
            Feature::CheekRight => "CheekRight",
            Feature::LidLowerLeft => "LidLowerLeft",
            Feature::LidLowerRight => "LidLowerRight",
            Feature::LidUpperLeft => "LidUpperLeft",
            Feature::LidUpperRight => "LidUpperRight",
            Feature::BrowInnerLeft => "BrowInnerLeft",
            Feature::BrowInnerRight => "BrowInnerRight",
            Feature::BrowOuterLeft => "BrowOuterLeft",
            Feature::BrowOuterRight => "BrowOuterRight",
        }
    }

    /// The mirrored counterpart of a left feature. Center features have none.
    pub fn mirror(self) -> Option<Feature> {
        let i = self.index();
        if i < 2 {
            None
        } else if i.is_multiple_of(2) {
            Some(Feature::ALL[i + 1])
        } else {
            Some(Feature::ALL[i - 1])
        }
    }

    /// Left/right pairs as `(left, right)`.
    pub fn mirror_pairs() -> impl Iterator<Item = (Feature, Feature)> {
        (2..FEATURE_COUNT)
            .step_by(2)
            .map(|i| (Feature::ALL[i], Feature::ALL[i + 1]))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFeature(pub String);

impl fmt::Display for UnknownFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown feature: {}", self.0)
    }
}

impl std::error::Error for UnknownFeature {}

impl FromStr for Feature {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

impl Serialize for Feature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A displacement in feature space, ordered `[z, x, y]` (front, right, down), meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Zxy {
    pub z: f64,
    pub x: f64,
    pub y: f64,
}

impl Zxy {
    pub const ZERO: Zxy = Zxy { z: 0.0, x: 0.0, y: 0.0 };

    pub const fn new(z: f64, x: f64, y: f64) -> Self {
        Self { z, x, y }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.z, self.x, self.y]
    }

    pub fn is_zero(self) -> bool {
        self.z == 0.0 && self.x == 0.0 && self.y == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.z.is_finite() && self.x.is_finite() && self.y.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.z.abs().max(self.x.abs()).max(self.y.abs())
    }
}

impl From<[f64; 3]> for Zxy {
    fn from(v: [f64; 3]) -> Self {
        Zxy::new(v[0], v[1], v[2])
    }
}

impl From<Zxy> for [f64; 3] {
    fn from(v: Zxy) -> Self {
        v.to_array()
    }
}

impl Add for Zxy {
    type Output = Zxy;
    fn add(self, o: Zxy) -> Zxy {
        Zxy::new(self.z + o.z, self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Zxy {
    fn add_assign(&mut self, o: Zxy) {
        self.z += o.z;
        self.x += o.x;
        self.y += o.y;
    }
}

impl Mul<Zxy> for f64 {
    type Output = Zxy;
    fn mul(self, v: Zxy) -> Zxy {
        Zxy::new(self * v.z, self * v.x, self * v.y)
    }
}

/// Per-feature displacement for all eighteen features. Features without motion
/// hold the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureDisplacements([Zxy; FEATURE_COUNT]);

impl FeatureDisplacements {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_fn(mut f: impl FnMut(Feature) -> Zxy) -> Self {
        let mut out = Self::zero();
        for feature in Feature::ALL {
            out[feature] = f(feature);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (Feature, Zxy)> + '_ {
        Feature::ALL.iter().map(move |&f| (f, self.0[f.index()]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| v.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_fn(|f| k * self[f])
    }

    /// `self += k * other`, feature by feature.
    pub fn add_scaled(&mut self, k: f64, other: &FeatureDisplacements) {
        for feature in Feature::ALL {
            self[feature] += k * other[feature];
        }
    }

    pub fn max_abs_component(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }
}

impl Index<Feature> for FeatureDisplacements {
    type Output = Zxy;
    fn index(&self, f: Feature) -> &Zxy {
        &self.0[f.index()]
    }
}

impl IndexMut<Feature> for FeatureDisplacements {
    fn index_mut(&mut self, f: Feature) -> &mut Zxy {
        &mut self.0[f.index()]
    }
}

impl Add for FeatureDisplacements {
    type Output = FeatureDisplacements;
    fn add(mut self, o: FeatureDisplacements) -> FeatureDisplacements {
        self.add_scaled(1.0, &o);
        self
    }
}

impl Serialize for FeatureDisplacements {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(FEATURE_COUNT))?;
        for (feature, v) in self.iter() {
            map.serialize_entry(feature.name(), &v)?;
        }
        map.end()
    }
}

/// Deserializes from a map keyed by feature name. Absent features are zero;
/// unknown names are rejected.
impl<'de> Deserialize<'de> for FeatureDisplacements {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = FeatureDisplacements;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of feature name to [z, x, y]")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = FeatureDisplacements::zero();
                let mut seen = [false; FEATURE_COUNT];
                while let Some((feature, v)) = access.next_entry::<Feature, Zxy>()? {
                    if std::mem::replace(&mut seen[feature.index()], true) {
                        return Err(de::Error::custom(format!("duplicate feature: {feature}")));
                    }
                    out[feature] = v;
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(MapVisitor)
    }
}
