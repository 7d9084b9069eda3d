//! Affective facial animation on rigged meshes.
//!
//! Eighteen anchor features move weighted vertex regions. Each basic
//! expression is a set of per-feature displacement vectors at intensity 1;
//! a frame's displacement is the intensity-weighted sum of those vectors over
//! all active emotions, with mood expressed the same way but with the jaw
//! closed. Emotions follow a fixed onset/hold/decay envelope and feed a slow
//! running-average mood.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod animator;
pub mod engine;
pub mod feature;
pub mod idle;
pub mod mesh;
pub mod metrics;
pub mod morph;
pub mod rig;
pub mod sample;
pub mod script;
pub mod table;

pub use animator::{frame_displacements, sample_timeline, AnimError, Frame, FrameSequence, TimelineOptions};
pub use engine::{AffectEvent, EmotionalState, EngineConfig, EngineError, Envelope, Intensities, Mode, Pad, SimTime};
pub use feature::{Feature, FeatureDisplacements, Zxy};
pub use idle::{idle_layer, IdleConfig};
pub use mesh::{Mesh, MeshError};
pub use metrics::{analyze, recognition_quality, MetricsError, RatingMatrix, RatingScale};
pub use morph::{bake_morph_targets, MorphError, MorphTargetSet};
pub use rig::{displace, generate_weights, Falloff, Rig, RigError};
pub use script::{Script, ScriptError, ScriptEvent};
pub use table::{ExpressionTable, ExpressionVectorSet, TableError};
