//! Frame synthesis: emotional state to feature displacements, timeline
//! sampling, and frame export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EmotionalState, EngineConfig, EngineError, Intensities, SimTime};
use crate::feature::{Feature, FeatureDisplacements};
use crate::idle::{BlinkSchedule, IdleConfig};
use crate::mesh::Mesh;
use crate::rig::{displace, Rig, RigError};
use crate::script::{Script, ScriptAction, ScriptError};
use crate::table::{ExpressionTable, TableError};

#[derive(Debug, Error, PartialEq)]
pub enum AnimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error("intensity multiplier must be finite and non-negative, got {0}")]
    Multiplier(f64),
    #[error("feature cap must be positive, got {0}")]
    Cap(f64),
}

/// Sums `intensity * prototype` over emotion labels, and over mood labels for
/// every feature except the jaw.
pub fn frame_displacements(
    intensities: &Intensities,
    table: &ExpressionTable,
) -> Result<FeatureDisplacements, TableError> {
    let mut out = FeatureDisplacements::zero();
    for (label, &w) in &intensities.emotion {
        out.add_scaled(w, &table.vectors(label)?);
    }
    for (label, &w) in &intensities.mood {
        let v = table.vectors(label)?;
        for feature in Feature::ALL.into_iter().filter(|&f| f != Feature::Jaw) {
            out[feature] += w * v[feature];
        }
    }
    Ok(out)
}

/// Limits every component to `[-cap, cap]`.
pub fn clamp_features(d: &FeatureDisplacements, cap: f64) -> FeatureDisplacements {
    FeatureDisplacements::from_fn(|f| {
        let v = d[f];
        crate::feature::Zxy::new(v.z.clamp(-cap, cap), v.x.clamp(-cap, cap), v.y.clamp(-cap, cap))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub emotion: BTreeMap<String, f64>,
    pub mood: BTreeMap<String, f64>,
    pub features: FeatureDisplacements,
}

impl Frame {
    pub fn intensities(&self) -> Intensities {
        Intensities { emotion: self.emotion.clone(), mood: self.mood.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineOptions {
    /// Overrides the script's frame rate.
    pub fps: Option<f64>,
    /// Scales every trigger intensity.
    pub intensity_mult: f64,
    pub idle: IdleConfig,
    pub seed: u64,
    /// Optional per-component clamp on summed displacements.
    pub feature_cap: Option<f64>,
    pub max_intensity: f64,
}

impl Default for TimelineOptions {
    fn default() -> Self {
        TimelineOptions {
            fps: None,
            intensity_mult: 1.0,
            idle: IdleConfig::default(),
            seed: 0,
            feature_cap: None,
            max_intensity: EngineConfig::default().max_intensity,
        }
    }
}

/// Applies one scripted action at the engine's current clock.
pub fn apply_action(state: &mut EmotionalState, action: &ScriptAction, mult: f64) -> Result<(), EngineError> {
    match action {
        ScriptAction::Trigger { label, intensity } => state.trigger_now(label, intensity * mult),
        ScriptAction::SetPad(pad) => state.set_pad(*pad),
        ScriptAction::SetMode(mode) => {
            state.set_mode(*mode);
            Ok(())
        }
        ScriptAction::Reset => {
            state.reset();
            Ok(())
        }
    }
}

/// Replays `script` on a fresh engine, sampling one frame every `1/fps`
/// seconds. Events at or before a frame time are applied before that frame.
pub fn sample_timeline(
    script: &Script,
    table: Arc<ExpressionTable>,
    options: &TimelineOptions,
) -> Result<FrameSequence, AnimError> {
    script.validate()?;
    let fps = options.fps.unwrap_or(script.fps);
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(ScriptError::Fps(fps).into());
    }
    let mult = options.intensity_mult;
    if !mult.is_finite() || mult < 0.0 {
        return Err(AnimError::Multiplier(mult));
    }
    if let Some(cap) = options.feature_cap {
        if !(cap > 0.0) {
            return Err(AnimError::Cap(cap));
        }
    }
    let config = EngineConfig {
        tau_s: script.tau_s,
        mode: script.mode,
        max_intensity: options.max_intensity,
        ..EngineConfig::default()
    };
    let mut state = EmotionalState::new(table.clone(), config)?;
    for e in &script.events {
        if let ScriptAction::Trigger { label, intensity } = &e.action {
            state.check_label(label)?;
            state.check_intensity(intensity * mult)?;
        }
    }

    let mut blinks = BlinkSchedule::new(options.seed, options.idle.clone());
    let n = (script.duration_s * fps).round() as u64;
    let mut frames = Vec::with_capacity(n as usize);
    let mut pending = script.events.iter().peekable();
    for i in 0..n {
        let ft = SimTime::frame(i, fps);
        while let Some(e) = pending.next_if(|e| SimTime::from_secs(e.t) <= ft) {
            state.advance_to(SimTime::from_secs(e.t))?;
            apply_action(&mut state, &e.action, mult)?;
        }
        state.advance_to(ft)?;
        frames.push(render_frame(&state, &table, &mut blinks, options.feature_cap)?);
    }
    Ok(FrameSequence { fps, frames })
}

/// Builds the frame for the engine's current clock.
pub fn render_frame(
    state: &EmotionalState,
    table: &ExpressionTable,
    blinks: &mut BlinkSchedule,
    cap: Option<f64>,
) -> Result<Frame, TableError> {
    let t = state.clock().as_secs();
    let intensities = state.intensities();
    let mut features = frame_displacements(&intensities, table)?;
    let idle = blinks.displacements(t);
    if !idle.is_zero() {
        features = features + idle;
    }
    if let Some(cap) = cap {
        features = clamp_features(&features, cap);
    }
    Ok(Frame { t, emotion: intensities.emotion, mood: intensities.mood, features })
}

impl FrameSequence {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            out.push_str(&serde_json::to_string(f).expect("frame serializes"));
            out.push('\n');
        }
        out
    }

    /// `t` followed by z, x, y for each feature in canonical order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for f in Feature::ALL {
            for c in ["z", "x", "y"] {
                let _ = write!(out, ",{}_{}", f.name(), c);
            }
        }
        out.push('\n');
        for frame in &self.frames {
            let _ = write!(out, "{}", frame.t);
            for (_, v) in frame.features.iter() {
                let _ = write!(out, ",{},{},{}", v.z, v.x, v.y);
            }
            out.push('\n');
        }
        out
    }

    /// Displaced meshes, one per frame.
    pub fn to_meshes(&self, mesh: &Mesh, rig: &Rig) -> Result<Vec<Mesh>, RigError> {
        rig.check_mesh(mesh)?;
        self.frames.iter().map(|f| displace(mesh, rig, &f.features)).collect()
    }
}
