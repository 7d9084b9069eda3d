//! Event scripts: timed triggers and state commands replayed by the animator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Mode, Pad};

pub const SCRIPT_FORMAT: &str = "emotemesh-script/1";

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("invalid script document: {0}")]
    Json(String),
    #[error("unsupported script format `{0}`, expected `{SCRIPT_FORMAT}`")]
    Format(String),
    #[error("events out of time order: event {index} at {t}s follows {previous}s")]
    OutOfOrder { index: usize, t: f64, previous: f64 },
    #[error("event {index}: {msg}")]
    Event { index: usize, msg: String },
    #[error("fps must be positive, got {0}")]
    Fps(f64),
    #[error("duration must be non-negative, got {0}")]
    Duration(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptAction {
    Trigger { label: String, intensity: f64 },
    SetPad(Pad),
    SetMode(Mode),
    Reset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEvent {
    pub t: f64,
    pub action: ScriptAction,
}

impl ScriptEvent {
    pub fn trigger(t: f64, label: impl Into<String>, intensity: f64) -> Self {
        ScriptEvent {
            t,
            action: ScriptAction::Trigger { label: label.into(), intensity },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub mode: Mode,
    pub fps: f64,
    pub duration_s: f64,
    pub tau_s: f64,
    pub events: Vec<ScriptEvent>,
}

impl Default for Script {
    fn default() -> Self {
        Script {
            mode: Mode::Categorical,
            fps: 30.0,
            duration_s: 2.0,
            tau_s: 60.0,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScriptDocument {
    format: String,
    #[serde(default)]
    mode: Mode,
    #[serde(default = "default_fps")]
    fps: f64,
    #[serde(default = "default_duration")]
    duration_s: f64,
    #[serde(default = "default_tau")]
    tau_s: f64,
    #[serde(default)]
    events: Vec<EventDocument>,
}

fn default_fps() -> f64 {
    30.0
}
fn default_duration() -> f64 {
    2.0
}
fn default_tau() -> f64 {
    60.0
}

/// Plain events carry `label` and `intensity`; other actions name a `type`.
#[derive(Debug, Default, Serialize, Deserialize)]
struct EventDocument {
    t: f64,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
}

impl EventDocument {
    fn into_event(self, index: usize) -> Result<ScriptEvent, ScriptError> {
        let missing = |field: &str| ScriptError::Event { index, msg: format!("missing `{field}`") };
        let action = match self.kind.as_deref().unwrap_or("trigger") {
            "trigger" => ScriptAction::Trigger {
                label: self.label.ok_or_else(|| missing("label"))?,
                intensity: self.intensity.ok_or_else(|| missing("intensity"))?,
            },
            "set_pad" => ScriptAction::SetPad(Pad::new(
                self.p.ok_or_else(|| missing("p"))?,
                self.a.ok_or_else(|| missing("a"))?,
                self.d.ok_or_else(|| missing("d"))?,
            )),
            "set_mode" => ScriptAction::SetMode(self.mode.ok_or_else(|| missing("mode"))?),
            "reset" => ScriptAction::Reset,
            other => {
                return Err(ScriptError::Event { index, msg: format!("unknown event type `{other}`") })
            }
        };
        Ok(ScriptEvent { t: self.t, action })
    }

    fn from_event(e: &ScriptEvent) -> Self {
        let mut doc = EventDocument { t: e.t, ..Default::default() };
        match &e.action {
            ScriptAction::Trigger { label, intensity } => {
                doc.label = Some(label.clone());
                doc.intensity = Some(*intensity);
            }
            ScriptAction::SetPad(pad) => {
                doc.kind = Some("set_pad".into());
                (doc.p, doc.a, doc.d) = (Some(pad.p), Some(pad.a), Some(pad.d));
            }
            ScriptAction::SetMode(mode) => {
                doc.kind = Some("set_mode".into());
                doc.mode = Some(*mode);
            }
            ScriptAction::Reset => doc.kind = Some("reset".into()),
        }
        doc
    }
}

impl Script {
    pub fn validate(&self) -> Result<(), ScriptError> {
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return Err(ScriptError::Fps(self.fps));
        }
        if !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return Err(ScriptError::Duration(self.duration_s));
        }
        let mut previous = f64::NEG_INFINITY;
        for (index, e) in self.events.iter().enumerate() {
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(ScriptError::Event { index, msg: format!("invalid time {}", e.t) });
            }
            if e.t < previous {
                return Err(ScriptError::OutOfOrder { index, t: e.t, previous });
            }
            previous = e.t;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Script, ScriptError> {
        let doc: ScriptDocument = serde_json::from_str(text).map_err(|e| ScriptError::Json(e.to_string()))?;
        if doc.format != SCRIPT_FORMAT {
            return Err(ScriptError::Format(doc.format));
        }
        let events = doc
            .events
            .into_iter()
            .enumerate()
            .map(|(i, e)| e.into_event(i))
            .collect::<Result<Vec<_>, _>>()?;
        let script = Script {
            mode: doc.mode,
            fps: doc.fps,
            duration_s: doc.duration_s,
            tau_s: doc.tau_s,
            events,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        let doc = ScriptDocument {
            format: SCRIPT_FORMAT.into(),
            mode: self.mode,
            fps: self.fps,
            duration_s: self.duration_s,
            tau_s: self.tau_s,
            events: self.events.iter().map(EventDocument::from_event).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("script serializes")
    }

    /// Number of frames sampled over the script's duration.
    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.fps).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_script() {
        let s = Script::from_json(
            r#"{"format":"emotemesh-script/1","mode":"categorical","fps":10,"duration_s":1.0,"tau_s":60,
                "events":[{"t":0.0,"label":"joy","intensity":0.3}]}"#,
        )
        .unwrap();
        assert_eq!(s.events, vec![ScriptEvent::trigger(0.0, "joy", 0.3)]);
        assert_eq!(s.frame_count(), 10);
    }

    #[test]
    fn rejects_out_of_order() {
        let err = Script::from_json(
            r#"{"format":"emotemesh-script/1","events":[{"t":1.0,"label":"joy","intensity":0.3},{"t":0.5,"label":"sad","intensity":0.3}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::OutOfOrder { index: 1, .. }));
    }

    #[test]
    fn typed_events_round_trip() {
        let s = Script {
            events: vec![
                ScriptEvent::trigger(0.0, "joy", 0.3),
                ScriptEvent { t: 0.5, action: ScriptAction::SetMode(Mode::Factor) },
                ScriptEvent { t: 0.5, action: ScriptAction::SetPad(Pad::new(0.1, -0.2, 0.3)) },
                ScriptEvent { t: 1.0, action: ScriptAction::Reset },
            ],
            ..Script::default()
        };
        assert_eq!(Script::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn missing_fields_reported() {
        let err = Script::from_json(r#"{"format":"emotemesh-script/1","events":[{"t":0,"label":"joy"}]}"#)
            .unwrap_err();
        assert_eq!(err, ScriptError::Event { index: 0, msg: "missing `intensity`".into() });
    }
}
