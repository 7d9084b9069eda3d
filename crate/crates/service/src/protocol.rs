//! Wire messages. One JSON object per message in both directions.

use std::collections::BTreeMap;

use emotemesh::{FeatureDisplacements, Frame, Mode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Inclusive bounds for session and subscriber frame rates.
pub const FPS_RANGE: (f64, f64) = (1.0, 120.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    #[default]
    Intensities,
    Features,
    Both,
}

impl Payload {
    pub fn wants_features(self) -> bool {
        matches!(self, Payload::Features | Payload::Both)
    }

    pub fn wants_intensities(self) -> bool {
        matches!(self, Payload::Intensities | Payload::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Trigger { label: String, intensity: f64 },
    SetPad { p: f64, a: f64, d: f64 },
    SetMode { mode: Mode },
    Reset {},
    Subscribe {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<Payload>,
    },
    GetAssets {},
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<ClientMessage, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
    }

    /// True for commands that go through the session's engine queue.
    pub fn is_engine_command(&self) -> bool {
        !matches!(self, ClientMessage::Subscribe { .. } | ClientMessage::GetAssets {})
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Ack {
        t: f64,
    },
    Frame {
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emotion: Option<BTreeMap<String, f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mood: Option<BTreeMap<String, f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<FeatureDisplacements>,
    },
    Assets {
        rig: Value,
        mesh: Value,
        morphs: Value,
    },
    Error {
        msg: String,
    },
}

impl ServerMessage {
    pub fn error(msg: impl Into<String>) -> Self {
        ServerMessage::Error { msg: msg.into() }
    }

    /// The frame message as seen by a subscriber with `payload`.
    pub fn frame(frame: &Frame, payload: Payload) -> Self {
        let intensities = payload.wants_intensities();
        ServerMessage::Frame {
            t: frame.t,
            emotion: intensities.then(|| frame.emotion.clone()),
            mood: intensities.then(|| frame.mood.clone()),
            features: payload.wants_features().then_some(frame.features),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }

    pub fn parse(text: &str) -> Result<ServerMessage, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn check_fps(fps: f64) -> Result<f64, String> {
    if fps.is_finite() && fps >= FPS_RANGE.0 && fps <= FPS_RANGE.1 {
        Ok(fps)
    } else {
        Err(format!("fps must be in [{}, {}], got {fps}", FPS_RANGE.0, FPS_RANGE.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_client_schemas_parse() {
        let cases = [
            r#"{"type":"trigger","label":"joy","intensity":0.3}"#,
            r#"{"type":"set_pad","p":0.8,"a":0.5,"d":0.3}"#,
            r#"{"type":"set_mode","mode":"factor"}"#,
            r#"{"type":"reset"}"#,
            r#"{"type":"subscribe","fps":30,"payload":"intensities"}"#,
            r#"{"type":"get_assets"}"#,
        ];
        for c in cases {
            let m = ClientMessage::parse(c).unwrap();
            assert_eq!(ClientMessage::parse(&m.to_json()).unwrap(), m);
        }
        assert_eq!(
            ClientMessage::parse(r#"{"type":"subscribe"}"#).unwrap(),
            ClientMessage::Subscribe { fps: None, payload: None }
        );
    }

    #[test]
    fn malformed_messages_are_rejected() {
        for c in [
            "",
            "not json",
            r#"{"label":"joy","intensity":0.3}"#,
            r#"{"type":"trigger","label":"joy"}"#,
            r#"{"type":"trigger","label":"joy","intensity":"high"}"#,
            r#"{"type":"set_mode","mode":"dimensional"}"#,
            r#"{"type":"subscribe","payload":"video"}"#,
            r#"{"type":"launch"}"#,
            r#"{"type":"reset","extra":1}"#,
        ] {
            assert!(ClientMessage::parse(c).is_err(), "{c}");
        }
    }

    #[test]
    fn frame_filtering() {
        let mut frame = Frame {
            t: 1.25,
            emotion: BTreeMap::from([("joy".into(), 0.1)]),
            mood: BTreeMap::new(),
            features: FeatureDisplacements::zero(),
        };
        frame.features[emotemesh::Feature::Jaw] = emotemesh::Zxy::new(0.0, 0.0, 0.001);
        let only = ServerMessage::frame(&frame, Payload::Intensities).to_json();
        assert_eq!(only, r#"{"type":"frame","t":1.25,"emotion":{"joy":0.1},"mood":{}}"#);
        let both: Value = serde_json::from_str(&ServerMessage::frame(&frame, Payload::Both).to_json()).unwrap();
        assert_eq!(both["features"]["Jaw"], serde_json::json!([0.0, 0.0, 0.001]));
        let feats: Value = serde_json::from_str(&ServerMessage::frame(&frame, Payload::Features).to_json()).unwrap();
        assert!(feats.get("emotion").is_none());
        assert_eq!(ServerMessage::Ack { t: 1.234 }.to_json(), r#"{"type":"ack","t":1.234}"#);
    }

    #[test]
    fn fps_bounds() {
        assert!(check_fps(1.0).is_ok());
        assert!(check_fps(120.0).is_ok());
        assert!(check_fps(200.0).is_err());
        assert!(check_fps(0.5).is_err());
        assert!(check_fps(f64::NAN).is_err());
    }
}
