//! The synchronous session core: one engine, a command queue drained at
//! frame boundaries, and an append-only command log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use emotemesh::animator::{apply_action, render_frame};
use emotemesh::idle::BlinkSchedule;
use emotemesh::script::ScriptAction;
use emotemesh::{
    bake_morph_targets, sample_timeline, AnimError, EmotionalState, EngineConfig, EngineError, ExpressionTable, Frame,
    FrameSequence, IdleConfig, Mesh, Mode, MorphError, MorphTargetSet, Pad, Rig, Script, ScriptEvent, SimTime,
    TimelineOptions,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::protocol::{check_fps, ClientMessage, Payload, ServerMessage};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    Fps(String),
    #[error("payload `features` requires a rig")]
    FeaturesWithoutRig,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error("invalid session id `{0}`")]
    SessionId(String),
    #[error("command log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rest mesh, rig and baked morph targets served to clients.
#[derive(Debug)]
pub struct Assets {
    pub mesh: Mesh,
    pub rig: Rig,
    pub morphs: MorphTargetSet,
    message: String,
}

impl Assets {
    pub fn new(mesh: Mesh, rig: Rig, table: &ExpressionTable) -> Result<Assets, SessionError> {
        let morphs = bake_morph_targets(&rig, &mesh, table)?;
        let mesh_value = json!({
            "vertices": mesh.vertices,
            "faces": mesh.faces.iter().map(|f| f.v).collect::<Vec<_>>(),
        });
        let message = ServerMessage::Assets {
            rig: rig.to_value(),
            mesh: mesh_value,
            morphs: serde_json::from_str::<Value>(&morphs.to_json()).expect("morph document is JSON"),
        }
        .to_json();
        Ok(Assets { mesh, rig, morphs, message })
    }

    /// The serialized `assets` message.
    pub fn message(&self) -> &str {
        &self.message
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub fps: f64,
    pub tau_s: f64,
    pub mode: Mode,
    pub table: Arc<ExpressionTable>,
    pub assets: Option<Arc<Assets>>,
    /// Payload for subscribers that do not name one.
    pub payload: Payload,
}

impl SessionConfig {
    pub fn new(table: Arc<ExpressionTable>) -> Self {
        SessionConfig {
            fps: 30.0,
            tau_s: EngineConfig::default().tau_s,
            mode: Mode::Categorical,
            table,
            assets: None,
            payload: Payload::Intensities,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        check_fps(self.fps).map_err(SessionError::Fps)?;
        if self.payload.wants_features() && self.assets.is_none() {
            return Err(SessionError::FeaturesWithoutRig);
        }
        EngineConfig { tau_s: self.tau_s, ..EngineConfig::default() }.validate()?;
        Ok(())
    }
}

/// First line of a command log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub session: String,
    pub fps: f64,
    /// Absent when mood is frozen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub cmd: ClientMessage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandLog {
    pub header: LogHeader,
    pub entries: Vec<LogEntry>,
}

impl CommandLog {
    pub fn parse(text: &str) -> Result<CommandLog, SessionError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SessionError::Log("empty log".into()))?;
        let header: LogHeader =
            serde_json::from_str(header).map_err(|e| SessionError::Log(format!("header: {e}")))?;
        let entries = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| SessionError::Log(format!("entry {}: {e}", i + 1))))
            .collect::<Result<Vec<LogEntry>, _>>()?;
        Ok(CommandLog { header, entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// An event script that replays the logged commands over `frames` frames.
    pub fn to_script(&self, frames: u64) -> Script {
        let events = self
            .entries
            .iter()
            .filter_map(|e| to_action(&e.cmd).map(|action| ScriptEvent { t: e.t, action }))
            .collect();
        Script {
            mode: self.header.mode,
            fps: self.header.fps,
            duration_s: frames as f64 / self.header.fps,
            tau_s: self.header.tau_s.unwrap_or(f64::INFINITY),
            events,
        }
    }

    /// Offline replay through the animator.
    pub fn replay(&self, table: Arc<ExpressionTable>, frames: u64) -> Result<FrameSequence, AnimError> {
        sample_timeline(&self.to_script(frames), table, &TimelineOptions::default())
    }
}

fn to_action(cmd: &ClientMessage) -> Option<ScriptAction> {
    Some(match cmd {
        ClientMessage::Trigger { label, intensity } => {
            ScriptAction::Trigger { label: label.clone(), intensity: *intensity }
        }
        ClientMessage::SetPad { p, a, d } => ScriptAction::SetPad(Pad::new(*p, *a, *d)),
        ClientMessage::SetMode { mode } => ScriptAction::SetMode(*mode),
        ClientMessage::Reset {} => ScriptAction::Reset,
        ClientMessage::Subscribe { .. } | ClientMessage::GetAssets {} => return None,
    })
}

/// Output of one session step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub frame: Frame,
    /// `(token, reply)` for every command drained this step, in order.
    pub replies: Vec<(u64, ServerMessage)>,
}

pub struct Session {
    id: String,
    config: SessionConfig,
    state: EmotionalState,
    blinks: BlinkSchedule,
    next_frame: u64,
    pending: Vec<(u64, ClientMessage)>,
    log: CommandLog,
    writer: Option<BufWriter<File>>,
}

impl Session {
    /// A session at clock 0 in the neutral state.
    pub fn start(id: impl Into<String>, config: SessionConfig) -> Result<Session, SessionError> {
        config.validate()?;
        let engine = EngineConfig { tau_s: config.tau_s, mode: config.mode, ..EngineConfig::default() };
        let state = EmotionalState::new(config.table.clone(), engine)?;
        let id = id.into();
        let header = LogHeader {
            session: id.clone(),
            fps: config.fps,
            tau_s: config.tau_s.is_finite().then_some(config.tau_s),
            mode: config.mode,
        };
        Ok(Session {
            id,
            config,
            state,
            blinks: BlinkSchedule::new(0, IdleConfig::default()),
            next_frame: 0,
            pending: Vec::new(),
            log: CommandLog { header, entries: Vec::new() },
            writer: None,
        })
    }

    /// Mirrors the command log to `path`, truncating it.
    pub fn log_to(&mut self, path: &Path) -> Result<(), SessionError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.log.to_jsonl().as_bytes())?;
        w.flush()?;
        self.writer = Some(w);
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> &EmotionalState {
        &self.state
    }

    pub fn clock(&self) -> SimTime {
        self.state.clock()
    }

    pub fn log(&self) -> &CommandLog {
        &self.log
    }

    /// Frames emitted so far.
    pub fn frames_emitted(&self) -> u64 {
        self.next_frame
    }

    /// Queues an engine command. Malformed or unknown-label commands are
    /// rejected here and never reach the engine.
    pub fn enqueue(&mut self, token: u64, cmd: ClientMessage) -> Result<(), String> {
        match &cmd {
            ClientMessage::Trigger { label, intensity } => {
                self.state.check_label(label).map_err(|e| e.to_string())?;
                self.state.check_intensity(*intensity).map_err(|e| e.to_string())?;
            }
            ClientMessage::SetPad { p, a, d } => {
                if [p, a, d].iter().any(|c| !c.is_finite() || c.abs() > 1.0) {
                    return Err(format!("PAD point ({p}, {a}, {d}) outside [-1, 1]"));
                }
            }
            ClientMessage::SetMode { .. } | ClientMessage::Reset {} => {}
            ClientMessage::Subscribe { .. } | ClientMessage::GetAssets {} => {
                return Err("not an engine command".into());
            }
        }
        self.pending.push((token, cmd));
        Ok(())
    }

    /// Advances to the next frame time, applies queued commands there, and
    /// renders the frame.
    pub fn step(&mut self) -> Result<Step, SessionError> {
        let t = SimTime::frame(self.next_frame, self.config.fps);
        self.state.advance_to(t)?;
        let mut replies = Vec::with_capacity(self.pending.len());
        let mut applied = Vec::new();
        for (token, cmd) in std::mem::take(&mut self.pending) {
            let action = to_action(&cmd).expect("queued commands are engine commands");
            match apply_action(&mut self.state, &action, 1.0) {
                Ok(()) => {
                    replies.push((token, ServerMessage::Ack { t: t.as_secs() }));
                    applied.push(LogEntry { t: t.as_secs(), cmd });
                }
                Err(e) => replies.push((token, ServerMessage::error(e.to_string()))),
            }
        }
        if let Some(w) = &mut self.writer {
            for e in &applied {
                serde_json::to_writer(&mut *w, e).map_err(|e| SessionError::Log(e.to_string()))?;
                w.write_all(b"\n")?;
            }
            if !applied.is_empty() {
                w.flush()?;
            }
        }
        self.log.entries.extend(applied);
        let frame = render_frame(&self.state, &self.config.table, &mut self.blinks, None)
            .expect("queued labels were checked against the table");
        self.next_frame += 1;
        Ok(Step { frame, replies })
    }

    pub fn flush(&mut self) -> Result<(), SessionError> {
        if let Some(w) = &mut self.writer {
            w.flush()?;
        }
        Ok(())
    }
}
