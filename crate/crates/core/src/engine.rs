//! Dynamic emotional state: triggered envelopes, mood, and factor (PAD) mode.
//!
//! Time is kept as integer nanoseconds so that phase boundaries and frame
//! grids land exactly and identical schedules give bit-identical states.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::ExpressionTable;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("intensity {intensity} outside [0, {max}]")]
    Intensity { intensity: f64, max: f64 },
    #[error("event at {event}s precedes session clock {clock}s")]
    EventInPast { event: f64, clock: f64 },
    #[error("time step must be positive, got {0}s")]
    NonPositiveStep(f64),
    #[error("mode mismatch: {0}")]
    ModeMismatch(&'static str),
    #[error("PAD coordinate {0} outside [-1, 1]")]
    PadRange(f64),
    #[error("no PAD prototypes configured")]
    NoPrototypes,
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

/// Session time in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: f64) -> SimTime {
        SimTime((s * 1e9).round() as i64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e9
    }

    /// Time of frame `index` on a grid of `fps` frames per second.
    pub fn frame(index: u64, fps: f64) -> SimTime {
        SimTime((index as f64 * 1e9 / fps).round() as i64)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.as_secs())
    }
}

/// Onset, hold and decay durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub onset: i64,
    pub hold: i64,
    pub decay: i64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            onset: 400_000_000,
            hold: 300_000_000,
            decay: 300_000_000,
        }
    }
}

impl Timing {
    pub fn from_secs(onset: f64, hold: f64, decay: f64) -> Result<Timing, EngineError> {
        let t = Timing {
            onset: SimTime::from_secs(onset).0,
            hold: SimTime::from_secs(hold).0,
            decay: SimTime::from_secs(decay).0,
        };
        if t.onset <= 0 || t.hold < 0 || t.decay <= 0 {
            return Err(EngineError::Config("onset and decay must be positive, hold non-negative".into()));
        }
        Ok(t)
    }

    pub fn decay_start(&self) -> i64 {
        self.onset + self.hold
    }

    pub fn total(&self) -> i64 {
        self.onset + self.hold + self.decay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Onset,
    Hold,
    Decay,
    Expired,
}

/// One triggered emotion's intensity curve: linear onset from `start_value`
/// to `target`, constant hold, linear decay to `decay_floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub label: String,
    pub target: f64,
    pub start: SimTime,
    pub start_value: f64,
    pub decay_floor: f64,
    floor_fixed: bool,
    pub timing: Timing,
}

impl Envelope {
    pub fn new(label: impl Into<String>, target: f64, start: SimTime) -> Self {
        Envelope {
            label: label.into(),
            target,
            start,
            start_value: 0.0,
            decay_floor: 0.0,
            floor_fixed: false,
            timing: Timing::default(),
        }
    }

    pub fn with_start_value(mut self, v: f64) -> Self {
        self.start_value = v;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.decay_floor = floor;
        self.floor_fixed = true;
        self
    }

    pub fn phase(&self, t: SimTime) -> Phase {
        let e = t.0 - self.start.0;
        if e < self.timing.onset {
            Phase::Onset
        } else if e < self.timing.decay_start() {
            Phase::Hold
        } else if e < self.timing.total() {
            Phase::Decay
        } else {
            Phase::Expired
        }
    }

    /// Value at `t`; times before the start read as `start_value`, times after
    /// the end as `decay_floor`.
    pub fn value_at(&self, t: SimTime) -> f64 {
        let e = (t.0 - self.start.0).max(0);
        let timing = &self.timing;
        match self.phase(t) {
            Phase::Onset => {
                let frac = e as f64 / timing.onset as f64;
                self.start_value + (self.target - self.start_value) * frac
            }
            Phase::Hold => self.target,
            Phase::Decay => {
                let frac = (e - timing.decay_start()) as f64 / timing.decay as f64;
                self.target + (self.decay_floor - self.target) * frac
            }
            Phase::Expired => self.decay_floor,
        }
    }

    pub fn end(&self) -> SimTime {
        SimTime(self.start.0 + self.timing.total())
    }
}

/// Envelope value at `t` seconds.
pub fn envelope_value(env: &Envelope, t: f64) -> f64 {
    env.value_at(SimTime::from_secs(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Categorical,
    Factor,
}

/// A point in pleasure/arousal/dominance space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pad {
    pub p: f64,
    pub a: f64,
    pub d: f64,
}

impl Pad {
    pub fn new(p: f64, a: f64, d: f64) -> Self {
        Pad { p, a, d }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p, self.a, self.d]
    }

    fn check(self) -> Result<Pad, EngineError> {
        for c in self.to_array() {
            if !c.is_finite() || !(-1.0..=1.0).contains(&c) {
                return Err(EngineError::PadRange(c));
            }
        }
        Ok(self)
    }
}

/// Diameter of the PAD cube.
pub fn pad_diameter() -> f64 {
    2.0 * 3f64.sqrt()
}

/// Illustrative PAD coordinates for the basic expressions. These are
/// configuration defaults, not measured values.
pub fn default_pad_prototypes() -> BTreeMap<String, Pad> {
    [
        ("angry", Pad::new(-0.51, 0.59, 0.25)),
        ("disgust", Pad::new(-0.60, 0.35, 0.11)),
        ("fear", Pad::new(-0.64, 0.60, -0.43)),
        ("happy", Pad::new(0.76, 0.48, 0.35)),
        ("sad", Pad::new(-0.63, -0.27, -0.33)),
        ("surprise", Pad::new(0.40, 0.67, -0.13)),
    ]
    .into_iter()
    .map(|(l, p)| (l.to_string(), p))
    .collect()
}

/// Intensity per prototype: `max(0, 1 - dist / diameter)`.
pub fn pad_to_intensities(
    point: Pad,
    prototypes: &BTreeMap<String, Pad>,
) -> Result<BTreeMap<String, f64>, EngineError> {
    if prototypes.is_empty() {
        return Err(EngineError::NoPrototypes);
    }
    let point = point.check()?;
    let d_max = pad_diameter();
    Ok(prototypes
        .iter()
        .map(|(label, proto)| {
            let dist = point
                .to_array()
                .iter()
                .zip(proto.to_array())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (label.clone(), (1.0 - dist / d_max).max(0.0))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectEvent {
    pub t: f64,
    pub label: String,
    pub intensity: f64,
}

impl AffectEvent {
    pub fn new(t: f64, label: impl Into<String>, intensity: f64) -> Self {
        AffectEvent { t, label: label.into(), intensity }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub tau_s: f64,
    pub max_intensity: f64,
    pub timing: Timing,
    pub mode: Mode,
    pub pad_prototypes: BTreeMap<String, Pad>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tau_s: 60.0,
            max_intensity: 2.4,
            timing: Timing::default(),
            mode: Mode::Categorical,
            pad_prototypes: default_pad_prototypes(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        // an infinite tau freezes mood at zero
        if !(self.tau_s > 0.0) {
            return Err(EngineError::Config(format!("tau must be positive, got {}", self.tau_s)));
        }
        if !(self.max_intensity >= 0.0) || !self.max_intensity.is_finite() {
            return Err(EngineError::Config(format!(
                "max intensity must be finite and non-negative, got {}",
                self.max_intensity
            )));
        }
        Ok(())
    }
}

/// Per-label emotion and mood contributions at one instant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Intensities {
    pub emotion: BTreeMap<String, f64>,
    pub mood: BTreeMap<String, f64>,
}

impl Intensities {
    pub fn is_zero(&self) -> bool {
        self.emotion.values().chain(self.mood.values()).all(|v| *v == 0.0)
    }

    /// Every intensity multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Intensities {
        let scale = |m: &BTreeMap<String, f64>| m.iter().map(|(l, v)| (l.clone(), k * v)).collect();
        Intensities { emotion: scale(&self.emotion), mood: scale(&self.mood) }
    }
}

#[derive(Debug, Clone)]
pub struct EmotionalState {
    clock: SimTime,
    envelopes: BTreeMap<String, Envelope>,
    mood: BTreeMap<String, f64>,
    mode: Mode,
    pad: Option<Pad>,
    config: EngineConfig,
    table: Arc<ExpressionTable>,
}

impl PartialEq for EmotionalState {
    fn eq(&self, other: &Self) -> bool {
        self.clock == other.clock
            && self.envelopes == other.envelopes
            && self.mood == other.mood
            && self.mode == other.mode
            && self.pad == other.pad
            && self.config == other.config
    }
}

impl EmotionalState {
    pub fn new(table: Arc<ExpressionTable>, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(EmotionalState {
            clock: SimTime::ZERO,
            envelopes: BTreeMap::new(),
            mood: BTreeMap::new(),
            mode: config.mode,
            pad: None,
            config,
            table,
        })
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn table(&self) -> &Arc<ExpressionTable> {
        &self.table
    }

    pub fn envelopes(&self) -> impl Iterator<Item = &Envelope> {
        self.envelopes.values()
    }

    pub fn envelope(&self, label: &str) -> Option<&Envelope> {
        self.envelopes.get(label)
    }

    /// Raw running average for `label`.
    pub fn mood(&self, label: &str) -> f64 {
        self.mood.get(label).copied().unwrap_or(0.0)
    }

    pub fn pad(&self) -> Option<Pad> {
        self.pad
    }

    pub fn check_label(&self, label: &str) -> Result<(), EngineError> {
        self.table
            .resolve(label)
            .map(|_| ())
            .ok_or_else(|| EngineError::UnknownLabel(label.to_string()))
    }

    pub fn check_intensity(&self, intensity: f64) -> Result<(), EngineError> {
        if !intensity.is_finite() || intensity < 0.0 || intensity > self.config.max_intensity {
            return Err(EngineError::Intensity { intensity, max: self.config.max_intensity });
        }
        Ok(())
    }

    /// Starts an envelope for the event's label, advancing the clock to the
    /// event time first. An active envelope for the same label is replaced by
    /// one that ramps from its current value.
    pub fn trigger(&mut self, event: &AffectEvent) -> Result<(), EngineError> {
        self.check_label(&event.label)?;
        self.check_intensity(event.intensity)?;
        let at = SimTime::from_secs(event.t);
        if at < self.clock {
            return Err(EngineError::EventInPast { event: event.t, clock: self.clock.as_secs() });
        }
        self.advance_to(at)?;
        self.start_envelope(&event.label, event.intensity);
        Ok(())
    }

    /// Triggers at the current clock.
    pub fn trigger_now(&mut self, label: &str, intensity: f64) -> Result<(), EngineError> {
        self.check_label(label)?;
        self.check_intensity(intensity)?;
        self.start_envelope(label, intensity);
        Ok(())
    }

    fn start_envelope(&mut self, label: &str, target: f64) {
        let now = self.clock;
        let current = self
            .envelopes
            .get(label)
            .filter(|e| e.phase(now) != Phase::Expired)
            .map(|e| e.value_at(now));
        let mut env = Envelope::new(label, target, now);
        env.timing = self.config.timing;
        if let Some(v) = current {
            env.start_value = v;
            env.target = target.max(v);
        }
        self.envelopes.insert(label.to_string(), env);
    }

    pub fn tick(&mut self, dt_s: f64) -> Result<(), EngineError> {
        if !(dt_s > 0.0) || !dt_s.is_finite() {
            return Err(EngineError::NonPositiveStep(dt_s));
        }
        let dt = SimTime::from_secs(dt_s).0.max(1);
        self.advance_to(SimTime(self.clock.0 + dt))
    }

    /// Moves the clock forward to `t`, integrating mood over the step.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), EngineError> {
        if t < self.clock {
            return Err(EngineError::EventInPast { event: t.as_secs(), clock: self.clock.as_secs() });
        }
        if t == self.clock {
            return Ok(());
        }
        let dt = (t.0 - self.clock.0) as f64 / 1e9;
        self.clock = t;

        for env in self.envelopes.values_mut() {
            if !env.floor_fixed && t.0 - env.start.0 >= env.timing.decay_start() {
                let mood = self.mood.get(&env.label).copied().unwrap_or(0.0);
                env.decay_floor = mood.min(env.target);
                env.floor_fixed = true;
            }
        }

        let expressed = self.emotion_values();
        let alpha = -(-dt / self.config.tau_s).exp_m1();
        for label in expressed.keys() {
            self.mood.entry(label.clone()).or_insert(0.0);
        }
        for (label, m) in self.mood.iter_mut() {
            let x = expressed.get(label).copied().unwrap_or(0.0);
            *m += (x - *m) * alpha;
        }

        self.envelopes.retain(|_, e| e.phase(t) != Phase::Expired);
        Ok(())
    }

    fn emotion_values(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = self
            .envelopes
            .iter()
            .map(|(l, e)| (l.clone(), e.value_at(self.clock)))
            .collect();
        if self.mode == Mode::Factor {
            if let Some(point) = self.pad {
                if let Ok(pad) = pad_to_intensities(point, &self.config.pad_prototypes) {
                    for (label, v) in pad {
                        *out.entry(label).or_insert(0.0) += v;
                    }
                }
            }
        }
        out
    }

    /// Emotion and mood contributions at the current clock. The mood channel
    /// carries only what exceeds the emotion for the same label.
    pub fn intensities(&self) -> Intensities {
        let emotion = self.emotion_values();
        let mood = self
            .mood
            .iter()
            .filter_map(|(label, m)| {
                let e = emotion.get(label).copied().unwrap_or(0.0);
                let v = (m - e).max(0.0);
                (v > 0.0).then(|| (label.clone(), v))
            })
            .collect();
        Intensities { emotion, mood }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        if mode == Mode::Categorical {
            self.pad = None;
        }
        self.mode = mode;
    }

    pub fn set_pad(&mut self, point: Pad) -> Result<(), EngineError> {
        if self.mode != Mode::Factor {
            return Err(EngineError::ModeMismatch("set_pad requires factor mode"));
        }
        if self.config.pad_prototypes.is_empty() {
            return Err(EngineError::NoPrototypes);
        }
        self.pad = Some(point.check()?);
        Ok(())
    }

    /// Clears envelopes, mood and the PAD point; clock and mode are kept.
    pub fn reset(&mut self) {
        self.envelopes.clear();
        self.mood.clear();
        self.pad = None;
    }
}
