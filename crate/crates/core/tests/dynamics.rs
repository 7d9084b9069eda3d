//! Engine and animator properties: envelope shape, mood, linearity, replay.

use std::collections::BTreeMap;
use std::sync::Arc;

use emotemesh::animator::{frame_displacements, sample_timeline, TimelineOptions};
use emotemesh::engine::{pad_to_intensities, Phase};
use emotemesh::script::{ScriptAction, ScriptEvent};
use emotemesh::{
    AffectEvent, EmotionalState, EngineConfig, Envelope, ExpressionTable, Feature, Intensities, Mode, Pad, Script,
    SimTime,
};
use proptest::prelude::*;

fn table() -> Arc<ExpressionTable> {
    Arc::new(ExpressionTable::builtin())
}

fn engine(tau: f64) -> EmotionalState {
    EmotionalState::new(table(), EngineConfig { tau_s: tau, ..EngineConfig::default() }).unwrap()
}

#[test]
fn envelope_is_continuous_at_phase_boundaries() {
    let env = Envelope::new("joy", 0.3, SimTime::ZERO).with_floor(0.1);
    for boundary in [0.4, 0.7] {
        let at = env.value_at(SimTime::from_secs(boundary));
        let before = env.value_at(SimTime(SimTime::from_secs(boundary).0 - 1));
        assert!((at - before).abs() < 1e-8, "jump at {boundary}: {before} -> {at}");
    }
    let end = SimTime::from_secs(1.0);
    assert!((env.value_at(SimTime(end.0 - 1)) - 0.1).abs() < 1e-8);
    assert_eq!(env.phase(SimTime(end.0 - 1)), Phase::Decay);
    assert_eq!(env.phase(end), Phase::Expired);
}

proptest! {
    #[test]
    fn envelope_never_exceeds_peak(target in 0.0f64..2.4, start in 0.0f64..2.4, floor in 0.0f64..2.4, t in 0.0f64..1.5) {
        let env = Envelope::new("x", target, SimTime::ZERO).with_start_value(start).with_floor(floor.min(target));
        let v = env.value_at(SimTime::from_secs(t));
        prop_assert!(v <= target.max(start) + 1e-15);
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn retrigger_never_jumps(first in 0.1f64..2.0, second in 0.0f64..2.0, at_ms in 1u32..1400) {
        let mut s = engine(60.0);
        s.trigger(&AffectEvent::new(0.0, "joy", first)).unwrap();
        let at = at_ms as f64 / 1000.0;
        s.advance_to(SimTime::from_secs(at)).unwrap();
        let before = s.intensities();
        s.trigger(&AffectEvent::new(at, "joy", second)).unwrap();
        let after = s.intensities();
        let level = |i: &Intensities| i.emotion.get("joy").copied().unwrap_or(0.0).max(
            i.emotion.get("joy").copied().unwrap_or(0.0) + i.mood.get("joy").copied().unwrap_or(0.0));
        prop_assert!((level(&before) - level(&after)).abs() < 1e-12,
            "before {:?} after {:?}", before, after);
    }

    #[test]
    fn pad_kernel_is_rotation_invariant(
        p in prop::array::uniform3(-0.5f64..0.5),
        angles in prop::array::uniform3(0.0f64..std::f64::consts::TAU),
    ) {
        let protos: BTreeMap<String, Pad> = [
            ("a", Pad::new(0.3, 0.2, -0.1)),
            ("b", Pad::new(-0.4, 0.1, 0.3)),
            ("c", Pad::new(0.0, -0.5, 0.2)),
        ].into_iter().map(|(l, p)| (l.to_string(), p)).collect();
        let rotate = |v: [f64; 3]| {
            let (sa, ca) = angles[0].sin_cos();
            let (sb, cb) = angles[1].sin_cos();
            let (sc, cc) = angles[2].sin_cos();
            let v = [v[0], ca * v[1] - sa * v[2], sa * v[1] + ca * v[2]];
            let v = [cb * v[0] + sb * v[2], v[1], -sb * v[0] + cb * v[2]];
            [cc * v[0] - sc * v[1], sc * v[0] + cc * v[1], v[2]]
        };
        let to_pad = |v: [f64; 3]| Pad::new(v[0], v[1], v[2]);
        let point = to_pad(p);
        let rotated: BTreeMap<String, Pad> =
            protos.iter().map(|(l, q)| (l.clone(), to_pad(rotate(q.to_array())))).collect();
        let a = pad_to_intensities(point, &protos).unwrap();
        let b = pad_to_intensities(to_pad(rotate(p)), &rotated).unwrap();
        for (l, v) in &a {
            prop_assert!((v - b[l]).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_schedules_are_bit_identical() {
    let run = || {
        let mut s = engine(5.0);
        s.trigger(&AffectEvent::new(0.0, "joy", 0.8)).unwrap();
        s.trigger(&AffectEvent::new(0.25, "sad", 0.4)).unwrap();
        for _ in 0..90 {
            s.tick(1.0 / 30.0).unwrap();
        }
        s.trigger(&AffectEvent::new(s.clock().as_secs(), "joy", 1.2)).unwrap();
        for _ in 0..30 {
            s.tick(1.0 / 30.0).unwrap();
        }
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let bits = |s: &EmotionalState| {
        let i = s.intensities();
        i.emotion.values().chain(i.mood.values()).map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn mood_converges_under_repeated_triggers() {
    let tau = 60.0;
    let mut s = engine(tau);
    let dt = 0.05;
    let steps = (5.0 * tau / dt) as usize;
    for i in 0..steps {
        if i % 10 == 0 {
            s.trigger(&AffectEvent::new(s.clock().as_secs(), "joy", 0.5)).unwrap();
        }
        s.tick(dt).unwrap();
    }
    // Exponential averaging of a constant 0.5 leaves 0.5 * exp(-5) behind.
    let oracle = 0.5 * (1.0 - (-5.0f64).exp());
    let m = s.mood("joy");
    assert!((m - 0.5).abs() / 0.5 < 0.02, "mood {m}");
    assert!((m - oracle).abs() < 2e-3, "mood {m} vs oracle {oracle}");
}

#[test]
fn mood_is_bounded_and_untouched_labels_stay_zero() {
    let mut s = engine(0.5);
    s.trigger(&AffectEvent::new(0.0, "sad", 0.7)).unwrap();
    s.trigger(&AffectEvent::new(0.3, "sad", 0.4)).unwrap();
    for _ in 0..200 {
        s.tick(0.01).unwrap();
        assert!(s.mood("sad") <= 0.7);
        assert_eq!(s.mood("joy"), 0.0);
    }
}

#[test]
fn decay_hands_off_to_mood() {
    let mut s = engine(0.2);
    s.trigger(&AffectEvent::new(0.0, "angry", 1.0)).unwrap();
    let mut last_level: Option<f64> = None;
    for _ in 0..200 {
        s.tick(0.005).unwrap();
        let i = s.intensities();
        let level = i.emotion.get("angry").copied().unwrap_or(0.0) + i.mood.get("angry").copied().unwrap_or(0.0);
        if let Some(prev) = last_level {
            assert!((level - prev).abs() < 0.02, "jump {prev} -> {level} at {}", s.clock());
        }
        last_level = Some(level);
    }
    assert!(s.envelope("angry").is_none());
    assert!(s.intensities().mood["angry"] > 0.0);
}

fn random_intensities() -> impl Strategy<Value = Intensities> {
    let labels = ["happy", "sad", "angry", "surprise", "disgust", "fear", "evil", "joy", "furious"];
    (
        prop::collection::btree_map(prop::sample::select(labels.to_vec()), 0.0f64..2.4, 0..6),
        prop::collection::btree_map(prop::sample::select(labels.to_vec()), 0.0f64..2.4, 0..6),
    )
        .prop_map(|(e, m)| Intensities {
            emotion: e.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            mood: m.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        })
}

fn sum(a: &Intensities, b: &Intensities) -> Intensities {
    let mut out = a.clone();
    for (l, v) in &b.emotion {
        *out.emotion.entry(l.clone()).or_insert(0.0) += v;
    }
    for (l, v) in &b.mood {
        *out.mood.entry(l.clone()).or_insert(0.0) += v;
    }
    out
}

proptest! {
    #[test]
    fn synthesis_is_additive_and_homogeneous(a in random_intensities(), b in random_intensities(), k in 0.0f64..3.0) {
        let t = ExpressionTable::builtin();
        let da = frame_displacements(&a, &t).unwrap();
        let db = frame_displacements(&b, &t).unwrap();
        let dab = frame_displacements(&sum(&a, &b), &t).unwrap();
        let dk = frame_displacements(&a.scaled(k), &t).unwrap();
        for f in Feature::ALL {
            let (x, y) = (dab[f], da[f] + db[f]);
            prop_assert!((x.z - y.z).abs() <= 1e-12 && (x.x - y.x).abs() <= 1e-12 && (x.y - y.y).abs() <= 1e-12);
            let (x, y) = (dk[f], k * da[f]);
            prop_assert!((x.z - y.z).abs() <= 1e-12 && (x.x - y.x).abs() <= 1e-12 && (x.y - y.y).abs() <= 1e-12);
        }
    }

    #[test]
    fn mood_never_moves_the_jaw(a in random_intensities()) {
        let mood_only = Intensities { emotion: BTreeMap::new(), mood: a.mood };
        let d = frame_displacements(&mood_only, &ExpressionTable::builtin()).unwrap();
        prop_assert_eq!(d[Feature::Jaw].to_array(), [0.0; 3]);
    }
}

#[test]
fn intensity_multiplier_doubles_exactly() {
    let script = Script {
        fps: 30.0,
        duration_s: 3.0,
        events: vec![
            ScriptEvent::trigger(0.0, "happy", 1.0),
            ScriptEvent::trigger(0.5, "surprise", 0.6),
            ScriptEvent::trigger(1.1, "happy", 0.3),
        ],
        ..Script::default()
    };
    let run = |mult: f64| {
        sample_timeline(&script, table(), &TimelineOptions { intensity_mult: mult, ..Default::default() }).unwrap()
    };
    let (lo, hi) = (run(1.2), run(2.4));
    let mut compared = 0;
    for (a, b) in lo.frames.iter().zip(&hi.frames) {
        for (f, va) in a.features.iter() {
            let vb = b.features[f];
            for (x, y) in va.to_array().into_iter().zip(vb.to_array()) {
                if x != 0.0 {
                    assert_eq!(y / x, 2.0, "t={} {f}", a.t);
                    compared += 1;
                } else {
                    assert_eq!(y, 0.0);
                }
            }
        }
    }
    assert!(compared > 1000);
}

#[test]
fn single_episode_returns_to_rest_without_mood() {
    let script = Script {
        fps: 50.0,
        duration_s: 2.0,
        tau_s: f64::INFINITY,
        events: vec![ScriptEvent::trigger(0.3, "disgust", 1.5)],
        ..Script::default()
    };
    let seq = sample_timeline(&script, table(), &TimelineOptions::default()).unwrap();
    for f in &seq.frames {
        if f.t >= 1.3 - 1e-12 {
            assert!(f.features.is_zero(), "t={} not at rest", f.t);
        }
    }
    assert!(seq.frames.iter().any(|f| !f.features.is_zero()));
}

#[test]
fn factor_mode_script() {
    let script = Script {
        mode: Mode::Factor,
        fps: 10.0,
        duration_s: 1.0,
        events: vec![ScriptEvent { t: 0.2, action: ScriptAction::SetPad(Pad::new(0.76, 0.48, 0.35)) }],
        ..Script::default()
    };
    let seq = sample_timeline(&script, table(), &TimelineOptions::default()).unwrap();
    assert!(seq.frames[1].emotion.is_empty());
    assert_eq!(seq.frames[2].emotion["happy"], 1.0);
    assert!(seq.frames[2].emotion["sad"] < 1.0);
}

#[test]
fn set_pad_in_categorical_script_fails() {
    let script = Script {
        events: vec![ScriptEvent { t: 0.2, action: ScriptAction::SetPad(Pad::new(0.0, 0.0, 0.0)) }],
        ..Script::default()
    };
    assert!(sample_timeline(&script, table(), &TimelineOptions::default()).is_err());
}

#[test]
fn jsonl_is_byte_identical_across_runs() {
    let script = Script::from_json(
        r#"{"format":"emotemesh-script/1","fps":30,"duration_s":4.0,"tau_s":20,
            "events":[{"t":0.0,"label":"joy","intensity":0.3},{"t":0.9,"label":"evil","intensity":1.2},
                      {"t":2.5,"type":"reset"},{"t":2.6,"label":"afraid","intensity":2.4}]}"#,
    )
    .unwrap();
    let opts = TimelineOptions { seed: 9, idle: emotemesh::IdleConfig::enabled(), ..Default::default() };
    let a = sample_timeline(&script, table(), &opts).unwrap().to_jsonl();
    let b = sample_timeline(&script, table(), &opts).unwrap().to_jsonl();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 120);
    let first: serde_json::Value = serde_json::from_str(a.lines().nth(3).unwrap()).unwrap();
    assert_eq!(first["t"], 0.1);
    assert_eq!(first["emotion"]["joy"], 0.075);
    assert_eq!(first["mood"], serde_json::json!({}));
}
