//! Seeded eye-blink layer added on top of the emotion channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::feature::{Feature, FeatureDisplacements, Zxy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdleConfig {
    pub enabled: bool,
    /// Mean time between blink starts, seconds.
    pub mean_period_s: f64,
    /// Half-width of the uniform jitter on each interval, seconds.
    pub jitter_s: f64,
    pub close_s: f64,
    pub release_s: f64,
    /// Upper lid travel at full closure (positive is down), meters.
    pub upper_lid_drop: f64,
    /// Lower lid travel at full closure (positive is up), meters.
    pub lower_lid_raise: f64,
}

impl Default for IdleConfig {
    fn default() -> Self {
        IdleConfig {
            enabled: false,
            mean_period_s: 2.0,
            jitter_s: 0.5,
            close_s: 0.15,
            release_s: 0.15,
            upper_lid_drop: 0.008,
            lower_lid_raise: 0.0015,
        }
    }
}

impl IdleConfig {
    pub fn enabled() -> Self {
        IdleConfig { enabled: true, ..Default::default() }
    }
}

/// Lazily extended blink start times for one seed.
#[derive(Debug, Clone)]
pub struct BlinkSchedule {
    rng: ChaCha8Rng,
    starts: Vec<f64>,
    horizon: f64,
    config: IdleConfig,
}

impl BlinkSchedule {
    pub fn new(seed: u64, config: IdleConfig) -> Self {
        BlinkSchedule {
            rng: ChaCha8Rng::seed_from_u64(seed),
            starts: Vec::new(),
            horizon: 0.0,
            config,
        }
    }

    fn extend_to(&mut self, t: f64) {
        let lo = (self.config.mean_period_s - self.config.jitter_s).max(1e-3);
        let hi = (self.config.mean_period_s + self.config.jitter_s).max(lo);
        while self.horizon <= t {
            self.horizon += self.rng.gen_range(lo..=hi);
            self.starts.push(self.horizon);
        }
    }

    /// Blink start times in `[0, until]`.
    pub fn starts_until(&mut self, until: f64) -> &[f64] {
        self.extend_to(until);
        let n = self.starts.partition_point(|&s| s <= until);
        &self.starts[..n]
    }

    /// Lid closure in `[0, 1]` at time `t`.
    pub fn closure(&mut self, t: f64) -> f64 {
        if !self.config.enabled || t < 0.0 {
            return 0.0;
        }
        let (close, release) = (self.config.close_s, self.config.release_s);
        let Some(&start) = self.starts_until(t).last() else { return 0.0 };
        let e = t - start;
        if e < close {
            e / close
        } else if e < close + release {
            1.0 - (e - close) / release
        } else {
            0.0
        }
    }

    pub fn displacements(&mut self, t: f64) -> FeatureDisplacements {
        let c = self.closure(t);
        let mut out = FeatureDisplacements::zero();
        if c > 0.0 {
            let upper = Zxy::new(0.0, 0.0, c * self.config.upper_lid_drop);
            let lower = Zxy::new(0.0, 0.0, -c * self.config.lower_lid_raise);
            out[Feature::LidUpperLeft] = upper;
            out[Feature::LidUpperRight] = upper;
            out[Feature::LidLowerLeft] = lower;
            out[Feature::LidLowerRight] = lower;
        }
        out
    }
}

/// Blink displacements at `t` for `seed`. Zero when the layer is disabled.
pub fn idle_layer(t: f64, seed: u64, config: &IdleConfig) -> FeatureDisplacements {
    BlinkSchedule::new(seed, config.clone()).displacements(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_is_zero() {
        let cfg = IdleConfig::default();
        for i in 0..200 {
            assert!(idle_layer(i as f64 * 0.05, 7, &cfg).is_zero());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = IdleConfig::enabled();
        for i in 0..400 {
            let t = i as f64 * 0.025;
            assert_eq!(idle_layer(t, 42, &cfg), idle_layer(t, 42, &cfg));
        }
        let mut a = BlinkSchedule::new(1, cfg.clone());
        let mut b = BlinkSchedule::new(2, cfg);
        assert_ne!(a.starts_until(20.0).to_vec(), b.starts_until(20.0).to_vec());
    }

    #[test]
    fn blink_rate_over_100s() {
        for seed in 0..20 {
            let mut s = BlinkSchedule::new(seed, IdleConfig::enabled());
            let n = s.starts_until(100.0).len();
            assert!((40..=60).contains(&n), "seed {seed}: {n} blinks");
        }
    }

    #[test]
    fn lids_close_and_reopen() {
        let mut s = BlinkSchedule::new(3, IdleConfig::enabled());
        let start = s.starts_until(10.0)[0];
        assert_eq!(s.closure(start), 0.0);
        let peak = s.displacements(start + 0.15);
        assert!((peak[Feature::LidUpperLeft].y - 0.008).abs() < 1e-12);
        assert!(peak[Feature::LidLowerRight].y < 0.0);
        assert_eq!(s.closure(start + 0.31), 0.0);
    }
}
