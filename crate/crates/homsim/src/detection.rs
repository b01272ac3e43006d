//! SNSPD detection: efficiency and path-loss thinning, dark counts, dead
//! time, and an optional timing-jitter hook.
//!
//! Output is one time-ordered tag stream per channel, in integer
//! picoseconds. Channels are numbered 1-4; which optical role lands on
//! which channel is part of the model and configurable.

use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::interference::RoutedPhotons;
use crate::rng::{threshold, RngKey};
use crate::source::{lanes, pulse_time_ps};

/// A detection event. `time_ps` is monotone within a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTag {
    pub channel: u8,
    pub time_ps: u64,
}

/// Which detector channel serves which optical role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelRoles {
    pub idler1: u8,
    pub signal_a: u8,
    pub signal_b: u8,
    pub idler2: u8,
}

impl Default for ChannelRoles {
    /// The count formulas pin the conventional assignment: D1 heralds
    /// (idler1), D2/D3 watch the splitter outputs, D4 heralds idler2.
    fn default() -> Self {
        ChannelRoles {
            idler1: 1,
            signal_a: 2,
            signal_b: 3,
            idler2: 4,
        }
    }
}

impl ChannelRoles {
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 4];
        for ch in [self.idler1, self.signal_a, self.signal_b, self.idler2] {
            if !(1..=4).contains(&ch) {
                return Err(Error::config("detectors.roles", "channels must be 1-4"));
            }
            if seen[ch as usize - 1] {
                return Err(Error::config("detectors.roles", "duplicate channel"));
            }
            seen[ch as usize - 1] = true;
        }
        Ok(())
    }
}

/// Per-channel detector and path parameters.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    /// Quantum efficiency per channel 1-4.
    pub efficiency: [f64; 4],
    /// Collection/fiber transmission in front of each channel.
    pub path_transmission: [f64; 4],
    /// Dark counts per second, per channel.
    pub dark_count_rate_hz: f64,
    /// Seconds after an accepted tag during which the channel is blind.
    pub dead_time: f64,
    /// Gaussian timing jitter sigma (seconds); 0 disables the hook.
    pub jitter_sigma: f64,
    pub roles: ChannelRoles,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for ch in 0..4 {
            let p = self.efficiency[ch] * self.path_transmission[ch];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(
                    format!("detectors.channel{}", ch + 1),
                    format!("efficiency x transmission = {p} outside [0,1]"),
                ));
            }
        }
        if self.dead_time < 0.0 || self.dark_count_rate_hz < 0.0 || self.jitter_sigma < 0.0 {
            return Err(Error::config(
                "detectors",
                "dead time, dark rate and jitter must be nonnegative",
            ));
        }
        self.roles.validate()
    }

    /// System detection probability for channel (1-based).
    pub fn system_efficiency(&self, channel: u8) -> f64 {
        self.efficiency[channel as usize - 1] * self.path_transmission[channel as usize - 1]
    }

    pub fn dead_time_ps(&self) -> u64 {
        (self.dead_time * 1e12).round() as u64
    }
}

/// Precomputed per-channel survival thresholds in role order
/// (idler1, signal_a, signal_b, idler2).
#[derive(Debug, Clone, Copy)]
pub struct DetectorThresholds {
    pub by_role: [(u8, u64); 4],
}

impl DetectorThresholds {
    pub fn new(model: &DetectorModel) -> DetectorThresholds {
        let r = &model.roles;
        let t = |ch: u8| (ch, threshold(model.system_efficiency(ch)));
        DetectorThresholds {
            by_role: [t(r.idler1), t(r.signal_a), t(r.signal_b), t(r.idler2)],
        }
    }
}

/// Streams of detected photon tags, channel-indexed 1-4 at positions 0-3.
pub type ChannelStreams = [Vec<u64>; 4];

/// Detect a stream of routed pulses over `duration` seconds.
///
/// Photons survive independently with the channel's system efficiency and
/// become tags at the pulse time (plus jitter); dark counts are a Poisson
/// process per channel; dead-time filtering then drops any tag closer than
/// the dead time to the previously accepted tag on that channel.
pub fn detect(
    pulses: impl IntoIterator<Item = RoutedPhotons>,
    model: &DetectorModel,
    repetition_rate_hz: f64,
    duration: f64,
    key: &RngKey,
) -> Result<ChannelStreams> {
    if !(duration > 0.0) {
        return Err(Error::config("duration", "must be > 0"));
    }
    model.validate()?;
    let mut streams = raw_photon_tags(pulses, model, repetition_rate_hz, key);
    let duration_ps = (duration * 1e12).round() as u64;
    for ch in 1..=4u8 {
        let dark = dark_count_tags(model, ch, 0, duration_ps, key);
        let merged = merge_sorted(&streams[ch as usize - 1], &dark);
        streams[ch as usize - 1] = apply_dead_time(&merged, model.dead_time_ps());
    }
    Ok(streams)
}

/// Thin one routed pulse into per-channel tag vectors. Survival draws come
/// from the pulse's detection lane, so the outcome is a pure function of
/// (key, pulse_index).
#[inline]
pub fn detect_pulse_into(
    pulse: &RoutedPhotons,
    thresholds: &DetectorThresholds,
    jitter_ps: f64,
    t0_ps: u64,
    key: &RngKey,
    streams: &mut ChannelStreams,
) {
    let mut stream = key.child(lanes::DETECTION).child(pulse.pulse_index).stream();
    let counts = [pulse.idler1, pulse.signal_a, pulse.signal_b, pulse.idler2];
    for (role, n) in counts.iter().enumerate() {
        if *n == 0 {
            continue;
        }
        let (channel, thr) = thresholds.by_role[role];
        for _ in 0..*n {
            if stream.hit(thr) {
                let t = if jitter_ps > 0.0 {
                    let normal = Normal::new(0.0, jitter_ps).expect("valid jitter");
                    let dt: f64 = normal.sample(&mut stream);
                    t0_ps.saturating_add_signed(dt.round() as i64)
                } else {
                    t0_ps
                };
                streams[channel as usize - 1].push(t);
            }
        }
    }
}

/// Photon-only tags per channel (sorted), before dark counts and dead time.
pub fn raw_photon_tags(
    pulses: impl IntoIterator<Item = RoutedPhotons>,
    model: &DetectorModel,
    repetition_rate_hz: f64,
    key: &RngKey,
) -> ChannelStreams {
    let thresholds = DetectorThresholds::new(model);
    let jitter_ps = model.jitter_sigma * 1e12;
    let mut streams: ChannelStreams = Default::default();
    for pulse in pulses {
        let t0 = pulse_time_ps(pulse.pulse_index, repetition_rate_hz);
        detect_pulse_into(&pulse, &thresholds, jitter_ps, t0, key, &mut streams);
    }
    if model.jitter_sigma > 0.0 {
        for s in streams.iter_mut() {
            s.sort_unstable();
        }
    }
    streams
}

/// Dark-count tags for one channel within [start_ps, end_ps), sorted.
pub fn dark_count_tags(
    model: &DetectorModel,
    channel: u8,
    start_ps: u64,
    end_ps: u64,
    key: &RngKey,
) -> Vec<u64> {
    if model.dark_count_rate_hz <= 0.0 || end_ps <= start_ps {
        return Vec::new();
    }
    let span_s = (end_ps - start_ps) as f64 * 1e-12;
    let mean = model.dark_count_rate_hz * span_s;
    let mut stream = key
        .child(lanes::DARK)
        .child(channel as u64)
        .child(start_ps)
        .stream();
    let n = Poisson::new(mean).expect("positive mean").sample(&mut stream) as u64;
    let mut tags: Vec<u64> = (0..n)
        .map(|_| start_ps + (stream.next_f64() * (end_ps - start_ps) as f64) as u64)
        .collect();
    tags.sort_unstable();
    tags
}

/// Merge two sorted tag streams.
pub fn merge_sorted(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Drop every tag within the dead time after an accepted tag.
pub fn apply_dead_time(sorted: &[u64], dead_ps: u64) -> Vec<u64> {
    if dead_ps == 0 {
        return sorted.to_vec();
    }
    let mut out = Vec::with_capacity(sorted.len());
    let mut last: Option<u64> = None;
    for &t in sorted {
        match last {
            Some(prev) if t < prev.saturating_add(dead_ps) => {}
            _ => {
                out.push(t);
                last = Some(t);
            }
        }
    }
    out
}

/// True when consecutive tags on the stream respect the dead time.
pub fn dead_time_respected(sorted: &[u64], dead_ps: u64) -> bool {
    sorted
        .windows(2)
        .all(|w| w[1] >= w[0].saturating_add(dead_ps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DetectorModel {
        DetectorModel {
            efficiency: [0.23, 0.22, 0.19, 0.11],
            path_transmission: [1.0, 1.0, 1.0, 1.0],
            dark_count_rate_hz: 0.0,
            dead_time: 30e-9,
            jitter_sigma: 0.0,
            roles: ChannelRoles::default(),
        }
    }

    fn pulse(idx: u64, a: u8, b: u8, i1: u8, i2: u8) -> RoutedPhotons {
        RoutedPhotons {
            pulse_index: idx,
            signal_a: a,
            signal_b: b,
            idler1: i1,
            idler2: i2,
        }
    }

    #[test]
    fn zero_efficiency_zero_dark_is_silent() {
        let mut m = model();
        m.efficiency = [0.0; 4];
        let pulses: Vec<_> = (0..10_000).map(|i| pulse(i, 1, 1, 1, 1)).collect();
        let streams = detect(pulses, &m, 76e6, 1.0, &RngKey::new(1)).unwrap();
        assert!(streams.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn dark_counts_alone_match_poisson() {
        let mut m = model();
        m.dark_count_rate_hz = 100.0;
        let streams = detect(Vec::new(), &m, 76e6, 100.0, &RngKey::new(2)).unwrap();
        for s in streams.iter() {
            let n = s.len() as f64;
            assert!((n - 10_000.0).abs() < 300.0, "dark tags {n}");
            assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn singles_rate_matches_thinning() {
        let mut m = model();
        m.dead_time = 0.0; // isolate the Bernoulli thinning
        let n_pulses = 500_000u64;
        let pulses: Vec<_> = (0..n_pulses).map(|i| pulse(i, 0, 0, 1, 0)).collect();
        let streams = detect(pulses, &m, 76e6, n_pulses as f64 / 76e6, &RngKey::new(3)).unwrap();
        let got = streams[0].len() as f64;
        let expect = n_pulses as f64 * 0.23;
        assert!(
            (got - expect).abs() < 4.0 * (expect * 0.77).sqrt(),
            "{got} vs {expect}"
        );
        assert!(streams[1].is_empty() && streams[3].is_empty());
    }

    #[test]
    fn dead_time_invariant_holds_under_load() {
        let mut m = model();
        m.dark_count_rate_hz = 2_000_000.0; // stress
        m.efficiency = [0.9; 4];
        let pulses: Vec<_> = (0..200_000).map(|i| pulse(i, 2, 2, 2, 2)).collect();
        let streams = detect(pulses, &m, 76e6, 200_000.0 / 76e6, &RngKey::new(4)).unwrap();
        let dead = m.dead_time_ps();
        for s in streams.iter() {
            assert!(dead_time_respected(s, dead));
            assert!(!s.is_empty());
        }
    }

    #[test]
    fn dead_time_collapses_same_pulse_photons() {
        let mut m = model();
        m.efficiency = [1.0; 4];
        let pulses = vec![pulse(0, 3, 0, 0, 0)];
        let streams = detect(pulses, &m, 76e6, 1e-3, &RngKey::new(5)).unwrap();
        assert_eq!(streams[1].len(), 1, "one click per pulse per channel");
    }

    #[test]
    fn raising_efficiency_never_lowers_singles() {
        let mut low = model();
        low.efficiency = [0.10; 4];
        let mut high = model();
        high.efficiency = [0.20; 4];
        let key = RngKey::new(6);
        let pulses: Vec<_> = (0..300_000).map(|i| pulse(i, 1, 0, 1, 1)).collect();
        let a = detect(pulses.clone(), &low, 76e6, 300_000.0 / 76e6, &key).unwrap();
        let b = detect(pulses, &high, 76e6, 300_000.0 / 76e6, &key).unwrap();
        for ch in 0..4 {
            assert!(
                b[ch].len() >= a[ch].len(),
                "channel {} lost counts: {} -> {}",
                ch + 1,
                a[ch].len(),
                b[ch].len()
            );
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let mut m = model();
        m.dark_count_rate_hz = 100.0;
        let pulses: Vec<_> = (0..50_000).map(|i| pulse(i, 1, 1, 1, 1)).collect();
        let a = detect(pulses.clone(), &m, 76e6, 50_000.0 / 76e6, &RngKey::new(7)).unwrap();
        let b = detect(pulses, &m, 76e6, 50_000.0 / 76e6, &RngKey::new(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jitter_perturbs_but_keeps_order() {
        let mut m = model();
        m.efficiency = [1.0; 4];
        m.jitter_sigma = 50e-12;
        let pulses: Vec<_> = (0..10_000).map(|i| pulse(i, 1, 0, 0, 0)).collect();
        let streams = detect(pulses, &m, 76e6, 10_000.0 / 76e6, &RngKey::new(8)).unwrap();
        let s = &streams[1];
        assert!(!s.is_empty());
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        // jitter moved at least some tags off the pulse clock
        let moved = s
            .iter()
            .filter(|t| {
                let nearest = ((**t as f64) * 76e6 / 1e12).round() as u64;
                pulse_time_ps(nearest, 76e6) != **t
            })
            .count();
        assert!(moved > 0);
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = model();
        m.efficiency[0] = 1.5;
        assert!(m.validate().is_err());
        let mut m = model();
        m.dead_time = -1.0;
        assert!(m.validate().is_err());
        let mut m = model();
        m.roles.signal_a = 1; // duplicate with idler1
        assert!(m.validate().is_err());
        assert!(model().validate().is_ok());
    }
}
