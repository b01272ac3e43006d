//! Windowed multi-fold coincidence counting over time-tag streams.
//!
//! A k-fold coincidence is one tag from each configured channel, all within
//! `window` of the earliest tag (the anchor); tags are consumed greedily
//! earliest-first and each tag joins at most one coincidence per configured
//! set. A failed anchor can never join a later tuple (later anchors sit
//! later in time), so a single forward pass per set is exact.

use serde::Serialize;

use crate::error::{Error, Result};

/// Set of channels (1-4) as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub fn new(channels: &[u8]) -> Result<ChannelSet> {
        let mut mask = 0u8;
        for &c in channels {
            if !(1..=4).contains(&c) {
                return Err(Error::config("channel_set", format!("channel {c} out of 1-4")));
            }
            if mask & (1 << (c - 1)) != 0 {
                return Err(Error::config("channel_set", format!("duplicate channel {c}")));
            }
            mask |= 1 << (c - 1);
        }
        if mask == 0 {
            return Err(Error::config("channel_set", "empty set"));
        }
        Ok(ChannelSet(mask))
    }

    pub fn channels(&self) -> Vec<u8> {
        (1..=4).filter(|c| self.contains(*c)).collect()
    }

    pub fn contains(&self, channel: u8) -> bool {
        self.0 & (1 << (channel - 1)) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(&self, other: &ChannelSet) -> bool {
        self.0 & other.0 == self.0
    }
}

impl std::fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in self.channels() {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Serialize for ChannelSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Counting settings: window plus the channel sets to report.
#[derive(Debug, Clone)]
pub struct CoincidenceConfig {
    /// Coincidence window in seconds.
    pub window: f64,
    pub folds: Vec<ChannelSet>,
}

impl CoincidenceConfig {
    pub fn window_ps(&self) -> u64 {
        (self.window * 1e12).round() as u64
    }

    /// Window must be positive and below the pulse period so pulses cannot
    /// merge.
    pub fn validate(&self, repetition_rate_hz: f64) -> Result<()> {
        let period = 1.0 / repetition_rate_hz;
        if !(self.window > 0.0 && self.window < period) {
            return Err(Error::config(
                "coincidence.window",
                format!(
                    "window {:.3e} s must lie in (0, pulse period {:.3e} s)",
                    self.window, period
                ),
            ));
        }
        Ok(())
    }
}

/// Counts and rates from one counting pass.
#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub duration_s: f64,
    pub singles: [u64; 4],
    pub singles_rates_hz: [f64; 4],
    pub coincidences: Vec<(ChannelSet, u64)>,
    pub coincidence_rates_hz: Vec<(ChannelSet, f64)>,
}

impl CountReport {
    pub fn coincidence(&self, set: ChannelSet) -> Option<u64> {
        self.coincidences
            .iter()
            .find(|(s, _)| *s == set)
            .map(|(_, n)| *n)
    }

    /// Structural invariants: a fold never exceeds its channels' singles and
    /// a superset never exceeds a configured subset.
    pub fn check_invariants(&self) -> Result<()> {
        for (set, n) in &self.coincidences {
            for c in set.channels() {
                if *n > self.singles[c as usize - 1] {
                    return Err(Error::config(
                        "count_report",
                        format!("fold {set} = {n} exceeds singles of channel {c}"),
                    ));
                }
            }
            for (sub, m) in &self.coincidences {
                if sub.is_subset_of(set) && sub != set && n > m {
                    return Err(Error::config(
                        "count_report",
                        format!("superset {set} = {n} exceeds subset {sub} = {m}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_sorted(streams: &[Vec<u64>; 4]) -> Result<()> {
    for (ch, s) in streams.iter().enumerate() {
        if let Some(i) = s.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::UnsortedStream {
                channel: ch as u8 + 1,
                index: i + 1,
            });
        }
    }
    Ok(())
}

/// Count one channel set with the greedy earliest-first rule.
fn count_set(streams: &[Vec<u64>; 4], set: ChannelSet, window_ps: u64) -> u64 {
    let chans = set.channels();
    if chans.len() == 1 {
        return streams[chans[0] as usize - 1].len() as u64;
    }
    let lists: Vec<&[u64]> = chans.iter().map(|c| streams[*c as usize - 1].as_slice()).collect();
    let k = lists.len();
    let mut idx = vec![0usize; k];
    let mut count = 0u64;
    loop {
        // anchor: earliest current tag among the set's channels
        let mut anchor_ch = usize::MAX;
        let mut anchor_t = u64::MAX;
        for (j, list) in lists.iter().enumerate() {
            if idx[j] < list.len() && list[idx[j]] < anchor_t {
                anchor_t = list[idx[j]];
                anchor_ch = j;
            }
        }
        if anchor_ch == usize::MAX {
            break;
        }
        let limit = anchor_t.saturating_add(window_ps);
        let mut complete = true;
        for (j, list) in lists.iter().enumerate() {
            if j == anchor_ch {
                continue;
            }
            // drop tags before the anchor; they already failed as anchors
            while idx[j] < list.len() && list[idx[j]] < anchor_t {
                idx[j] += 1;
            }
            if idx[j] >= list.len() || list[idx[j]] > limit {
                complete = false;
            }
        }
        if complete {
            for j in 0..k {
                idx[j] += 1;
            }
            count += 1;
        } else {
            idx[anchor_ch] += 1;
        }
    }
    count
}

/// Single-pass counting of every configured set over sorted streams.
pub fn count(streams: &[Vec<u64>; 4], cfg: &CoincidenceConfig, duration_s: f64) -> Result<CountReport> {
    check_sorted(streams)?;
    if !(cfg.window > 0.0) {
        return Err(Error::config("coincidence.window", "must be > 0"));
    }
    let window_ps = cfg.window_ps();
    let singles = [
        streams[0].len() as u64,
        streams[1].len() as u64,
        streams[2].len() as u64,
        streams[3].len() as u64,
    ];
    let coincidences: Vec<(ChannelSet, u64)> = cfg
        .folds
        .iter()
        .map(|set| (*set, count_set(streams, *set, window_ps)))
        .collect();
    let report = CountReport {
        duration_s,
        singles,
        singles_rates_hz: singles.map(|n| n as f64 / duration_s),
        coincidence_rates_hz: coincidences
            .iter()
            .map(|(s, n)| (*s, *n as f64 / duration_s))
            .collect(),
        coincidences,
    };
    Ok(report)
}

/// Counting by independent time slices. Slice boundaries are pushed forward
/// to the first inter-tag gap wider than the window, so no tuple can span a
/// boundary and the summed counts equal the sequential pass exactly.
pub fn count_segmented(
    streams: &[Vec<u64>; 4],
    cfg: &CoincidenceConfig,
    duration_s: f64,
    n_segments: usize,
) -> Result<CountReport> {
    check_sorted(streams)?;
    let window_ps = cfg.window_ps();
    let total: usize = streams.iter().map(|s| s.len()).sum();
    if n_segments <= 1 || total == 0 {
        return count(streams, cfg, duration_s);
    }

    // merged view of all tags to find quiescent cut times
    let mut merged: Vec<u64> = Vec::with_capacity(total);
    for s in streams.iter() {
        merged.extend_from_slice(s);
    }
    merged.sort_unstable();
    let mut cuts: Vec<u64> = Vec::new(); // cut BEFORE tags >= cut
    let per = total / n_segments;
    for seg in 1..n_segments {
        let mut pos = seg * per;
        while pos < merged.len() && merged[pos] - merged[pos - 1] <= window_ps {
            pos += 1;
        }
        if pos < merged.len() {
            let cut = merged[pos];
            if cuts.last().map_or(true, |c| *c < cut) {
                cuts.push(cut);
            }
        }
    }

    use rayon::prelude::*;
    let mut bounds = vec![0u64];
    bounds.extend_from_slice(&cuts);
    bounds.push(u64::MAX);
    let slices: Vec<[Vec<u64>; 4]> = bounds
        .windows(2)
        .map(|b| {
            let (lo, hi) = (b[0], b[1]);
            let mut part: [Vec<u64>; 4] = Default::default();
            for (ch, s) in streams.iter().enumerate() {
                let start = s.partition_point(|t| *t < lo);
                let end = s.partition_point(|t| *t < hi);
                part[ch] = s[start..end].to_vec();
            }
            part
        })
        .collect();
    let partials: Vec<Vec<(ChannelSet, u64)>> = slices
        .par_iter()
        .map(|part| {
            cfg.folds
                .iter()
                .map(|set| (*set, count_set(part, *set, window_ps)))
                .collect()
        })
        .collect();

    let singles = [
        streams[0].len() as u64,
        streams[1].len() as u64,
        streams[2].len() as u64,
        streams[3].len() as u64,
    ];
    let coincidences: Vec<(ChannelSet, u64)> = cfg
        .folds
        .iter()
        .enumerate()
        .map(|(i, set)| {
            (*set, partials.iter().map(|p| p[i].1).sum())
        })
        .collect();
    Ok(CountReport {
        duration_s,
        singles,
        singles_rates_hz: singles.map(|n| n as f64 / duration_s),
        coincidence_rates_hz: coincidences
            .iter()
            .map(|(s, n)| (*s, *n as f64 / duration_s))
            .collect(),
        coincidences,
    })
}

/// Heralded second-order correlation from a count report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct G2Estimate {
    pub value: f64,
    /// Poisson-propagated one-sigma uncertainty.
    pub sigma: f64,
    pub herald_singles: u64,
    pub herald_port_pairs: u64,
    pub triples: u64,
}

/// g2 = 2 * CC_habc * SC_h / (CC_ha + CC_hb)^2 for herald channel h and the
/// two splitter ports a, b.
pub fn g2_heralded(
    report: &CountReport,
    herald: u8,
    port_a: u8,
    port_b: u8,
) -> Result<G2Estimate> {
    let need = |set: ChannelSet| -> Result<u64> {
        report.coincidence(set).ok_or_else(|| {
            Error::InsufficientCounts(format!("count report lacks fold {set}"))
        })
    };
    let sc = report.singles[herald as usize - 1];
    let cc_a = need(ChannelSet::new(&[herald, port_a])?)?;
    let cc_b = need(ChannelSet::new(&[herald, port_b])?)?;
    let ccc = need(ChannelSet::new(&[herald, port_a, port_b])?)?;
    let pairs = cc_a + cc_b;
    if pairs == 0 {
        return Err(Error::InsufficientCounts(
            "no herald-port coincidences; cannot normalize g2".into(),
        ));
    }
    let value = 2.0 * ccc as f64 * sc as f64 / (pairs as f64 * pairs as f64);
    // independent-Poisson propagation; the ccc term dominates
    let rel2 = 1.0 / (ccc.max(1) as f64) + 1.0 / (sc.max(1) as f64) + 4.0 / pairs as f64;
    let scale = if ccc == 0 {
        2.0 * sc as f64 / (pairs as f64 * pairs as f64)
    } else {
        value
    };
    Ok(G2Estimate {
        value,
        sigma: scale * rel2.sqrt(),
        herald_singles: sc,
        herald_port_pairs: pairs,
        triples: ccc,
    })
}

/// Reference implementations for the test suites; deliberately naive.
pub mod oracle {
    use super::ChannelSet;

    /// Quadratic/quartic greedy earliest-first counting: rebuild the tag
    /// list on every step and search exhaustively.
    pub fn count_brute_force(streams: &[Vec<u64>; 4], set: ChannelSet, window_ps: u64) -> u64 {
        let chans = set.channels();
        let mut tags: Vec<(u64, u8, bool)> = Vec::new(); // (time, channel, used)
        for &c in &chans {
            for &t in &streams[c as usize - 1] {
                tags.push((t, c, false));
            }
        }
        tags.sort_unstable();
        let mut count = 0u64;
        let mut dead: Vec<bool> = vec![false; tags.len()];
        loop {
            // earliest tag not used and not failed
            let anchor = match tags
                .iter()
                .enumerate()
                .find(|(i, (_, _, used))| !used && !dead[*i])
            {
                Some((i, _)) => i,
                None => break,
            };
            let (t0, c0, _) = tags[anchor];
            // earliest unused tag of each other channel in [t0, t0+window]
            let mut picks: Vec<usize> = vec![anchor];
            for &c in chans.iter().filter(|c| **c != c0) {
                let found = tags.iter().enumerate().find(|(_, (t, ch, used))| {
                    !used && *ch == c && *t >= t0 && *t <= t0.saturating_add(window_ps)
                });
                match found {
                    Some((i, _)) => picks.push(i),
                    None => {
                        picks.clear();
                        break;
                    }
                }
            }
            if picks.is_empty() {
                dead[anchor] = true;
            } else {
                for i in picks {
                    tags[i].2 = true;
                }
                count += 1;
            }
        }
        count
    }
}
