//! Per-pulse photon-pair emission with thermal statistics per Schmidt mode.
//!
//! Each Schmidt mode k of a source is an independent two-mode squeezer, so
//! its pair number is geometric (thermal) with mean mu*lambda_k. Pulses are
//! sampled lazily and reproducibly: every random decision is a pure function
//! of (seed, pulse index, lane), so parallel workers agree bit for bit with
//! the sequential stream.
//!
//! Scans additionally use [`ScanSampler`], which skips pulses that cannot
//! contribute to the requested coincidences by sampling the geometric gaps
//! between relevant pulses. Pulse occupancy is Bernoulli per pulse, so the
//! gap chain reproduces the per-pulse process exactly.

use crate::error::{Error, Result};
use crate::rng::{RngKey, Stream};

/// Pair emission is truncated at this total per source per pulse; the
/// neglected tail is below 1e-9 for every supported pump power.
pub const MAX_PAIRS: usize = 16;

/// Schmidt modes with weight below this are never sampled (they still count
/// toward purity, which is computed upstream from the full decomposition).
pub const MODE_WEIGHT_CUTOFF: f64 = 1e-6;

/// RNG lane ids, one per kind of decision.
pub mod lanes {
    pub const EMISSION_SOURCE1: u64 = 1;
    pub const EMISSION_SOURCE2: u64 = 2;
    pub const ROUTING: u64 = 3;
    pub const DETECTION: u64 = 4;
    pub const DARK: u64 = 5;
    pub const GAP: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceId {
    One,
    Two,
}

impl SourceId {
    pub fn index(self) -> usize {
        match self {
            SourceId::One => 0,
            SourceId::Two => 1,
        }
    }

    fn emission_lane(self) -> u64 {
        match self {
            SourceId::One => lanes::EMISSION_SOURCE1,
            SourceId::Two => lanes::EMISSION_SOURCE2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonArm {
    Signal,
    Idler,
}

/// One emitted photon; the pulse index (hence nominal time) lives on the
/// enclosing [`PulseEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonRecord {
    pub source: SourceId,
    pub arm: PhotonArm,
    /// Schmidt mode index within the source's decomposition.
    pub mode: u16,
}

/// All photons emitted in one pump pulse, both sources.
#[derive(Debug, Clone, Default)]
pub struct PulseEvent {
    pub pulse_index: u64,
    pub photons: Vec<PhotonRecord>,
}

impl PulseEvent {
    /// Nominal emission time in integer picoseconds for a given repetition
    /// rate. Exact rational rounding keeps tag streams deterministic.
    pub fn nominal_time_ps(&self, repetition_rate_hz: f64) -> u64 {
        pulse_time_ps(self.pulse_index, repetition_rate_hz)
    }

    /// Equal signal and idler counts per (source, mode)?
    pub fn pair_balanced(&self) -> bool {
        use std::collections::HashMap;
        let mut tally: HashMap<(SourceId, u16), i64> = HashMap::new();
        for p in &self.photons {
            let e = tally.entry((p.source, p.mode)).or_insert(0);
            match p.arm {
                PhotonArm::Signal => *e += 1,
                PhotonArm::Idler => *e -= 1,
            }
        }
        tally.values().all(|v| *v == 0)
    }
}

/// Nominal time of a pulse in integer picoseconds.
pub fn pulse_time_ps(pulse_index: u64, repetition_rate_hz: f64) -> u64 {
    let rate = repetition_rate_hz.round() as u128;
    let num = pulse_index as u128 * 1_000_000_000_000u128 + rate / 2;
    (num / rate) as u64
}

/// Linear pair-rate calibration: mu(P) = P * pairs_per_mw.
pub fn mean_pairs(power_mw: f64, pairs_per_mw: f64) -> Result<f64> {
    if !(power_mw >= 0.0) {
        return Err(Error::config(
            "pump_power_mw",
            format!("power must be >= 0, got {power_mw}"),
        ));
    }
    if !(pairs_per_mw > 0.0) {
        return Err(Error::config("pairs_per_mw", "calibration must be > 0"));
    }
    Ok(power_mw * pairs_per_mw)
}

/// Emission settings for one source at one pump power.
#[derive(Debug, Clone)]
pub struct EmissionConfig {
    pub pump_power_mw: f64,
    /// Calibration constant (0.06 pairs/pulse at 100 mW -> 6.0e-4).
    pub pairs_per_mw: f64,
    pub repetition_rate_hz: f64,
    /// Schmidt coefficients of the source, descending.
    pub mode_weights: Vec<f64>,
    /// Residual center-frequency offset of this source (rad/s); consumed by
    /// the interference model when it builds the overlap table.
    pub center_offset: f64,
}

impl EmissionConfig {
    pub fn mean_pairs(&self) -> Result<f64> {
        mean_pairs(self.pump_power_mw, self.pairs_per_mw)
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.mean_pairs()?;
        if mu > 0.5 {
            return Err(Error::config(
                "pump_power_mw",
                format!("mean pairs/pulse {mu:.3} too high for the truncated emission model"),
            ));
        }
        if !(self.repetition_rate_hz > 0.0) {
            return Err(Error::config("repetition_rate_hz", "must be > 0"));
        }
        if self.mode_weights.is_empty() && mu > 0.0 {
            return Err(Error::config("mode_weights", "no Schmidt modes given"));
        }
        Ok(())
    }
}

/// Exact sampler for the per-pulse pair configuration of one source.
///
/// Precomputes the total-pair pmf and the suffix tables needed to sample the
/// per-mode configuration conditioned on the total; both follow from the
/// product-of-geometrics law P(n_1..n_K) = C * prod_k w_k^{n_k} with
/// w_k = m_k / (1 + m_k).
#[derive(Debug, Clone)]
pub struct ThermalSampler {
    /// w_k per sampled mode.
    weights: Vec<f64>,
    /// Original mode indices (after the cutoff filter).
    mode_ids: Vec<u16>,
    /// P(total = n), n = 0..=MAX_PAIRS (renormalized over the truncation).
    total_pmf: Vec<f64>,
    /// suffix[i][r] = sum over configs of modes i.. with total r of prod w^n.
    suffix: Vec<Vec<f64>>,
    /// Cumulative P(mode | total = 1) for the dominant fast path.
    single_cdf: Vec<f64>,
}

impl ThermalSampler {
    pub fn new(cfg: &EmissionConfig) -> Result<ThermalSampler> {
        cfg.validate()?;
        let mu = cfg.mean_pairs()?;
        let kept: Vec<(u16, f64)> = cfg
            .mode_weights
            .iter()
            .enumerate()
            .filter(|(_, l)| **l >= MODE_WEIGHT_CUTOFF)
            .map(|(k, l)| (k as u16, mu * l))
            .collect();
        let weights: Vec<f64> = kept.iter().map(|(_, m)| m / (1.0 + m)).collect();
        let mode_ids: Vec<u16> = kept.iter().map(|(k, _)| *k).collect();
        let kcount = weights.len();

        // suffix DP over mode index, totals up to MAX_PAIRS
        let mut suffix = vec![vec![0.0; MAX_PAIRS + 1]; kcount + 1];
        suffix[kcount][0] = 1.0;
        for i in (0..kcount).rev() {
            let w = weights[i];
            for r in 0..=MAX_PAIRS {
                let mut acc = 0.0;
                let mut wj = 1.0;
                for j in 0..=r {
                    acc += wj * suffix[i + 1][r - j];
                    wj *= w;
                }
                suffix[i][r] = acc;
            }
        }

        // P(total = n) = C * suffix[0][n], C = prod (1 - w_k)
        let log_c: f64 = weights.iter().map(|w| (1.0 - w).ln()).sum();
        let c = log_c.exp();
        let mut total_pmf: Vec<f64> = (0..=MAX_PAIRS).map(|n| c * suffix[0][n]).collect();
        let mass: f64 = total_pmf.iter().sum();
        if mu > 0.0 && (1.0 - mass) > 1e-9 {
            return Err(Error::config(
                "pump_power_mw",
                format!("truncated emission tail {:.2e} too large", 1.0 - mass),
            ));
        }
        for p in total_pmf.iter_mut() {
            *p /= mass.max(f64::MIN_POSITIVE);
        }

        let wsum: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let single_cdf = weights
            .iter()
            .map(|w| {
                acc += w / wsum.max(f64::MIN_POSITIVE);
                acc
            })
            .collect();

        Ok(ThermalSampler {
            weights,
            mode_ids,
            total_pmf,
            suffix,
            single_cdf,
        })
    }

    pub fn total_pmf(&self) -> &[f64] {
        &self.total_pmf
    }

    /// P(total >= n).
    pub fn tail_prob(&self, n: usize) -> f64 {
        self.total_pmf.iter().skip(n).sum()
    }

    /// Draw the total pair count of one pulse.
    #[inline]
    pub fn sample_total(&self, stream: &mut Stream) -> usize {
        let u = stream.next_f64();
        let mut acc = 0.0;
        for (n, p) in self.total_pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return n;
            }
        }
        self.total_pmf.len() - 1
    }

    /// Draw the mode multiset given the total; appends `total` mode ids.
    pub fn sample_modes(&self, total: usize, stream: &mut Stream, out: &mut Vec<u16>) {
        debug_assert!(total <= MAX_PAIRS);
        if total == 0 {
            return;
        }
        if total == 1 {
            let u = stream.next_f64();
            for (i, cum) in self.single_cdf.iter().enumerate() {
                if u < *cum {
                    out.push(self.mode_ids[i]);
                    return;
                }
            }
            out.push(*self.mode_ids.last().unwrap());
            return;
        }
        // walk modes, sampling n_i | remaining total from the suffix tables
        let mut rem = total;
        for i in 0..self.weights.len() {
            if rem == 0 {
                break;
            }
            let denom = self.suffix[i][rem];
            let mut u = stream.next_f64() * denom;
            let w = self.weights[i];
            let mut wj = 1.0;
            for j in 0..=rem {
                let term = wj * self.suffix[i + 1][rem - j];
                if u < term || j == rem {
                    for _ in 0..j {
                        out.push(self.mode_ids[i]);
                    }
                    rem -= j;
                    break;
                }
                u -= term;
                wj *= w;
            }
        }
        debug_assert_eq!(rem, 0, "mode configuration sampling exhausted modes");
    }
}

/// Draw one pulse for both sources. The content of pulse `pulse_index` is a
/// pure function of (key, pulse_index), independent of traversal order.
pub fn sample_pulse(
    s1: &ThermalSampler,
    s2: &ThermalSampler,
    key: &RngKey,
    pulse_index: u64,
) -> PulseEvent {
    let mut event = PulseEvent {
        pulse_index,
        photons: Vec::new(),
    };
    let mut modes = Vec::new();
    for (source, sampler) in [(SourceId::One, s1), (SourceId::Two, s2)] {
        let mut stream = key
            .child(source.emission_lane())
            .child(pulse_index)
            .stream();
        let total = sampler.sample_total(&mut stream);
        modes.clear();
        sampler.sample_modes(total, &mut stream, &mut modes);
        for m in &modes {
            event.photons.push(PhotonRecord {
                source,
                arm: PhotonArm::Signal,
                mode: *m,
            });
            event.photons.push(PhotonRecord {
                source,
                arm: PhotonArm::Idler,
                mode: *m,
            });
        }
    }
    event
}

/// Skips pulses whose (n1, n2) class cannot contribute to the requested
/// coincidence sets, without touching their RNG lanes.
#[derive(Debug, Clone)]
pub struct ScanSampler {
    s1: ThermalSampler,
    s2: ThermalSampler,
    /// (n1, n2, cumulative probability) over relevant classes, descending.
    class_cdf: Vec<(u8, u8, f64)>,
    /// P(pulse is relevant).
    p_relevant: f64,
    ln_one_minus_p: f64,
}

impl ScanSampler {
    pub fn new(
        cfg1: &EmissionConfig,
        cfg2: &EmissionConfig,
        relevant: impl Fn(u8, u8) -> bool,
    ) -> Result<ScanSampler> {
        let s1 = ThermalSampler::new(cfg1)?;
        let s2 = ThermalSampler::new(cfg2)?;
        let mut classes: Vec<(u8, u8, f64)> = Vec::new();
        let mut p_rel = 0.0;
        for (n1, p1) in s1.total_pmf.iter().enumerate() {
            for (n2, p2) in s2.total_pmf.iter().enumerate() {
                if relevant(n1 as u8, n2 as u8) {
                    let p = p1 * p2;
                    if p > 0.0 {
                        classes.push((n1 as u8, n2 as u8, p));
                        p_rel += p;
                    }
                }
            }
        }
        classes.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
        let mut acc = 0.0;
        for c in classes.iter_mut() {
            acc += c.2 / p_rel;
            c.2 = acc;
        }
        let ln_one_minus_p = if p_rel >= 1.0 {
            f64::NEG_INFINITY
        } else {
            (1.0 - p_rel).ln()
        };
        Ok(ScanSampler {
            s1,
            s2,
            class_cdf: classes,
            p_relevant: p_rel,
            ln_one_minus_p,
        })
    }

    pub fn p_relevant(&self) -> f64 {
        self.p_relevant
    }

    pub fn samplers(&self) -> (&ThermalSampler, &ThermalSampler) {
        (&self.s1, &self.s2)
    }

    /// Number of irrelevant pulses to skip before the next relevant one.
    #[inline]
    pub fn gap(&self, gap_stream: &mut Stream) -> u64 {
        gap_stream.geometric_skip(self.ln_one_minus_p)
    }

    /// Sample the (n1, n2) class of a relevant pulse.
    #[inline]
    pub fn sample_class(&self, stream: &mut Stream) -> (u8, u8) {
        let u = stream.next_f64();
        for (n1, n2, cum) in &self.class_cdf {
            if u < *cum {
                return (*n1, *n2);
            }
        }
        let last = self.class_cdf.last().expect("relevant classes nonempty");
        (last.0, last.1)
    }

    /// Sample the full pulse content given that pulse `pulse_index` is
    /// relevant. Mode draws use the same per-pulse lanes as `sample_pulse`.
    pub fn sample_relevant_pulse(
        &self,
        key: &RngKey,
        pulse_index: u64,
        class_stream: &mut Stream,
        event: &mut PulseEvent,
        scratch: &mut Vec<u16>,
    ) {
        let (n1, n2) = self.sample_class(class_stream);
        event.pulse_index = pulse_index;
        event.photons.clear();
        for (source, sampler, n) in [
            (SourceId::One, &self.s1, n1),
            (SourceId::Two, &self.s2, n2),
        ] {
            if n == 0 {
                continue;
            }
            let mut stream = key
                .child(source.emission_lane())
                .child(pulse_index)
                .stream();
            scratch.clear();
            sampler.sample_modes(n as usize, &mut stream, scratch);
            for m in scratch.iter() {
                event.photons.push(PhotonRecord {
                    source,
                    arm: PhotonArm::Signal,
                    mode: *m,
                });
                event.photons.push(PhotonRecord {
                    source,
                    arm: PhotonArm::Idler,
                    mode: *m,
                });
            }
        }
    }
}
