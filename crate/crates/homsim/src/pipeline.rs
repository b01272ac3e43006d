//! End-to-end experiment pipeline.
//!
//! [`Rig`] holds everything derived from a [`SimConfig`]: resolved sources,
//! Schmidt decompositions, the delay-overlap table, detector thresholds.
//! [`simulate_tags`] then produces detector tag streams for one simulated
//! run. Pulses that cannot contribute to any requested coincidence set are
//! skipped by sampling the geometric gaps between relevant pulses; pulse
//! content stays keyed by pulse index, so the skip is free of statistical
//! side effects and results are independent of worker count and traversal
//! order.

use rayon::prelude::*;

use crate::coincidence::{count_segmented, ChannelSet, CoincidenceConfig, CountReport};
use crate::config::SimConfig;
use crate::detection::{self, DetectorModel, DetectorThresholds};
use crate::error::Result;
use crate::interference::{route_with, NetworkConfig, OverlapTable, RoutedPhotons, Router};
use crate::rng::RngKey;
use crate::schmidt::{decompose, Arm, SchmidtDecomposition};
use crate::sellmeier::Dispersion;
use crate::source::{lanes, EmissionConfig, PulseEvent, ScanSampler, SourceId};
use crate::spectral::{build_jsa, FrequencyGrid};

/// Seed domains for the different experiments, so their streams never alias.
pub mod domains {
    pub const HOM_SCAN: u64 = 0x10;
    pub const BACKGROUND: u64 = 0x20;
    pub const G2: u64 = 0x30;
    pub const POWER_SCAN: u64 = 0x40;
    pub const COUNT_DEMO: u64 = 0x50;
}

/// Fully derived experiment state.
pub struct Rig {
    pub config: SimConfig,
    pub grid: FrequencyGrid,
    pub schmidt1: SchmidtDecomposition,
    pub schmidt2: SchmidtDecomposition,
    /// JSI-based Schmidt number of source 1 (what a JSI measurement reports).
    pub jsi_schmidt_number: f64,
    pub overlap_table: OverlapTable,
    pub tuned_temperature1_c: f64,
    pub tuned_temperature2_c: f64,
}

impl Rig {
    pub fn build(config: SimConfig) -> Result<Rig> {
        let dispersion = Dispersion::ktp();
        let src1 = config.source1.resolve(&dispersion)?;
        let params2 = config.source2.with_center_offset(config.source2_center_offset);
        let src2 = params2.resolve(&dispersion)?;

        // both sources live on a common grid centered on source 1
        let grid = FrequencyGrid::for_params(
            &config.source1,
            config.grid.n_points,
            config.grid.span_bandwidths,
        );
        let jsa1 = build_jsa(&src1, &grid)?;
        let jsa2 = if params2 == config.source1 {
            jsa1.clone()
        } else {
            build_jsa(&src2, &grid)?
        };
        let schmidt1 = decompose(&jsa1)?;
        let schmidt2 = decompose(&jsa2)?;
        let jsi_schmidt_number = crate::schmidt::schmidt_number_of_jsi(&jsa1.intensity())?;

        let rho1 = schmidt1.heralded_density_matrix(Arm::Signal);
        let rho2 = schmidt2.heralded_density_matrix(Arm::Signal);
        let overlap_table = OverlapTable::build(
            &rho1,
            &rho2,
            config.network.overlap_span,
            config.network.overlap_step,
        )?;

        Ok(Rig {
            grid,
            schmidt1,
            schmidt2,
            jsi_schmidt_number,
            overlap_table,
            tuned_temperature1_c: src1.temperature_c,
            tuned_temperature2_c: src2.temperature_c,
            config,
        })
    }

    pub fn purity1(&self) -> f64 {
        self.schmidt1.purity()
    }

    pub fn purity2(&self) -> f64 {
        self.schmidt2.purity()
    }

    pub fn detectors(&self) -> &DetectorModel {
        &self.config.detectors
    }

    pub fn repetition_rate_hz(&self) -> f64 {
        self.config.emission.repetition_rate_hz
    }

    /// Emission settings for one source at a pump power.
    pub fn emission(&self, source: SourceId, power_mw: f64) -> EmissionConfig {
        let schmidt = match source {
            SourceId::One => &self.schmidt1,
            SourceId::Two => &self.schmidt2,
        };
        EmissionConfig {
            pump_power_mw: power_mw,
            pairs_per_mw: self.config.emission.pairs_per_mw,
            repetition_rate_hz: self.config.emission.repetition_rate_hz,
            mode_weights: schmidt.coefficients.clone(),
            center_offset: if source == SourceId::Two {
                self.config.source2_center_offset
            } else {
                0.0
            },
        }
    }

    /// Network settings at a given delay.
    pub fn network_at(&self, delay: f64) -> NetworkConfig {
        NetworkConfig {
            delay,
            reflectivity: self.config.network.reflectivity,
            extra_distinguishability: self.config.network.extra_distinguishability,
            overlap_table: self.overlap_table.clone(),
            block_signal1: false,
            block_signal2: false,
        }
    }

    pub fn coincidence_config(&self, folds: Vec<ChannelSet>) -> CoincidenceConfig {
        CoincidenceConfig {
            window: self.config.window,
            folds,
        }
    }

    /// Channel set for the unheralded 2-fold (both splitter ports).
    pub fn two_fold_set(&self) -> ChannelSet {
        let r = &self.config.detectors.roles;
        ChannelSet::new(&[r.signal_a, r.signal_b]).expect("valid roles")
    }

    /// Channel set for the heralded 4-fold.
    pub fn four_fold_set(&self) -> ChannelSet {
        let r = &self.config.detectors.roles;
        ChannelSet::new(&[r.idler1, r.signal_a, r.signal_b, r.idler2]).expect("valid roles")
    }
}

/// One simulated acquisition.
#[derive(Debug, Clone)]
pub struct SimRequest {
    pub power1_mw: f64,
    pub power2_mw: f64,
    pub delay: f64,
    pub duration_s: f64,
    pub block_signal1: bool,
    pub block_signal2: bool,
    /// Coincidence sets to count; also determines which pulses are relevant.
    pub folds: Vec<ChannelSet>,
    /// Keep every pair-bearing pulse even if no fold needs it; required when
    /// singles rates must be exact (power scans, g2 normalization).
    pub keep_all_pairs: bool,
    /// Seed domain separating experiments and scan points.
    pub domain: u64,
    pub segments: usize,
}

/// Relevance predicate: can a pulse of class (n1, n2) put a tag on every
/// channel of at least one requested fold? Dark counts are ignored here;
/// coincidences completed by darks at these rates are below 1e-4 relative.
fn relevance(
    folds: &[ChannelSet],
    roles: crate::detection::ChannelRoles,
    blocked: (bool, bool),
    keep_all_pairs: bool,
) -> impl Fn(u8, u8) -> bool {
    let folds = folds.to_vec();
    move |n1: u8, n2: u8| {
        if keep_all_pairs && (n1 > 0 || n2 > 0) {
            return true;
        }
        let signals = (if blocked.0 { 0 } else { n1 }) + (if blocked.1 { 0 } else { n2 });
        folds.iter().any(|set| {
            let mut need_signals = 0u8;
            if set.contains(roles.signal_a) {
                need_signals += 1;
            }
            if set.contains(roles.signal_b) {
                need_signals += 1;
            }
            (!set.contains(roles.idler1) || n1 >= 1)
                && (!set.contains(roles.idler2) || n2 >= 1)
                && signals >= need_signals
        })
    }
}

/// Simulate detector tag streams for one request. Deterministic in
/// (seed, config, request); independent of worker count.
pub fn simulate_tags(rig: &Rig, req: &SimRequest, master: &RngKey) -> Result<[Vec<u64>; 4]> {
    let cfg1 = rig.emission(SourceId::One, req.power1_mw);
    let cfg2 = rig.emission(SourceId::Two, req.power2_mw);
    let roles = rig.config.detectors.roles;
    let blocked = (req.block_signal1, req.block_signal2);
    let sampler = ScanSampler::new(
        &cfg1,
        &cfg2,
        relevance(&req.folds, roles, blocked, req.keep_all_pairs),
    )?;

    let mut network = rig.network_at(req.delay);
    network.block_signal1 = req.block_signal1;
    network.block_signal2 = req.block_signal2;
    network.validate()?;
    let router = Router::for_config(&network)?;
    let thresholds = DetectorThresholds::new(rig.detectors());
    let jitter_ps = rig.detectors().jitter_sigma * 1e12;

    let rep_rate = rig.repetition_rate_hz();
    let n_pulses = (req.duration_s * rep_rate).round() as u64;
    let domain_key = master.child(req.domain);
    let segments = req.segments.max(1) as u64;
    let seg_len = n_pulses.div_ceil(segments);

    let mut segment_streams: Vec<[Vec<u64>; 4]> = (0..segments)
        .into_par_iter()
        .map(|seg| {
            let seg_start = seg * seg_len;
            let seg_end = ((seg + 1) * seg_len).min(n_pulses);
            let mut gap_stream = domain_key.child(lanes::GAP).child(seg).stream();
            let mut streams: [Vec<u64>; 4] = Default::default();
            let mut event = PulseEvent::default();
            let mut scratch: Vec<u16> = Vec::with_capacity(8);
            let mut pos = seg_start;
            loop {
                let skip = sampler.gap(&mut gap_stream);
                pos = match pos.checked_add(skip) {
                    Some(p) if p < seg_end => p,
                    _ => break,
                };
                sampler.sample_relevant_pulse(
                    &domain_key,
                    pos,
                    &mut gap_stream,
                    &mut event,
                    &mut scratch,
                );
                let routed: RoutedPhotons = route_with(&router, &event, &domain_key, blocked);
                let t0 = crate::source::pulse_time_ps(pos, rep_rate);
                detection::detect_pulse_into(
                    &routed,
                    &thresholds,
                    jitter_ps,
                    t0,
                    &domain_key,
                    &mut streams,
                );
                pos += 1;
            }
            streams
        })
        .collect();

    // concatenate segments in order; per-channel tags stay sorted
    let mut photon_streams: [Vec<u64>; 4] = Default::default();
    for seg in segment_streams.iter_mut() {
        for ch in 0..4 {
            photon_streams[ch].append(&mut seg[ch]);
        }
    }
    if rig.detectors().jitter_sigma > 0.0 {
        for s in photon_streams.iter_mut() {
            s.sort_unstable();
        }
    }

    let duration_ps = (req.duration_s * 1e12).round() as u64;
    let dead_ps = rig.detectors().dead_time_ps();
    let mut out: [Vec<u64>; 4] = Default::default();
    for ch in 1..=4u8 {
        let dark = detection::dark_count_tags(rig.detectors(), ch, 0, duration_ps, &domain_key);
        let merged = detection::merge_sorted(&photon_streams[ch as usize - 1], &dark);
        out[ch as usize - 1] = detection::apply_dead_time(&merged, dead_ps);
    }
    Ok(out)
}

/// Simulate and count in one step.
pub fn simulate_counts(rig: &Rig, req: &SimRequest, master: &RngKey) -> Result<CountReport> {
    let streams = simulate_tags(rig, req, master)?;
    let cfg = rig.coincidence_config(req.folds.clone());
    cfg.validate(rig.repetition_rate_hz())?;
    count_segmented(&streams, &cfg, req.duration_s, req.segments.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn small_rig() -> Rig {
        let mut cfg = SimConfig::builtin();
        cfg.grid.n_points = 96;
        Rig::build(cfg).unwrap()
    }

    #[test]
    fn rig_reproduces_headline_spectrum() {
        let rig = small_rig();
        assert!((rig.purity1() - 0.80).abs() < 0.05, "purity {}", rig.purity1());
        assert!(
            (rig.jsi_schmidt_number - 1.02).abs() < 0.03,
            "K(JSI) {}",
            rig.jsi_schmidt_number
        );
        assert_eq!(rig.purity1(), rig.purity2());
    }

    #[test]
    fn identical_requests_are_bit_identical_across_worker_counts() {
        let rig = small_rig();
        let req = SimRequest {
            power1_mw: 100.0,
            power2_mw: 100.0,
            delay: 0.0,
            duration_s: 0.4,
            block_signal1: false,
            block_signal2: false,
            folds: vec![rig.four_fold_set(), rig.two_fold_set()],
            keep_all_pairs: false,
            domain: domains::HOM_SCAN,
            segments: 8,
        };
        let key = RngKey::new(rig.config.run.seed);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = pool1.install(|| simulate_tags(&rig, &req, &key)).unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool4.install(|| simulate_tags(&rig, &req, &key)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blocked_signal_runs_lose_two_fold_coincidences() {
        let rig = small_rig();
        let mut req = SimRequest {
            power1_mw: 100.0,
            power2_mw: 100.0,
            delay: 0.0,
            duration_s: 1.0,
            block_signal1: true,
            block_signal2: false,
            folds: vec![rig.four_fold_set()],
            keep_all_pairs: false,
            domain: domains::BACKGROUND,
            segments: 4,
        };
        let key = RngKey::new(9);
        let blocked = simulate_counts(&rig, &req, &key).unwrap();
        req.block_signal1 = false;
        req.domain = domains::HOM_SCAN;
        let open = simulate_counts(&rig, &req, &key).unwrap();
        let four = rig.four_fold_set();
        assert!(blocked.coincidence(four).unwrap() < open.coincidence(four).unwrap());
    }

    #[test]
    fn singles_scale_linearly_with_power() {
        let rig = small_rig();
        let key = RngKey::new(4);
        let mut rates = Vec::new();
        for power in [25.0, 50.0, 100.0] {
            let req = SimRequest {
                power1_mw: power,
                power2_mw: 0.0,
                delay: 0.0,
                duration_s: 2.0,
                block_signal1: false,
                block_signal2: false,
                folds: vec![ChannelSet::new(&[1, 2]).unwrap()],
                keep_all_pairs: true,
                domain: domains::POWER_SCAN,
                segments: 4,
            };
            let report = simulate_counts(&rig, &req, &key).unwrap();
            rates.push(report.singles_rates_hz[0]);
        }
        let r1 = rates[1] / rates[0];
        let r2 = rates[2] / rates[1];
        assert!((r1 - 2.0).abs() < 0.1, "25->50 ratio {r1}");
        assert!((r2 - 2.0).abs() < 0.1, "50->100 ratio {r2}");
    }
}
