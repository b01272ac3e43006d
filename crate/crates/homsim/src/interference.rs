//! Fiber-beamsplitter interference between the two signal arms.
//!
//! Signal photons from the two sources are matched into cross-source pairs
//! (equal Schmidt indices first). Each matched pair interferes with
//! probability equal to the effective spectral overlap O_eff(tau); an
//! interfering pair leaves through beamsplitter-correlated ports (both out
//! the same port for a balanced splitter), otherwise photons route
//! independently. Exact for at most one photon per source per mode and
//! keeps the leading multi-pair backgrounds, which is the regime at the
//! pump powers this rig models.

use crate::error::{Error, Result};
use crate::rng::{threshold, RngKey, Stream};
use crate::schmidt::SpectralDensityMatrix;
use crate::source::{lanes, PhotonArm, PulseEvent, SourceId};

/// Precomputed Tr[rho1 rho2(tau)] on a uniform delay grid.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    span: f64,
    step: f64,
    values: Vec<f64>,
}

impl OverlapTable {
    /// Tabulate the overlap from -span to +span (seconds).
    pub fn build(
        rho1: &SpectralDensityMatrix,
        rho2: &SpectralDensityMatrix,
        span: f64,
        step: f64,
    ) -> Result<OverlapTable> {
        if !(span > 0.0) || !(step > 0.0) || step > span {
            return Err(Error::config("overlap_table", "need 0 < step <= span"));
        }
        let n = (span / step).round() as usize;
        let mut values = Vec::with_capacity(2 * n + 1);
        for i in 0..=(2 * n) {
            let tau = (i as f64 - n as f64) * step;
            values.push(crate::schmidt::overlap(rho1, rho2, tau)?.clamp(0.0, 1.0));
        }
        Ok(OverlapTable {
            span: n as f64 * step,
            step,
            values,
        })
    }

    /// Table for two identical, perfectly overlapping sources given just the
    /// mode weights; useful for synthetic tests.
    pub fn constant(value: f64, span: f64) -> OverlapTable {
        OverlapTable {
            span,
            step: span,
            values: vec![value; 3],
        }
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Linear interpolation; errors outside the tabulated span.
    pub fn value(&self, tau: f64) -> Result<f64> {
        if tau.abs() > self.span * (1.0 + 1e-12) {
            return Err(Error::DelayOutOfTable {
                delay_ps: tau * 1e12,
                span_ps: self.span * 1e12,
            });
        }
        let x = ((tau + self.span) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let f = x - i as f64;
        Ok(self.values[i] * (1.0 - f) + self.values[i + 1] * f)
    }
}

/// Beamsplitter network settings.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Relative optical delay between the two signal arms (seconds).
    pub delay: f64,
    /// Beamsplitter reflectivity (port-A probability for source 1).
    pub reflectivity: f64,
    /// Extra distinguishability from splitter asymmetry and polarization
    /// mismatch; scales the spectral overlap down.
    pub extra_distinguishability: f64,
    pub overlap_table: OverlapTable,
    /// Drop all source-1 signal photons before the splitter.
    pub block_signal1: bool,
    /// Drop all source-2 signal photons before the splitter.
    pub block_signal2: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity < 1.0) {
            return Err(Error::config(
                "network.reflectivity",
                format!("must be in (0,1), got {}", self.reflectivity),
            ));
        }
        if !(0.0..=1.0).contains(&self.extra_distinguishability) {
            return Err(Error::config(
                "network.extra_distinguishability",
                "must be in [0,1]",
            ));
        }
        Ok(())
    }
}

/// O_eff(tau) = (1 - D_x) * Tr[rho1 rho2(tau)].
pub fn effective_overlap(tau: f64, cfg: &NetworkConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(((1.0 - cfg.extra_distinguishability) * cfg.overlap_table.value(tau)?).clamp(0.0, 1.0))
}

/// Signal photons assigned to output ports, idlers passed through; photon
/// counts per pulse are all detection needs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoutedPhotons {
    pub pulse_index: u64,
    pub signal_a: u8,
    pub signal_b: u8,
    pub idler1: u8,
    pub idler2: u8,
}

/// Routing decision thresholds for one delay point.
#[derive(Debug, Clone, Copy)]
pub struct Router {
    bunch: u64,
    /// interfering pair: P(photons split across ports) = (R - T)^2
    split_given_bunch: u64,
    /// interfering pair that did not split: P(both exit A)
    port_a_given_together: u64,
    /// independent photon from source 1: P(port A) = R
    src1_to_a: u64,
    /// independent photon from source 2: P(port A) = T
    src2_to_a: u64,
}

impl Router {
    pub fn new(o_eff: f64, reflectivity: f64) -> Router {
        let r = reflectivity;
        let t = 1.0 - r;
        // interfering pair: split (r-t)^2, both to A 2rt, both to B 2rt;
        // conditioned on "together" the ports are equally likely
        Router {
            bunch: threshold(o_eff),
            split_given_bunch: threshold((r - t) * (r - t)),
            port_a_given_together: threshold(0.5),
            src1_to_a: threshold(r),
            src2_to_a: threshold(t),
        }
    }

    pub fn for_config(cfg: &NetworkConfig) -> Result<Router> {
        Ok(Router::new(
            effective_overlap(cfg.delay, cfg)?,
            cfg.reflectivity,
        ))
    }

    #[inline]
    fn independent_port(&self, source: SourceId, stream: &mut Stream) -> bool {
        // true = port A
        match source {
            SourceId::One => stream.hit(self.src1_to_a),
            SourceId::Two => stream.hit(self.src2_to_a),
        }
    }
}

/// Route one pulse through the splitter. Uses the pulse-index routing lane,
/// so results are independent of traversal order.
pub fn route_with(router: &Router, pulse: &PulseEvent, key: &RngKey, blocked: (bool, bool)) -> RoutedPhotons {
    let mut out = RoutedPhotons {
        pulse_index: pulse.pulse_index,
        ..Default::default()
    };
    // mode lists per source; emission order is mode-sorted already
    let mut s1: Vec<u16> = Vec::with_capacity(4);
    let mut s2: Vec<u16> = Vec::with_capacity(4);
    for p in &pulse.photons {
        match (p.arm, p.source) {
            (PhotonArm::Idler, SourceId::One) => out.idler1 += 1,
            (PhotonArm::Idler, SourceId::Two) => out.idler2 += 1,
            (PhotonArm::Signal, SourceId::One) => {
                if !blocked.0 {
                    s1.push(p.mode);
                }
            }
            (PhotonArm::Signal, SourceId::Two) => {
                if !blocked.1 {
                    s2.push(p.mode);
                }
            }
        }
    }
    if s1.len() > 1 && !s1.is_sorted() {
        s1.sort_unstable();
    }
    if s2.len() > 1 && !s2.is_sorted() {
        s2.sort_unstable();
    }

    let mut stream = key.child(lanes::ROUTING).child(pulse.pulse_index).stream();

    // greedy cross-source matching, equal Schmidt indices first
    let mut pairs: Vec<(u16, u16)> = Vec::with_capacity(s1.len().min(s2.len()));
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut rest1: Vec<u16> = Vec::new();
        let mut rest2: Vec<u16> = Vec::new();
        while i < s1.len() && j < s2.len() {
            match s1[i].cmp(&s2[j]) {
                std::cmp::Ordering::Equal => {
                    pairs.push((s1[i], s2[j]));
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    rest1.push(s1[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    rest2.push(s2[j]);
                    j += 1;
                }
            }
        }
        rest1.extend_from_slice(&s1[i..]);
        rest2.extend_from_slice(&s2[j..]);
        // remaining cross photons pair up in index order
        let extra = rest1.len().min(rest2.len());
        for k in 0..extra {
            pairs.push((rest1[k], rest2[k]));
        }
        // counts of unmatched singles per source
        for _ in extra..rest1.len() {
            if route_single(router, SourceId::One, &mut stream) {
                out.signal_a += 1;
            } else {
                out.signal_b += 1;
            }
        }
        for _ in extra..rest2.len() {
            if route_single(router, SourceId::Two, &mut stream) {
                out.signal_a += 1;
            } else {
                out.signal_b += 1;
            }
        }
    }

    for _ in &pairs {
        if stream.hit(router.bunch) {
            // interfering pair
            if stream.hit(router.split_given_bunch) {
                out.signal_a += 1;
                out.signal_b += 1;
            } else if stream.hit(router.port_a_given_together) {
                out.signal_a += 2;
            } else {
                out.signal_b += 2;
            }
        } else {
            for source in [SourceId::One, SourceId::Two] {
                if route_single(router, source, &mut stream) {
                    out.signal_a += 1;
                } else {
                    out.signal_b += 1;
                }
            }
        }
    }
    out
}

#[inline]
fn route_single(router: &Router, source: SourceId, stream: &mut Stream) -> bool {
    router.independent_port(source, stream)
}

/// Spec-shaped entry point: route a pulse at the configured delay.
pub fn route(pulse: &PulseEvent, cfg: &NetworkConfig, key: &RngKey) -> Result<RoutedPhotons> {
    let router = Router::for_config(cfg)?;
    Ok(route_with(
        &router,
        pulse,
        key,
        (cfg.block_signal1, cfg.block_signal2),
    ))
}

/// Exact outcome distribution of the routing model for given signal mode
/// lists; reference enumeration, independent of the sampling path.
///
/// Returns (signal_a, signal_b, probability) triples.
pub fn enumerate_routing(
    s1: &[u16],
    s2: &[u16],
    o_eff: f64,
    reflectivity: f64,
) -> Vec<(u8, u8, f64)> {
    let r = reflectivity;
    let t = 1.0 - r;

    // replicate the greedy matching
    let mut a: Vec<u16> = s1.to_vec();
    let mut b: Vec<u16> = s2.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j) = (0usize, 0usize);
    let mut n_pairs = 0usize;
    let mut rest1 = 0usize;
    let mut rest2 = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                n_pairs += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                rest1 += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                rest2 += 1;
                j += 1;
            }
        }
    }
    rest1 += a.len() - i;
    rest2 += b.len() - j;
    let extra = rest1.min(rest2);
    n_pairs += extra;
    let singles1 = rest1 - extra;
    let singles2 = rest2 - extra;

    // accumulate distribution over (a_count, b_count)
    let mut dist: std::collections::BTreeMap<(u8, u8), f64> = std::collections::BTreeMap::new();
    dist.insert((0, 0), 1.0);

    let mut convolve = |dist: &mut std::collections::BTreeMap<(u8, u8), f64>,
                        outcomes: &[(u8, u8, f64)]| {
        let mut next = std::collections::BTreeMap::new();
        for ((ca, cb), p) in dist.iter() {
            for (da, db, q) in outcomes {
                *next.entry((ca + da, cb + db)).or_insert(0.0) += p * q;
            }
        }
        *dist = next;
    };

    // interfering: split (r-t)^2, both-A 2rt, both-B 2rt;
    // independent: s1->A w.p. r, s2->A w.p. t
    let pair_outcomes = vec![
        (1u8, 1u8, o_eff * (r - t) * (r - t) + (1.0 - o_eff) * (r * r + t * t)),
        (2, 0, o_eff * 2.0 * r * t + (1.0 - o_eff) * r * t),
        (0, 2, o_eff * 2.0 * r * t + (1.0 - o_eff) * t * r),
    ];
    for _ in 0..n_pairs {
        convolve(&mut dist, &pair_outcomes);
    }
    let single1 = vec![(1u8, 0u8, r), (0, 1, t)];
    for _ in 0..singles1 {
        convolve(&mut dist, &single1);
    }
    let single2 = vec![(1u8, 0u8, t), (0, 1, r)];
    for _ in 0..singles2 {
        convolve(&mut dist, &single2);
    }

    dist.into_iter().map(|((a, b), p)| (a, b, p)).collect()
}
