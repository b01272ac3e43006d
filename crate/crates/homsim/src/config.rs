//! Typed experiment configuration, loaded from sectioned key=value files.
//!
//! The shipped `config/default.cfg` provides every default; a user file
//! overrides individual keys. Units in file keys are explicit (nm, ps, mm,
//! um, GHz, ns); everything is converted to SI here.

use std::path::Path;

use crate::detection::{ChannelRoles, DetectorModel};
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::sellmeier::SPEED_OF_LIGHT;
use crate::spectral::SourceParams;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.cfg");

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub n_points: usize,
    pub span_bandwidths: f64,
}

#[derive(Debug, Clone)]
pub struct EmissionSettings {
    pub pairs_per_mw: f64,
    pub repetition_rate_hz: f64,
    pub mode_weight_cutoff: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkSettings {
    pub reflectivity: f64,
    pub extra_distinguishability: f64,
    pub overlap_span: f64,
    pub overlap_step: f64,
}

#[derive(Debug, Clone)]
pub struct ScanSettings {
    pub points: usize,
    pub span: f64,
    pub accumulation_2fold_s: f64,
    pub accumulation_4fold_100mw_s: f64,
    pub accumulation_4fold_50mw_s: f64,
    pub accumulation_4fold_10mw_s: f64,
    pub background_accumulation_s: f64,
    pub segments: usize,
}

impl ScanSettings {
    /// Evenly spaced delays covering +/- span.
    pub fn delays(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| (i as f64 / (n - 1) as f64 - 0.5) * 2.0 * self.span)
            .collect()
    }

    /// Default 4-fold accumulation for a pump power (nearest configured).
    pub fn accumulation_4fold_s(&self, power_mw: f64) -> f64 {
        if power_mw >= 75.0 {
            self.accumulation_4fold_100mw_s
        } else if power_mw >= 30.0 {
            self.accumulation_4fold_50mw_s
        } else {
            self.accumulation_4fold_10mw_s
        }
    }
}

#[derive(Debug, Clone)]
pub struct G2Settings {
    pub rate_accumulation_s: f64,
    pub triple_accumulation_100mw_s: f64,
    pub powers_mw: Vec<f64>,
}

impl G2Settings {
    /// Triple-coincidence accumulation scaled to keep counts roughly even
    /// across powers (rate falls as power^2).
    pub fn triple_accumulation_s(&self, power_mw: f64) -> f64 {
        let scale = (100.0 / power_mw.max(1.0)).powi(2);
        self.triple_accumulation_100mw_s * scale.min(16.0)
    }
}

#[derive(Debug, Clone)]
pub struct PowerScanSettings {
    pub powers_mw: Vec<f64>,
    pub accumulation_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: String,
}

/// Complete simulator configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub source1: SourceParams,
    pub source2: SourceParams,
    /// Residual center offset applied to source 2 (rad/s).
    pub source2_center_offset: f64,
    pub grid: GridConfig,
    pub emission: EmissionSettings,
    pub network: NetworkSettings,
    pub detectors: DetectorModel,
    pub window: f64,
    pub scan: ScanSettings,
    pub g2: G2Settings,
    pub power_scan: PowerScanSettings,
    pub run: RunSettings,
}

fn source_params(kv: crate::kv::Kv<'_>) -> Result<SourceParams> {
    let d = SourceParams::default();
    Ok(SourceParams {
        pump_center_wavelength: kv.f64_or(
            "pump_center_wavelength_nm",
            d.pump_center_wavelength * 1e9,
        )? * 1e-9,
        pump_duration_fwhm: kv.f64_or("pump_duration_fwhm_ps", d.pump_duration_fwhm * 1e12)?
            * 1e-12,
        crystal_length: kv.f64_or("crystal_length_mm", d.crystal_length * 1e3)? * 1e-3,
        poling_period: kv.f64_or("poling_period_um", d.poling_period * 1e6)? * 1e-6,
        crystal_temperature: kv.get_f64("crystal_temperature_c")?,
        degenerate_wavelength: kv.f64_or(
            "degenerate_wavelength_nm",
            d.degenerate_wavelength * 1e9,
        )? * 1e-9,
    })
}

fn array4(kv: crate::kv::Kv<'_>, key: &str, default: [f64; 4]) -> Result<[f64; 4]> {
    match kv.get_f64_list(key)? {
        None => Ok(default),
        Some(v) if v.len() == 4 => Ok([v[0], v[1], v[2], v[3]]),
        Some(v) => Err(Error::config(
            key,
            format!("expected 4 comma-separated values, got {}", v.len()),
        )),
    }
}

impl SimConfig {
    /// The shipped defaults.
    pub fn builtin() -> SimConfig {
        Self::from_kv(
            &KvFile::parse_str(DEFAULT_CONFIG, "config/default.cfg").expect("default config parses"),
        )
        .expect("default config is valid")
    }

    /// Load a user config; missing keys fall back to the shipped defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<SimConfig> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn from_kv(file: &KvFile) -> Result<SimConfig> {
        let s1 = source_params(file.section("source1"))?;
        let s2_kv = file.section("source2");
        let s2 = source_params(s2_kv)?;
        let offset_ghz = s2_kv.f64_or("center_offset_ghz", 0.0)?;

        let grid_kv = file.section("grid");
        let grid = GridConfig {
            n_points: grid_kv.usize_or("n_points", 256)?,
            span_bandwidths: grid_kv.f64_or("span_pump_bandwidths", 10.0)?,
        };

        let em_kv = file.section("emission");
        let emission = EmissionSettings {
            pairs_per_mw: em_kv.f64_or("pairs_per_mw", 6.0e-4)?,
            repetition_rate_hz: em_kv.f64_or("repetition_rate_hz", 76.0e6)?,
            mode_weight_cutoff: em_kv.f64_or("mode_weight_cutoff", 1.0e-6)?,
        };

        let net_kv = file.section("network");
        let network = NetworkSettings {
            reflectivity: net_kv.f64_or("reflectivity", 0.5)?,
            extra_distinguishability: net_kv.f64_or("extra_distinguishability", 0.02)?,
            overlap_span: net_kv.f64_or("overlap_span_ps", 30.0)? * 1e-12,
            overlap_step: net_kv.f64_or("overlap_step_ps", 0.1)? * 1e-12,
        };

        let det_kv = file.section("detectors");
        let detectors = DetectorModel {
            efficiency: array4(det_kv, "efficiency", [0.23, 0.22, 0.19, 0.11])?,
            path_transmission: array4(det_kv, "path_transmission", [0.362, 0.398, 0.398, 0.070])?,
            dark_count_rate_hz: det_kv.f64_or("dark_count_rate_hz", 100.0)?,
            dead_time: det_kv.f64_or("dead_time_ns", 30.0)? * 1e-9,
            jitter_sigma: det_kv.f64_or("jitter_ps", 0.0)? * 1e-12,
            roles: ChannelRoles {
                idler1: det_kv.u64_or("role_idler1", 1)? as u8,
                signal_a: det_kv.u64_or("role_signal_a", 2)? as u8,
                signal_b: det_kv.u64_or("role_signal_b", 3)? as u8,
                idler2: det_kv.u64_or("role_idler2", 4)? as u8,
            },
        };

        let window = file.section("coincidence").f64_or("window_ns", 1.0)? * 1e-9;

        let scan_kv = file.section("scan");
        let scan = ScanSettings {
            points: scan_kv.usize_or("points", 21)?,
            span: scan_kv.f64_or("span_ps", 15.0)? * 1e-12,
            accumulation_2fold_s: scan_kv.f64_or("accumulation_2fold_s", 60.0)?,
            accumulation_4fold_100mw_s: scan_kv.f64_or("accumulation_4fold_100mw_s", 900.0)?,
            accumulation_4fold_50mw_s: scan_kv.f64_or("accumulation_4fold_50mw_s", 3600.0)?,
            accumulation_4fold_10mw_s: scan_kv.f64_or("accumulation_4fold_10mw_s", 3600.0)?,
            background_accumulation_s: scan_kv.f64_or("background_accumulation_s", 900.0)?,
            segments: scan_kv.usize_or("segments", 16)?,
        };

        let g2_kv = file.section("g2");
        let g2 = G2Settings {
            rate_accumulation_s: g2_kv.f64_or("rate_accumulation_s", 10.0)?,
            triple_accumulation_100mw_s: g2_kv.f64_or("triple_accumulation_100mw_s", 3600.0)?,
            powers_mw: g2_kv
                .get_f64_list("powers_mw")?
                .unwrap_or_else(|| vec![40.0, 55.0, 70.0, 85.0, 100.0]),
        };

        let ps_kv = file.section("power_scan");
        let power_scan = PowerScanSettings {
            powers_mw: ps_kv
                .get_f64_list("powers_mw")?
                .unwrap_or_else(|| (1..=10).map(|i| i as f64 * 10.0).collect()),
            accumulation_s: ps_kv.f64_or("accumulation_s", 5.0)?,
        };

        let run_kv = file.section("run");
        let run = RunSettings {
            seed: run_kv.u64_or("seed", 1584)?,
            workers: run_kv.usize_or("workers", 0)?,
            out_dir: run_kv.string_or("out_dir", "out"),
        };

        let cfg = SimConfig {
            source1: s1,
            source2: s2,
            source2_center_offset: offset_ghz * 1e9 * std::f64::consts::TAU,
            grid,
            emission,
            network,
            detectors,
            window,
            scan,
            g2,
            power_scan,
            run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.source1.validate()?;
        self.source2
            .with_center_offset(self.source2_center_offset)
            .validate()?;
        self.detectors.validate()?;
        if !(self.network.reflectivity > 0.0 && self.network.reflectivity < 1.0) {
            return Err(Error::config("network.reflectivity", "must be in (0,1)"));
        }
        if !(0.0..=1.0).contains(&self.network.extra_distinguishability) {
            return Err(Error::config(
                "network.extra_distinguishability",
                "must be in [0,1]",
            ));
        }
        let period = 1.0 / self.emission.repetition_rate_hz;
        if !(self.window > 0.0 && self.window < period) {
            return Err(Error::config(
                "coincidence.window_ns",
                "window must be positive and below the pulse period",
            ));
        }
        if self.scan.points < 5 {
            return Err(Error::config("scan.points", "need at least 5 delay points"));
        }
        if self.scan.segments == 0 {
            return Err(Error::config("scan.segments", "need at least 1 segment"));
        }
        Ok(())
    }

    /// Wavelength-scale summary used in logs.
    pub fn degenerate_wavelength_nm(&self) -> f64 {
        self.source1.degenerate_wavelength * 1e9
    }
}

/// Frequency offset helper: GHz of optical frequency to rad/s.
pub fn ghz_to_rad_per_s(ghz: f64) -> f64 {
    ghz * 1e9 * std::f64::consts::TAU
}

/// c as re-exported convenience.
pub const C_M_PER_S: f64 = SPEED_OF_LIGHT;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_is_valid() {
        let cfg = SimConfig::builtin();
        assert_eq!(cfg.run.seed, 1584);
        assert_eq!(cfg.grid.n_points, 256);
        assert_eq!(cfg.detectors.efficiency, [0.23, 0.22, 0.19, 0.11]);
        assert!((cfg.window - 1e-9).abs() < 1e-18);
        assert_eq!(cfg.scan.delays().len(), 21);
        assert!((cfg.scan.delays()[0] + 15e-12).abs() < 1e-18);
    }

    #[test]
    fn user_overrides_apply_over_defaults() {
        let f = KvFile::parse_str("[run]\nseed = 7\n[grid]\nn_points = 64\n", "u.cfg").unwrap();
        let cfg = SimConfig::from_kv(&f).unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.grid.n_points, 64);
        // untouched keys keep defaults
        assert_eq!(cfg.scan.points, 21);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let f = KvFile::parse_str("[source1]\npoling_period_um = -3\n", "u.cfg").unwrap();
        let err = SimConfig::from_kv(&f).unwrap_err();
        assert!(err.to_string().contains("poling_period"), "{err}");

        let f = KvFile::parse_str("[detectors]\nefficiency = 2.0, 0.2, 0.2, 0.2\n", "u.cfg").unwrap();
        let err = SimConfig::from_kv(&f).unwrap_err();
        assert!(err.to_string().contains("channel1"), "{err}");

        let f = KvFile::parse_str("[coincidence]\nwindow_ns = 50.0\n", "u.cfg").unwrap();
        assert!(SimConfig::from_kv(&f).is_err());
    }

    #[test]
    fn missing_file_is_a_config_io_error() {
        assert!(matches!(
            SimConfig::from_file("/nonexistent/path.cfg"),
            Err(Error::ConfigIo { .. })
        ));
    }
}
