//! Joint spectral amplitude of a periodically poled KTP pair source.
//!
//! The two-photon amplitude is the product of the pump envelope (Gaussian,
//! transform-limited) and the quasi-phase-matching function sinc(dk L / 2),
//! evaluated on a discrete frequency grid and L2-normalized. Type-II
//! group-velocity matching makes the phase-matching ridge run at +45 deg in
//! the (signal, idler) plane, which is what keeps the amplitude nearly
//! separable without any spectral filtering.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sellmeier::{Axis, Dispersion, SPEED_OF_LIGHT};

const TAU: f64 = std::f64::consts::TAU;

/// Pump laser and crystal parameters for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    /// Pump center wavelength in meters.
    pub pump_center_wavelength: f64,
    /// Pump pulse intensity FWHM in seconds.
    pub pump_duration_fwhm: f64,
    /// Crystal length in meters.
    pub crystal_length: f64,
    /// Poling period in meters.
    pub poling_period: f64,
    /// Crystal temperature in Celsius; `None` asks for the phase-matched value.
    pub crystal_temperature: Option<f64>,
    /// Degenerate (collection) wavelength in meters.
    pub degenerate_wavelength: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            pump_center_wavelength: 792e-9,
            pump_duration_fwhm: 2e-12,
            crystal_length: 30e-3,
            poling_period: 46.1e-6,
            crystal_temperature: None,
            degenerate_wavelength: 1584e-9,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_center_wavelength", self.pump_center_wavelength),
            ("pump_duration_fwhm", self.pump_duration_fwhm),
            ("crystal_length", self.crystal_length),
            ("poling_period", self.poling_period),
            ("degenerate_wavelength", self.degenerate_wavelength),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        let mismatch = (self.degenerate_wavelength - 2.0 * self.pump_center_wavelength).abs();
        if mismatch > 0.1e-9 {
            return Err(Error::config(
                "degenerate_wavelength",
                format!(
                    "must equal twice the pump wavelength within 0.1 nm (off by {:.3} nm)",
                    mismatch * 1e9
                ),
            ));
        }
        Ok(())
    }

    /// Pump center angular frequency (rad/s).
    pub fn pump_center_omega(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.pump_center_wavelength
    }

    /// Degenerate angular frequency of signal and idler (rad/s).
    pub fn degenerate_omega(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.degenerate_wavelength
    }

    /// 1/e half-width of the pump *amplitude* spectrum (rad/s), from the
    /// transform-limited Gaussian with the configured intensity FWHM.
    pub fn pump_sigma_omega(&self) -> f64 {
        // E(t) ~ exp(-t^2 / 2 sigma_t^2); intensity FWHM = 2 sigma_t sqrt(ln 2)
        let sigma_t = self.pump_duration_fwhm / (2.0 * (2f64).ln().sqrt());
        1.0 / sigma_t
    }

    /// Shift the source center by `delta_omega` (rad/s on the down-converted
    /// photons), keeping pump and degenerate wavelengths consistent. Models a
    /// residual mismatch between the two crystals.
    pub fn with_center_offset(&self, delta_omega: f64) -> SourceParams {
        let omega_deg = self.degenerate_omega() + delta_omega;
        let omega_pump = 2.0 * omega_deg;
        SourceParams {
            degenerate_wavelength: TAU * SPEED_OF_LIGHT / omega_deg,
            pump_center_wavelength: TAU * SPEED_OF_LIGHT / omega_pump,
            ..self.clone()
        }
    }

    /// Validate, then fix the operating temperature (tuning it to the
    /// phase-matched point when unset).
    pub fn resolve(&self, dispersion: &Dispersion) -> Result<ResolvedSource> {
        self.validate()?;
        let temperature_c = match self.crystal_temperature {
            Some(t) => t,
            None => tuned_temperature(self, dispersion)?,
        };
        Ok(ResolvedSource {
            params: self.clone(),
            dispersion: dispersion.clone(),
            temperature_c,
        })
    }
}

/// Source with dispersion model attached and temperature fixed.
#[derive(Debug, Clone)]
pub struct ResolvedSource {
    pub params: SourceParams,
    pub dispersion: Dispersion,
    pub temperature_c: f64,
}

/// Pump spectral amplitude at the given sum detuning (rad/s away from the
/// pump center). Unit peak; Gaussian with the transform-limited width.
pub fn pump_envelope(detuning_sum: f64, params: &SourceParams) -> Complex64 {
    let sigma = params.pump_sigma_omega();
    let x = detuning_sum / sigma;
    Complex64::new((-0.5 * x * x).exp(), 0.0)
}

/// Collinear quasi-phase-matching mismatch (1/m) for type-II SPDC:
/// pump and signal on the y axis, idler on z, first-order grating.
///
/// The grating vector sign is chosen so the mismatch crosses zero at the
/// configured poling period; the sinc in the amplitude is even in dk, so
/// only the location of the zero is physical.
pub fn phase_mismatch(omega_s: f64, omega_i: f64, source: &ResolvedSource) -> Result<f64> {
    let d = &source.dispersion;
    let t = source.temperature_c;
    let k_p = d.wavenumber(Axis::Y, omega_s + omega_i, t)?;
    let k_s = d.wavenumber(Axis::Y, omega_s, t)?;
    let k_i = d.wavenumber(Axis::Z, omega_i, t)?;
    let grating = TAU / source.params.poling_period;
    Ok(k_p - k_s - k_i + grating)
}

/// Temperature (Celsius) at which the source is phase-matched at its
/// degenerate wavelength, found by bisection.
pub fn tuned_temperature(params: &SourceParams, dispersion: &Dispersion) -> Result<f64> {
    let omega = params.degenerate_omega();
    let mismatch = |t: f64| -> Result<f64> {
        let probe = ResolvedSource {
            params: params.clone(),
            dispersion: dispersion.clone(),
            temperature_c: t,
        };
        phase_mismatch(omega, omega, &probe)
    };
    let (mut lo, mut hi) = (5.0, 195.0);
    let (mut f_lo, f_hi) = (mismatch(lo)?, mismatch(hi)?);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootFind(format!(
            "phase matching not reachable for T in [{lo}, {hi}] C \
             (dk = {f_lo:.3e} .. {f_hi:.3e} 1/m); check poling period"
        )));
    }
    let tol = 1e-4 * TAU / params.poling_period;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mismatch(mid)?;
        if f_mid.abs() < tol || (hi - lo) < 1e-9 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootFind(
        "temperature bisection did not converge".into(),
    ))
}

/// Slope d(omega_i)/d(omega_s) of the phase-matching ridge at degeneracy,
/// from finite differences of the mismatch. Near +1 for a group-velocity
/// matched type-II source.
pub fn phase_matching_ridge_slope(source: &ResolvedSource) -> Result<f64> {
    let omega = source.params.degenerate_omega();
    let h = 1e-4 * source.params.pump_sigma_omega();
    let d_ds = (phase_mismatch(omega + h, omega, source)? - phase_mismatch(omega - h, omega, source)?)
        / (2.0 * h);
    let d_di = (phase_mismatch(omega, omega + h, source)? - phase_mismatch(omega, omega - h, source)?)
        / (2.0 * h);
    Ok(-d_ds / d_di)
}

/// Discrete frequency grid for the two-photon amplitude. Points are evenly
/// spaced and inclusive of both ends of the span.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    /// Points per axis.
    pub n_points: usize,
    /// Center angular frequency of the signal axis (rad/s).
    pub center_signal: f64,
    /// Center angular frequency of the idler axis (rad/s).
    pub center_idler: f64,
    /// Full span per axis (rad/s).
    pub span: f64,
    /// Axis labels, signal then idler.
    pub labels: [String; 2],
}

pub const DEFAULT_GRID_POINTS: usize = 256;
/// Default full span in units of the pump amplitude bandwidth (so +/- 5).
pub const DEFAULT_SPAN_BANDWIDTHS: f64 = 10.0;
/// Minimum full span accepted, same units (+/- 4).
pub const MIN_SPAN_BANDWIDTHS: f64 = 8.0;

impl FrequencyGrid {
    /// Default grid for a source: centered at degeneracy, +/- 5 pump bandwidths.
    pub fn default_for(params: &SourceParams) -> FrequencyGrid {
        Self::for_params(params, DEFAULT_GRID_POINTS, DEFAULT_SPAN_BANDWIDTHS)
    }

    pub fn for_params(params: &SourceParams, n_points: usize, span_bandwidths: f64) -> FrequencyGrid {
        let center = params.degenerate_omega();
        FrequencyGrid {
            n_points,
            center_signal: center,
            center_idler: center,
            span: span_bandwidths * params.pump_sigma_omega(),
            labels: ["signal".into(), "idler".into()],
        }
    }

    pub fn validate(&self, params: &SourceParams) -> Result<()> {
        if self.n_points < 16 {
            return Err(Error::config(
                "grid.n_points",
                format!("need at least 16 points, got {}", self.n_points),
            ));
        }
        if !(self.span > 0.0) {
            return Err(Error::config("grid.span", "span must be positive"));
        }
        let min_span = MIN_SPAN_BANDWIDTHS * params.pump_sigma_omega();
        if self.span < min_span {
            return Err(Error::config(
                "grid.span",
                format!(
                    "span {:.3e} rad/s narrower than +/-4 pump bandwidths ({:.3e} rad/s)",
                    self.span, min_span
                ),
            ));
        }
        Ok(())
    }

    /// Grid step (rad/s); same for both axes.
    pub fn step(&self) -> f64 {
        self.span / (self.n_points - 1) as f64
    }

    pub fn signal_value(&self, index: usize) -> f64 {
        self.center_signal + (index as f64 - 0.5 * (self.n_points - 1) as f64) * self.step()
    }

    pub fn idler_value(&self, index: usize) -> f64 {
        self.center_idler + (index as f64 - 0.5 * (self.n_points - 1) as f64) * self.step()
    }

    pub fn signal_axis(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.signal_value(i)).collect()
    }

    pub fn idler_axis(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.idler_value(i)).collect()
    }

    pub fn same_axes(&self, other: &FrequencyGrid) -> bool {
        self.n_points == other.n_points
            && (self.center_signal - other.center_signal).abs() < 1e-6 * self.step()
            && (self.center_idler - other.center_idler).abs() < 1e-6 * self.step()
            && (self.span - other.span).abs() < 1e-6 * self.step()
    }
}

/// Two-photon spectral amplitude on a grid, L2-normalized so that
/// sum |f|^2 dw_s dw_i = 1.
#[derive(Debug, Clone)]
pub struct JointSpectralAmplitude {
    pub grid: FrequencyGrid,
    /// Rows index the signal axis, columns the idler axis.
    pub amplitude: DMatrix<Complex64>,
}

impl JointSpectralAmplitude {
    /// Joint spectral intensity |f|^2 (same normalization measure).
    pub fn intensity(&self) -> DMatrix<f64> {
        self.amplitude.map(|z| z.norm_sqr())
    }

    /// sum |f|^2 dw dw; 1.0 after construction.
    pub fn norm_l2(&self) -> f64 {
        let cell = self.grid.step() * self.grid.step();
        self.amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell
    }
}

/// sinc(x) = sin(x)/x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Build the normalized JSA for a resolved source on the given grid.
pub fn build_jsa(source: &ResolvedSource, grid: &FrequencyGrid) -> Result<JointSpectralAmplitude> {
    grid.validate(&source.params)?;
    let n = grid.n_points;
    let omega_p0 = source.params.pump_center_omega();
    let half_length = 0.5 * source.params.crystal_length;

    // Dispersion only enters through k(omega); precompute per-axis tables.
    let d = &source.dispersion;
    let t = source.temperature_c;
    let mut k_signal = Vec::with_capacity(n);
    let mut k_idler = Vec::with_capacity(n);
    for i in 0..n {
        k_signal.push(d.wavenumber(Axis::Y, grid.signal_value(i), t)?);
        k_idler.push(d.wavenumber(Axis::Z, grid.idler_value(i), t)?);
    }
    // pump wavenumber depends on the sum frequency; diagonal index s+i
    let mut k_pump = Vec::with_capacity(2 * n - 1);
    for j in 0..(2 * n - 1) {
        let sum = grid.signal_value(0) + grid.idler_value(0) + j as f64 * grid.step();
        k_pump.push(d.wavenumber(Axis::Y, sum, t)?);
    }
    let grating = TAU / source.params.poling_period;

    let mut amp = DMatrix::<Complex64>::zeros(n, n);
    for si in 0..n {
        let omega_s = grid.signal_value(si);
        for ii in 0..n {
            let omega_i = grid.idler_value(ii);
            let pump = pump_envelope(omega_s + omega_i - omega_p0, &source.params);
            let dk = k_pump[si + ii] - k_signal[si] - k_idler[ii] + grating;
            amp[(si, ii)] = pump * sinc(dk * half_length);
        }
    }

    let cell = grid.step() * grid.step();
    let norm: f64 = amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NonFinite("joint spectral amplitude normalization"));
    }
    amp /= Complex64::new(norm.sqrt(), 0.0);

    Ok(JointSpectralAmplitude {
        grid: grid.clone(),
        amplitude: amp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_source() -> ResolvedSource {
        SourceParams::default().resolve(&Dispersion::ktp()).unwrap()
    }

    #[test]
    fn pump_envelope_peak_and_width() {
        let p = SourceParams::default();
        assert_relative_eq!(pump_envelope(0.0, &p).norm(), 1.0);
        let sigma = p.pump_sigma_omega();
        assert_relative_eq!(
            pump_envelope(sigma, &p).norm(),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            pump_envelope(-sigma, &p).norm(),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn pump_time_bandwidth_product() {
        // transform-limited Gaussian: intensity FWHM (Hz) x intensity FWHM (s)
        // = 2 ln2 / pi = 0.4413
        let p = SourceParams::default();
        let sigma_omega = p.pump_sigma_omega();
        let fwhm_omega_intensity = 2.0 * (2f64.ln()).sqrt() * sigma_omega;
        let product = fwhm_omega_intensity / TAU * p.pump_duration_fwhm;
        assert_relative_eq!(product, 2.0 * 2f64.ln() / std::f64::consts::PI, epsilon = 1e-12);
        // and the corresponding pump bandwidth at 792 nm is about 0.46 nm
        let lambda = p.pump_center_wavelength;
        let fwhm_lambda = lambda * lambda / (TAU * SPEED_OF_LIGHT) * fwhm_omega_intensity;
        assert!((fwhm_lambda * 1e9 - 0.46).abs() < 0.01, "{}", fwhm_lambda * 1e9);
    }

    #[test]
    fn tuned_temperature_zeroes_mismatch() {
        let src = default_source();
        let omega = src.params.degenerate_omega();
        let dk = phase_mismatch(omega, omega, &src).unwrap();
        let tol = 1e-3 * TAU / src.params.poling_period;
        assert!(dk.abs() < tol, "dk = {dk:.3e}, tol {tol:.3e}");
        // the crystal heater range is physical
        assert!(
            src.temperature_c > 5.0 && src.temperature_c < 195.0,
            "T = {}",
            src.temperature_c
        );
    }

    #[test]
    fn poling_period_matches_quoted_value() {
        // with the frozen dispersion set, the period that phase-matches
        // 792 -> 1584 + 1584 near room temperature should be close to the
        // manufactured 46.1 um
        let params = SourceParams::default();
        let d = Dispersion::ktp();
        let omega = params.degenerate_omega();
        let t = 30.0;
        let k_p = d.wavenumber(Axis::Y, 2.0 * omega, t).unwrap();
        let k_s = d.wavenumber(Axis::Y, omega, t).unwrap();
        let k_i = d.wavenumber(Axis::Z, omega, t).unwrap();
        let period = TAU / (k_s + k_i - k_p);
        assert!(
            (period * 1e6 - 46.1).abs() < 0.7,
            "required poling period {:.2} um",
            period * 1e6
        );
    }

    #[test]
    fn mismatch_is_continuous() {
        let src = default_source();
        let omega = src.params.degenerate_omega();
        let base = phase_mismatch(omega, omega, &src).unwrap();
        let mut prev_delta = f64::INFINITY;
        for exp in 1..=6 {
            let h = src.params.pump_sigma_omega() * 10f64.powi(-exp);
            let delta = (phase_mismatch(omega + h, omega, &src).unwrap() - base).abs();
            assert!(delta <= prev_delta * 1.01);
            prev_delta = delta;
        }
        assert!(prev_delta < 1e-3);
    }

    #[test]
    fn ridge_slope_is_plus_one() {
        let src = default_source();
        let slope = phase_matching_ridge_slope(&src).unwrap();
        assert!(
            (slope - 1.0).abs() < 0.1,
            "group-velocity-matched ridge slope {slope}"
        );
    }

    #[test]
    fn jsa_is_normalized() {
        let src = default_source();
        let grid = FrequencyGrid::default_for(&src.params);
        let jsa = build_jsa(&src, &grid).unwrap();
        assert!((jsa.norm_l2() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jsi_is_a_single_central_lobe() {
        let src = default_source();
        let grid = FrequencyGrid::default_for(&src.params);
        let jsa = build_jsa(&src, &grid).unwrap();
        let jsi = jsa.intensity();
        let n = grid.n_points;
        let (mut max, mut arg) = (0.0, (0, 0));
        for s in 0..n {
            for i in 0..n {
                if jsi[(s, i)] > max {
                    max = jsi[(s, i)];
                    arg = (s, i);
                }
            }
        }
        let mid = (n - 1) as f64 / 2.0;
        assert!((arg.0 as f64 - mid).abs() <= 2.0, "peak row {}", arg.0);
        assert!((arg.1 as f64 - mid).abs() <= 2.0, "peak col {}", arg.1);
        // intensity centroid also at the center: single dominant lobe
        let (mut ws, mut wi, mut tot) = (0.0, 0.0, 0.0);
        for s in 0..n {
            for i in 0..n {
                ws += jsi[(s, i)] * s as f64;
                wi += jsi[(s, i)] * i as f64;
                tot += jsi[(s, i)];
            }
        }
        assert!((ws / tot - mid).abs() < 1.0);
        assert!((wi / tot - mid).abs() < 1.0);
        // and the peak sits at the degenerate wavelength
        let lambda_peak = TAU * SPEED_OF_LIGHT / grid.signal_value(arg.0);
        assert!((lambda_peak - 1584e-9).abs() < 0.2e-9);
    }

    #[test]
    fn grid_validation_rejects_bad_configs() {
        let p = SourceParams::default();
        let mut g = FrequencyGrid::default_for(&p);
        g.n_points = 8;
        assert!(g.validate(&p).is_err());
        let mut g = FrequencyGrid::default_for(&p);
        g.span = 2.0 * p.pump_sigma_omega();
        assert!(g.validate(&p).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = SourceParams::default();
        p.poling_period = -1.0;
        assert!(matches!(p.validate(), Err(Error::Config { .. })));
        let mut p = SourceParams::default();
        p.degenerate_wavelength = 1580e-9; // inconsistent with pump
        assert!(p.validate().is_err());
        assert!(SourceParams::default().validate().is_ok());
    }

    #[test]
    fn center_offset_shifts_consistently() {
        let p = SourceParams::default();
        let delta = 2.0 * p.pump_sigma_omega();
        let q = p.with_center_offset(delta);
        assert!(q.validate().is_ok());
        assert_relative_eq!(q.degenerate_omega(), p.degenerate_omega() + delta, epsilon = 1.0);
    }

    #[test]
    fn sinc_basics() {
        assert_eq!(sinc(0.0), 1.0);
        assert_relative_eq!(sinc(std::f64::consts::PI), 0.0, epsilon = 1e-12);
        assert_relative_eq!(sinc(1.0), 1f64.sin(), epsilon = 1e-12);
    }
}
