//! Temperature-dependent refractive index of KTP along its principal axes.
//!
//! Coefficients live in `data/ktp_dispersion.cfg`, compiled in and also
//! loadable from disk so alternative sets can be swapped without a rebuild.

use crate::error::{Error, Result};
use crate::kv::{Kv, KvFile};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0; // m/s

/// Crystal axis relevant for type-II phase matching in KTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// y axis: pump and signal (H) polarization.
    Y,
    /// z axis: idler (V) polarization.
    Z,
}

/// One axis of the Sellmeier model plus its thermo-optic correction.
#[derive(Debug, Clone)]
pub struct AxisDispersion {
    a: f64,
    b1: f64,
    c1: f64,
    b2: f64,
    c2: f64,
    d: f64,
    valid_min_um: f64,
    valid_max_um: f64,
    /// dn/dT polynomial in 1/lambda, first order in dT
    dndt1: [f64; 4],
    /// second order in dT
    dndt2: [f64; 4],
}

impl AxisDispersion {
    fn from_kv(kv: Kv<'_>) -> Result<Self> {
        let poly = |key: &str| -> Result<[f64; 4]> {
            let v = kv.req_f64_list(key)?;
            if v.len() != 4 {
                return Err(Error::config(key, "expected exactly 4 coefficients"));
            }
            Ok([v[0], v[1], v[2], v[3]])
        };
        Ok(AxisDispersion {
            a: kv.req_f64("a")?,
            b1: kv.req_f64("b1")?,
            c1: kv.req_f64("c1")?,
            b2: kv.req_f64("b2")?,
            c2: kv.req_f64("c2")?,
            d: kv.req_f64("d")?,
            valid_min_um: kv.req_f64("valid_min_um")?,
            valid_max_um: kv.req_f64("valid_max_um")?,
            dndt1: poly("dndt1")?,
            dndt2: poly("dndt2")?,
        })
    }

    fn check_range(&self, lambda_um: f64) -> Result<()> {
        if !(self.valid_min_um..=self.valid_max_um).contains(&lambda_um) {
            return Err(Error::DispersionRange {
                wavelength_um: lambda_um,
                min_um: self.valid_min_um,
                max_um: self.valid_max_um,
            });
        }
        Ok(())
    }

    fn index_25c(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let mut n2 = self.a + self.b1 / (1.0 - self.c1 / l2) - self.d * l2;
        if self.b2 != 0.0 {
            n2 += self.b2 / (1.0 - self.c2 / l2);
        }
        n2.sqrt()
    }

    fn thermo_correction(&self, lambda_um: f64, temperature_c: f64) -> f64 {
        let dt = temperature_c - 25.0;
        let inv = 1.0 / lambda_um;
        let horner = |p: &[f64; 4]| p[0] + inv * (p[1] + inv * (p[2] + inv * p[3]));
        horner(&self.dndt1) * dt + horner(&self.dndt2) * dt * dt
    }

    /// Refractive index at the given vacuum wavelength and temperature.
    pub fn index(&self, lambda_um: f64, temperature_c: f64) -> Result<f64> {
        self.check_range(lambda_um)?;
        Ok(self.index_25c(lambda_um) + self.thermo_correction(lambda_um, temperature_c))
    }
}

/// Full dispersion model: both axes, as loaded from the data file.
#[derive(Debug, Clone)]
pub struct Dispersion {
    y: AxisDispersion,
    z: AxisDispersion,
}

const BUILTIN: &str = include_str!("../data/ktp_dispersion.cfg");

impl Dispersion {
    /// The compiled-in KTP coefficient set.
    pub fn ktp() -> Dispersion {
        Self::from_kv_file(
            &KvFile::parse_str(BUILTIN, "data/ktp_dispersion.cfg").expect("builtin data parses"),
        )
        .expect("builtin data is complete")
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Dispersion> {
        Self::from_kv_file(&KvFile::read(path)?)
    }

    fn from_kv_file(file: &KvFile) -> Result<Dispersion> {
        Ok(Dispersion {
            y: AxisDispersion::from_kv(file.section("y"))?,
            z: AxisDispersion::from_kv(file.section("z"))?,
        })
    }

    pub fn axis(&self, axis: Axis) -> &AxisDispersion {
        match axis {
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    /// n(lambda, T) for the given axis.
    pub fn index(&self, axis: Axis, lambda_um: f64, temperature_c: f64) -> Result<f64> {
        self.axis(axis).index(lambda_um, temperature_c)
    }

    /// Wavevector magnitude k = 2*pi*n/lambda for angular frequency `omega` (rad/s),
    /// in 1/m.
    pub fn wavenumber(&self, axis: Axis, omega: f64, temperature_c: f64) -> Result<f64> {
        let lambda_m = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega;
        let n = self.index(axis, lambda_m * 1e6, temperature_c)?;
        Ok(n * omega / SPEED_OF_LIGHT)
    }

    /// Group index n_g = n - lambda dn/dlambda via central difference.
    pub fn group_index(&self, axis: Axis, lambda_um: f64, temperature_c: f64) -> Result<f64> {
        let h = 1e-4; // um
        let n = self.index(axis, lambda_um, temperature_c)?;
        let np = self.index(axis, lambda_um + h, temperature_c)?;
        let nm = self.index(axis, lambda_um - h, temperature_c)?;
        Ok(n - lambda_um * (np - nm) / (2.0 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_in_known_ballpark() {
        let d = Dispersion::ktp();
        // flux-grown KTP near-IR values from the literature
        let ny_pump = d.index(Axis::Y, 0.792, 25.0).unwrap();
        assert!((ny_pump - 1.757).abs() < 0.01, "ny(792nm) = {ny_pump}");
        let ny_tel = d.index(Axis::Y, 1.584, 25.0).unwrap();
        assert!((ny_tel - 1.733).abs() < 0.01, "ny(1584nm) = {ny_tel}");
        let nz_tel = d.index(Axis::Z, 1.584, 25.0).unwrap();
        assert!((nz_tel - 1.815).abs() < 0.01, "nz(1584nm) = {nz_tel}");
        assert!(nz_tel > ny_tel, "KTP is positive biaxial along z");
    }

    #[test]
    fn temperature_raises_index() {
        let d = Dispersion::ktp();
        let cold = d.index(Axis::Z, 1.584, 20.0).unwrap();
        let hot = d.index(Axis::Z, 1.584, 80.0).unwrap();
        assert!(hot > cold);
        // dn/dT order 1e-5 per K
        assert!((hot - cold) / 60.0 > 5e-6 && (hot - cold) / 60.0 < 5e-5);
    }

    #[test]
    fn out_of_range_wavelength_rejected() {
        let d = Dispersion::ktp();
        assert!(matches!(
            d.index(Axis::Y, 0.2, 25.0),
            Err(Error::DispersionRange { .. })
        ));
        assert!(d.index(Axis::Y, 5.0, 25.0).is_err());
    }

    #[test]
    fn group_index_exceeds_phase_index_in_normal_dispersion() {
        let d = Dispersion::ktp();
        let n = d.index(Axis::Y, 0.792, 25.0).unwrap();
        let ng = d.group_index(Axis::Y, 0.792, 25.0).unwrap();
        assert!(ng > n);
    }
}
