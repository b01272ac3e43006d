//! Schmidt decomposition of the joint spectral amplitude.
//!
//! Yields the mode coefficients that drive everything downstream: spectral
//! purity, Schmidt number, the heralded single photon's reduced density
//! matrix, and the delay-dependent overlap Tr[rho1 rho2(tau)] that sets the
//! Hong-Ou-Mandel visibility.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, JointSpectralAmplitude};

/// Which photon of the pair a reduced quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

/// Schmidt modes and coefficients of a two-photon amplitude.
///
/// Coefficients are sorted descending and sum to 1. Mode columns are
/// orthonormal in the discrete l2 sense over the grid axis.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    /// Column k is the k-th signal mode over the signal axis.
    pub signal_modes: DMatrix<Complex64>,
    /// Column k is the k-th idler mode over the idler axis.
    pub idler_modes: DMatrix<Complex64>,
    pub grid: FrequencyGrid,
}

/// Reduced spectral density matrix of one arm, trace 1, Hermitian PSD.
#[derive(Debug, Clone)]
pub struct SpectralDensityMatrix {
    /// Angular frequency of each basis point (rad/s).
    pub axis: Vec<f64>,
    pub matrix: DMatrix<Complex64>,
}

/// Singular-value decomposition of the amplitude; coefficients are the
/// squared singular values renormalized to sum 1.
pub fn decompose(jsa: &JointSpectralAmplitude) -> Result<SchmidtDecomposition> {
    if jsa.amplitude.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("joint spectral amplitude"));
    }
    // scale by the grid cell so the matrix has unit l2 norm
    let step = jsa.grid.step();
    let a = jsa.amplitude.map(|z| z * step);
    let svd = a.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");

    let mut coefficients: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let total: f64 = coefficients.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonFinite("schmidt coefficient normalization"));
    }
    for c in coefficients.iter_mut() {
        *c /= total;
    }

    let n = jsa.amplitude.nrows();
    let k = coefficients.len();
    let signal_modes = u.columns(0, k).into_owned();
    // A = U S V^H, so the idler mode k is row k of V^H
    let mut idler_modes = DMatrix::<Complex64>::zeros(n, k);
    for kk in 0..k {
        for i in 0..n {
            idler_modes[(i, kk)] = v_t[(kk, i)];
        }
    }

    Ok(SchmidtDecomposition {
        coefficients,
        signal_modes,
        idler_modes,
        grid: jsa.grid.clone(),
    })
}

impl SchmidtDecomposition {
    /// Spectral purity Tr[rho^2] = sum of squared coefficients.
    pub fn purity(&self) -> f64 {
        self.coefficients.iter().map(|l| l * l).sum()
    }

    /// Schmidt number K = 1 / sum lambda^2 of the amplitude decomposition.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.purity()
    }

    /// Coefficients at least `cutoff`, as (index, lambda); what the emission
    /// sampler uses. Dropped weight stays in `purity`.
    pub fn sampled_modes(&self, cutoff: f64) -> Vec<(usize, f64)> {
        self.coefficients
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, l)| *l >= cutoff)
            .collect()
    }

    /// Rebuild the amplitude matrix (unit l2 norm, grid-cell scaled) from the
    /// modes; used to bound the factorization residual.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.signal_modes.nrows();
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for (k, lambda) in self.coefficients.iter().enumerate() {
            let s = Complex64::new(lambda.sqrt(), 0.0);
            let u = self.signal_modes.column(k);
            let v = self.idler_modes.column(k);
            for col in 0..n {
                let sv = s * v[col];
                for row in 0..n {
                    a[(row, col)] += u[row] * sv;
                }
            }
        }
        a
    }

    /// Reduced density matrix of one arm: rho = sum_k lambda_k |u_k><u_k|.
    pub fn heralded_density_matrix(&self, arm: Arm) -> SpectralDensityMatrix {
        let (modes, axis) = match arm {
            Arm::Signal => (&self.signal_modes, self.grid.signal_axis()),
            Arm::Idler => (&self.idler_modes, self.grid.idler_axis()),
        };
        let n = modes.nrows();
        let mut rho = DMatrix::<Complex64>::zeros(n, n);
        for (k, lambda) in self.coefficients.iter().enumerate() {
            if *lambda == 0.0 {
                continue;
            }
            let u = modes.column(k);
            for col in 0..n {
                let w = Complex64::new(*lambda, 0.0) * u[col].conj();
                for row in 0..n {
                    rho[(row, col)] += u[row] * w;
                }
            }
        }
        SpectralDensityMatrix { axis, matrix: rho }
    }
}

/// Schmidt number of a measured or modeled intensity: decompose |f|^2 as if
/// it were an amplitude and return 1/sum(lambda^2). This is the quantity a
/// joint-spectral-intensity measurement gives access to, and it is not the
/// amplitude Schmidt number.
pub fn schmidt_number_of_jsi(jsi: &DMatrix<f64>) -> Result<f64> {
    if jsi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("joint spectral intensity"));
    }
    if jsi.iter().any(|v| *v < 0.0) {
        return Err(Error::config("jsi", "intensity must be nonnegative"));
    }
    let total: f64 = jsi.iter().sum();
    if total == 0.0 {
        return Err(Error::config("jsi", "intensity is identically zero"));
    }
    let svd = jsi.clone().svd(false, false);
    let mut lam: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let sum: f64 = lam.iter().sum();
    for l in lam.iter_mut() {
        *l /= sum;
    }
    Ok(1.0 / lam.iter().map(|l| l * l).sum::<f64>())
}

impl SpectralDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Tr[rho^2], real by hermiticity.
    pub fn purity(&self) -> f64 {
        let m = &self.matrix;
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                acc += m[(a, b)] * m[(b, a)];
            }
        }
        acc.re
    }

    /// Hermiticity defect max |rho - rho^H|.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                worst = worst.max((m[(a, b)] - m[(b, a)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue; >= -1e-10 for a valid state.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.matrix.clone().symmetric_eigen();
        eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Validate Hermiticity, unit trace, and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        if self.hermiticity_defect() > 1e-10 {
            return Err(Error::NonFinite("density matrix hermiticity"));
        }
        if (self.trace().re - 1.0).abs() > 1e-9 || self.trace().im.abs() > 1e-10 {
            return Err(Error::config("density_matrix", "trace must be 1"));
        }
        if self.min_eigenvalue() < -1e-10 {
            return Err(Error::config("density_matrix", "negative eigenvalue"));
        }
        Ok(())
    }

    fn check_same_axis(&self, other: &SpectralDensityMatrix) -> Result<()> {
        if self.axis.len() != other.axis.len() {
            return Err(Error::GridMismatch(format!(
                "density matrices on axes of {} vs {} points",
                self.axis.len(),
                other.axis.len()
            )));
        }
        let scale = self.axis.last().unwrap_or(&1.0) - self.axis.first().unwrap_or(&0.0);
        let tol = 1e-9 * scale.abs().max(1.0);
        for (a, b) in self.axis.iter().zip(other.axis.iter()) {
            if (a - b).abs() > tol {
                return Err(Error::GridMismatch(
                    "density matrices on different frequency axes".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Tr[rho1 rho2(tau)] where rho2(tau) carries the free-propagation phase
/// e^{i (nu - nu') tau}. Real within numerical noise; the real part is
/// returned. `delay` in seconds.
pub fn overlap(
    rho1: &SpectralDensityMatrix,
    rho2: &SpectralDensityMatrix,
    delay: f64,
) -> Result<f64> {
    rho1.check_same_axis(rho2)?;
    let n = rho1.dim();
    // e^{i(nu_b - nu_a) tau} = p_b conj(p_a) with p = e^{i nu tau}; strip a
    // common frequency offset to keep the phase arguments small.
    let nu0 = rho1.axis[0];
    let phases: Vec<Complex64> = rho1
        .axis
        .iter()
        .map(|nu| Complex64::from_polar(1.0, (nu - nu0) * delay))
        .collect();
    let m1 = &rho1.matrix;
    let m2 = &rho2.matrix;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        let pa = phases[a].conj();
        let mut row = Complex64::new(0.0, 0.0);
        for b in 0..n {
            row += m1[(a, b)] * m2[(b, a)] * phases[b];
        }
        acc += row * pa;
    }
    debug_assert!(
        acc.im.abs() < 1e-8 * acc.re.abs().max(1.0),
        "imaginary residue {} in overlap",
        acc.im
    );
    Ok(acc.re)
}

/// Both sides of the visibility identity
/// Tr[rho1 rho2] = (Tr[rho1^2] + Tr[rho2^2] - ||rho1 - rho2||^2) / 2.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityIdentity {
    /// Tr[rho1 rho2]
    pub trace_product: f64,
    pub purity1: f64,
    pub purity2: f64,
    /// Frobenius distance squared Tr[(rho1-rho2)^H (rho1-rho2)]
    pub distance_sq: f64,
}

impl VisibilityIdentity {
    /// The right-hand-side combination of purities and distinguishability.
    pub fn from_purities(&self) -> f64 {
        0.5 * (self.purity1 + self.purity2 - self.distance_sq)
    }

    /// |lhs - rhs|; zero up to rounding.
    pub fn consistency(&self) -> f64 {
        (self.trace_product - self.from_purities()).abs()
    }
}

/// Evaluate the visibility identity for two states on the same axis.
pub fn eq1_visibility(
    rho1: &SpectralDensityMatrix,
    rho2: &SpectralDensityMatrix,
) -> Result<VisibilityIdentity> {
    rho1.check_same_axis(rho2)?;
    let trace_product = overlap(rho1, rho2, 0.0)?;
    let n = rho1.dim();
    let mut dist = 0.0;
    for a in 0..n {
        for b in 0..n {
            dist += (rho1.matrix[(a, b)] - rho2.matrix[(a, b)]).norm_sqr();
        }
    }
    Ok(VisibilityIdentity {
        trace_product,
        purity1: rho1.purity(),
        purity2: rho2.purity(),
        distance_sq: dist,
    })
}

/// Full width at half maximum (seconds) of tau -> overlap(rho1, rho2, tau),
/// assuming a single symmetric peak at tau = 0. Scans outward then bisects.
pub fn overlap_half_width(
    rho1: &SpectralDensityMatrix,
    rho2: &SpectralDensityMatrix,
) -> Result<f64> {
    let peak = overlap(rho1, rho2, 0.0)?;
    if peak <= 0.0 {
        return Err(Error::RootFind("overlap peak is not positive".into()));
    }
    let half = 0.5 * peak;
    let step = 0.1e-12;
    let mut tau = 0.0;
    let mut prev = peak;
    for _ in 0..10_000 {
        tau += step;
        let v = overlap(rho1, rho2, tau)?;
        if v <= half {
            // bisect between tau-step and tau
            let (mut lo, mut hi) = (tau - step, tau);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if overlap(rho1, rho2, mid)? > half {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(lo + hi); // 2 * half-width
        }
        prev = v;
    }
    Err(Error::RootFind(format!(
        "overlap never fell below half maximum (last {prev:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sellmeier::Dispersion;
    use crate::spectral::{build_jsa, FrequencyGrid, SourceParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn default_decomposition(n_points: usize) -> SchmidtDecomposition {
        let params = SourceParams::default();
        let src = params.resolve(&Dispersion::ktp()).unwrap();
        let grid = FrequencyGrid::for_params(&params, n_points, 10.0);
        decompose(&build_jsa(&src, &grid).unwrap()).unwrap()
    }

    /// Orthonormal plane-wave-like columns for synthetic amplitudes.
    fn fourier_mode(n: usize, k: usize) -> Vec<Complex64> {
        let norm = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|j| Complex64::from_polar(norm, std::f64::consts::TAU * (k * j) as f64 / n as f64))
            .collect()
    }

    fn synthetic_jsa(n: usize, weights: &[f64]) -> JointSpectralAmplitude {
        let params = SourceParams::default();
        let mut grid = FrequencyGrid::for_params(&params, n, 10.0);
        grid.n_points = n;
        let step = grid.step();
        let mut amp = DMatrix::<Complex64>::zeros(n, n);
        for (k, w) in weights.iter().enumerate() {
            let u = fourier_mode(n, k);
            let v = fourier_mode(n, k + 3);
            for s in 0..n {
                for i in 0..n {
                    amp[(s, i)] += Complex64::new(w.sqrt(), 0.0) * u[s] * v[i];
                }
            }
        }
        // express as a density over angular frequency, like build_jsa does
        let amp = amp.map(|z| z / step);
        JointSpectralAmplitude {
            grid,
            amplitude: amp,
        }
    }

    fn random_density(dim: usize, rng: &mut impl Rng) -> SpectralDensityMatrix {
        let g = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut rho = &g * g.adjoint();
        let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
        rho /= Complex64::new(tr, 0.0);
        SpectralDensityMatrix {
            axis: (0..dim).map(|i| i as f64 * 1e10).collect(),
            matrix: rho,
        }
    }

    #[test]
    fn separable_amplitude_is_rank_one() {
        let jsa = synthetic_jsa(32, &[1.0]);
        let d = decompose(&jsa).unwrap();
        assert_relative_eq!(d.coefficients[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(d.purity(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(d.schmidt_number(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_equal_terms_split_evenly() {
        let jsa = synthetic_jsa(32, &[0.5, 0.5]);
        let d = decompose(&jsa).unwrap();
        assert_relative_eq!(d.coefficients[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(d.coefficients[1], 0.5, epsilon = 1e-10);
        assert_relative_eq!(d.purity(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn default_source_purity_matches_measurement() {
        let d = default_decomposition(256);
        let p = d.purity();
        assert!((p - 0.82).abs() < 0.05, "purity {p}");
        assert_relative_eq!(p * d.schmidt_number(), 1.0, epsilon = 1e-10);
        // coefficients sorted, normalized
        assert!((d.coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(d
            .coefficients
            .windows(2)
            .all(|w| w[0] >= w[1] - 1e-15));
    }

    #[test]
    fn jsi_schmidt_number_near_unity() {
        let params = SourceParams::default();
        let src = params.resolve(&Dispersion::ktp()).unwrap();
        let grid = FrequencyGrid::default_for(&params);
        let jsa = build_jsa(&src, &grid).unwrap();
        let k = schmidt_number_of_jsi(&jsa.intensity()).unwrap();
        assert!((k - 1.02).abs() < 0.03, "K(JSI) = {k}");
    }

    #[test]
    fn jsi_schmidt_number_trivial_cases() {
        let sep = synthetic_jsa(24, &[1.0]);
        let k = schmidt_number_of_jsi(&sep.intensity()).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-8);

        // two equal terms: block-diagonal of two rank-1 all-ones blocks
        let n = 24;
        let mut jsi = DMatrix::<f64>::zeros(n, n);
        for r in 0..n / 2 {
            for c in 0..n / 2 {
                jsi[(r, c)] = 1.0;
                jsi[(r + n / 2, c + n / 2)] = 1.0;
            }
        }
        let k2 = schmidt_number_of_jsi(&jsi).unwrap();
        assert!((k2 - 2.0).abs() < 1e-8, "k2 = {k2}");

        assert!(schmidt_number_of_jsi(&DMatrix::<f64>::zeros(4, 4)).is_err());
        let mut neg = DMatrix::<f64>::zeros(4, 4);
        neg[(0, 0)] = -1.0;
        assert!(schmidt_number_of_jsi(&neg).is_err());
    }

    #[test]
    fn grid_doubling_converges_purity() {
        let p128 = default_decomposition(128).purity();
        let p256 = default_decomposition(256).purity();
        assert!(
            (p256 - p128).abs() < 0.005,
            "purity moved {} -> {}",
            p128,
            p256
        );
    }

    #[test]
    fn longer_crystal_means_lower_purity() {
        let params = SourceParams::default();
        let src = params.resolve(&Dispersion::ktp()).unwrap();
        let grid = FrequencyGrid::default_for(&params);
        let p_default = decompose(&build_jsa(&src, &grid).unwrap())
            .unwrap()
            .purity();

        let mut long = params.clone();
        long.crystal_length *= 10.0;
        let src_long = long.resolve(&Dispersion::ktp()).unwrap();
        let p_long = decompose(&build_jsa(&src_long, &grid).unwrap())
            .unwrap()
            .purity();
        assert!(
            p_long < p_default,
            "10x crystal: purity {p_long} !< {p_default}"
        );
    }

    #[test]
    fn reconstruction_matches_amplitude() {
        let params = SourceParams::default();
        let src = params.resolve(&Dispersion::ktp()).unwrap();
        let grid = FrequencyGrid::for_params(&params, 96, 10.0);
        let jsa = build_jsa(&src, &grid).unwrap();
        let d = decompose(&jsa).unwrap();
        let rebuilt = d.reconstruct();
        let step = grid.step();
        let mut residual = 0.0;
        for s in 0..grid.n_points {
            for i in 0..grid.n_points {
                residual += (rebuilt[(s, i)] - jsa.amplitude[(s, i)] * step).norm_sqr();
            }
        }
        assert!(residual.sqrt() < 1e-8, "frobenius residual {}", residual.sqrt());
    }

    #[test]
    fn modes_are_orthonormal() {
        let d = default_decomposition(96);
        let kept = d.sampled_modes(1e-6);
        for (j, _) in kept.iter() {
            for (k, _) in kept.iter() {
                let dot: Complex64 = (0..d.signal_modes.nrows())
                    .map(|r| d.signal_modes[(r, *j)].conj() * d.signal_modes[(r, *k)])
                    .sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (dot.norm() - expect).abs() < 1e-8,
                    "<u{j}|u{k}> = {dot}"
                );
            }
        }
    }

    #[test]
    fn heralded_state_reproduces_purity() {
        let d = default_decomposition(128);
        let rho = d.heralded_density_matrix(Arm::Signal);
        rho.validate().unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-9);
        assert!((rho.purity() - d.purity()).abs() < 1e-8);
    }

    #[test]
    fn pure_source_heralds_pure_state() {
        let jsa = synthetic_jsa(32, &[1.0]);
        let d = decompose(&jsa).unwrap();
        let rho = d.heralded_density_matrix(Arm::Idler);
        assert!((rho.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_at_zero_delay_is_purity() {
        let d = default_decomposition(128);
        let rho = d.heralded_density_matrix(Arm::Signal);
        let o = overlap(&rho, &rho, 0.0).unwrap();
        assert!((o - d.purity()).abs() < 1e-9);
    }

    #[test]
    fn overlap_decays_at_large_delay() {
        let d = default_decomposition(128);
        let rho = d.heralded_density_matrix(Arm::Signal);
        let o = overlap(&rho, &rho, 200e-12).unwrap();
        assert!(o.abs() < 1e-3, "overlap at 200 ps = {o}");
    }

    #[test]
    fn overlap_width_golden() {
        // in the single-pair limit the dip profile is exactly 1 - O(tau), so
        // this width is the coincidence-dip FWHM; set by the 8.9 ps
        // signal-idler walkoff and the pump bandwidth
        let d = default_decomposition(128);
        let rho = d.heralded_density_matrix(Arm::Signal);
        let fwhm = overlap_half_width(&rho, &rho).unwrap();
        assert!(
            (fwhm * 1e12 - 4.7).abs() < 0.4,
            "overlap FWHM {:.2} ps",
            fwhm * 1e12
        );
    }

    #[test]
    fn maximally_mixed_overlap_is_one_over_d() {
        for dim in [2usize, 5, 8] {
            let eye = DMatrix::<Complex64>::identity(dim, dim)
                / Complex64::new(dim as f64, 0.0);
            let rho = SpectralDensityMatrix {
                axis: (0..dim).map(|i| i as f64).collect(),
                matrix: eye,
            };
            let v = eq1_visibility(&rho, &rho).unwrap();
            assert_relative_eq!(v.trace_product, 1.0 / dim as f64, epsilon = 1e-12);
            assert!(v.consistency() < 1e-12);
        }
    }

    #[test]
    fn identical_pure_states_reach_unit_visibility() {
        let jsa = synthetic_jsa(32, &[1.0]);
        let d = decompose(&jsa).unwrap();
        let rho = d.heralded_density_matrix(Arm::Signal);
        let v = eq1_visibility(&rho, &rho).unwrap();
        assert_relative_eq!(v.trace_product, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let mut rng = rand::thread_rng();
        let a = random_density(8, &mut rng);
        let b = random_density(9, &mut rng);
        assert!(matches!(overlap(&a, &b, 0.0), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn eq1_identity_holds(seed in any::<u64>(), dim in 2usize..12) {
            let mut rng = crate::rng::RngKey::new(seed).stream();
            let rho1 = random_density(dim, &mut rng);
            let rho2 = random_density(dim, &mut rng);
            let v = eq1_visibility(&rho1, &rho2).unwrap();
            prop_assert!(v.consistency() < 1e-10, "defect {}", v.consistency());
        }

        #[test]
        fn overlap_symmetric_and_bounded(seed in any::<u64>(), dim in 2usize..10,
                                         delay_ps in -20.0f64..20.0) {
            let mut rng = crate::rng::RngKey::new(seed).stream();
            let rho1 = random_density(dim, &mut rng);
            let rho2 = random_density(dim, &mut rng);
            let tau = delay_ps * 1e-12;
            let fwd = overlap(&rho1, &rho2, tau).unwrap();
            let rev = overlap(&rho2, &rho1, -tau).unwrap();
            prop_assert!((fwd - rev).abs() < 1e-10);
            let bound = (rho1.purity() * rho2.purity()).sqrt();
            prop_assert!(fwd <= bound + 1e-10, "overlap {fwd} > bound {bound}");
        }
    }
}
