use homsim::schmidt::*;
use homsim::sellmeier::*;
use homsim::spectral::*;

fn fit(taus: &[f64], counts: &[f64], w: f64) -> (f64, f64, f64) {
    let (mut s_w, mut s_g, mut s_gg, mut s_c, mut s_gc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, c) in taus.iter().zip(counts) {
        let wt = 1.0 / c.max(1.0);
        let g = (-4.0 * (2f64).ln() * t * t / (w * w)).exp();
        s_w += wt; s_g += wt * g; s_gg += wt * g * g; s_c += wt * c; s_gc += wt * g * c;
    }
    let det = s_w * s_gg - s_g * s_g;
    let b = (s_gg * s_c - s_g * s_gc) / det;
    let a = (s_g * s_c - s_w * s_gc) / det;
    let sse: f64 = taus.iter().zip(counts).map(|(t, c)| {
        let g = (-4.0 * (2f64).ln() * t * t / (w * w)).exp();
        let m = b - a * g;
        (c - m) * (c - m) / c.max(1.0)
    }).sum();
    (sse, b, a)
}

fn eval(pump_ps: f64, dl_nm: f64) {
    let d = Dispersion::ktp();
    let mut params = SourceParams::default();
    params.pump_duration_fwhm = pump_ps * 1e-12;
    let src = params.resolve(&d).unwrap();
    let grid = FrequencyGrid::for_params(&params, 256, 10.0);
    let mut jsa = build_jsa(&src, &grid).unwrap();
    if dl_nm > 0.0 {
        let lam = params.degenerate_wavelength;
        let dw = std::f64::consts::TAU * SPEED_OF_LIGHT / (lam * lam) * dl_nm * 1e-9;
        let n = grid.n_points;
        for s in 0..n {
            for i in 0..n {
                let ds = grid.signal_value(s) - grid.center_signal;
                let di = grid.idler_value(i) - grid.center_idler;
                let f = (-2.0 * (2f64).ln() * (ds * ds + di * di) / (dw * dw)).exp();
                jsa.amplitude[(s, i)] *= f;
            }
        }
        let norm = jsa.norm_l2().sqrt();
        jsa.amplitude /= num_complex::Complex64::new(norm, 0.0);
    }
    let dec = decompose(&jsa).unwrap();
    let rho = dec.heralded_density_matrix(Arm::Signal);
    let k_jsi = schmidt_number_of_jsi(&jsa.intensity()).unwrap();
    let taus: Vec<f64> = (0..21).map(|i| (i as f64 - 10.0) * 1.5e-12).collect();
    let counts: Vec<f64> = taus.iter().map(|t| 520.0 * (1.0 - overlap(&rho, &rho, *t).unwrap())).collect();
    let mut best = (f64::INFINITY, 0.0);
    for wi in 1..3000 {
        let w = wi as f64 * 0.005e-12;
        let (sse, _, _) = fit(&taus, &counts, w);
        if sse < best.0 { best = (sse, w); }
    }
    println!("pump {pump_ps:.1} ps, filter {dl_nm:.1} nm: purity={:.4} K_jsi={:.4} FWHM={:.2} ps",
             dec.purity(), k_jsi, best.1 * 1e12);
}

fn main() {
    for pump in [2.0, 2.3, 2.6, 3.0] {
        for dl in [1.6, 1.4, 1.2, 1.0] {
            eval(pump, dl);
        }
    }
}
