use proptest::prelude::*;
use snlab::diagnostics::{
    angular_momentum_j2, conserved_energy, energy_functional, fit_rescaled_ground, power_spectrum, read_diagnostics_csv,
    rescaled_ground, residual_bound, richardson_order, DiagnosticsRecord, Observables, CSV_HEADER,
};
use snlab::fields::{AxiWave, PlanarWave, RadialWave, WaveField};
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};
use snlab::stationary::spherical_stationary;
use snlab::{Error, C64};
use std::f64::consts::PI;

#[test]
fn bound_examples_and_domain() {
    assert!((residual_bound(-0.3, -0.3).unwrap() - 1.0).abs() < 1e-15);
    assert!((residual_bound(-0.3 / 27.0, -0.3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(residual_bound(0.0, -0.3), Err(Error::BoundInapplicable(_))));
    assert!(residual_bound(-0.1, 0.2).is_err());
}

#[test]
fn flat_data_is_indeterminate() {
    assert!(matches!(richardson_order(2.0, 2.0, 2.0), Err(Error::Indeterminate(_))));
    assert!(matches!(richardson_order(1.0, 3.0, 2.0), Err(Error::Indeterminate(_))));
}

#[test]
fn radial_kinetic_energy_of_sine_mode() {
    let l = 10.0;
    let g = ChebyshevGrid1D::new(40, l).unwrap();
    let w = RadialWave::from_fn(g, |r| C64::new((PI * r / l).sin(), 0.0));
    let k = PI / l;
    assert!((w.kinetic() - k * k * l / 2.0).abs() < 1e-10);
}

#[test]
fn planar_j2_of_a_vortex() {
    // ψ = (x + iy)e^{−ρ²/2} is an L_z eigenstate with eigenvalue 1, so J² = ∫|ψ|².
    let t = TensorGrid2D::planar(64, 18.0).unwrap();
    let w = PlanarWave::from_fn(t, |x, y| C64::new(x, y) * (-(x * x + y * y) / 2.0).exp());
    let (j, p) = (angular_momentum_j2(&w), w.probability());
    assert!((j - p).abs() < 1e-9, "{j} vs {p}");
}

#[test]
fn axi_j2_of_a_dipole_profile() {
    // u = f(r)cos θ has ∫∫|u_θ|² sinθ = ∫f²·(4/3) and probability ½∫f²·(2/3).
    let t = TensorGrid2D::axisymmetric(32, 20.0, 16).unwrap();
    let w = AxiWave::from_fn(t, |r, th| C64::new(r * (-r).exp() * th.cos(), 0.0));
    assert!((angular_momentum_j2(&w) - 4.0 * w.probability()).abs() < 1e-9);
}

#[test]
fn rescaled_ground_fits_itself() {
    let g = ChebyshevGrid1D::new(96, 60.0).unwrap();
    let ground = spherical_stationary(0, &g, 1e-11, 300).unwrap();
    let wave = rescaled_ground(&ground.wave, 0.8, &g);
    let (p, resid) = fit_rescaled_ground(&wave, &ground).unwrap();
    assert!((p - 0.8).abs() < 1e-6);
    assert!(resid < 1e-6, "{resid:e}");
    let mut faint = ground.wave.clone();
    faint.scale(0.05);
    assert!(matches!(fit_rescaled_ground(&faint, &ground), Err(Error::FitMeaningless(_))));
}

#[test]
fn csv_file_round_trip() {
    let recs: Vec<DiagnosticsRecord> = (0..5)
        .map(|k| DiagnosticsRecord {
            t: k as f64 * 0.1,
            p_grid: 1.0 - k as f64 * 1e-3,
            e_conserved: -0.05 / 3.0,
            e_functional: -0.159,
            j2: 0.0,
            probe_phase: 0.1592 * k as f64,
            phi_iterations: 3,
        })
        .collect();
    let mut text = format!("{CSV_HEADER}\n");
    for r in &recs {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    assert_eq!(read_diagnostics_csv(&text).unwrap(), recs);
    assert!(DiagnosticsRecord::from_csv("1,2,3").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_is_scale_free(e in -5.0f64..-1e-3, e0 in -5.0f64..-1e-3, c in 0.01f64..100.0) {
        let b = residual_bound(e, e0).unwrap();
        prop_assert!((residual_bound(c * e, c * e0).unwrap() - b).abs() < 1e-12 * b.max(1.0));
        prop_assert!((b.powi(3) - e / e0).abs() < 1e-12 * (e / e0).max(1.0));
    }

    #[test]
    fn bound_grows_with_binding(e in -5.0f64..-1e-3, extra in 0.0f64..2.0, e0 in -5.0f64..-1e-3) {
        prop_assert!(residual_bound(e - extra, e0).unwrap() >= residual_bound(e, e0).unwrap());
    }

    #[test]
    fn richardson_recovers_power_laws(k in 1u32..4, c in 0.1f64..5.0, o in -3.0f64..3.0, h in 0.01f64..0.2) {
        let f = |s: f64| o + c * s.powi(k as i32);
        let got = richardson_order(f(h), f(h / 2.0), f(h / 4.0)).unwrap();
        prop_assert!((got - k as f64).abs() < 1e-6);
    }

    #[test]
    fn energies_differ_by_half_the_potential_term(s in 0.5f64..3.0, c in 2.0f64..12.0, depth in 0.01f64..2.0) {
        let g = ChebyshevGrid1D::new(48, 30.0).unwrap();
        let w = RadialWave::from_fn(g.clone(), |r| C64::new(r * (-(r - c).powi(2) / (s * s)).exp(), 0.2 * (r / 7.0).sin()));
        let phi: Vec<f64> = g.nodes().iter().map(|&r| -depth / (1.0 + r)).collect();
        let lhs = energy_functional(&w, &phi) - conserved_energy(&w, &phi);
        let dens: Vec<f64> = w.values.iter().zip(&phi).map(|(z, p)| p * z.norm_sqr()).collect();
        prop_assert!((lhs - 0.5 * g.integrate(&dens)).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn j2_ignores_phase_and_reflection(theta in -3.2f64..3.2, tilt in -0.9f64..0.9) {
        let t = TensorGrid2D::axisymmetric(24, 15.0, 12).unwrap();
        let f = move |r: f64, th: f64| C64::new(r * (-r / 2.0).exp() * (1.0 + tilt * th.cos()), 0.0);
        let w = AxiWave::from_fn(t.clone(), f);
        let mut rot = w.clone();
        rot.values.iter_mut().for_each(|z| *z *= C64::from_polar(1.0, theta));
        let flipped = AxiWave::from_fn(t, move |r, th| f(r, PI - th));
        let j = angular_momentum_j2(&w);
        prop_assert!((angular_momentum_j2(&rot) - j).abs() < 1e-10 * j.max(1e-3));
        prop_assert!((angular_momentum_j2(&flipped) - j).abs() < 1e-8 * j.max(1e-3));
    }

    #[test]
    fn a_pure_tone_gives_one_peak(bin in 5usize..200, amp in 0.1f64..10.0) {
        let (n, dt) = (1024usize, 0.25);
        let omega = 2.0 * PI * bin as f64 / (n as f64 * dt);
        let s: Vec<C64> = (0..n).map(|k| C64::from_polar(amp, -omega * k as f64 * dt)).collect();
        let peaks = power_spectrum(&s, dt).unwrap();
        prop_assert_eq!(peaks.len(), 1);
        prop_assert!((peaks[0].0 + omega).abs() < 1e-9);
    }

    #[test]
    fn records_survive_csv(t in 0.0f64..1e5, p in 0.0f64..1.0, e in -1.0f64..1.0, its in 0usize..60) {
        let r = DiagnosticsRecord { t, p_grid: p, e_conserved: e, e_functional: 2.0 * e, j2: p * 5.0, probe_phase: -t, phi_iterations: its };
        prop_assert_eq!(DiagnosticsRecord::from_csv(&r.to_csv()).unwrap(), r);
    }
}
