use snlab::diagnostics::{DiagnosticsRecord, DiagnosticsSink};
use snlab::evolve::{AdiEvolver, SphericalEvolver};
use snlab::fields::{
    AxiWave, EvolutionConfig, Perturbation, PlanarWave, PotentialMode, RadialWave, Snapshot, SpongeProfile, WaveField,
};
use snlab::oracle::{free_gaussian, free_gaussian_planar, normalize_gaussian};
use snlab::poisson::DEFAULT_COUPLING;
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};
use snlab::stationary::spherical_stationary;
use snlab::C64;

#[derive(Default)]
struct Capture {
    records: Vec<DiagnosticsRecord>,
    checkpoints: Vec<Snapshot>,
}

impl DiagnosticsSink for Capture {
    fn record(&mut self, rec: &DiagnosticsRecord) -> snlab::Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn checkpoint(&mut self, s: &Snapshot) -> snlab::Result<()> {
        self.checkpoints.push(s.clone());
        Ok(())
    }
}

fn ground(n: usize, l: f64) -> RadialWave {
    spherical_stationary(0, &ChebyshevGrid1D::new(n, l).unwrap(), 1e-12, 300).unwrap().wave
}

fn outgoing_gaussian(n: usize) -> RadialWave {
    let g = ChebyshevGrid1D::new(n, 100.0).unwrap();
    let c = normalize_gaussian(6.0, 30.0, 0.5, &g).unwrap();
    RadialWave::from_fn(g, |r| free_gaussian(r, 0.0, 6.0, 30.0, 0.5, c))
}

#[test]
fn ground_state_only_rotates_its_phase() {
    let g = ChebyshevGrid1D::new(96, 60.0).unwrap();
    let state = spherical_stationary(0, &g, 1e-12, 300).unwrap();
    let cfg = EvolutionConfig { dt: 1e-2, t_end: 1.0, phi_tolerance: 1e-12, ..Default::default() };
    let mut ev = SphericalEvolver::new(state.wave.clone(), cfg, DEFAULT_COUPLING).unwrap();
    ev.cn_step().unwrap();
    let rot = C64::from_polar(1.0, -state.energy * 1e-2);
    let err = ev
        .wave()
        .values
        .iter()
        .zip(&state.wave.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b * rot).norm()));
    assert!(err < 1e-8, "one-step deviation {err:e}");
}

#[test]
fn ground_state_keeps_modulus_and_probability() {
    let u0 = ground(96, 60.0);
    let cfg = EvolutionConfig { dt: 1e-2, t_end: 10.0, output_every: 100, phi_tolerance: 1e-12, ..Default::default() };
    let mut ev = SphericalEvolver::new(u0.clone(), cfg, DEFAULT_COUPLING).unwrap();
    let mut recs = Vec::new();
    ev.evolve(&mut recs).unwrap();
    let p0 = recs[0].p_grid;
    for r in &recs {
        assert!((r.p_grid - p0).abs() < 1e-8 * r.t.max(1.0), "t = {}: {:e}", r.t, r.p_grid - p0);
    }
    let dev = ev.wave().values.iter().zip(&u0.values).fold(0.0f64, |m, (a, b)| m.max((a.norm() - b.norm()).abs()));
    assert!(dev < 1e-4, "|u| moved by {dev:e}");
}

#[test]
fn conserved_energy_drift_is_small() {
    let mut w = ground(96, 60.0);
    Perturbation { epsilon: 0.05, mode: 2 }.apply_radial(&mut w).unwrap();
    let cfg = EvolutionConfig { dt: 0.01, t_end: 10.0, output_every: 100, phi_tolerance: 1e-12, ..Default::default() };
    let mut ev = SphericalEvolver::new(w, cfg, DEFAULT_COUPLING).unwrap();
    let mut recs = Vec::new();
    ev.evolve(&mut recs).unwrap();
    let e0 = recs[0].e_conserved;
    let drift = recs.iter().fold(0.0f64, |m, r| m.max((r.e_conserved - e0).abs()));
    assert!(drift < 1e-6, "energy drift {drift:e}");
}

#[test]
fn sponge_never_adds_probability() {
    let cfg = EvolutionConfig {
        dt: 0.25,
        t_end: 250.0,
        output_every: 4,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        potential_mode: PotentialMode::Zero,
        ..Default::default()
    };
    let mut ev = SphericalEvolver::new(outgoing_gaussian(128), cfg, DEFAULT_COUPLING).unwrap();
    let mut recs = Vec::new();
    ev.evolve(&mut recs).unwrap();
    for pair in recs.windows(2) {
        assert!(pair[1].p_grid <= pair[0].p_grid + 1e-12);
    }
    assert!(recs.last().unwrap().p_grid < 0.5);
}

#[test]
fn spherical_resume_is_bit_exact() {
    let cfg = EvolutionConfig { dt: 0.05, t_end: 4.0, output_every: 5, checkpoint_every: 20, ..Default::default() };
    let mut full = Capture::default();
    SphericalEvolver::new(outgoing_gaussian(96), cfg.clone(), DEFAULT_COUPLING).unwrap().evolve(&mut full).unwrap();
    let cp = full.checkpoints.iter().find(|s| s.extra["step"] == "40").unwrap();
    let text = cp.to_text();
    let mut resumed = Capture::default();
    SphericalEvolver::resume(&Snapshot::parse(&text).unwrap(), cfg, DEFAULT_COUPLING)
        .unwrap()
        .evolve(&mut resumed)
        .unwrap();
    let tail: Vec<_> = full.records.iter().filter(|r| r.t > 2.0 + 1e-9).cloned().collect();
    assert_eq!(tail.len(), resumed.records.len());
    assert_eq!(tail, resumed.records);
}

#[test]
fn invalid_configs_are_rejected() {
    let w = outgoing_gaussian(32);
    for cfg in [
        EvolutionConfig { dt: -1.0, ..Default::default() },
        EvolutionConfig { dt: 2.0, t_end: 1.0, ..Default::default() },
        EvolutionConfig { output_every: 0, ..Default::default() },
        EvolutionConfig { sponge: Some(SpongeProfile::Radial { a: -1.0, b: 0.1 }), ..Default::default() },
    ] {
        assert!(SphericalEvolver::new(w.clone(), cfg, DEFAULT_COUPLING).is_err());
    }
}

#[test]
fn planar_free_gaussian_matches_closed_form() {
    let t = TensorGrid2D::planar(96, 30.0).unwrap();
    let (sigma, c, v) = (2.0, (-1.0, 0.5), (0.6, -0.4));
    let w = PlanarWave::from_fn(t.clone(), |x, y| free_gaussian_planar(x, y, 0.0, sigma, c, v));
    let cfg = EvolutionConfig { dt: 5e-3, t_end: 1.0, potential_mode: PotentialMode::Zero, output_every: 200, ..Default::default() };
    let mut ev = AdiEvolver::planar(w, cfg, DEFAULT_COUPLING).unwrap();
    ev.evolve(&mut Vec::new()).unwrap();
    let nb = t.n_b();
    let err = ev.values().iter().enumerate().fold(0.0f64, |m, (q, z)| {
        let (x, y) = t.coords(q / nb, q % nb);
        m.max((z - free_gaussian_planar(x, y, 1.0, sigma, c, v)).norm())
    });
    assert!(err < 1e-4, "sup error {err:e}");
}

#[test]
fn embedded_ground_state_stays_put_under_adi() {
    let t = TensorGrid2D::axisymmetric(64, 40.0, 8).unwrap();
    let u0 = ground(64, 40.0);
    let w = AxiWave::from_fn(t, |r, _| {
        let re: Vec<f64> = u0.values.iter().map(|z| z.re).collect();
        C64::new(u0.grid.interpolate(&re, r), 0.0)
    });
    let start = w.clone();
    let cfg = EvolutionConfig { dt: 0.05, t_end: 5.0, output_every: 20, phi_tolerance: 1e-11, ..Default::default() };
    let mut ev = AdiEvolver::axi(w, cfg, DEFAULT_COUPLING).unwrap();
    let mut recs = Vec::new();
    ev.evolve(&mut recs).unwrap();
    let dev = ev.values().iter().zip(&start.values).fold(0.0f64, |m, (a, b)| m.max((a.norm() - b.norm()).abs()));
    assert!(dev < 1e-3, "|u| moved by {dev:e}");
    let p0 = recs[0].p_grid;
    assert!(recs.iter().all(|r| (r.p_grid - p0).abs() < 1e-4));
    assert!(recs.iter().all(|r| r.j2.abs() < 1e-8));
}

#[test]
fn axi_evolution_keeps_poles_regular() {
    let t = TensorGrid2D::axisymmetric(32, 30.0, 12).unwrap();
    let mut w = AxiWave::from_fn(t, |r, th| C64::new(r * (-(r - 5.0).powi(2) / 8.0).exp() * (1.0 + 0.3 * th.cos()), 0.0));
    w.normalize_to(1.0).unwrap();
    let cfg = EvolutionConfig { dt: 0.05, t_end: 2.0, output_every: 10, ..Default::default() };
    let mut ev = AdiEvolver::axi(w, cfg, DEFAULT_COUPLING).unwrap();
    for _ in 0..40 {
        ev.adi_step().unwrap();
        assert!(ev.pole_derivative() < 1e-8, "pole derivative {:e}", ev.pole_derivative());
    }
}

#[test]
fn planar_resume_is_bit_exact() {
    let t = TensorGrid2D::planar(24, 20.0).unwrap();
    let w = PlanarWave::from_fn(t, |x, y| free_gaussian_planar(x, y, 0.0, 2.0, (1.0, 0.0), (0.0, 0.3)));
    let cfg = EvolutionConfig { dt: 0.05, t_end: 2.0, output_every: 4, checkpoint_every: 10, ..Default::default() };
    let mut full = Capture::default();
    AdiEvolver::planar(w, cfg.clone(), DEFAULT_COUPLING).unwrap().evolve(&mut full).unwrap();
    let cp = Snapshot::parse(&full.checkpoints[1].to_text()).unwrap();
    let mut resumed = Capture::default();
    AdiEvolver::resume(&cp, cfg, DEFAULT_COUPLING).unwrap().evolve(&mut resumed).unwrap();
    let tail: Vec<_> = full.records.iter().filter(|r| r.t > cp.t + 1e-9).cloned().collect();
    assert_eq!(tail, resumed.records);
}
