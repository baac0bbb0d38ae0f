//! The ground state embedded on the (r, θ) grid with a quadrupole kick.
//! Prints probability, energy and angular momentum as the kick rings down.

use snlab::evolve::AdiEvolver;
use snlab::fields::{AxiWave, EvolutionConfig, SpongeProfile, WaveField};
use snlab::poisson::DEFAULT_COUPLING;
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};
use snlab::stationary::spherical_stationary;
use snlab::C64;

fn main() -> snlab::Result<()> {
    let (n, l) = (64, 100.0);
    let ground = spherical_stationary(0, &ChebyshevGrid1D::new(n, l)?, 1e-11, 300)?;
    let re: Vec<f64> = ground.wave.values.iter().map(|z| z.re).collect();
    let t = TensorGrid2D::axisymmetric(n, l, 12)?;
    let mut w = AxiWave::from_fn(t, |r, th| {
        let p2 = 1.5 * th.cos().powi(2) - 0.5;
        C64::new(ground.wave.grid.interpolate(&re, r) * (1.0 + 0.05 * p2), 0.0)
    });
    w.normalize_to(1.0)?;
    let cfg = EvolutionConfig {
        dt: 0.5,
        t_end: 200.0,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        output_every: 40,
        ..Default::default()
    };
    let mut recs = Vec::new();
    AdiEvolver::axi(w, cfg, DEFAULT_COUPLING)?.evolve(&mut recs)?;
    for r in &recs {
        println!("t={:6.1} P={:.6} calE={:.6} J2={:.3e} phi_its={}", r.t, r.p_grid, r.e_conserved, r.j2, r.phi_iterations);
    }
    Ok(())
}
