//! A free Gaussian shell against its closed form, then the same shell
//! leaving through the sponge.

use snlab::evolve::SphericalEvolver;
use snlab::fields::{EvolutionConfig, PotentialMode, RadialWave, SpongeProfile};
use snlab::oracle::{free_gaussian, normalize_gaussian};
use snlab::poisson::DEFAULT_COUPLING;
use snlab::spectral::ChebyshevGrid1D;

fn main() -> snlab::Result<()> {
    let grid = ChebyshevGrid1D::new(256, 100.0)?;
    let (sigma, a, v) = (6.0, 50.0, 0.5);
    let c = normalize_gaussian(sigma, a, v, &grid)?;
    let start = RadialWave::from_fn(grid.clone(), |r| free_gaussian(r, 0.0, sigma, a, v, c));

    let cfg = EvolutionConfig { dt: 0.05, t_end: 20.0, potential_mode: PotentialMode::Zero, output_every: 100, ..Default::default() };
    let mut ev = SphericalEvolver::new(start.clone(), cfg, DEFAULT_COUPLING)?;
    ev.evolve(&mut Vec::new())?;
    let err = ev
        .wave()
        .values
        .iter()
        .zip(grid.nodes())
        .fold(0.0f64, |m, (z, &r)| m.max((z - free_gaussian(r, 20.0, sigma, a, v, c)).norm()));
    println!("no sponge, t=20: sup |u - exact| = {err:.2e}");

    let cfg = EvolutionConfig {
        dt: 0.25,
        t_end: 300.0,
        potential_mode: PotentialMode::Zero,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        output_every: 80,
        ..Default::default()
    };
    let mut recs = Vec::new();
    SphericalEvolver::new(start, cfg, DEFAULT_COUPLING)?.evolve(&mut recs)?;
    for r in &recs {
        println!("t={:6.1} P={:.6}", r.t, r.p_grid);
    }
    Ok(())
}
