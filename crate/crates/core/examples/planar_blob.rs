//! A self-gravitating Gaussian blob in the plane, drifting and contracting.

use snlab::evolve::AdiEvolver;
use snlab::fields::{EvolutionConfig, PlanarWave, SpongeProfile, WaveField};
use snlab::oracle::free_gaussian_planar;
use snlab::poisson::DEFAULT_COUPLING;
use snlab::spectral::TensorGrid2D;

fn main() -> snlab::Result<()> {
    let t = TensorGrid2D::planar(40, 40.0)?;
    let mut w = PlanarWave::from_fn(t, |x, y| free_gaussian_planar(x, y, 0.0, 2.0, (-3.0, 0.0), (0.1, 0.05)));
    w.normalize_to(1.0)?;
    let cfg = EvolutionConfig {
        dt: 0.1,
        t_end: 40.0,
        sponge: Some(SpongeProfile::DEFAULT_PLANAR),
        output_every: 40,
        ..Default::default()
    };
    let mut recs = Vec::new();
    AdiEvolver::planar(w, cfg, DEFAULT_COUPLING)?.evolve(&mut recs)?;
    for r in &recs {
        println!("t={:5.1} P={:.6} calE={:.6} J2={:.4} phi_its={}", r.t, r.p_grid, r.e_conserved, r.j2, r.phi_iterations);
    }
    Ok(())
}
