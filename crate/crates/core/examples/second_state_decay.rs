//! Perturbed second spherical state: watch it shed probability and settle
//! towards a rescaled ground state.
//!
//! Usage: second_state_decay [epsilon] [dt] [t_end]

use snlab::cli::run::radial_conserved_energy;
use snlab::diagnostics::{fit_rescaled_ground, residual_bound, DiagnosticsRecord, DiagnosticsSink};
use snlab::evolve::SphericalEvolver;
use snlab::fields::{EvolutionConfig, Perturbation, SpongeProfile, WaveField};
use snlab::poisson::{RadialPoisson, DEFAULT_COUPLING};
use snlab::spectral::ChebyshevGrid1D;
use snlab::stationary::spherical_stationary;

struct Quiet;

impl DiagnosticsSink for Quiet {
    fn record(&mut self, _: &DiagnosticsRecord) -> snlab::Result<()> {
        Ok(())
    }
}

fn local_maxima(values: &[f64]) -> usize {
    values.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2] && w[1] > 1e-3).count()
}

fn main() -> snlab::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let eps = args.first().copied().unwrap_or(1e-2);
    let dt = args.get(1).copied().unwrap_or(0.2);
    let t_end = args.get(2).copied().unwrap_or(4000.0);
    let grid = ChebyshevGrid1D::new(256, 100.0)?;
    let poisson = RadialPoisson::new(&grid, DEFAULT_COUPLING)?;
    let ground = spherical_stationary(0, &grid, 1e-11, 400)?;
    let second = spherical_stationary(1, &grid, 1e-11, 400)?;
    let e0 = radial_conserved_energy(&ground.wave, &poisson);
    let e1 = radial_conserved_energy(&second.wave, &poisson);
    println!("E0 {:.6} E1 {:.6} calE0 {e0:.6} calE1 {e1:.6} bound(calE_I) {:.4}", ground.energy, second.energy, residual_bound(e1, e0)?);
    let chunk = 500.0;
    let cfg = EvolutionConfig {
        dt,
        t_end: chunk,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        perturbation: Some(Perturbation { epsilon: eps, mode: 1 }),
        output_every: 1000,
        ..Default::default()
    };
    let mut ev = SphericalEvolver::new(second.wave.clone(), cfg.clone(), DEFAULT_COUPLING)?;
    let mut t = 0.0;
    let clock = std::time::Instant::now();
    while t < t_end {
        t += chunk;
        let snap = ev.checkpoint();
        let mut next = SphericalEvolver::resume(&snap, EvolutionConfig { t_end: t, ..cfg.clone() }, DEFAULT_COUPLING)?;
        next.evolve(&mut Quiet)?;
        ev = next;
        let w = ev.wave();
        let ce = radial_conserved_energy(w, &poisson);
        let fit = fit_rescaled_ground(w, &ground).map(|f| f.1).unwrap_or(f64::NAN);
        let abs: Vec<f64> = w.values.iter().map(|z| z.norm()).collect();
        println!(
            "t={t:.0} P={:.5} calE={ce:.6} bound_t={:.4} fit={fit:.4} maxima={} ({:.0}s)",
            w.probability(),
            residual_bound(ce, e0).unwrap_or(f64::NAN),
            local_maxima(&abs),
            clock.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
