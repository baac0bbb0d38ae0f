//! Axisymmetric ground and dipole states with their energies and J².

use std::time::Instant;

use snlab::spectral::TensorGrid2D;
use snlab::stationary::{axi_stationary, StationaryResidual};

fn main() -> snlab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (n_r, n_theta) = (args.first().copied().unwrap_or(64), args.get(1).copied().unwrap_or(16));
    let grid = TensorGrid2D::axisymmetric(n_r, 100.0, n_theta)?;
    for sel in [(0, 0), (1, 0)] {
        let clock = Instant::now();
        let s = axi_stationary(sel, &grid, 1e-9, 300)?;
        println!(
            "{:5} E={:.5} J2={:.4} outer={} residual={:.1e} E_functional={:.6} ({:.1}s)",
            s.label,
            s.energy,
            s.j2,
            s.outer_iterations,
            s.residual()?,
            s.energy_functional(),
            clock.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
