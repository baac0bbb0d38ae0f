//! Spherical ground and first excited states on the standard radial grid.

use snlab::spectral::ChebyshevGrid1D;
use snlab::stationary::{spherical_stationary, StationaryResidual};

fn main() -> snlab::Result<()> {
    let grid = ChebyshevGrid1D::new(256, 100.0)?;
    for k in 0..3 {
        let s = spherical_stationary(k, &grid, 1e-10, 300)?;
        println!(
            "{:6} k={k} E={:.6} outer={} residual={:.2e} E_functional={:.6}",
            s.label,
            s.energy,
            s.outer_iterations,
            s.residual()?,
            s.energy_functional()
        );
    }
    Ok(())
}
