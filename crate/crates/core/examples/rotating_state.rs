//! Rigidly rotating planar dipole by continuation in the angular velocity.
//!
//! Usage: rotating_state [omega] [n] [side]

use std::time::Instant;

use snlab::spectral::TensorGrid2D;
use snlab::stationary::{rotating_stationary, StationaryResidual};

fn main() -> snlab::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let omega = args.first().copied().unwrap_or(0.005);
    let n = args.get(1).copied().unwrap_or(36.0) as usize;
    let side = args.get(2).copied().unwrap_or(40.0);
    let grid = TensorGrid2D::planar(n, side)?;
    let clock = Instant::now();
    let s = rotating_stationary(omega, 0.001, &grid, 1e-10)?;
    let im = s.wave.values.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    println!(
        "omega={omega} E={:.6} J2={:.4} outer={} residual={:.2e} max|Im|={im:.3e} ({:.1}s)",
        s.energy,
        s.j2,
        s.outer_iterations,
        s.residual()?,
        clock.elapsed().as_secs_f64()
    );
    Ok(())
}
