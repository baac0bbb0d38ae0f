//! Spectral Poisson solves against a fine finite-difference oracle, and the
//! axisymmetric PR-ADI solver against the radial one.

use snlab::oracle::fd_poisson_radial;
use snlab::poisson::{PrAdiSolver, RadialPoisson, DEFAULT_COUPLING};
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};

fn shell(r: f64) -> f64 {
    r * r * (-(r - 10.0).powi(2) / 9.0).exp()
}

fn main() -> snlab::Result<()> {
    for n in [32, 64, 128] {
        let g = ChebyshevGrid1D::new(n, 40.0)?;
        let dens: Vec<f64> = g.nodes().iter().map(|&r| shell(r)).collect();
        let phi = RadialPoisson::new(&g, DEFAULT_COUPLING)?.solve_density(&dens);
        let fd = fd_poisson_radial(shell, 40.0, DEFAULT_COUPLING, 40_000, g.nodes())?;
        let err = phi.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("radial n={n:4}: sup |spectral - fd| = {err:.2e}");
    }

    let t = TensorGrid2D::axisymmetric(48, 40.0, 12)?;
    let dens: Vec<f64> = (0..t.len()).map(|q| shell(t.coords(q / t.n_b(), q % t.n_b()).0)).collect();
    let sol = PrAdiSolver::new(&t, DEFAULT_COUPLING, None)?.solve(&dens, 1e-12, 2000, None)?;
    let radial = RadialPoisson::new(&t.grid_a, DEFAULT_COUPLING)?
        .solve_density(&t.grid_a.nodes().iter().map(|&r| shell(r)).collect::<Vec<_>>());
    let err = (0..t.len()).fold(0.0f64, |m, q| m.max((sol.phi.values[q] - radial[q / t.n_b()]).abs()));
    println!("pr-adi: {} sweeps, sup |axi - radial| = {err:.2e}", sol.iterations);
    Ok(())
}
