use proptest::prelude::*;
use snlab::oracle::fd_poisson_radial;
use snlab::poisson::{PrAdiSolver, RadialPoisson, DEFAULT_COUPLING};
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};
use snlab::Error;
use std::f64::consts::PI;

const G: f64 = DEFAULT_COUPLING;

fn shell(r: f64) -> f64 {
    r * r * (-(r - 6.0) * (r - 6.0) / 4.0).exp()
}

#[test]
fn radial_gaussian_matches_finite_differences() {
    let g = ChebyshevGrid1D::new(128, 30.0).unwrap();
    let dens: Vec<f64> = g.nodes().iter().map(|&r| shell(r)).collect();
    let phi = RadialPoisson::new(&g, G).unwrap().solve_density(&dens);
    let fd = fd_poisson_radial(shell, 30.0, G, 20_000, g.nodes()).unwrap();
    let err = phi.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-6, "sup error {err:e}");
}

#[test]
fn radial_manufactured_solution() {
    let l = 12.0;
    let g = ChebyshevGrid1D::new(48, l).unwrap();
    let k = PI / l;
    // rφ = sin(kr), so |u|² = r·(rφ)''/G.
    let dens: Vec<f64> = g.nodes().iter().map(|&r| -r * k * k * (k * r).sin() / G).collect();
    let phi = RadialPoisson::new(&g, G).unwrap().solve_density(&dens);
    assert!((phi[0] - k).abs() < 1e-10);
    for (&r, p) in g.nodes().iter().zip(&phi).skip(1) {
        assert!((p - (k * r).sin() / r).abs() < 1e-10, "r = {r}");
    }
}

#[test]
fn free_space_shift_is_enclosed_mass() {
    let g = ChebyshevGrid1D::new(96, 40.0).unwrap();
    let dens: Vec<f64> = g.nodes().iter().map(|&r| shell(r)).collect();
    let solver = RadialPoisson::new(&g, G).unwrap();
    let phi = solver.solve_density(&dens);
    let mass = g.integrate(&dens);
    assert!((solver.free_space_shift(&phi) - G * mass / 40.0).abs() < 1e-9);
}

#[test]
fn axi_solver_reproduces_radial_solver() {
    let t = TensorGrid2D::axisymmetric(48, 30.0, 12).unwrap();
    let dens: Vec<f64> = (0..t.len()).map(|q| shell(t.coords(q / t.n_b(), q % t.n_b()).0)).collect();
    let sol = PrAdiSolver::new(&t, G, None).unwrap().solve(&dens, 1e-12, 2000, None).unwrap();
    let radial = RadialPoisson::new(&t.grid_a, G)
        .unwrap()
        .solve_density(&t.grid_a.nodes().iter().map(|&r| shell(r)).collect::<Vec<_>>());
    for i in 0..t.n_a() {
        for j in 0..t.n_b() {
            assert!((sol.phi.values[t.idx(i, j)] - radial[i]).abs() < 1e-5);
        }
    }
}

#[test]
fn axi_manufactured_quadrupole() {
    let l = 10.0;
    let t = TensorGrid2D::axisymmetric(24, l, 16).unwrap();
    let p2 = |th: f64| 1.5 * th.cos().powi(2) - 0.5;
    // φ = r²(L − r)P₂(cos θ) has ∇²φ = −6r P₂.
    let mut dens = vec![0.0; t.len()];
    let mut exact = vec![0.0; t.len()];
    for i in 0..t.n_a() {
        for j in 0..t.n_b() {
            let (r, th) = t.coords(i, j);
            dens[t.idx(i, j)] = -6.0 * r.powi(3) * p2(th) / G;
            exact[t.idx(i, j)] = r * r * (l - r) * p2(th);
        }
    }
    let sol = PrAdiSolver::new(&t, G, None).unwrap().solve(&dens, 1e-13, 4000, None).unwrap();
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = sol.phi.values.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-8 * scale, "relative error {:e}", err / scale);
}

#[test]
fn planar_manufactured_sine_mode() {
    let side = 16.0;
    let t = TensorGrid2D::planar(32, side).unwrap();
    let k = PI / side;
    let mode = |x: f64, y: f64| (k * (x + side / 2.0)).sin() * (k * (y + side / 2.0)).sin();
    let dens: Vec<f64> = (0..t.len())
        .map(|q| {
            let (x, y) = t.coords(q / t.n_b(), q % t.n_b());
            -2.0 * k * k * mode(x, y) / G
        })
        .collect();
    let sol = PrAdiSolver::new(&t, G, None).unwrap().solve(&dens, 1e-13, 2000, None).unwrap();
    for q in 0..t.len() {
        let (x, y) = t.coords(q / t.n_b(), q % t.n_b());
        assert!((sol.phi.values[q] - mode(x, y)).abs() < 1e-9);
    }
}

#[test]
fn warm_start_needs_fewer_iterations() {
    let t = TensorGrid2D::planar(24, 20.0).unwrap();
    let dens: Vec<f64> = (0..t.len())
        .map(|q| {
            let (x, y) = t.coords(q / t.n_b(), q % t.n_b());
            (-(x * x + y * y) / 4.0).exp()
        })
        .collect();
    let s = PrAdiSolver::new(&t, G, None).unwrap();
    let cold = s.solve(&dens, 1e-11, 2000, None).unwrap();
    let warm = s.solve(&dens, 1e-11, 2000, Some(&cold.phi.values)).unwrap();
    assert!(warm.iterations < cold.iterations);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let t = TensorGrid2D::planar(24, 20.0).unwrap();
    let dens = vec![1.0; t.len()];
    match PrAdiSolver::new(&t, G, Some(0.3)).unwrap().solve(&dens, 1e-14, 3, None) {
        Err(Error::NonConvergence { history, .. }) => assert_eq!(history.len(), 3),
        other => panic!("expected non-convergence, got {:?}", other.map(|s| s.iterations)),
    }
}

#[test]
fn density_size_is_checked() {
    let t = TensorGrid2D::planar(16, 10.0).unwrap();
    assert!(PrAdiSolver::new(&t, G, None).unwrap().solve(&[1.0; 3], 1e-10, 10, None).is_err());
    assert!(PrAdiSolver::new(&t, G, Some(-1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn attractive_potential_is_non_positive(c in 2.0f64..25.0, w in 0.5f64..6.0, amp in 0.01f64..10.0) {
        let g = ChebyshevGrid1D::new(64, 30.0).unwrap();
        let dens: Vec<f64> = g.nodes().iter().map(|&r| amp * r * r * (-(r - c) * (r - c) / (w * w)).exp()).collect();
        let phi = RadialPoisson::new(&g, G).unwrap().solve_density(&dens);
        prop_assert!(phi.iter().all(|&p| p <= 1e-12 * amp));
    }

    #[test]
    fn radial_solve_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = ChebyshevGrid1D::new(40, 20.0).unwrap();
        let s = RadialPoisson::new(&g, G).unwrap();
        let d1: Vec<f64> = g.nodes().iter().map(|&r| shell(r)).collect();
        let d2: Vec<f64> = g.nodes().iter().map(|&r| (r * 0.3).sin().powi(2)).collect();
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
        let (p1, p2, pm) = (s.solve_density(&d1), s.solve_density(&d2), s.solve_density(&mix));
        for k in 0..40 {
            prop_assert!((pm[k] - a * p1[k] - b * p2[k]).abs() < 1e-10 * (1.0 + p1[k].abs() + p2[k].abs()));
        }
    }
}
