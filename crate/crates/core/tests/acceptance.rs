//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion outside `KNOWN_FAILURES` fails. Pass
//! criterion numbers as arguments to run a subset.

use std::path::Path;
use std::time::Instant;

use snlab::cli::run::{radial_conserved_energy, read_summary};
use snlab::cli::{run, RunConfig, RunOptions};
use snlab::diagnostics::{fit_rescaled_ground, residual_bound, richardson_order, DiagnosticsRecord, DiagnosticsSink};
use snlab::evolve::{AdiEvolver, SphericalEvolver};
use snlab::fields::{
    EvolutionConfig, Perturbation, PlanarWave, PotentialMode, RadialWave, SpongeProfile, WaveField,
};
use snlab::linalg::sup_diff;
use snlab::oracle::{fd_poisson_planar, fd_poisson_radial, free_gaussian, free_gaussian_planar, normalize_gaussian};
use snlab::poisson::{PrAdiSolver, RadialPoisson, DEFAULT_COUPLING};
use snlab::spectral::{ChebyshevGrid1D, TensorGrid2D};
use snlab::stationary::{
    axi_stationary, radial_residual, rotating_stationary, spherical_stationary, StationaryResidual,
};
use snlab::C64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

struct Quiet;

impl DiagnosticsSink for Quiet {
    fn record(&mut self, _: &DiagnosticsRecord) -> snlab::Result<()> {
        Ok(())
    }
}

/// Probability in `r < radius` by Simpson's rule on interpolated values.
fn inner_probability(radius: f64, f: impl Fn(f64) -> C64) -> f64 {
    let m = 4000;
    let h = radius / m as f64;
    (0..=m)
        .map(|k| {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * f(k as f64 * h).norm_sqr()
        })
        .sum::<f64>()
        * h
        / 3.0
}

fn radial_at(wave: &RadialWave, r: f64) -> C64 {
    let re: Vec<f64> = wave.values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = wave.values.iter().map(|z| z.im).collect();
    C64::new(wave.grid.interpolate(&re, r), wave.grid.interpolate(&im, r))
}

fn gaussian(grid: &ChebyshevGrid1D, sigma: f64, a: f64, v: f64) -> snlab::Result<(RadialWave, f64)> {
    let c = normalize_gaussian(sigma, a, v, grid)?;
    Ok((RadialWave::from_fn(grid.clone(), |r| free_gaussian(r, 0.0, sigma, a, v, c)), c))
}

fn ground_energy() -> snlab::Result<Outcome> {
    let g = ChebyshevGrid1D::new(256, 100.0)?;
    let s = spherical_stationary(0, &g, 1e-10, 300)?;
    let err = rel(s.energy, -0.1592);
    Ok(outcome(err < 0.01, format!("E = {:.6} (rel. err {err:.2e}, tol 1e-2)", s.energy)))
}

fn dipole_state() -> snlab::Result<Outcome> {
    let g = TensorGrid2D::axisymmetric(64, 100.0, 16)?;
    let s = axi_stationary((1, 0), &g, 1e-9, 300)?;
    let (ee, ej) = (rel(s.energy, -0.0599), rel(s.j2, 5.1853));
    Ok(outcome(
        ee < 0.02 && ej < 0.05,
        format!("E = {:.5} (rel. err {ee:.2e}, tol 2e-2), J2 = {:.4} (rel. err {ej:.2e}, tol 5e-2)", s.energy, s.j2),
    ))
}

fn phase_linearity() -> snlab::Result<Outcome> {
    let g = ChebyshevGrid1D::new(256, 100.0)?;
    let s = spherical_stationary(0, &g, 1e-12, 400)?;
    let cfg = EvolutionConfig { dt: 1e-2, t_end: 100.0, output_every: 100, phi_tolerance: 1e-12, ..Default::default() };
    let mut ev = SphericalEvolver::new(s.wave, cfg, DEFAULT_COUPLING)?;
    let mut recs: Vec<DiagnosticsRecord> = Vec::new();
    ev.evolve(&mut recs)?;
    let n = recs.len() as f64;
    let (mt, mp) = (recs.iter().map(|r| r.t).sum::<f64>() / n, recs.iter().map(|r| r.probe_phase).sum::<f64>() / n);
    let sxy: f64 = recs.iter().map(|r| (r.t - mt) * (r.probe_phase - mp)).sum();
    let sxx: f64 = recs.iter().map(|r| (r.t - mt).powi(2)).sum();
    let slope = sxy / sxx;
    let drift = recs.iter().map(|r| (r.p_grid - recs[0].p_grid).abs()).fold(0.0, f64::max);
    let err = rel(slope, 0.1592);
    Ok(outcome(
        err < 0.01 && drift < 1e-6,
        format!("phase slope {slope:.6} (rel. err {err:.2e}, tol 1e-2), probability drift {drift:.2e} (tol 1e-6)"),
    ))
}

fn free_gaussian_oracle() -> snlab::Result<Outcome> {
    let (sigma, a, v) = (6.0, 50.0, 0.5);
    let g = ChebyshevGrid1D::new(256, 100.0)?;
    let (w, c) = gaussian(&g, sigma, a, v)?;
    let cfg = EvolutionConfig { dt: 1e-2, t_end: 1.0, potential_mode: PotentialMode::Zero, ..Default::default() };
    let mut ev = SphericalEvolver::new(w.clone(), cfg, DEFAULT_COUPLING)?;
    ev.evolve(&mut Quiet)?;
    let err = g
        .nodes()
        .iter()
        .zip(&ev.wave().values)
        .fold(0.0_f64, |m, (&r, z)| m.max((z - free_gaussian(r, 1.0, sigma, a, v, c)).norm()));

    // Sponge: the discrete solution inside r < L/2 must follow the unbounded
    // free solution once the pulse has had time to reflect off r = L.
    let t_end = 300.0;
    let cfg = EvolutionConfig {
        dt: 1e-2,
        t_end: 150.0,
        potential_mode: PotentialMode::Zero,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        output_every: 1000,
        ..Default::default()
    };
    let mut ev = SphericalEvolver::new(w, cfg.clone(), DEFAULT_COUPLING)?;
    ev.evolve(&mut Quiet)?;
    let (mut reentry, mut deviation) = (0.0_f64, 0.0_f64);
    let mut t = 150.0;
    while t < t_end {
        t += 10.0;
        let snap = ev.checkpoint();
        ev = SphericalEvolver::resume(&snap, EvolutionConfig { t_end: t, ..cfg.clone() }, DEFAULT_COUPLING)?;
        ev.evolve(&mut Quiet)?;
        let num = inner_probability(50.0, |r| radial_at(ev.wave(), r));
        let exact = inner_probability(50.0, |r| free_gaussian(r, t, sigma, a, v, c));
        reentry = reentry.max(num - exact);
        deviation = deviation.max((num - exact).abs());
    }
    Ok(outcome(
        err < 1e-4 && reentry < 1e-3,
        format!("sup error at t=1 {err:.2e} (tol 1e-4), re-entering probability {reentry:.2e} over t in [160, 300] (tol 1e-3), \
             largest |P_num - P_exact| inside L/2 {deviation:.2e}"),
    ))
}

fn spherical_observable(dt: f64) -> snlab::Result<f64> {
    let g = ChebyshevGrid1D::new(128, 100.0)?;
    let (w, _) = gaussian(&g, 6.0, 20.0, 0.5)?;
    let cfg = EvolutionConfig { dt, t_end: 1.0, phi_tolerance: 1e-11, output_every: 1000, ..Default::default() };
    let mut ev = SphericalEvolver::new(w, cfg, 5.0)?;
    ev.evolve(&mut Quiet)?;
    let k = g.nodes().iter().position(|&r| r > 20.0).unwrap_or(0);
    Ok(ev.wave().values[k].re)
}

fn planar_observable(dt: f64) -> snlab::Result<f64> {
    let g = TensorGrid2D::planar(24, 20.0)?;
    let w = PlanarWave::from_fn(g, |x, y| free_gaussian_planar(x, y, 0.0, 2.0, (1.0, 0.0), (0.2, 0.0)));
    let cfg = EvolutionConfig { dt, t_end: 1.0, phi_tolerance: 1e-11, output_every: 1000, ..Default::default() };
    let mut ev = AdiEvolver::planar(w, cfg, 5.0)?;
    ev.evolve(&mut Quiet)?;
    let k = ev.grid().idx(ev.grid().n_a() / 2, ev.grid().n_b() / 2);
    Ok(ev.values()[k].re)
}

fn axi_observable(dt: f64) -> snlab::Result<f64> {
    let g = TensorGrid2D::axisymmetric(24, 20.0, 8)?;
    let mut w = snlab::fields::AxiWave::from_fn(g, |r, th| {
        C64::new(r * (-(r - 4.0).powi(2) / 4.0).exp() * (1.0 + 0.3 * th.cos()), 0.0)
    });
    w.normalize_to(1.0)?;
    let cfg = EvolutionConfig { dt, t_end: 1.0, phi_tolerance: 1e-11, output_every: 1000, ..Default::default() };
    let mut ev = AdiEvolver::axi(w, cfg, 5.0)?;
    ev.evolve(&mut Quiet)?;
    let k = ev.grid().idx(ev.grid().n_a() / 3, ev.grid().n_b() / 2);
    Ok(ev.values()[k].re)
}

fn order(f: fn(f64) -> snlab::Result<f64>, dt: f64) -> snlab::Result<f64> {
    richardson_order(f(dt)?, f(dt / 2.0)?, f(dt / 4.0)?)
}

fn convergence_orders() -> snlab::Result<Outcome> {
    let ks = order(spherical_observable, 4e-2).unwrap_or(f64::NAN);
    let ka = order(axi_observable, 4e-2).unwrap_or(f64::NAN);
    let kp = order(planar_observable, 4e-2).unwrap_or(f64::NAN);
    Ok(outcome(
        (ks - 2.0).abs() < 0.25 && (ka - 1.0).abs() < 0.25 && (kp - 1.0).abs() < 0.25,
        format!("CN k = {ks:.3} (want 2 ± 0.25), ADI axi k = {ka:.3}, ADI planar k = {kp:.3} (want 1 ± 0.25)"),
    ))
}

fn secondary_maxima(wave: &RadialWave) -> usize {
    let abs: Vec<f64> = wave.values.iter().map(|z| z.norm()).collect();
    let top = abs.iter().cloned().fold(0.0, f64::max);
    abs.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2] && w[1] > 0.05 * top).count() - 1
}

fn second_state_decay() -> snlab::Result<Outcome> {
    let grid = ChebyshevGrid1D::new(256, 100.0)?;
    let poisson = RadialPoisson::new(&grid, DEFAULT_COUPLING)?;
    let ground = spherical_stationary(0, &grid, 1e-11, 400)?;
    let second = spherical_stationary(1, &grid, 1e-11, 400)?;
    let e0 = radial_conserved_energy(&ground.wave, &poisson);
    let e_i = radial_conserved_energy(&second.wave, &poisson);
    let before = secondary_maxima(&second.wave);
    let cfg = EvolutionConfig {
        dt: 0.2,
        t_end: 20000.0,
        sponge: Some(SpongeProfile::DEFAULT_RADIAL),
        perturbation: Some(Perturbation { epsilon: 1e-2, mode: 1 }),
        output_every: 5000,
        ..Default::default()
    };
    let mut ev = SphericalEvolver::new(second.wave.clone(), cfg, DEFAULT_COUPLING)?;
    ev.evolve(&mut Quiet)?;
    let w = ev.wave();
    let p = w.probability();
    let e_t = radial_conserved_energy(w, &poisson);
    let bound = residual_bound(e_t, e0)?;
    let bound_initial = residual_bound(e_i, e0)?;
    let (_, fit) = fit_rescaled_ground(w, &ground)?;
    let after = secondary_maxima(w);
    let agree = (p - bound) / p;
    Ok(outcome(
        before >= 1 && after == 0 && p >= bound && agree < 0.1 && fit < 0.05,
        format!(
            "secondary maxima {before} -> {after}, p = {p:.4}, bound(E(t)) = {bound:.4} (gap {agree:.3}, tol 0.1), \
             bound(E_I) = {bound_initial:.4}, fit residual {fit:.3} (tol 0.05)"
        ),
    ))
}

fn sweep(dir: &Path, name: &str, lists: &str) -> snlab::Result<Vec<snlab::cli::SweepRow>> {
    let text = format!(
        "command = sweep-gaussian\n\n[grid]\nn = 256\nL = 200\n\n[evolution]\ndt = 0.25\nt_end = 1200\noutput_every = 400\n\n\
         [sponge]\nenabled = true\n\n[sweep]\n{lists}\n\n[output]\ndir = {name}\nsnapshot_stride = 0\n"
    );
    let cfg = RunConfig::parse(&text, dir)?;
    let out = run(&cfg, &RunOptions::default())?;
    read_summary(&out.join("summary.csv"))
}

fn gaussian_sweeps() -> snlab::Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let vs = sweep(tmp.path(), "v", "v_list = -0.4, -0.2, 0, 0.2, 0.4\na_list = 50\nsigma_list = 6")?;
    let as_ = sweep(tmp.path(), "a", "v_list = 0\na_list = 30, 50, 70\nsigma_list = 6")?;
    let ss = sweep(tmp.path(), "sigma", "v_list = 0\na_list = 50\nsigma_list = 4, 6, 8")?;
    let p = |rows: &[snlab::cli::SweepRow]| rows.iter().map(|r| r.p_final).collect::<Vec<_>>();
    let (pv, pa, ps) = (p(&vs), p(&as_), p(&ss));
    let v_ok = pv[2] > pv[0] && pv[2] > pv[1] && pv[2] > pv[3] && pv[2] > pv[4] && pv[0] > pv[4] && pv[1] > pv[3];
    let a_ok = pa.windows(2).all(|w| w[0] > w[1]);
    let s_ok = ps.windows(2).all(|w| w[0] < w[1]);
    let f = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Ok(outcome(
        v_ok && a_ok && s_ok,
        format!("p over v [-0.4..0.4]: {} | over a [30,50,70]: {} | over sigma [4,6,8]: {}", f(&pv), f(&pa), f(&ps)),
    ))
}

fn rescaling() -> snlab::Result<Outcome> {
    let g0 = ChebyshevGrid1D::new(256, 100.0)?;
    let p0 = RadialPoisson::new(&g0, DEFAULT_COUPLING)?;
    let ground = spherical_stationary(0, &g0, 1e-12, 400)?;
    let e0 = ground.energy - p0.free_space_shift(&p0.solve(&ground.wave).values);
    // A wider box holds the tails of the dilated states.
    let g = ChebyshevGrid1D::new(384, 200.0)?;
    let poisson = RadialPoisson::new(&g, DEFAULT_COUPLING)?;
    let free = |w: &RadialWave| {
        let phi = poisson.solve(w).values;
        let s = poisson.free_space_shift(&phi);
        phi.iter().map(|p| p - s).collect::<Vec<f64>>()
    };
    let w0 = snlab::diagnostics::rescaled_ground(&ground.wave, 1.0, &g);
    let ce0 = snlab::diagnostics::conserved_energy(&w0, &free(&w0));
    let mut worst: f64 = 0.0;
    let mut res_max: f64 = 0.0;
    for p in [0.5, 0.8] {
        let w = snlab::diagnostics::rescaled_ground(&ground.wave, p, &g);
        let phi = free(&w);
        let kin = snlab::diagnostics::Observables::kinetic(&w);
        let pot = snlab::diagnostics::Observables::potential_energy(&w, &phi);
        let e = (kin + pot) / w.probability();
        let ce = snlab::diagnostics::conserved_energy(&w, &phi);
        res_max = res_max.max(radial_residual(&w, &phi, p * p * e0)?);
        worst = worst.max(rel(e, p * p * e0)).max(rel(ce, p.powi(3) * ce0)).max(rel(w.probability(), p));
    }
    Ok(outcome(
        res_max < 1e-5 && worst < 1e-4,
        format!("max eigen-residual {res_max:.2e} (tol 1e-5), max rel. error of E, calE, P {worst:.2e} (tol 1e-4)"),
    ))
}

fn poisson_oracles() -> snlab::Result<Outcome> {
    let g = ChebyshevGrid1D::new(128, 100.0)?;
    let (w, _) = gaussian(&g, 6.0, 50.0, 0.0)?;
    let radial = RadialPoisson::new(&g, DEFAULT_COUPLING)?.solve(&w).values;
    let c = normalize_gaussian(6.0, 50.0, 0.0, &g)?;
    let fd = fd_poisson_radial(|r| free_gaussian(r, 0.0, 6.0, 50.0, 0.0, c).norm_sqr(), 100.0, DEFAULT_COUPLING, 10_000, g.nodes())?;
    let e_radial = sup_diff(&radial, &fd);

    let t = TensorGrid2D::axisymmetric(48, 30.0, 12)?;
    let f = |r: f64| r * (-(r - 6.0).powi(2) / 8.0).exp();
    let dens: Vec<f64> = (0..t.len()).map(|q| f(t.grid_a.nodes()[q / t.n_b()]).powi(2)).collect();
    let axi = PrAdiSolver::new(&t, DEFAULT_COUPLING, None)?.solve(&dens, 1e-12, 2000, None)?;
    let fd_a = fd_poisson_radial(|r| f(r).powi(2), 30.0, DEFAULT_COUPLING, 10_000, t.grid_a.nodes())?;
    let e_axi = (0..t.len()).fold(0.0_f64, |m, q| m.max((axi.phi.values[q] - fd_a[q / t.n_b()]).abs()));

    let tp = TensorGrid2D::planar(48, 20.0)?;
    let blob = |x: f64, y: f64| (-((x - 1.0).powi(2) + y * y) / 4.0).exp();
    let dens: Vec<f64> = (0..tp.len())
        .map(|q| {
            let (x, y) = tp.coords(q / tp.n_b(), q % tp.n_b());
            blob(x, y)
        })
        .collect();
    let planar = PrAdiSolver::new(&tp, DEFAULT_COUPLING, None)?.solve(&dens, 1e-12, 2000, None)?;
    let pts: Vec<(f64, f64)> = (0..tp.len()).map(|q| tp.coords(q / tp.n_b(), q % tp.n_b())).collect();
    // Two second-order solves combined to cancel the leading h² error.
    let fine = fd_poisson_planar(blob, 20.0, DEFAULT_COUPLING, 1000, &pts)?;
    let coarse = fd_poisson_planar(blob, 20.0, DEFAULT_COUPLING, 500, &pts)?;
    let fd_p: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
    let e_planar = sup_diff(&planar.phi.values, &fd_p);
    let monotone = [&axi, &planar].iter().all(|s| s.residuals.last() < s.residuals.get(1));
    Ok(outcome(
        e_radial < 1e-5 && e_axi < 1e-5 && e_planar < 1e-5 && monotone,
        format!(
            "sup error vs finite differences: radial {e_radial:.2e}, axi PR-ADI {e_axi:.2e}, planar PR-ADI {e_planar:.2e} (tol 1e-5); \
             PR-ADI iterations {} / {}, final residual below second: {monotone}",
            axi.iterations, planar.iterations
        ),
    ))
}

fn rotating_solution() -> snlab::Result<Outcome> {
    let g = TensorGrid2D::planar(32, 30.0)?;
    let plus = rotating_stationary(0.005, 0.001, &g, 1e-10)?;
    let minus = rotating_stationary(-0.005, 0.001, &g, 1e-10)?;
    let rest = rotating_stationary(0.0, 0.001, &g, 1e-10)?;
    let res = plus.residual()?;
    let conj: Vec<C64> = plus.wave.values.iter().map(|z| z.conj()).collect();
    let sym = snlab::linalg::csup_diff(&conj, &minus.wave.values);
    let im = rest.wave.values.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    let gap = rel(plus.energy, rest.energy);

    // Informational: a short perturbed evolution under the absorbing layer.
    let cfg = EvolutionConfig {
        dt: 0.5,
        t_end: 100.0,
        output_every: 20,
        sponge: Some(SpongeProfile::PlanarRadial { cap: 1.0, rate: 0.5, radius: 5.0 }),
        perturbation: Some(Perturbation { epsilon: 0.05, mode: 1 }),
        ..Default::default()
    };
    let mut ev = AdiEvolver::planar(plus.wave.clone(), cfg, DEFAULT_COUPLING)?;
    let mut recs: Vec<DiagnosticsRecord> = Vec::new();
    ev.evolve(&mut recs)?;
    let j2: Vec<String> = recs.iter().map(|r| format!("{:.3}", r.j2)).collect();
    Ok(outcome(
        res < 1e-6 && sym < 1e-8 && im < 1e-8,
        format!(
            "residual {res:.2e} (tol 1e-6), |conj u(w) - u(-w)| {sym:.2e} (tol 1e-8), max|Im u(0)| {im:.2e} (tol 1e-8), \
             |E(w)/E(0) - 1| {gap:.2e}; perturbed J2 (not gated): {}",
            j2.join(" ")
        ),
    ))
}

type Criterion = (&'static str, fn() -> snlab::Result<Outcome>);

const CRITERIA: [Criterion; 10] = [
    ("ground-state energy", ground_energy),
    ("dipole state", dipole_state),
    ("phase linearity", phase_linearity),
    ("free Gaussian and sponge", free_gaussian_oracle),
    ("convergence orders", convergence_orders),
    ("second-state decay", second_state_decay),
    ("Gaussian sweeps", gaussian_sweeps),
    ("rescaling family", rescaling),
    ("Poisson oracles", poisson_oracles),
    ("rotating solution", rotating_solution),
];

/// Criteria that fail at their stated tolerances; see the README.
const KNOWN_FAILURES: [usize; 2] = [6, 7];

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (k, (name, f)) in CRITERIA.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILURES.contains(&id);
        let verdict = match (pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as a known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if !pass {
            failed.push(id);
        }
        println!("criterion {id:2} {verdict} {name}: {detail} [{:.1}s]", clock.elapsed().as_secs_f64());
    }
    if !failed.is_empty() {
        println!("failed: {failed:?}");
    }
    if failed.iter().any(|id| !KNOWN_FAILURES.contains(id)) {
        std::process::exit(1);
    }
}
