//! Crank–Nicolson evolution of the radial system with an iterated potential.

use faer::Mat;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSink, PhaseTracker};
use crate::error::{Error, Result};
use crate::fields::{EvolutionConfig, PotentialField, PotentialMode, RadialWave, Snapshot};
use crate::linalg::{csup_norm, sup_diff, Lu, Matrix};
use crate::poisson::RadialPoisson;
use crate::spectral::{diff_matrix, reduce_dirichlet, Ends};
use crate::C64;

const REFINE_SWEEPS: usize = 12;

struct Factor {
    dt: f64,
    lu: Lu<C64>,
}

pub struct SphericalEvolver {
    wave: RadialWave,
    potential: PotentialField,
    config: EvolutionConfig,
    poisson: RadialPoisson,
    d2: Matrix,
    sponge: Vec<f64>,
    factor: Option<Factor>,
    step: u64,
    probe: usize,
    phase: PhaseTracker,
    last_iterations: usize,
}

impl SphericalEvolver {
    /// Applies the configured perturbation, solves for the initial potential
    /// and fixes the probe at the node of largest `|u|`.
    pub fn new(mut wave: RadialWave, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        config.validate()?;
        wave.check_boundary()?;
        if let Some(p) = &config.perturbation {
            p.apply_radial(&mut wave)?;
        }
        let probe = wave
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let phase = PhaseTracker::new(wave.values[probe]);
        Self::assemble(wave, None, config, coupling, 0, probe, phase)
    }

    /// Rebuilds an evolver from a checkpoint written by [`Self::checkpoint`].
    pub fn resume(snapshot: &Snapshot, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        config.validate()?;
        let (wave, potential) = snapshot.to_radial()?;
        let step = snapshot
            .extra
            .get("step")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("checkpoint lacks `step`".into()))?;
        let probe = snapshot
            .extra
            .get("probe")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("checkpoint lacks `probe`".into()))?;
        let phase = PhaseTracker::from_header(snapshot)?;
        Self::assemble(wave, Some(potential), config, coupling, step, probe, phase)
    }

    fn assemble(
        wave: RadialWave,
        potential: Option<PotentialField>,
        config: EvolutionConfig,
        coupling: f64,
        step: u64,
        probe: usize,
        phase: PhaseTracker,
    ) -> Result<Self> {
        let poisson = RadialPoisson::new(&wave.grid, coupling)?;
        let d2 = reduce_dirichlet(&diff_matrix(&wave.grid, 2)?, Ends::Both)?;
        let sponge = match &config.sponge {
            Some(s) => s.sample_radial(&wave.grid),
            None => vec![0.0; wave.grid.n_points()],
        };
        let potential = match (potential, config.potential_mode) {
            (_, PotentialMode::Zero) => PotentialField::zeros(wave.grid.n_points()),
            (Some(p), _) => p,
            (None, _) => poisson.solve(&wave),
        };
        Ok(Self {
            wave,
            potential,
            config,
            poisson,
            d2,
            sponge,
            factor: None,
            step,
            probe,
            phase,
            last_iterations: 0,
        })
    }

    pub fn wave(&self) -> &RadialWave {
        &self.wave
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn poisson(&self) -> &RadialPoisson {
        &self.poisson
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn probe_index(&self) -> usize {
        self.probe
    }

    fn alpha(&self, dt: f64) -> Vec<C64> {
        let n = self.wave.grid.n_points();
        (1..n - 1).map(|i| C64::new(-self.sponge[i], 1.0) * (2.0 / dt)).collect()
    }

    fn refactor(&mut self, dt: f64, phi: &[f64]) -> Result<()> {
        let alpha = self.alpha(dt);
        let m = self.d2.rows();
        let a = Mat::<C64>::from_fn(m, m, |i, j| {
            let mut v = C64::new(self.d2.get(i, j), 0.0);
            if i == j {
                v += alpha[i] - phi[i + 1];
            }
            v
        });
        self.factor = Some(Factor { dt, lu: Lu::from_complex(&a)? });
        Ok(())
    }

    /// `(α + D² − φ) x`, interior only.
    fn apply(&self, alpha: &[C64], phi: &[f64], x: &[C64]) -> Vec<C64> {
        let mut y = self.d2.mul_cvec(x);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk += (alpha[k] - phi[k + 1]) * x[k];
        }
        y
    }

    /// Solves `(α + D² − φ) x = rhs` by refinement around the cached factor.
    fn solve(&mut self, dt: f64, phi: &[f64], alpha: &[C64], rhs: &[C64], guess: &[C64]) -> Result<Vec<C64>> {
        let stale = match &self.factor {
            Some(f) => f.dt != dt,
            None => true,
        };
        if stale {
            self.refactor(dt, phi)?;
        }
        for attempt in 0..2 {
            let mut x = guess.to_vec();
            let mut converged = false;
            for _ in 0..REFINE_SWEEPS {
                let ax = self.apply(alpha, phi, &x);
                let mut r: Vec<C64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                self.factor.as_ref().expect("factor present").lu.solve_in_place(&mut r);
                let dx = csup_norm(&r);
                for (xi, di) in x.iter_mut().zip(&r) {
                    *xi += di;
                }
                if !dx.is_finite() {
                    break;
                }
                if dx <= 1e-15 * csup_norm(&x) {
                    converged = true;
                    break;
                }
            }
            if converged {
                return Ok(x);
            }
            if attempt == 0 {
                self.refactor(dt, phi)?;
            }
        }
        Err(Error::NumericalFailure("linear refinement stalled".into()))
    }

    fn try_step(&mut self, dt: f64) -> Result<usize> {
        let n = self.wave.grid.n_points();
        let alpha = self.alpha(dt);
        let u0: Vec<C64> = self.wave.values[1..n - 1].to_vec();
        let d2u = self.d2.mul_cvec(&u0);
        let phi_n = self.potential.values.clone();
        let rhs: Vec<C64> = (0..n - 2).map(|k| alpha[k] * u0[k] - d2u[k] + u0[k] * phi_n[k + 1]).collect();
        let mut phi_k = phi_n.clone();
        let mut x = u0.clone();
        let max_it = match self.config.potential_mode {
            PotentialMode::Iterated => self.config.phi_max_iterations,
            _ => 1,
        };
        for k in 0..max_it {
            x = self.solve(dt, &phi_k, &alpha, &rhs, &x)?;
            let mut full = vec![C64::new(0.0, 0.0); n];
            full[1..n - 1].copy_from_slice(&x);
            let phi_next = match self.config.potential_mode {
                PotentialMode::Zero => phi_k.clone(),
                _ => {
                    let d: Vec<f64> = full.iter().map(|z| z.norm_sqr()).collect();
                    self.poisson.solve_density(&d)
                }
            };
            let change = sup_diff(&phi_next, &phi_k);
            if !change.is_finite() {
                return Err(Error::StepFailure { t: self.time(), reason: "non-finite potential".into() });
            }
            if change < self.config.phi_tolerance || self.config.potential_mode != PotentialMode::Iterated {
                self.wave.values = full;
                self.potential.values = phi_next;
                return Ok(k + 1);
            }
            phi_k = phi_next;
        }
        Err(Error::StepFailure {
            t: self.time(),
            reason: format!("potential iteration did not converge in {max_it} iterations"),
        })
    }

    fn step_with_halving(&mut self, dt: f64, depth: u32) -> Result<usize> {
        let saved = (self.wave.values.clone(), self.potential.values.clone());
        match self.try_step(dt) {
            Ok(k) => Ok(k),
            Err(e) if depth >= self.config.max_halvings => Err(e),
            Err(_) => {
                self.wave.values = saved.0;
                self.potential.values = saved.1;
                let a = self.step_with_halving(dt / 2.0, depth + 1)?;
                let b = self.step_with_halving(dt / 2.0, depth + 1)?;
                Ok(a + b)
            }
        }
    }

    /// Advances one step of the configured `dt`, halving it on failure.
    /// Returns the number of linear solves spent on the potential iteration.
    pub fn cn_step(&mut self) -> Result<usize> {
        let dt = self.config.dt;
        let its = self.step_with_halving(dt, 0)?;
        self.step += 1;
        self.last_iterations = its;
        Ok(its)
    }

    pub fn record(&mut self) -> DiagnosticsRecord {
        let shift = self.poisson.free_space_shift(&self.potential.values);
        let free: Vec<f64> = self.potential.values.iter().map(|p| p - shift).collect();
        let e_cons = crate::diagnostics::conserved_energy(&self.wave, &free);
        let e_fun = crate::diagnostics::energy_functional(&self.wave, &self.potential.values);
        let phase = self.phase.update(self.wave.values[self.probe]);
        DiagnosticsRecord {
            t: self.time(),
            p_grid: crate::fields::probability(&self.wave),
            e_conserved: e_cons,
            e_functional: e_fun,
            j2: 0.0,
            probe_phase: phase,
            phi_iterations: self.last_iterations,
        }
    }

    pub fn checkpoint(&self) -> Snapshot {
        let s = Snapshot::radial(&self.wave, &self.potential.values, self.time())
            .with("rngstate", "none")
            .with("step", self.step)
            .with("dt", format!("{:.16e}", self.config.dt))
            .with("probe", self.probe);
        self.phase.annotate(s)
    }

    /// Runs to `t_end`, emitting a record every `output_every` steps and a
    /// checkpoint every `checkpoint_every` steps.
    pub fn evolve(&mut self, sink: &mut dyn DiagnosticsSink) -> Result<()> {
        if self.step == 0 {
            let rec = self.record();
            sink.record(&rec)?;
            sink.snapshot(&self.checkpoint())?;
        }
        let total = self.config.n_steps() as u64;
        while self.step < total {
            if let Err(e) = self.cn_step() {
                sink.checkpoint(&self.checkpoint())?;
                return Err(e);
            }
            if self.step % self.config.output_every as u64 == 0 {
                let rec = self.record();
                sink.record(&rec)?;
                sink.snapshot(&self.checkpoint())?;
            }
            if self.config.checkpoint_every > 0 && self.step % self.config.checkpoint_every as u64 == 0 {
                sink.checkpoint(&self.checkpoint())?;
                // A resumed run starts from a fresh factorisation; do the same here.
                self.factor = None;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ChebyshevGrid1D;

    #[test]
    fn zero_wave_stays_zero_in_one_iteration() {
        let g = ChebyshevGrid1D::new(32, 20.0).unwrap();
        let mut ev = SphericalEvolver::new(RadialWave::zeros(g), EvolutionConfig::default(), 1.0).unwrap();
        assert_eq!(ev.cn_step().unwrap(), 1);
        assert!(ev.wave().values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn free_gaussian_short_run() {
        use crate::oracle::{free_gaussian, normalize_gaussian};
        let g = ChebyshevGrid1D::new(128, 100.0).unwrap();
        let c = normalize_gaussian(6.0, 50.0, 0.5, &g).unwrap();
        let w = RadialWave::from_fn(g, |r| free_gaussian(r, 0.0, 6.0, 50.0, 0.5, c));
        let cfg = EvolutionConfig { dt: 1e-2, t_end: 0.5, potential_mode: PotentialMode::Zero, ..Default::default() };
        let mut ev = SphericalEvolver::new(w, cfg, 1.0).unwrap();
        for _ in 0..50 {
            ev.cn_step().unwrap();
        }
        let err = ev
            .wave()
            .grid
            .nodes()
            .iter()
            .zip(&ev.wave().values)
            .fold(0.0_f64, |m, (&r, z)| m.max((z - free_gaussian(r, 0.5, 6.0, 50.0, 0.5, c)).norm()));
        assert!(err < 1e-4, "{err}");
    }
}
