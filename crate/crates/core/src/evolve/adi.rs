//! Alternating-direction evolution on axisymmetric and planar tensor grids,
//! with the potential recomputed by Peaceman–Rachford iteration.

use faer::Mat;

use crate::diagnostics::{conserved_energy, energy_functional, DiagnosticsRecord, DiagnosticsSink, Observables, PhaseTracker};
use crate::error::{invalid, Error, Result};
use crate::fields::{AxiWave, EvolutionConfig, Geometry, PlanarWave, PotentialField, PotentialMode, Snapshot, WaveField};
use crate::linalg::{sup_diff, Lu, Matrix};
use crate::poisson::PrAdiSolver;
use crate::spectral::{diff_matrix, reduce_dirichlet, AngularOperator, Ends, TensorGrid2D, TensorRole};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Line factorisations for one step size.
struct Lines {
    dt: f64,
    first: Lu<C64>,
    /// One per interior first-coordinate line on polar grids, a single one on planar grids.
    second: Vec<Lu<C64>>,
}

pub struct AdiEvolver {
    geometry: Geometry,
    grid: TensorGrid2D,
    values: Vec<C64>,
    potential: PotentialField,
    config: EvolutionConfig,
    coupling: f64,
    poisson: PrAdiSolver,
    /// Reduced `∂²` along the first coordinate.
    op_a: Matrix,
    /// Reduced operator along the second coordinate: `∂²_y`, or the angular
    /// operator before division by `r²`.
    op_b: Matrix,
    angular: Option<AngularOperator>,
    /// `1/r²` on interior radii (ones on planar grids).
    inv_r2: Vec<f64>,
    sponge: Vec<f64>,
    lines: Option<Lines>,
    step: u64,
    probe: usize,
    phase: PhaseTracker,
    last_iterations: usize,
}

impl AdiEvolver {
    pub fn axi(mut wave: AxiWave, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        config.validate()?;
        wave.check_boundary()?;
        if let Some(p) = &config.perturbation {
            p.apply_axi(&mut wave)?;
        }
        Self::fresh(Geometry::Axi, wave.grid, wave.values, config, coupling)
    }

    pub fn planar(mut wave: PlanarWave, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        config.validate()?;
        wave.check_boundary()?;
        if let Some(p) = &config.perturbation {
            p.apply_planar(&mut wave)?;
        }
        Self::fresh(Geometry::Planar, wave.grid, wave.values, config, coupling)
    }

    fn fresh(geometry: Geometry, grid: TensorGrid2D, values: Vec<C64>, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        let probe = (0..values.len()).max_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm())).unwrap_or(0);
        let phase = PhaseTracker::new(values[probe]);
        Self::assemble(geometry, grid, values, None, config, coupling, 0, probe, phase)
    }

    pub fn resume(snapshot: &Snapshot, config: EvolutionConfig, coupling: f64) -> Result<Self> {
        config.validate()?;
        let (grid, values, potential) = match snapshot.geometry {
            Geometry::Axi => {
                let (w, p) = snapshot.to_axi()?;
                (w.grid, w.values, p)
            }
            Geometry::Planar => {
                let (w, p) = snapshot.to_planar()?;
                (w.grid, w.values, p)
            }
            Geometry::Radial => return Err(invalid("radial checkpoints resume with the spherical evolver")),
        };
        let field = |k: &str| {
            snapshot
                .extra
                .get(k)
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| Error::Parse(format!("checkpoint lacks `{k}`")))
        };
        let step = field("step")?;
        let probe = field("probe")? as usize;
        let phase = PhaseTracker::from_header(snapshot)?;
        Self::assemble(snapshot.geometry, grid, values, Some(potential), config, coupling, step, probe, phase)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        geometry: Geometry,
        grid: TensorGrid2D,
        values: Vec<C64>,
        potential: Option<PotentialField>,
        config: EvolutionConfig,
        coupling: f64,
        step: u64,
        probe: usize,
        phase: PhaseTracker,
    ) -> Result<Self> {
        let poisson = PrAdiSolver::new(&grid, coupling, config.rho)?;
        let op_a = reduce_dirichlet(&diff_matrix(&grid.grid_a, 2)?, Ends::Both)?;
        let (op_b, angular, inv_r2) = match grid.role {
            TensorRole::AxisymmetricPolar => {
                let ang = AngularOperator::new(&grid.grid_b)?;
                let r = grid.grid_a.nodes();
                let inv: Vec<f64> = r[1..r.len() - 1].iter().map(|r| 1.0 / (r * r)).collect();
                (ang.op.clone(), Some(ang), inv)
            }
            TensorRole::PlanarCartesian => {
                let d2 = reduce_dirichlet(&diff_matrix(&grid.grid_b, 2)?, Ends::Both)?;
                (d2, None, vec![1.0; grid.n_a() - 2])
            }
        };
        let sponge = match &config.sponge {
            Some(s) => s.sample_tensor(&grid),
            None => vec![0.0; grid.len()],
        };
        let mut ev = Self {
            geometry,
            grid,
            values,
            potential: PotentialField::zeros(0),
            config,
            coupling,
            poisson,
            op_a,
            op_b,
            angular,
            inv_r2,
            sponge,
            lines: None,
            step,
            probe,
            phase,
            last_iterations: 0,
        };
        ev.potential = match (potential, ev.config.potential_mode) {
            (_, PotentialMode::Zero) => PotentialField::zeros(ev.grid.len()),
            (Some(p), _) => p,
            (None, _) => ev.solve_potential(&ev.values, None)?,
        };
        Ok(ev)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn grid(&self) -> &TensorGrid2D {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn axi_wave(&self) -> Option<AxiWave> {
        (self.geometry == Geometry::Axi).then(|| AxiWave { grid: self.grid.clone(), values: self.values.clone() })
    }

    pub fn planar_wave(&self) -> Option<PlanarWave> {
        (self.geometry == Geometry::Planar).then(|| PlanarWave { grid: self.grid.clone(), values: self.values.clone() })
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
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

    fn solve_potential(&self, values: &[C64], warm: Option<&[f64]>) -> Result<PotentialField> {
        let density: Vec<f64> = values.iter().map(|z| z.norm_sqr()).collect();
        let tol = 0.1 * self.config.phi_tolerance;
        Ok(self.poisson.solve(&density, tol, 4000, warm)?.phi)
    }

    fn factor(&mut self, dt: f64) -> Result<()> {
        if self.lines.as_ref().is_some_and(|l| l.dt == dt) {
            return Ok(());
        }
        let h = C64::new(0.0, 0.5 * dt);
        let lu = |m: &Matrix, s: f64| -> Result<Lu<C64>> {
            let k = m.rows();
            let a = Mat::<C64>::from_fn(k, k, |i, j| {
                let one = if i == j { C64::new(1.0, 0.0) } else { ZERO };
                one - h * (m.get(i, j) * s)
            });
            Lu::from_complex(&a)
        };
        let first = lu(&self.op_a, 1.0)?;
        let second = match self.geometry {
            Geometry::Axi => self.inv_r2.iter().map(|&s| lu(&self.op_b, s)).collect::<Result<Vec<_>>>()?,
            _ => vec![lu(&self.op_b, 1.0)?],
        };
        self.lines = Some(Lines { dt, first, second });
        Ok(())
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.op_a.rows(), self.op_b.rows(), self.grid.n_b())
    }

    /// Interior block of a full-grid field, indexed `i * mb + j`.
    fn interior(&self, full: &[C64]) -> Vec<C64> {
        let (ma, mb, nb) = self.dims();
        (0..ma * mb).map(|p| full[(p / mb + 1) * nb + p % mb + 1]).collect()
    }

    /// Full-grid field from an interior block: zero on Dirichlet edges and
    /// Neumann-extended poles on polar grids.
    fn embed(&self, block: &[C64]) -> Vec<C64> {
        let (ma, mb, nb) = self.dims();
        let mut out = vec![ZERO; self.grid.len()];
        for i in 0..ma {
            let line = &block[i * mb..(i + 1) * mb];
            let dst = &mut out[(i + 1) * nb..(i + 2) * nb];
            match &self.angular {
                Some(ang) => dst.copy_from_slice(&ang.neumann.extend(line)),
                None => dst[1..nb - 1].copy_from_slice(line),
            }
        }
        out
    }

    /// `L₁ x` along the first coordinate.
    fn apply_a(&self, x: &[C64]) -> Vec<C64> {
        let (ma, mb, _) = self.dims();
        let mut out = vec![ZERO; x.len()];
        let mut col = vec![ZERO; ma];
        let mut res = vec![ZERO; ma];
        for j in 0..mb {
            for i in 0..ma {
                col[i] = x[i * mb + j];
            }
            self.op_a.mul_cvec_into(&col, &mut res);
            for i in 0..ma {
                out[i * mb + j] = res[i];
            }
        }
        out
    }

    /// `L₂ x` along the second coordinate.
    fn apply_b(&self, x: &[C64]) -> Vec<C64> {
        let (_, mb, _) = self.dims();
        let mut out = vec![ZERO; x.len()];
        for (i, (src, dst)) in x.chunks(mb).zip(out.chunks_mut(mb)).enumerate() {
            self.op_b.mul_cvec_into(src, dst);
            dst.iter_mut().for_each(|z| *z *= self.inv_r2[i]);
        }
        out
    }

    /// The two directional sub-steps, returning the interior block of `T`.
    fn kinetic_half(&mut self, dt: f64) -> Result<Vec<C64>> {
        self.factor(dt)?;
        let h = C64::new(0.0, 0.5 * dt);
        let (ma, mb, _) = self.dims();
        let u = self.interior(&self.values);
        let lu = self.apply_b(&u);
        let mut s: Vec<C64> = u.iter().zip(&lu).map(|(a, b)| a + h * b).collect();
        let lines = self.lines.as_ref().expect("factored");
        let mut col = vec![ZERO; ma];
        for j in 0..mb {
            for i in 0..ma {
                col[i] = s[i * mb + j];
            }
            lines.first.solve_in_place(&mut col);
            for i in 0..ma {
                s[i * mb + j] = col[i];
            }
        }
        let ls = self.apply_a(&s);
        let mut t: Vec<C64> = s.iter().zip(&ls).map(|(a, b)| a + h * b).collect();
        for (i, line) in t.chunks_mut(mb).enumerate() {
            let k = if lines.second.len() == 1 { 0 } else { i };
            lines.second[k].solve_in_place(line);
        }
        Ok(t)
    }

    fn try_step(&mut self, dt: f64) -> Result<usize> {
        let t_block = self.kinetic_half(dt)?;
        let t_full = self.embed(&t_block);
        let h = 0.5 * dt;
        let phi_n = self.potential.values.clone();
        let explicit: Vec<C64> = (0..self.grid.len())
            .map(|q| (C64::new(1.0, 0.0) - I * h * C64::new(phi_n[q], -self.sponge[q])) * t_full[q])
            .collect();
        let mut phi_k = phi_n.clone();
        let max_it = match self.config.potential_mode {
            PotentialMode::Iterated => self.config.phi_max_iterations,
            _ => 1,
        };
        for k in 0..max_it {
            let cand: Vec<C64> = (0..self.grid.len())
                .map(|q| explicit[q] / (C64::new(1.0, 0.0) + I * h * C64::new(phi_k[q], -self.sponge[q])))
                .collect();
            let next = self.embed(&self.interior(&cand));
            let phi_next = match self.config.potential_mode {
                PotentialMode::Zero => phi_k.clone(),
                _ => self
                    .solve_potential(&next, Some(&phi_k))
                    .map_err(|e| Error::StepFailure { t: self.time(), reason: e.to_string() })?
                    .values,
            };
            let change = sup_diff(&phi_next, &phi_k);
            if !change.is_finite() {
                return Err(Error::StepFailure { t: self.time(), reason: "non-finite potential".into() });
            }
            if change < self.config.phi_tolerance || self.config.potential_mode != PotentialMode::Iterated {
                self.values = next;
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
        let saved = (self.values.clone(), self.potential.values.clone());
        match self.try_step(dt) {
            Ok(k) => Ok(k),
            Err(e) if depth >= self.config.max_halvings => Err(e),
            Err(_) => {
                self.values = saved.0;
                self.potential.values = saved.1;
                let a = self.step_with_halving(dt / 2.0, depth + 1)?;
                let b = self.step_with_halving(dt / 2.0, depth + 1)?;
                Ok(a + b)
            }
        }
    }

    /// One step of the configured `dt`; returns the potential iterations used.
    pub fn adi_step(&mut self) -> Result<usize> {
        let dt = self.config.dt;
        let its = self.step_with_halving(dt, 0)?;
        self.step += 1;
        self.last_iterations = its;
        Ok(its)
    }

    /// Largest `|∂_θ u|` at the poles; zero on planar grids.
    pub fn pole_derivative(&self) -> f64 {
        let Some(ang) = &self.angular else { return 0.0 };
        let nb = self.grid.n_b();
        let mut worst: f64 = 0.0;
        for row in self.values.chunks(nb) {
            for &p in &[0, nb - 1] {
                let d: C64 = ang.d1.row(p).iter().zip(row).map(|(a, z)| z * *a).sum();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    fn observables(&self) -> (f64, f64, f64, f64) {
        let phi = &self.potential.values;
        match self.geometry {
            Geometry::Axi => {
                let w = self.axi_wave().expect("axi");
                let p = w.probability();
                let shift = self.coupling * p / self.grid.grid_a.length();
                let free: Vec<f64> = phi.iter().map(|v| v - shift).collect();
                (p, conserved_energy(&w, &free), energy_functional(&w, phi), w.angular_momentum_j2())
            }
            _ => {
                let w = self.planar_wave().expect("planar");
                (w.probability(), conserved_energy(&w, phi), energy_functional(&w, phi), w.angular_momentum_j2())
            }
        }
    }

    pub fn record(&mut self) -> DiagnosticsRecord {
        let (p, ec, ef, j2) = self.observables();
        let phase = self.phase.update(self.values[self.probe]);
        DiagnosticsRecord {
            t: self.time(),
            p_grid: p,
            e_conserved: ec,
            e_functional: ef,
            j2,
            probe_phase: phase,
            phi_iterations: self.last_iterations,
        }
    }

    pub fn checkpoint(&self) -> Snapshot {
        let base = match self.geometry {
            Geometry::Axi => Snapshot::axi(&self.axi_wave().expect("axi"), &self.potential.values, self.time()),
            _ => Snapshot::planar(&self.planar_wave().expect("planar"), &self.potential.values, self.time()),
        };
        let s = base
            .with("rngstate", "none")
            .with("step", self.step)
            .with("dt", format!("{:.16e}", self.config.dt))
            .with("probe", self.probe);
        self.phase.annotate(s)
    }

    /// Runs to `t_end` with the same output cadence as the spherical evolver.
    pub fn evolve(&mut self, sink: &mut dyn DiagnosticsSink) -> Result<()> {
        if self.step == 0 {
            let rec = self.record();
            sink.record(&rec)?;
            sink.snapshot(&self.checkpoint())?;
        }
        let total = self.config.n_steps() as u64;
        while self.step < total {
            if let Err(e) = self.adi_step() {
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
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_wave_stays_zero() {
        let g = TensorGrid2D::planar(16, 20.0).unwrap();
        let w = PlanarWave::from_fn(g, |_, _| ZERO);
        let mut ev = AdiEvolver::planar(w, EvolutionConfig::default(), 1.0).unwrap();
        ev.adi_step().unwrap();
        assert!(ev.values().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn axi_poles_stay_regular() {
        let g = TensorGrid2D::axisymmetric(24, 20.0, 12).unwrap();
        let w = AxiWave::from_fn(g, |r, t| C64::new(r * (-(r - 3.0).powi(2) / 4.0).exp() * (1.0 + 0.3 * t.cos()), 0.0));
        let cfg = EvolutionConfig { dt: 0.05, t_end: 0.5, ..Default::default() };
        let mut ev = AdiEvolver::axi(w, cfg, 1.0).unwrap();
        for _ in 0..5 {
            ev.adi_step().unwrap();
        }
        assert!(ev.pole_derivative() < 1e-6, "{}", ev.pole_derivative());
    }
}
