//! Poisson solvers: a direct spectral solve in radial symmetry and a
//! Peaceman–Rachford iteration on tensor grids.

use crate::error::{invalid, Error, Result};
use crate::fields::{PotentialField, RadialWave};
use crate::linalg::{real_spectrum, sup_diff, sup_norm, Lu, Matrix};
use crate::spectral::{diff_matrix, reduce_dirichlet, AngularOperator, ChebyshevGrid1D, Ends, TensorGrid2D, TensorRole};

/// Strength of the gravitational source, `∇²φ = G|ψ|²`.
///
/// Chosen so that the normalised ground state in a box of radius 100 with
/// `φ(L) = 0` has eigenvalue −0.1592.
pub const DEFAULT_COUPLING: f64 = 1.4614;

/// Cached reduced operators for `(rφ)'' = G|u|²/r` with `rφ = 0` at both ends.
#[derive(Clone)]
pub struct RadialPoisson {
    grid: ChebyshevGrid1D,
    coupling: f64,
    lu: std::sync::Arc<Lu<f64>>,
    d1_first: Vec<f64>,
    d1_last: Vec<f64>,
}

impl RadialPoisson {
    pub fn new(grid: &ChebyshevGrid1D, coupling: f64) -> Result<Self> {
        let d1 = diff_matrix(grid, 1)?;
        let d2 = reduce_dirichlet(&diff_matrix(grid, 2)?, Ends::Both)?;
        let n = grid.n_points();
        Ok(Self {
            grid: grid.clone(),
            coupling,
            lu: std::sync::Arc::new(Lu::from_matrix(&d2)?),
            d1_first: d1.row(0).to_vec(),
            d1_last: d1.row(n - 1).to_vec(),
        })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn grid(&self) -> &ChebyshevGrid1D {
        &self.grid
    }

    /// Potential for a nodal density `|u|²`.
    pub fn solve_density(&self, density: &[f64]) -> Vec<f64> {
        let r = self.grid.nodes();
        let n = r.len();
        let mut rhs: Vec<f64> = (1..n - 1).map(|i| self.coupling * density[i] / r[i]).collect();
        self.lu.solve_in_place(&mut rhs);
        let mut v = vec![0.0; n];
        v[1..n - 1].copy_from_slice(&rhs);
        let mut phi = vec![0.0; n];
        for i in 1..n - 1 {
            phi[i] = v[i] / r[i];
        }
        phi[0] = self.d1_first.iter().zip(&v).map(|(a, b)| a * b).sum();
        phi
    }

    pub fn solve(&self, u: &RadialWave) -> PotentialField {
        PotentialField { values: self.solve_density(&u.density()) }
    }

    /// Constant `c` with `φ_free = φ − c`, where `φ_free → 0` at infinity.
    ///
    /// Outside the support of the density the box potential differs from the
    /// free-space one by a constant equal to `(rφ)'(L)`.
    pub fn free_space_shift(&self, phi: &[f64]) -> f64 {
        let r = self.grid.nodes();
        self.d1_last.iter().zip(phi.iter().zip(r)).map(|(d, (p, r))| d * p * r).sum()
    }
}

/// Radial solve with the default coupling.
pub fn radial_poisson(u: &RadialWave) -> Result<PotentialField> {
    Ok(RadialPoisson::new(&u.grid, DEFAULT_COUPLING)?.solve(u))
}

/// Outcome of a Peaceman–Rachford solve.
#[derive(Clone, Debug)]
pub struct PrAdiSolution {
    pub phi: PotentialField,
    pub iterations: usize,
    /// Sup-norm residual of the discrete equation after each iteration.
    pub residuals: Vec<f64>,
}

/// Peaceman–Rachford iteration for `(H + V) w = f` with commuting directional
/// operators `H` (first coordinate) and `V` (second coordinate).
///
/// Axisymmetric grids work with `w = rφ` and the equation multiplied by `r²`,
/// so that `H = −r²∂²_r` and `V = −(∂²_θ + cot θ ∂_θ)`; planar grids use
/// `H = −∂²_x`, `V = −∂²_y` on `φ` itself.
#[derive(Clone)]
pub struct PrAdiSolver {
    grid: TensorGrid2D,
    coupling: f64,
    h_op: Matrix,
    v_op: Matrix,
    rhos: Vec<f64>,
    h_lus: Vec<std::sync::Arc<Lu<f64>>>,
    v_lus: Vec<std::sync::Arc<Lu<f64>>>,
    angular: Option<AngularOperator>,
    d1r_first: Vec<f64>,
    spectrum: (f64, f64),
}

impl PrAdiSolver {
    /// `rho = None` selects a cyclic geometric sequence spanning the joint
    /// spectrum; `Some(ρ)` runs the stationary single-parameter iteration.
    pub fn new(grid: &TensorGrid2D, coupling: f64, rho: Option<f64>) -> Result<Self> {
        let (h_op, v_op, angular) = match grid.role {
            TensorRole::AxisymmetricPolar => {
                let d2 = reduce_dirichlet(&diff_matrix(&grid.grid_a, 2)?, Ends::Both)?;
                let r = grid.grid_a.nodes();
                let h = Matrix::from_fn(d2.rows(), d2.cols(), |i, j| -r[i + 1] * r[i + 1] * d2.get(i, j));
                let ang = AngularOperator::new(&grid.grid_b)?;
                let v = ang.op.scaled(-1.0);
                (h, v, Some(ang))
            }
            TensorRole::PlanarCartesian => {
                let hx = reduce_dirichlet(&diff_matrix(&grid.grid_a, 2)?, Ends::Both)?.scaled(-1.0);
                let hy = reduce_dirichlet(&diff_matrix(&grid.grid_b, 2)?, Ends::Both)?.scaled(-1.0);
                (hx, hy, None)
            }
        };
        let eh = real_spectrum(&h_op)?;
        let ev = real_spectrum(&v_op)?;
        let positive_min = |e: &[f64]| e.iter().copied().filter(|&x| x > 1e-8).fold(f64::INFINITY, f64::min);
        let lo = positive_min(&eh).min(positive_min(&ev));
        let hi = eh.last().copied().unwrap_or(1.0).max(ev.last().copied().unwrap_or(1.0));
        if !(lo.is_finite() && lo > 0.0) {
            return Err(Error::NumericalFailure("directional operators have no positive spectrum".into()));
        }
        let rhos = match rho {
            Some(r) if r > 0.0 => vec![r],
            Some(r) => return Err(invalid(format!("rho must be positive, got {r}"))),
            None => geometric_parameters(lo, hi),
        };
        let mut h_lus = Vec::with_capacity(rhos.len());
        let mut v_lus = Vec::with_capacity(rhos.len());
        for &r in &rhos {
            let mut a = h_op.clone();
            a.add_diag(&vec![r; a.rows()]);
            h_lus.push(std::sync::Arc::new(Lu::from_matrix(&a)?));
            let mut b = v_op.clone();
            b.add_diag(&vec![r; b.rows()]);
            v_lus.push(std::sync::Arc::new(Lu::from_matrix(&b)?));
        }
        let d1r_first = diff_matrix(&grid.grid_a, 1)?.row(0).to_vec();
        Ok(Self { grid: grid.clone(), coupling, h_op, v_op, rhos, h_lus, v_lus, angular, d1r_first, spectrum: (lo, hi) })
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    /// Smallest positive and largest eigenvalue over both directional operators.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        self.spectrum
    }

    pub fn grid(&self) -> &TensorGrid2D {
        &self.grid
    }

    fn dims(&self) -> (usize, usize) {
        (self.h_op.rows(), self.v_op.rows())
    }

    /// Right-hand side `f` on interior unknowns, from a full-grid density.
    fn rhs(&self, density: &[f64]) -> Vec<f64> {
        let (na, nb) = self.dims();
        let full_nb = self.grid.n_b();
        let r = self.grid.grid_a.nodes();
        let mut f = vec![0.0; na * nb];
        for i in 0..na {
            for j in 0..nb {
                let d = density[(i + 1) * full_nb + j + 1];
                f[i * nb + j] = match self.grid.role {
                    TensorRole::AxisymmetricPolar => -self.coupling * r[i + 1] * d,
                    TensorRole::PlanarCartesian => -self.coupling * d,
                };
            }
        }
        f
    }

    fn apply_h(&self, w: &[f64], out: &mut [f64]) {
        let (na, nb) = self.dims();
        let mut col = vec![0.0; na];
        let mut res = vec![0.0; na];
        for j in 0..nb {
            for i in 0..na {
                col[i] = w[i * nb + j];
            }
            self.h_op.mul_vec_into(&col, &mut res);
            for i in 0..na {
                out[i * nb + j] = res[i];
            }
        }
    }

    fn apply_v(&self, w: &[f64], out: &mut [f64]) {
        let (_, nb) = self.dims();
        for (src, dst) in w.chunks(nb).zip(out.chunks_mut(nb)) {
            self.v_op.mul_vec_into(src, dst);
        }
    }

    /// Sup-norm of `(H + V)w − f`.
    pub fn residual(&self, w: &[f64], f: &[f64]) -> f64 {
        let mut a = vec![0.0; w.len()];
        let mut b = vec![0.0; w.len()];
        self.apply_h(w, &mut a);
        self.apply_v(w, &mut b);
        a.iter().zip(&b).zip(f).fold(0.0, |m, ((x, y), z)| m.max((x + y - z).abs()))
    }

    /// Interior unknowns from a full-grid potential, used for warm starts.
    fn unknowns_from_phi(&self, phi: &[f64]) -> Vec<f64> {
        let (na, nb) = self.dims();
        let full_nb = self.grid.n_b();
        let r = self.grid.grid_a.nodes();
        let mut w = vec![0.0; na * nb];
        for i in 0..na {
            for j in 0..nb {
                let p = phi[(i + 1) * full_nb + j + 1];
                w[i * nb + j] = match self.grid.role {
                    TensorRole::AxisymmetricPolar => r[i + 1] * p,
                    TensorRole::PlanarCartesian => p,
                };
            }
        }
        w
    }

    fn phi_from_unknowns(&self, w: &[f64]) -> Vec<f64> {
        let (na, nb) = self.dims();
        let (full_na, full_nb) = (self.grid.n_a(), self.grid.n_b());
        let mut phi = vec![0.0; full_na * full_nb];
        match &self.angular {
            Some(ang) => {
                let r = self.grid.grid_a.nodes();
                // rφ on the full grid, pole values from the Neumann extension.
                let mut v = vec![0.0; full_na * full_nb];
                for i in 0..na {
                    let line = ang.neumann.extend(&w[i * nb..(i + 1) * nb]);
                    v[(i + 1) * full_nb..(i + 2) * full_nb].copy_from_slice(&line);
                }
                for i in 1..full_na - 1 {
                    for j in 0..full_nb {
                        phi[i * full_nb + j] = v[i * full_nb + j] / r[i];
                    }
                }
                for j in 0..full_nb {
                    phi[j] = (0..full_na).map(|i| self.d1r_first[i] * v[i * full_nb + j]).sum();
                }
            }
            None => {
                for i in 0..na {
                    for j in 0..nb {
                        phi[(i + 1) * full_nb + j + 1] = w[i * nb + j];
                    }
                }
            }
        }
        phi
    }

    /// Iterates from `initial` (or zero) until the sup-norm update drops below `tol`.
    pub fn solve(&self, density: &[f64], tol: f64, max_iter: usize, initial: Option<&[f64]>) -> Result<PrAdiSolution> {
        if density.len() != self.grid.len() {
            return Err(invalid("density does not match the grid"));
        }
        let (na, nb) = self.dims();
        let f = self.rhs(density);
        let mut w = match initial {
            Some(phi) => self.unknowns_from_phi(phi),
            None => vec![0.0; na * nb],
        };
        let mut hw = vec![0.0; w.len()];
        let mut vw = vec![0.0; w.len()];
        let mut half = vec![0.0; w.len()];
        let mut col = vec![0.0; na];
        let mut residuals = Vec::new();
        let mut cycle_start = w.clone();
        for k in 0..max_iter {
            let c = k % self.rhos.len();
            let rho = self.rhos[c];
            // (H + ρ) w½ = f − (V − ρ) w
            self.apply_v(&w, &mut vw);
            for j in 0..nb {
                for i in 0..na {
                    let q = i * nb + j;
                    col[i] = f[q] - vw[q] + rho * w[q];
                }
                self.h_lus[c].solve_in_place(&mut col);
                for i in 0..na {
                    half[i * nb + j] = col[i];
                }
            }
            // (V + ρ) w' = f − (H − ρ) w½
            self.apply_h(&half, &mut hw);
            let mut step: f64 = 0.0;
            for i in 0..na {
                let row = i * nb..(i + 1) * nb;
                let mut line: Vec<f64> = row.clone().map(|q| f[q] - hw[q] + rho * half[q]).collect();
                self.v_lus[c].solve_in_place(&mut line);
                step = step.max(sup_diff(&line, &w[row.clone()]));
                w[row].copy_from_slice(&line);
            }
            residuals.push(self.residual(&w, &f));
            if step == 0.0 {
                return Ok(PrAdiSolution {
                    phi: PotentialField { values: self.phi_from_unknowns(&w) },
                    iterations: k + 1,
                    residuals,
                });
            }
            // With a parameter cycle a single sweep can move very little, so
            // convergence is judged over whole cycles.
            if c + 1 < self.rhos.len() {
                continue;
            }
            let update = sup_diff(&w, &cycle_start);
            cycle_start.copy_from_slice(&w);
            if update <= tol * sup_norm(&w).max(1.0) {
                return Ok(PrAdiSolution {
                    phi: PotentialField { values: self.phi_from_unknowns(&w) },
                    iterations: k + 1,
                    residuals,
                });
            }
        }
        Err(Error::NonConvergence {
            what: "Peaceman-Rachford Poisson iteration".into(),
            iterations: max_iter,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
            history: residuals,
        })
    }
}

/// Geometric parameter cycle covering `[lo, hi]`, two parameters per decade.
fn geometric_parameters(lo: f64, hi: f64) -> Vec<f64> {
    let ratio = (hi / lo).max(1.0);
    let count = ((2.0 * ratio.log10()).ceil() as usize).max(1);
    (0..count)
        .map(|j| lo * ratio.powf((j as f64 + 0.5) / count as f64))
        .collect()
}

/// One-shot PR-ADI solve from `φ⁰ = 0` with the default coupling.
pub fn pr_adi_poisson(
    density: &[f64],
    grid: &TensorGrid2D,
    rho: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<PrAdiSolution> {
    PrAdiSolver::new(grid, DEFAULT_COUPLING, rho)?.solve(density, tol, max_iter, None)
}
