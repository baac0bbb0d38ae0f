//! Stationary states: spherical ground and excited states, axisymmetric states
//! by self-consistent eigen-iteration with branch tracking, and rigidly
//! rotating planar states by continuation in the angular velocity.

use faer::Mat;

use crate::diagnostics::{angular_momentum_j2, Observables};
use crate::error::{invalid, Error, Result};
use crate::fields::{AxiWave, PlanarWave, PotentialField, RadialWave, Snapshot, WaveField};
use crate::linalg::{eig_real, sup_diff, Lu, Matrix};
use crate::poisson::{PrAdiSolver, RadialPoisson, DEFAULT_COUPLING};
use crate::spectral::{diff_matrix, reduce_dirichlet, AngularOperator, ChebyshevGrid1D, Ends, TensorGrid2D, TensorRole};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct StationaryOptions {
    /// Stop when the sup-norm change of φ between outer iterations drops below this.
    pub tol: f64,
    pub max_outer: usize,
    /// Under-relaxation weight α in `φ ← (1−α)φ_old + αφ_new`.
    pub relaxation: f64,
    pub coupling: f64,
    pub poisson_tol: f64,
    pub poisson_max_iter: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 300,
            relaxation: 0.5,
            coupling: DEFAULT_COUPLING,
            poisson_tol: 1e-13,
            poisson_max_iter: 4000,
        }
    }
}

impl StationaryOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_outer == 0 {
            return Err(invalid("tolerance and iteration cap must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(invalid(format!("relaxation must lie in (0, 1], got {}", self.relaxation)));
        }
        if !(self.coupling > 0.0) {
            return Err(invalid("coupling must be positive"));
        }
        Ok(())
    }
}

/// A self-consistent eigenstate. `energy` is the eigenvalue, not the conserved energy.
#[derive(Clone, Debug)]
pub struct StationaryState<W> {
    pub wave: W,
    pub potential: PotentialField,
    pub energy: f64,
    pub j2: f64,
    pub omega: f64,
    pub label: String,
    pub outer_iterations: usize,
    /// Sup-norm φ change per outer iteration.
    pub history: Vec<f64>,
}

impl<W: WaveField> StationaryState<W> {
    fn annotate(&self, s: Snapshot) -> Snapshot {
        s.with("E", format!("{:.16e}", self.energy))
            .with("J2", format!("{:.16e}", self.j2))
            .with("omega", format!("{:.16e}", self.omega))
            .with("label", &self.label)
    }

    fn header(s: &Snapshot) -> Result<(f64, f64, f64, String)> {
        let get = |k: &str| s.extra_f64(k).ok_or_else(|| Error::Parse(format!("state file lacks `{k}`")));
        let label = s.extra.get("label").cloned().unwrap_or_default();
        Ok((get("E")?, get("J2").unwrap_or(0.0), get("omega").unwrap_or(0.0), label))
    }
}

macro_rules! state_io {
    ($wave:ty, $ctor:ident, $reader:ident) => {
        impl StationaryState<$wave> {
            pub fn to_snapshot(&self) -> Snapshot {
                self.annotate(Snapshot::$ctor(&self.wave, &self.potential.values, 0.0))
            }

            pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
                let (wave, potential) = s.$reader()?;
                let (energy, j2, omega, label) = Self::header(s)?;
                Ok(Self { wave, potential, energy, j2, omega, label, outer_iterations: 0, history: Vec::new() })
            }
        }
    };
}

state_io!(RadialWave, radial, to_radial);
state_io!(AxiWave, axi, to_axi);
state_io!(PlanarWave, planar, to_planar);

fn count_sign_changes(values: &[f64], floor: f64) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            changes += 1;
        }
        last = v;
    }
    changes
}

/// Rotates `v` so that its largest-modulus entry is real and positive.
fn align_phase(v: &mut [C64]) {
    let k = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap_or(0);
    let n = v[k].norm();
    if n > 0.0 {
        let rot = v[k].conj() / n;
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

fn real_eigvec(v: &[C64]) -> Vec<C64> {
    let mut v = v.to_vec();
    align_phase(&mut v);
    v.iter().map(|z| C64::new(z.re, 0.0)).collect()
}

/// `‖(−∂²_r + φ − E)u‖₂` on the interior nodes.
pub fn radial_residual(wave: &RadialWave, phi: &[f64], energy: f64) -> Result<f64> {
    let d2 = diff_matrix(&wave.grid, 2)?;
    let u2 = d2.mul_cvec(&wave.values);
    let n = wave.grid.n_points();
    let mut r2 = vec![0.0; n];
    for i in 1..n - 1 {
        r2[i] = (-u2[i] + wave.values[i] * (phi[i] - energy)).norm_sqr();
    }
    Ok(wave.grid.integrate(&r2).sqrt())
}

/// Self-consistent spherical state with exactly `k` interior sign changes.
pub fn spherical_stationary(k: usize, grid: &ChebyshevGrid1D, tol: f64, max_outer: usize) -> Result<StationaryState<RadialWave>> {
    spherical_stationary_with(k, grid, &StationaryOptions { tol, max_outer, ..Default::default() })
}

pub fn spherical_stationary_with(
    k: usize,
    grid: &ChebyshevGrid1D,
    opts: &StationaryOptions,
) -> Result<StationaryState<RadialWave>> {
    opts.validate()?;
    let n = grid.n_points();
    if 4 * k >= n {
        return Err(invalid(format!("k = {k} is not resolvable with {n} points")));
    }
    let d2 = reduce_dirichlet(&diff_matrix(grid, 2)?, Ends::Both)?;
    let poisson = RadialPoisson::new(grid, opts.coupling)?;
    let r = grid.nodes();
    let mut phi: Vec<f64> = r.iter().map(|&r| -1.0 / (1.0 + r)).collect();
    let mut history = Vec::new();
    for outer in 0..opts.max_outer {
        let mut a = d2.scaled(-1.0);
        a.add_diag(&phi[1..n - 1]);
        let pairs = eig_real(&a)?;
        let mut chosen = None;
        for (lam, v) in &pairs {
            if lam.re >= 0.0 {
                break;
            }
            if lam.im.abs() > 1e-8 * lam.re.abs().max(1.0) {
                continue;
            }
            let v = real_eigvec(v);
            let re: Vec<f64> = v.iter().map(|z| z.re).collect();
            let floor = 1e-6 * re.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if count_sign_changes(&re, floor) == k {
                chosen = Some((lam.re, v));
                break;
            }
        }
        let (energy, v) = chosen.ok_or_else(|| {
            Error::SelectionFailure(format!("no bound eigenfunction with {k} sign changes at outer iteration {outer}"))
        })?;
        let mut values = vec![ZERO; n];
        values[1..n - 1].copy_from_slice(&v);
        let mut wave = RadialWave::new(grid.clone(), values)?;
        wave.normalize_to(1.0)?;
        let phi_new = poisson.solve_density(&wave.density());
        let change = sup_diff(&phi_new, &phi);
        history.push(change);
        if change < opts.tol {
            return Ok(StationaryState {
                wave,
                potential: PotentialField { values: phi_new },
                energy,
                j2: 0.0,
                omega: 0.0,
                label: match k {
                    0 => "axi1".into(),
                    1 => "axi3".into(),
                    2 => "axi8".into(),
                    _ => format!("radial{k}"),
                },
                outer_iterations: outer + 1,
                history,
            });
        }
        let a = opts.relaxation;
        phi.iter_mut().zip(&phi_new).for_each(|(p, q)| *p = (1.0 - a) * *p + a * q);
    }
    Err(Error::NonConvergence {
        what: format!("spherical stationary state k={k}"),
        iterations: opts.max_outer,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn cmatvec(a: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    let n = a.nrows();
    let mut y = vec![ZERO; n];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for i in 0..n {
            y[i] += col[i] * xj;
        }
    }
    y
}

/// Shift-invert iteration from `start` towards the eigenpair nearest `shift`.
fn inverse_iteration(a: &Mat<C64>, shift: C64, start: &[C64]) -> Result<(C64, Vec<C64>)> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = Lu::from_complex(&m)?;
    let mut x = start.to_vec();
    let scale = x.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    x.iter_mut().for_each(|z| *z /= scale);
    let mut best: Option<(f64, C64, Vec<C64>)> = None;
    for _ in 0..60 {
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        let xy: C64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let xx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let lam = shift + xx / xy;
        let s = y.iter().fold(0.0f64, |s, z| s.max(z.norm()));
        x = y.into_iter().map(|z| z / s).collect();
        let ax = cmatvec(a, &x);
        let res = ax.iter().zip(&x).fold(0.0f64, |m, (p, q)| m.max((p - lam * q).norm()));
        let better = best.as_ref().map_or(true, |b| res < b.0);
        if better {
            best = Some((res, lam, x.clone()));
        }
        if res < 1e-12 * (1.0 + lam.norm()) {
            break;
        }
    }
    let (_, lam, v) = best.expect("at least one sweep");
    Ok((lam, v))
}

fn rayleigh_quotient(a: &Mat<C64>, x: &[C64]) -> Option<C64> {
    let ax = cmatvec(a, x);
    let xx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let q: C64 = x.iter().zip(&ax).map(|(p, q)| p.conj() * q).sum::<C64>() / xx;
    q.is_finite().then_some(q)
}

fn overlap(w: &[f64], a: &[C64], b: &[C64]) -> f64 {
    let mut ab = ZERO;
    let (mut aa, mut bb) = (0.0, 0.0);
    for ((w, x), y) in w.iter().zip(a).zip(b) {
        ab += x.conj() * y * *w;
        aa += w * x.norm_sqr();
        bb += w * y.norm_sqr();
    }
    ab.norm() / (aa * bb).sqrt()
}

/// Picks the candidate of maximal overlap with `prev`, refusing near-ties.
fn select_by_overlap(candidates: &[(f64, Vec<C64>)], prev: &[C64], w: &[f64]) -> Result<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = candidates.iter().enumerate().map(|(i, c)| (i, overlap(w, &c.1, prev))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    if scored.len() > 1 && scored[0].1 - scored[1].1 < 0.01 * scored[0].1 {
        return Err(Error::AmbiguousBranch {
            first: candidates[scored[0].0].0,
            second: candidates[scored[1].0].0,
        });
    }
    scored.first().copied().ok_or_else(|| Error::SelectionFailure("no candidate eigenfunctions".into()))
}

/// Bound candidates from the low end of a real spectrum.
fn low_real_pairs(a: &Matrix, count: usize) -> Result<Vec<(f64, Vec<C64>)>> {
    Ok(eig_real(a)?
        .into_iter()
        .filter(|(l, _)| l.re < 0.0 && l.im.abs() <= 1e-8 * l.re.abs().max(1.0))
        .take(count)
        .map(|(l, v)| (l.re, real_eigvec(&v)))
        .collect())
}

/// Angular and radial node counts `(l, n)` of a real axisymmetric field.
pub fn axi_node_counts(wave: &AxiWave) -> (usize, usize) {
    let (na, nb) = (wave.grid.n_a(), wave.grid.n_b());
    let re: Vec<f64> = wave.values.iter().map(|z| z.re).collect();
    let k = (0..re.len()).max_by(|&a, &b| re[a].abs().total_cmp(&re[b].abs())).unwrap_or(0);
    let (i0, j0) = (k / nb, k % nb);
    let row = &re[i0 * nb..(i0 + 1) * nb];
    let row_max = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l = count_sign_changes(row, 1e-3 * row_max);
    let col: Vec<f64> = (0..na).map(|i| re[i * nb + j0]).collect();
    let col_max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = count_sign_changes(&col, 1e-6 * col_max);
    (l, n)
}

fn axi_label(l: usize, n: usize) -> String {
    match (l, n) {
        (0, 0) => "axi1".into(),
        (1, 0) => "axi2".into(),
        (0, 1) => "axi3".into(),
        _ => format!("l{l}n{n}"),
    }
}

/// Axisymmetric operator pieces for `u = rψ` on interior nodes.
struct AxiOperator {
    grid: TensorGrid2D,
    base: Matrix,
    ang: AngularOperator,
    mi: usize,
    ni: usize,
}

impl AxiOperator {
    fn new(grid: &TensorGrid2D) -> Result<Self> {
        let d2 = reduce_dirichlet(&diff_matrix(&grid.grid_a, 2)?, Ends::Both)?;
        let ang = AngularOperator::new(&grid.grid_b)?;
        let (mi, ni) = (d2.rows(), ang.n_interior());
        let r = grid.grid_a.nodes();
        let base = Matrix::from_fn(mi * ni, mi * ni, |p, q| {
            let (i, j) = (p / ni, p % ni);
            let (k, l) = (q / ni, q % ni);
            let mut v = 0.0;
            if j == l {
                v -= d2.get(i, k);
            }
            if i == k {
                v -= ang.op.get(j, l) / (r[i + 1] * r[i + 1]);
            }
            v
        });
        Ok(Self { grid: grid.clone(), base, ang, mi, ni })
    }

    fn interior_phi(&self, phi: &[f64]) -> Vec<f64> {
        let nb = self.grid.n_b();
        (0..self.mi * self.ni).map(|p| phi[(p / self.ni + 1) * nb + p % self.ni + 1]).collect()
    }

    fn matrix(&self, phi: &[f64]) -> Matrix {
        let mut a = self.base.clone();
        a.add_diag(&self.interior_phi(phi));
        a
    }

    fn extend(&self, v: &[C64]) -> Vec<C64> {
        let nb = self.grid.n_b();
        let mut out = vec![ZERO; self.grid.len()];
        for i in 0..self.mi {
            let row = self.ang.neumann.extend(&v[i * self.ni..(i + 1) * self.ni]);
            out[(i + 1) * nb..(i + 2) * nb].copy_from_slice(&row);
        }
        out
    }

    fn restrict(&self, full: &[C64]) -> Vec<C64> {
        let nb = self.grid.n_b();
        (0..self.mi * self.ni).map(|p| full[(p / self.ni + 1) * nb + p % self.ni + 1]).collect()
    }
}

fn symmetrize_theta(phi: &mut [f64], nb: usize) {
    for row in phi.chunks_mut(nb) {
        for j in 0..nb / 2 {
            let m = 0.5 * (row[j] + row[nb - 1 - j]);
            row[j] = m;
            row[nb - 1 - j] = m;
        }
    }
}

/// Self-consistent axisymmetric state with quantum numbers `(l, n)`.
pub fn axi_stationary(
    selector: (usize, usize),
    grid: &TensorGrid2D,
    tol: f64,
    max_outer: usize,
) -> Result<StationaryState<AxiWave>> {
    axi_stationary_with(selector, grid, &StationaryOptions { tol, max_outer, ..Default::default() })
}

pub fn axi_stationary_with(
    selector: (usize, usize),
    grid: &TensorGrid2D,
    opts: &StationaryOptions,
) -> Result<StationaryState<AxiWave>> {
    opts.validate()?;
    if grid.role != TensorRole::AxisymmetricPolar {
        return Err(invalid("axi_stationary needs an axisymmetric grid"));
    }
    let (l, nr) = selector;
    if 4 * l >= grid.n_b() || 4 * nr >= grid.n_a() {
        return Err(invalid(format!("selector ({l}, {nr}) is not resolvable on this grid")));
    }
    let op = AxiOperator::new(grid)?;
    let poisson = PrAdiSolver::new(grid, opts.coupling, None)?;
    let weights = crate::fields::axi_weights(grid);
    let nb = grid.n_b();
    let mut phi: Vec<f64> = (0..grid.len()).map(|q| -1.0 / (1.0 + grid.coords(q / nb, q % nb).0)).collect();
    let mut prev: Option<(f64, Vec<C64>)> = None;
    let mut history = Vec::new();
    for outer in 0..opts.max_outer {
        let a = op.matrix(&phi);
        let (energy, v) = match &prev {
            None => {
                let cands = low_real_pairs(&a, 12)?;
                cands
                    .into_iter()
                    .find(|(_, v)| {
                        let w = AxiWave { grid: grid.clone(), values: op.extend(v) };
                        axi_node_counts(&w) == (l, nr)
                    })
                    .ok_or_else(|| {
                        Error::SelectionFailure(format!("no bound state with node counts ({l}, {nr}) among the lowest 12"))
                    })?
            }
            Some((e_prev, v_prev)) => {
                let ac = a.to_faer_complex();
                let start = op.restrict(v_prev);
                let (lam, v) = inverse_iteration(&ac, C64::new(e_prev - 1e-7, 0.0), &start)?;
                let v = real_eigvec(&v);
                if overlap(&weights, &op.extend(&v), v_prev) > 0.9 {
                    (lam.re, v)
                } else {
                    let cands = low_real_pairs(&a, 12)?;
                    let ext: Vec<(f64, Vec<C64>)> = cands.iter().map(|(e, v)| (*e, op.extend(v))).collect();
                    let (best, _) = select_by_overlap(&ext, v_prev, &weights)?;
                    cands[best].clone()
                }
            }
        };
        let mut wave = AxiWave::new(grid.clone(), op.extend(&v))?;
        wave.normalize_to(1.0)?;
        let mut phi_new = poisson.solve(&wave.density(), opts.poisson_tol, opts.poisson_max_iter, Some(&phi))?.phi.values;
        symmetrize_theta(&mut phi_new, nb);
        let change = sup_diff(&phi_new, &phi);
        history.push(change);
        if change < opts.tol {
            let j2 = angular_momentum_j2(&wave);
            return Ok(StationaryState {
                wave,
                potential: PotentialField { values: phi_new },
                energy,
                j2,
                omega: 0.0,
                label: axi_label(l, nr),
                outer_iterations: outer + 1,
                history,
            });
        }
        let al = opts.relaxation;
        phi.iter_mut().zip(&phi_new).for_each(|(p, q)| *p = (1.0 - al) * *p + al * q);
        prev = Some((energy, wave.values.clone()));
    }
    Err(Error::NonConvergence {
        what: format!("axisymmetric stationary state ({l}, {nr})"),
        iterations: opts.max_outer,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// `‖(−∂²_r − r⁻²Λ + φ − E)u‖₂` over interior radii and interior angles,
/// with `Λ = ∂²_θ + cot θ ∂_θ`.
pub fn axi_residual(wave: &AxiWave, phi: &[f64], energy: f64) -> Result<f64> {
    let op = AxiOperator::new(&wave.grid)?;
    let mut a = op.matrix(phi);
    a.add_diag(&vec![-energy; a.rows()]);
    let res = a.mul_cvec(&op.restrict(&wave.values));
    let w = crate::fields::axi_weights(&wave.grid);
    let wi: Vec<f64> = {
        let nb = wave.grid.n_b();
        (0..op.mi * op.ni).map(|p| w[(p / op.ni + 1) * nb + p % op.ni + 1]).collect()
    };
    Ok(res.iter().zip(&wi).map(|(z, w)| w * z.norm_sqr()).sum::<f64>().sqrt())
}

/// Planar rotating-frame operator on interior nodes.
struct PlanarOperator {
    grid: TensorGrid2D,
    base: Matrix,
    rot: Matrix,
    m: usize,
}

impl PlanarOperator {
    fn new(grid: &TensorGrid2D) -> Result<Self> {
        let n = grid.n_a();
        let m = n - 2;
        let d2 = reduce_dirichlet(&diff_matrix(&grid.grid_a, 2)?, Ends::Both)?;
        let d1 = reduce_dirichlet(&diff_matrix(&grid.grid_a, 1)?, Ends::Both)?;
        let base = Matrix::from_fn(m * m, m * m, |p, q| {
            let (i, j) = (p / m, p % m);
            let (k, l) = (q / m, q % m);
            let mut v = 0.0;
            if j == l {
                v -= d2.get(i, k);
            }
            if i == k {
                v -= d2.get(j, l);
            }
            v
        });
        // (Y∂_X − X∂_Y)
        let rot = Matrix::from_fn(m * m, m * m, |p, q| {
            let (i, j) = (p / m, p % m);
            let (k, l) = (q / m, q % m);
            let (x, y) = grid.coords(i + 1, j + 1);
            let mut v = 0.0;
            if j == l {
                v += y * d1.get(i, k);
            }
            if i == k {
                v -= x * d1.get(j, l);
            }
            v
        });
        Ok(Self { grid: grid.clone(), base, rot, m })
    }

    fn interior_index(&self, p: usize) -> usize {
        (p / self.m + 1) * self.grid.n_b() + p % self.m + 1
    }

    fn real_matrix(&self, phi: &[f64]) -> Matrix {
        let mut a = self.base.clone();
        let d: Vec<f64> = (0..self.m * self.m).map(|p| phi[self.interior_index(p)]).collect();
        a.add_diag(&d);
        a
    }

    /// `−∇² + φ − iω(Y∂_X − X∂_Y)`.
    fn matrix(&self, phi: &[f64], omega: f64) -> Mat<C64> {
        let a = self.real_matrix(phi);
        let k = self.m * self.m;
        Mat::from_fn(k, k, |p, q| C64::new(a.get(p, q), -omega * self.rot.get(p, q)))
    }

    fn extend(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.grid.len()];
        for (p, z) in v.iter().enumerate() {
            out[self.interior_index(p)] = *z;
        }
        out
    }

    fn restrict(&self, full: &[C64]) -> Vec<C64> {
        (0..self.m * self.m).map(|p| full[self.interior_index(p)]).collect()
    }
}

/// `‖(−∇² + φ − iω(Yψ_X − Xψ_Y) − E)ψ‖₂` over interior nodes.
pub fn rotating_residual(wave: &PlanarWave, phi: &[f64], energy: f64, omega: f64) -> Result<f64> {
    let op = PlanarOperator::new(&wave.grid)?;
    let a = op.matrix(phi, omega);
    let x = op.restrict(&wave.values);
    let ax = cmatvec(&a, &x);
    let w = wave.grid.quad_weights();
    Ok(ax
        .iter()
        .zip(&x)
        .enumerate()
        .map(|(p, (y, x))| w[op.interior_index(p)] * (y - x * energy).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

fn mirror_x(grid: &TensorGrid2D, v: &[C64]) -> Vec<C64> {
    let (na, nb) = (grid.n_a(), grid.n_b());
    (0..v.len()).map(|q| v[(na - 1 - q / nb) * nb + q % nb]).collect()
}

/// Projects onto states with u(−x, y) = −conj u(x, y) after choosing the
/// global phase that keeps most of `v`. This pins the dipole orientation.
fn impose_mirror_conjugate(grid: &TensorGrid2D, w: &[f64], v: &mut [C64]) {
    let m = mirror_x(grid, v);
    let z: C64 = w.iter().zip(v.iter()).zip(&m).map(|((w, a), b)| -a * b * *w).sum();
    if z.norm() > 0.0 {
        let rot = C64::from_polar(1.0, -0.5 * z.arg());
        v.iter_mut().for_each(|a| *a *= rot);
    }
    let m = mirror_x(grid, v);
    v.iter_mut().zip(&m).for_each(|(a, b)| *a = (*a - b.conj()) * 0.5);
    let k = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap_or(0);
    if v[k].re < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

struct PlanarLoop<'a> {
    op: PlanarOperator,
    poisson: PrAdiSolver,
    weights: Vec<f64>,
    opts: &'a StationaryOptions,
}

impl PlanarLoop<'_> {
    /// Lowest bound eigenfunction odd in x for a mirror-symmetric φ.
    fn odd_seed(&self, phi: &[f64]) -> Result<(f64, Vec<C64>)> {
        let a = self.op.real_matrix(phi);
        for (e, v) in low_real_pairs(&a, 12)? {
            let full = self.op.extend(&v);
            let m = mirror_x(&self.op.grid, &full);
            let odd: Vec<C64> = full.iter().zip(&m).map(|(a, b)| (a - b) * 0.5).collect();
            let on: f64 = odd.iter().map(|z| z.norm_sqr()).sum();
            let vn: f64 = full.iter().map(|z| z.norm_sqr()).sum();
            if on > 0.01 * vn {
                let mut odd = odd;
                align_phase(&mut odd);
                return Ok((e, odd));
            }
        }
        Err(Error::SelectionFailure("no odd-in-x bound state among the lowest 12".into()))
    }

    /// Self-consistent loop at fixed ω, tracking the branch through `start`.
    fn converge(&self, omega: f64, phi0: Vec<f64>, start: (f64, Vec<C64>)) -> Result<StationaryState<PlanarWave>> {
        let grid = &self.op.grid;
        let mut phi = phi0;
        let (mut e_prev, mut v_prev) = start;
        let mut history = Vec::new();
        for outer in 0..self.opts.max_outer {
            let a = self.op.matrix(&phi, omega);
            let start = self.op.restrict(&v_prev);
            let shift = rayleigh_quotient(&a, &start).unwrap_or(C64::new(e_prev, 0.0)) - 1e-7;
            let (lam, v) = inverse_iteration(&a, shift, &start)?;
            let mut full = self.op.extend(&v);
            impose_mirror_conjugate(grid, &self.weights, &mut full);
            let ov = overlap(&self.weights, &full, &v_prev);
            if ov < 0.5 {
                return Err(Error::BranchLost { last_good_omega: omega, overlap: ov });
            }
            let mut wave = PlanarWave::new(grid.clone(), full)?;
            wave.normalize_to(1.0)?;
            let phi_new = self
                .poisson
                .solve(&wave.density(), self.opts.poisson_tol, self.opts.poisson_max_iter, Some(&phi))?
                .phi
                .values;
            let change = sup_diff(&phi_new, &phi);
            history.push(change);
            if change < self.opts.tol {
                let j2 = angular_momentum_j2(&wave);
                return Ok(StationaryState {
                    wave,
                    potential: PotentialField { values: phi_new },
                    energy: lam.re,
                    j2,
                    omega,
                    label: format!("rotating{omega}"),
                    outer_iterations: outer + 1,
                    history,
                });
            }
            let al = self.opts.relaxation;
            phi.iter_mut().zip(&phi_new).for_each(|(p, q)| *p = (1.0 - al) * *p + al * q);
            e_prev = lam.re;
            v_prev = wave.values;
        }
        Err(Error::NonConvergence {
            what: format!("rotating stationary state at omega={omega}"),
            iterations: self.opts.max_outer,
            residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }
}

/// Rigidly rotating planar state reached by continuation from the
/// odd-in-x state at ω = 0 in steps of at most `delta_omega`.
pub fn rotating_stationary(
    omega_target: f64,
    delta_omega: f64,
    grid: &TensorGrid2D,
    tol: f64,
) -> Result<StationaryState<PlanarWave>> {
    rotating_stationary_with(omega_target, delta_omega, grid, &StationaryOptions { tol, ..Default::default() })
}

pub fn rotating_stationary_with(
    omega_target: f64,
    delta_omega: f64,
    grid: &TensorGrid2D,
    opts: &StationaryOptions,
) -> Result<StationaryState<PlanarWave>> {
    opts.validate()?;
    if grid.role != TensorRole::PlanarCartesian {
        return Err(invalid("rotating_stationary needs a planar grid"));
    }
    if omega_target.abs() > 0.02 {
        return Err(invalid(format!("|omega| = {} exceeds the continuation range 0.02", omega_target.abs())));
    }
    if omega_target != 0.0 && !(delta_omega > 0.0) {
        return Err(invalid("delta_omega must be positive"));
    }
    let lp = PlanarLoop {
        op: PlanarOperator::new(grid)?,
        poisson: PrAdiSolver::new(grid, opts.coupling, None)?,
        weights: grid.quad_weights(),
        opts,
    };
    let nb = grid.n_b();
    let phi0: Vec<f64> = (0..grid.len())
        .map(|q| {
            let (x, y) = grid.coords(q / nb, q % nb);
            -1.0 / (1.0 + x.hypot(y))
        })
        .collect();
    let seed = lp.odd_seed(&phi0)?;
    let mut state = lp.converge(0.0, phi0, seed)?;
    let steps = if omega_target == 0.0 { 0 } else { (omega_target.abs() / delta_omega).ceil() as usize };
    for s in 1..=steps {
        let omega = omega_target * s as f64 / steps as f64;
        let prev_omega = state.omega;
        state = lp
            .converge(omega, state.potential.values.clone(), (state.energy, state.wave.values.clone()))
            .map_err(|e| match e {
                Error::BranchLost { overlap, .. } => Error::BranchLost { last_good_omega: prev_omega, overlap },
                other => other,
            })?;
    }
    state.label = format!("rotating{omega_target}");
    Ok(state)
}

/// Residual of the defining eigen-equation.
pub trait StationaryResidual {
    fn residual(&self) -> Result<f64>;
}

impl StationaryResidual for StationaryState<RadialWave> {
    fn residual(&self) -> Result<f64> {
        radial_residual(&self.wave, &self.potential.values, self.energy)
    }
}

impl StationaryResidual for StationaryState<AxiWave> {
    fn residual(&self) -> Result<f64> {
        axi_residual(&self.wave, &self.potential.values, self.energy)
    }
}

impl StationaryResidual for StationaryState<PlanarWave> {
    fn residual(&self) -> Result<f64> {
        rotating_residual(&self.wave, &self.potential.values, self.energy, self.omega)
    }
}

impl<W: Observables> StationaryState<W> {
    /// `∫|∇ψ|² + ∫φ|ψ|²` from the stored fields.
    pub fn energy_functional(&self) -> f64 {
        crate::diagnostics::energy_functional(&self.wave, &self.potential.values)
    }
}
