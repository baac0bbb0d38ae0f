//! Observables and analysis: energies, angular momentum, the residual
//! probability bound, spectra, convergence orders and rescaled-ground fits.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::fields::{axi_weights, AxiWave, PlanarWave, RadialWave, Snapshot, WaveField};
use crate::linalg::Matrix;
use crate::spectral::{diff_matrix, TensorGrid2D};
use crate::stationary::StationaryState;
use crate::C64;

/// One row of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub p_grid: f64,
    pub e_conserved: f64,
    pub e_functional: f64,
    pub j2: f64,
    pub probe_phase: f64,
    pub phi_iterations: usize,
}

pub const CSV_HEADER: &str = "t,p_grid,E_conserved,E_functional,J2,probe_phase,phi_iterations";

impl DiagnosticsRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.t, self.p_grid, self.e_conserved, self.e_functional, self.j2, self.probe_phase, self.phi_iterations
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Parse(format!("diagnostics row has {} columns", cols.len())));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
        Ok(Self {
            t: f(cols[0])?,
            p_grid: f(cols[1])?,
            e_conserved: f(cols[2])?,
            e_functional: f(cols[3])?,
            j2: f(cols[4])?,
            probe_phase: f(cols[5])?,
            phi_iterations: cols[6].parse().map_err(|_| Error::Parse(format!("bad count `{}`", cols[6])))?,
        })
    }

    pub fn is_valid(&self) -> bool {
        let finite = [self.t, self.p_grid, self.e_conserved, self.e_functional, self.j2, self.probe_phase]
            .iter()
            .all(|v| v.is_finite());
        finite && self.p_grid >= 0.0 && self.p_grid <= 1.0 + 1e-6
    }
}

pub fn read_diagnostics_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('t'))
        .map(DiagnosticsRecord::from_csv)
        .collect()
}

/// Consumer of evolution output, fed by a single producer in time order.
pub trait DiagnosticsSink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()>;

    fn snapshot(&mut self, _snapshot: &Snapshot) -> Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _snapshot: &Snapshot) -> Result<()> {
        Ok(())
    }
}

impl DiagnosticsSink for Vec<DiagnosticsRecord> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Appends records to a CSV stream.
pub struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, write_header: bool) -> Result<Self> {
        if write_header {
            writeln!(out, "{CSV_HEADER}")?;
        }
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> DiagnosticsSink for CsvSink<W> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", rec.to_csv())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Unwraps the phase of a sampled complex value, assuming it moves by less
/// than π between samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseTracker {
    last: f64,
    total: f64,
}

impl PhaseTracker {
    pub fn new(z: C64) -> Self {
        let a = z.arg();
        Self { last: a, total: a }
    }

    pub fn update(&mut self, z: C64) -> f64 {
        let a = z.arg();
        let mut d = a - self.last;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d <= -PI {
            d += 2.0 * PI;
        }
        self.total += d;
        self.last = a;
        self.total
    }

    pub fn value(&self) -> f64 {
        self.total
    }

    pub fn annotate(&self, s: Snapshot) -> Snapshot {
        s.with("phase_last", format!("{:.16e}", self.last)).with("phase_total", format!("{:.16e}", self.total))
    }

    pub fn from_header(s: &Snapshot) -> Result<Self> {
        match (s.extra_f64("phase_last"), s.extra_f64("phase_total")) {
            (Some(last), Some(total)) => Ok(Self { last, total }),
            _ => Err(Error::Parse("checkpoint lacks the probe phase".into())),
        }
    }
}

/// Gradient-based observables shared by the three geometries.
pub trait Observables: WaveField {
    /// `∫|∇ψ|²` in the geometry's measure.
    fn kinetic(&self) -> f64;
    /// `J²`; zero for radial waves.
    fn angular_momentum_j2(&self) -> f64;

    fn potential_energy(&self, phi: &[f64]) -> f64 {
        self.measure_weights().iter().zip(self.values()).zip(phi).map(|((w, z), p)| w * p * z.norm_sqr()).sum()
    }
}

impl Observables for RadialWave {
    fn kinetic(&self) -> f64 {
        let d1 = diff_matrix(&self.grid, 1).expect("valid grid");
        let du = d1.mul_cvec(&self.values);
        self.grid.integrate(&du.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
    }

    fn angular_momentum_j2(&self) -> f64 {
        0.0
    }
}

/// Derivatives along the first and second tensor coordinates.
pub(crate) fn tensor_gradient(grid: &TensorGrid2D, values: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let da = diff_matrix(&grid.grid_a, 1).expect("valid grid");
    let db = diff_matrix(&grid.grid_b, 1).expect("valid grid");
    tensor_gradient_with(grid, &da, &db, values)
}

pub(crate) fn tensor_gradient_with(grid: &TensorGrid2D, da: &Matrix, db: &Matrix, values: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let (na, nb) = (grid.n_a(), grid.n_b());
    let mut ga = vec![C64::new(0.0, 0.0); na * nb];
    let mut gb = vec![C64::new(0.0, 0.0); na * nb];
    for i in 0..na {
        let row = &values[i * nb..(i + 1) * nb];
        db.mul_cvec_into(row, &mut gb[i * nb..(i + 1) * nb]);
    }
    let mut col = vec![C64::new(0.0, 0.0); na];
    let mut out = vec![C64::new(0.0, 0.0); na];
    for j in 0..nb {
        for i in 0..na {
            col[i] = values[i * nb + j];
        }
        da.mul_cvec_into(&col, &mut out);
        for i in 0..na {
            ga[i * nb + j] = out[i];
        }
    }
    (ga, gb)
}

impl Observables for AxiWave {
    /// `½∫∫(|u_r|² + |u_θ|²/r²) sinθ dθ dr`.
    fn kinetic(&self) -> f64 {
        let (ur, ut) = tensor_gradient(&self.grid, &self.values);
        let w = axi_weights(&self.grid);
        let nb = self.grid.n_b();
        let r = self.grid.grid_a.nodes();
        (0..self.grid.len())
            .map(|q| {
                let ri = r[q / nb];
                let ang = if ri > 0.0 { ut[q].norm_sqr() / (ri * ri) } else { 0.0 };
                w[q] * (ur[q].norm_sqr() + ang)
            })
            .sum()
    }

    /// `∫∫|u_θ|² sinθ dθ dr`.
    fn angular_momentum_j2(&self) -> f64 {
        let (_, ut) = tensor_gradient(&self.grid, &self.values);
        let w = axi_weights(&self.grid);
        w.iter().zip(&ut).map(|(w, z)| 2.0 * w * z.norm_sqr()).sum()
    }
}

impl Observables for PlanarWave {
    fn kinetic(&self) -> f64 {
        let (gx, gy) = tensor_gradient(&self.grid, &self.values);
        let w = self.grid.quad_weights();
        (0..self.grid.len()).map(|q| w[q] * (gx[q].norm_sqr() + gy[q].norm_sqr())).sum()
    }

    /// `∫∫|xψ_y − yψ_x|²` about the box centre.
    fn angular_momentum_j2(&self) -> f64 {
        let (gx, gy) = tensor_gradient(&self.grid, &self.values);
        let w = self.grid.quad_weights();
        let nb = self.grid.n_b();
        (0..self.grid.len())
            .map(|q| {
                let (x, y) = self.grid.coords(q / nb, q % nb);
                w[q] * (gy[q] * x - gx[q] * y).norm_sqr()
            })
            .sum()
    }
}

/// `ℰ = ∫|∇ψ|² + ½∫φ|ψ|²`.
pub fn conserved_energy<W: Observables>(wave: &W, phi: &[f64]) -> f64 {
    wave.kinetic() + 0.5 * wave.potential_energy(phi)
}

/// `E = ∫|∇ψ|² + ∫φ|ψ|²`.
pub fn energy_functional<W: Observables>(wave: &W, phi: &[f64]) -> f64 {
    wave.kinetic() + wave.potential_energy(phi)
}

pub fn angular_momentum_j2<W: Observables>(wave: &W) -> f64 {
    wave.angular_momentum_j2()
}

/// `(|ℰ_I|/|ℰ₀|)^{1/3}`, a lower bound on the probability left in a rescaled ground state.
pub fn residual_bound(e_initial: f64, e_ground: f64) -> Result<f64> {
    if !(e_initial < 0.0) {
        return Err(Error::BoundInapplicable(e_initial));
    }
    if !(e_ground < 0.0) {
        return Err(invalid(format!("ground-state energy must be negative, got {e_ground}")));
    }
    Ok((e_initial.abs() / e_ground.abs()).cbrt())
}

/// Spectral peaks of a uniformly sampled complex series, as
/// `(angular frequency, magnitude)` sorted by frequency.
///
/// A Hann window is applied before the transform. Peaks are local maxima
/// exceeding five times the median magnitude and 1e-8 of the largest one.
pub fn power_spectrum(series: &[C64], dt: f64) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 64 {
        return Err(invalid(format!("series needs at least 64 samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("sample spacing must be positive"));
    }
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = series
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
            rustfft::num_complex::Complex::new(z.re * w, z.im * w)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = (5.0 * sorted[n / 2]).max(1e-8 * sorted[n - 1]);
    let mut peaks = Vec::new();
    for k in 0..n {
        let prev = mag[(k + n - 1) % n];
        let next = mag[(k + 1) % n];
        if mag[k] > prev && mag[k] >= next && mag[k] > floor {
            let kk = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
            peaks.push((2.0 * PI * kk / (n as f64 * dt), mag[k]));
        }
    }
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(peaks)
}

/// Order `k` from observables at steps `h, h/2, h/4`, via the quotient
/// `(O_h − O_{h/4})/(O_{h/2} − O_{h/4}) = 2^k + 1`.
pub fn richardson_order(o_h: f64, o_h2: f64, o_h4: f64) -> Result<f64> {
    let den = o_h2 - o_h4;
    if den.abs() < 1e-15 {
        return Err(Error::Indeterminate(format!("|O_h/2 − O_h/4| = {:.3e} is below 1e-15", den.abs())));
    }
    let q = (o_h - o_h4) / den;
    if !(q > 1.0) {
        return Err(Error::Indeterminate(format!("Richardson quotient {q} is not above 1")));
    }
    Ok((q - 1.0).log2())
}

/// `u_p(r) = p·u₀(pr)`, the rescaled ground state `p²ψ₀(pr)` in `u = rψ` form,
/// sampled on `grid_wave`'s nodes.
pub fn rescaled_ground(ground: &RadialWave, p: f64, target: &crate::spectral::ChebyshevGrid1D) -> RadialWave {
    let re: Vec<f64> = ground.values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = ground.values.iter().map(|z| z.im).collect();
    RadialWave::from_fn(target.clone(), |r| {
        C64::new(ground.grid.interpolate(&re, p * r), ground.grid.interpolate(&im, p * r)) * p
    })
}

/// Relative `L²` distance between `|u|` and the rescaled ground state with the
/// same on-grid probability.
pub fn fit_rescaled_ground(wave: &RadialWave, ground: &StationaryState<RadialWave>) -> Result<(f64, f64)> {
    let p = wave.probability();
    if p < 0.01 {
        return Err(Error::FitMeaningless(p));
    }
    let model = rescaled_ground(&ground.wave, p, &wave.grid);
    let diff: Vec<f64> = wave.values.iter().zip(&model.values).map(|(a, b)| (a.norm() - b.norm()).powi(2)).collect();
    let norm: Vec<f64> = model.values.iter().map(|z| z.norm_sqr()).collect();
    Ok((p, (wave.grid.integrate(&diff) / wave.grid.integrate(&norm)).sqrt()))
}
