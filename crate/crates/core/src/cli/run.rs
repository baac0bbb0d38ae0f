//! Run orchestration: run directories, evolution, sweeps, resume and analysis.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Command, RunConfig, Source};
use crate::diagnostics::{
    conserved_energy, fit_rescaled_ground, power_spectrum, read_diagnostics_csv, residual_bound, CsvSink,
    DiagnosticsRecord, DiagnosticsSink, CSV_HEADER,
};
use crate::error::{invalid, Error, Result};
use crate::evolve::{AdiEvolver, SphericalEvolver};
use crate::fields::{AxiWave, Geometry, PlanarWave, RadialWave, Snapshot, WaveField};
use crate::oracle::{free_gaussian, free_gaussian_planar, normalize_gaussian};
use crate::poisson::RadialPoisson;
use crate::spectral::{ChebyshevGrid1D, TensorGrid2D};
use crate::stationary::{
    axi_stationary_with, rotating_stationary_with, spherical_stationary_with, StationaryOptions, StationaryState,
};
use crate::C64;

pub const CONFIG_FILE: &str = "config.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const STATE_FILE: &str = "state.txt";
pub const FINAL_FILE: &str = "final.txt";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ERROR_FILE: &str = "error.txt";
pub const SUMMARY_HEADER: &str = "v,a,sigma,E_initial,p_residual_at_t,bound,residual_fit";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub resume: Option<PathBuf>,
    pub workers: Option<usize>,
    pub serial: bool,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        Error::Io(_) | Error::Parse(_) => 4,
        _ => 3,
    }
}

/// Writes `text` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Sink writing into a run directory.
pub struct RunDirSink {
    dir: PathBuf,
    csv: CsvSink<fs::File>,
    stride: usize,
    seen: usize,
}

impl RunDirSink {
    fn create(dir: &Path, stride: usize) -> Result<Self> {
        fs::create_dir_all(dir.join("snapshots"))?;
        let file = fs::File::create(dir.join(DIAGNOSTICS_FILE))?;
        Ok(Self { dir: dir.to_path_buf(), csv: CsvSink::new(file, true)?, stride, seen: 0 })
    }

    /// Reopens after truncating diagnostics rows past `t` and snapshots past `step`.
    fn reopen(dir: &Path, stride: usize, t: f64, step: u64) -> Result<Self> {
        let path = dir.join(DIAGNOSTICS_FILE);
        let text = fs::read_to_string(&path)?;
        let mut kept = String::from(CSV_HEADER);
        kept.push('\n');
        let mut rows = 0;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            if DiagnosticsRecord::from_csv(line)?.t <= t {
                kept.push_str(line);
                kept.push('\n');
                rows += 1;
            }
        }
        write_atomic(&path, &kept)?;
        let snaps = dir.join("snapshots");
        fs::create_dir_all(&snaps)?;
        for entry in fs::read_dir(&snaps)? {
            let p = entry?.path();
            let later = p
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.strip_prefix("snap_"))
                .and_then(|s| s.parse::<u64>().ok())
                .is_some_and(|k| k > step);
            if later {
                fs::remove_file(p)?;
            }
        }
        let file = fs::OpenOptions::new().append(true).open(&path)?;
        Ok(Self { dir: dir.to_path_buf(), csv: CsvSink::new(file, false)?, stride, seen: rows })
    }
}

impl DiagnosticsSink for RunDirSink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.csv.record(rec)
    }

    fn snapshot(&mut self, snapshot: &Snapshot) -> Result<()> {
        let k = self.seen;
        self.seen += 1;
        if self.stride == 0 || k % self.stride != 0 {
            return Ok(());
        }
        let step: u64 = snapshot.extra.get("step").and_then(|s| s.parse().ok()).unwrap_or(0);
        snapshot.write(&self.dir.join("snapshots").join(format!("snap_{step:010}.txt")))
    }

    fn checkpoint(&mut self, snapshot: &Snapshot) -> Result<()> {
        write_atomic(&self.dir.join(CHECKPOINT_FILE), &snapshot.to_text())
    }
}

fn stationary_options(cfg: &RunConfig) -> StationaryOptions {
    StationaryOptions {
        tol: cfg.stationary.tol,
        max_outer: cfg.stationary.max_outer,
        relaxation: cfg.stationary.relaxation,
        coupling: cfg.coupling,
        ..Default::default()
    }
}

fn radial_grid(cfg: &RunConfig) -> Result<ChebyshevGrid1D> {
    ChebyshevGrid1D::new(cfg.grid.n, cfg.grid.length)
}

fn gaussian_wave(grid: &ChebyshevGrid1D, sigma: f64, a: f64, v: f64) -> Result<RadialWave> {
    let c = normalize_gaussian(sigma, a, v, grid)?;
    Ok(RadialWave::from_fn(grid.clone(), |r| free_gaussian(r, 0.0, sigma, a, v, c)))
}

/// Spherical state resampled onto the radial nodes of an axisymmetric grid, constant in θ.
pub fn embed_radial(wave: &RadialWave, grid: &TensorGrid2D) -> AxiWave {
    let re: Vec<f64> = wave.values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = wave.values.iter().map(|z| z.im).collect();
    AxiWave::from_fn(grid.clone(), |r, _| C64::new(wave.grid.interpolate(&re, r), wave.grid.interpolate(&im, r)))
}

fn initial_radial(cfg: &RunConfig) -> Result<RadialWave> {
    match &cfg.initial.source {
        Source::Gaussian => gaussian_wave(&radial_grid(cfg)?, cfg.initial.sigma, cfg.initial.a, cfg.initial.v),
        Source::Stationary => Ok(spherical_stationary_with(cfg.stationary.k, &radial_grid(cfg)?, &stationary_options(cfg))?.wave),
        Source::State(p) => Ok(Snapshot::read(p)?.to_radial()?.0),
    }
}

fn initial_axi(cfg: &RunConfig) -> Result<AxiWave> {
    let grid = TensorGrid2D::axisymmetric(cfg.grid.n, cfg.grid.length, cfg.grid.n_theta)?;
    match &cfg.initial.source {
        Source::Stationary => {
            Ok(axi_stationary_with((cfg.stationary.l, cfg.stationary.nodes), &grid, &stationary_options(cfg))?.wave)
        }
        Source::State(p) => {
            let s = Snapshot::read(p)?;
            match s.geometry {
                Geometry::Radial => Ok(embed_radial(&s.to_radial()?.0, &grid)),
                _ => Ok(s.to_axi()?.0),
            }
        }
        Source::Gaussian => Err(invalid("axisymmetric runs start from a state")),
    }
}

fn initial_planar(cfg: &RunConfig) -> Result<PlanarWave> {
    let grid = TensorGrid2D::planar(cfg.grid.n, cfg.grid.length)?;
    let i = &cfg.initial;
    match &i.source {
        Source::Gaussian => {
            let mut w = PlanarWave::from_fn(grid, |x, y| free_gaussian_planar(x, y, 0.0, i.sigma, (i.x0, i.y0), (i.vx, i.vy)));
            w.normalize_to(1.0)?;
            Ok(w)
        }
        Source::Stationary => Ok(rotating_stationary_with(
            cfg.stationary.omega,
            cfg.stationary.delta_omega,
            &grid,
            &stationary_options(cfg),
        )?
        .wave),
        Source::State(p) => Ok(Snapshot::read(p)?.to_planar()?.0),
    }
}

fn write_state<W: WaveField>(dir: &Path, snapshot: Snapshot, state: &StationaryState<W>) -> Result<()> {
    snapshot.write(&dir.join(STATE_FILE))?;
    let mut f = fs::File::create(dir.join("summary.txt"))?;
    writeln!(f, "label = {}", state.label)?;
    writeln!(f, "E = {:.10e}", state.energy)?;
    writeln!(f, "J2 = {:.10e}", state.j2)?;
    writeln!(f, "omega = {:.10e}", state.omega)?;
    writeln!(f, "outer_iterations = {}", state.outer_iterations)?;
    Ok(())
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join(CONFIG_FILE), &cfg.to_text())?;
    Ok(dir)
}

/// Executes `cfg` and returns the run directory. Failures after the run
/// directory exists also leave an `error.txt` report there.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    if let Some(dir) = &opts.resume {
        let resolved = RunConfig::from_file(&dir.join(CONFIG_FILE))?;
        let result = resume(&resolved, dir);
        return report(dir, result);
    }
    let mut cfg = cfg.clone();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Error::Config { line: 0, key: "workers".into(), message: "must be at least 1".into() });
        }
        cfg.workers = w;
    }
    if opts.serial {
        cfg.workers = 1;
    }
    let dir = prepare_dir(&cfg)?;
    let result = execute(&cfg, &dir);
    report(&dir, result)
}

fn report(dir: &Path, result: Result<()>) -> Result<PathBuf> {
    match result {
        Ok(()) => Ok(dir.to_path_buf()),
        Err(e) => {
            let _ = fs::write(dir.join(ERROR_FILE), format!("{e}\nexit status {}\n", exit_code(&e)));
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let opts = stationary_options(cfg);
    match cfg.command {
        Command::StationarySpherical => {
            let s = spherical_stationary_with(cfg.stationary.k, &radial_grid(cfg)?, &opts)?;
            write_state(dir, s.to_snapshot(), &s)
        }
        Command::StationaryAxi => {
            let grid = TensorGrid2D::axisymmetric(cfg.grid.n, cfg.grid.length, cfg.grid.n_theta)?;
            let s = axi_stationary_with((cfg.stationary.l, cfg.stationary.nodes), &grid, &opts)?;
            write_state(dir, s.to_snapshot(), &s)
        }
        Command::StationaryRotating => {
            let grid = TensorGrid2D::planar(cfg.grid.n, cfg.grid.length)?;
            let s = rotating_stationary_with(cfg.stationary.omega, cfg.stationary.delta_omega, &grid, &opts)?;
            write_state(dir, s.to_snapshot(), &s)
        }
        Command::EvolveSpherical => {
            let mut ev = SphericalEvolver::new(initial_radial(cfg)?, cfg.evolution.clone(), cfg.coupling)?;
            let mut sink = RunDirSink::create(dir, cfg.snapshot_stride)?;
            let out = ev.evolve(&mut sink);
            ev.checkpoint().write(&dir.join(FINAL_FILE))?;
            out
        }
        Command::EvolveAxi => {
            let mut ev = AdiEvolver::axi(initial_axi(cfg)?, cfg.evolution.clone(), cfg.coupling)?;
            run_adi(&mut ev, cfg, dir)
        }
        Command::EvolvePlanar => {
            let mut ev = AdiEvolver::planar(initial_planar(cfg)?, cfg.evolution.clone(), cfg.coupling)?;
            run_adi(&mut ev, cfg, dir)
        }
        Command::SweepGaussian => sweep(cfg, dir),
        Command::Analyze => analyze(cfg, dir),
    }
}

fn run_adi(ev: &mut AdiEvolver, cfg: &RunConfig, dir: &Path) -> Result<()> {
    let mut sink = RunDirSink::create(dir, cfg.snapshot_stride)?;
    let out = ev.evolve(&mut sink);
    ev.checkpoint().write(&dir.join(FINAL_FILE))?;
    out
}

fn resume(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ckpt = Snapshot::read(&dir.join(CHECKPOINT_FILE))?;
    let step: u64 = ckpt
        .extra
        .get("step")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("checkpoint lacks `step`".into()))?;
    let mut sink = RunDirSink::reopen(dir, cfg.snapshot_stride, ckpt.t, step)?;
    let _ = fs::remove_file(dir.join(ERROR_FILE));
    match cfg.command {
        Command::EvolveSpherical => {
            let mut ev = SphericalEvolver::resume(&ckpt, cfg.evolution.clone(), cfg.coupling)?;
            let out = ev.evolve(&mut sink);
            ev.checkpoint().write(&dir.join(FINAL_FILE))?;
            out
        }
        Command::EvolveAxi | Command::EvolvePlanar => {
            let mut ev = AdiEvolver::resume(&ckpt, cfg.evolution.clone(), cfg.coupling)?;
            let out = ev.evolve(&mut sink);
            ev.checkpoint().write(&dir.join(FINAL_FILE))?;
            out
        }
        other => Err(invalid(format!("`{}` runs cannot be resumed", other.name()))),
    }
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub v: f64,
    pub a: f64,
    pub sigma: f64,
    pub e_initial: f64,
    pub p_final: f64,
    /// NaN when `ℰ_I ≥ 0`.
    pub bound: f64,
    /// NaN when too little probability remains.
    pub residual_fit: f64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{:?},{:?},{:?},{:.10e},{:.10e},{:.10e},{:.10e}",
            self.v, self.a, self.sigma, self.e_initial, self.p_final, self.bound, self.residual_fit
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad summary row `{line}`")))?;
        if v.len() != 7 {
            return Err(Error::Parse(format!("summary row has {} columns", v.len())));
        }
        Ok(Self { v: v[0], a: v[1], sigma: v[2], e_initial: v[3], p_final: v[4], bound: v[5], residual_fit: v[6] })
    }
}

pub fn read_summary(path: &Path) -> Result<Vec<SweepRow>> {
    fs::read_to_string(path)?.lines().skip(1).filter(|l| !l.trim().is_empty()).map(SweepRow::from_csv).collect()
}

/// `ℰ` of a radial wave in the free-space gauge.
pub fn radial_conserved_energy(wave: &RadialWave, poisson: &RadialPoisson) -> f64 {
    let phi = poisson.solve(wave).values;
    let shift = poisson.free_space_shift(&phi);
    let free: Vec<f64> = phi.iter().map(|p| p - shift).collect();
    conserved_energy(wave, &free)
}

fn sweep(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let grid = radial_grid(cfg)?;
    let ground = spherical_stationary_with(0, &grid, &stationary_options(cfg))?;
    let poisson = RadialPoisson::new(&grid, cfg.coupling)?;
    let e0 = radial_conserved_energy(&ground.wave, &poisson);
    ground.to_snapshot().write(&dir.join("ground.txt"))?;
    let combos = cfg.sweep.combinations();
    let one = |k: usize| -> Result<SweepRow> {
        let (v, a, sigma) = combos[k];
        let sub = dir.join(format!("run_{k:03}"));
        fs::create_dir_all(&sub)?;
        let wave = gaussian_wave(&grid, sigma, a, v)?;
        let e_initial = radial_conserved_energy(&wave, &poisson);
        let mut ev = SphericalEvolver::new(wave, cfg.evolution.clone(), cfg.coupling)?;
        let mut sink = RunDirSink::create(&sub, cfg.snapshot_stride)?;
        ev.evolve(&mut sink)?;
        ev.checkpoint().write(&sub.join(FINAL_FILE))?;
        let p_final = ev.wave().probability();
        let bound = residual_bound(e_initial, e0).unwrap_or(f64::NAN);
        let residual_fit = fit_rescaled_ground(ev.wave(), &ground).map_or(f64::NAN, |(_, r)| r);
        Ok(SweepRow { v, a, sigma, e_initial, p_final, bound, residual_fit })
    };
    let rows: Vec<Result<SweepRow>> = if cfg.workers <= 1 {
        (0..combos.len()).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("worker pool: {e}")))?;
        pool.install(|| (0..combos.len()).into_par_iter().map(one).collect())
    };
    let mut text = format!("{SUMMARY_HEADER}\n");
    let mut first_err = None;
    for r in rows {
        match r {
            Ok(row) => {
                text.push_str(&row.to_csv());
                text.push('\n');
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    write_atomic(&dir.join(SUMMARY_FILE), &text)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Post-processing of an evolution run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub geometry: Geometry,
    pub t_final: f64,
    pub p_final: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub e_ground: Option<f64>,
    pub bound_initial: Option<f64>,
    pub bound_final: Option<f64>,
    pub residual_fit: Option<f64>,
    pub j2_initial: f64,
    pub j2_final: f64,
    /// Spectral peaks of the probe-phase signal `e^{iθ(t)}`.
    pub peaks: Vec<(f64, f64)>,
}

pub fn analyze_dir(input: &Path, coupling: f64) -> Result<Analysis> {
    let cfg = RunConfig::from_file(&input.join(CONFIG_FILE))?;
    let records = read_diagnostics_csv(&fs::read_to_string(input.join(DIAGNOSTICS_FILE))?)?;
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f.clone(), l.clone()),
        _ => return Err(Error::Parse("diagnostics.csv has no rows".into())),
    };
    let geometry = cfg.command.geometry();
    let (e_ground, residual_fit) = if geometry == Geometry::Planar {
        (None, None)
    } else {
        let grid = ChebyshevGrid1D::new(cfg.grid.n, cfg.grid.length)?;
        let opts = StationaryOptions { coupling, ..Default::default() };
        let ground = spherical_stationary_with(0, &grid, &opts)?;
        let e0 = radial_conserved_energy(&ground.wave, &RadialPoisson::new(&grid, coupling)?);
        let fit = if geometry == Geometry::Radial {
            let fin = Snapshot::read(&input.join(FINAL_FILE))?.to_radial()?.0;
            fit_rescaled_ground(&fin, &ground).ok().map(|r| r.1)
        } else {
            None
        };
        (Some(e0), fit)
    };
    let peaks = if records.len() >= 64 {
        let dt = records[1].t - records[0].t;
        let series: Vec<C64> = records.iter().map(|r| C64::from_polar(1.0, r.probe_phase)).collect();
        power_spectrum(&series, dt)?
    } else {
        Vec::new()
    };
    Ok(Analysis {
        geometry,
        t_final: last.t,
        p_final: last.p_grid,
        e_initial: first.e_conserved,
        e_final: last.e_conserved,
        e_ground,
        bound_initial: e_ground.and_then(|e0| residual_bound(first.e_conserved, e0).ok()),
        bound_final: e_ground.and_then(|e0| residual_bound(last.e_conserved, e0).ok()),
        residual_fit,
        j2_initial: first.j2,
        j2_final: last.j2,
        peaks,
    })
}

fn analyze(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let input = cfg.input.as_ref().ok_or_else(|| invalid("analyze needs an input directory"))?;
    let a = analyze_dir(input, cfg.coupling)?;
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.10e}"));
    let mut f = fs::File::create(dir.join("analysis.txt"))?;
    writeln!(f, "geometry = {}", a.geometry.tag())?;
    writeln!(f, "t_final = {:.10e}", a.t_final)?;
    writeln!(f, "p_final = {:.10e}", a.p_final)?;
    writeln!(f, "E_initial = {:.10e}", a.e_initial)?;
    writeln!(f, "E_final = {:.10e}", a.e_final)?;
    writeln!(f, "E_ground = {}", opt(a.e_ground))?;
    writeln!(f, "bound_initial = {}", opt(a.bound_initial))?;
    writeln!(f, "bound_final = {}", opt(a.bound_final))?;
    writeln!(f, "residual_fit = {}", opt(a.residual_fit))?;
    writeln!(f, "J2_initial = {:.10e}", a.j2_initial)?;
    writeln!(f, "J2_final = {:.10e}", a.j2_final)?;
    let mut s = String::from("omega,magnitude\n");
    for (w, m) in &a.peaks {
        s.push_str(&format!("{w:.10e},{m:.10e}\n"));
    }
    fs::write(dir.join("spectrum.csv"), s)?;
    Ok(())
}
