//! `key = value` run configuration with `[section]` headers and `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::{EvolutionConfig, Geometry, Perturbation, PotentialMode, SpongeProfile};
use crate::poisson::DEFAULT_COUPLING;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    StationarySpherical,
    StationaryAxi,
    StationaryRotating,
    EvolveSpherical,
    EvolveAxi,
    EvolvePlanar,
    SweepGaussian,
    Analyze,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::StationarySpherical,
        Command::StationaryAxi,
        Command::StationaryRotating,
        Command::EvolveSpherical,
        Command::EvolveAxi,
        Command::EvolvePlanar,
        Command::SweepGaussian,
        Command::Analyze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::StationarySpherical => "stationary-spherical",
            Command::StationaryAxi => "stationary-axi",
            Command::StationaryRotating => "stationary-rotating",
            Command::EvolveSpherical => "evolve-spherical",
            Command::EvolveAxi => "evolve-axi",
            Command::EvolvePlanar => "evolve-planar",
            Command::SweepGaussian => "sweep-gaussian",
            Command::Analyze => "analyze",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn geometry(self) -> Geometry {
        match self {
            Command::StationaryAxi | Command::EvolveAxi => Geometry::Axi,
            Command::StationaryRotating | Command::EvolvePlanar => Geometry::Planar,
            _ => Geometry::Radial,
        }
    }
}

/// Where evolution initial data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Moving Gaussian shell (radial) or blob (planar).
    Gaussian,
    /// Computed stationary state: spherical `k`, axisymmetric `(l, nodes)` or rotating `omega`.
    Stationary,
    /// Previously written state file.
    State(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
    pub n_theta: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialConfig {
    pub source: Source,
    pub sigma: f64,
    pub a: f64,
    pub v: f64,
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryConfig {
    pub k: usize,
    pub l: usize,
    pub nodes: usize,
    pub tol: f64,
    pub max_outer: usize,
    pub relaxation: f64,
    pub omega: f64,
    pub delta_omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub v_list: Vec<f64>,
    pub a_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
}

impl SweepConfig {
    /// `(v, a, σ)` in row-major order over the three lists.
    pub fn combinations(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &v in &self.v_list {
            for &a in &self.a_list {
                for &s in &self.sigma_list {
                    out.push((v, a, s));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub coupling: f64,
    pub workers: usize,
    pub grid: GridConfig,
    pub evolution: EvolutionConfig,
    pub initial: InitialConfig,
    pub stationary: StationaryConfig,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
    /// Write every `snapshot_stride`-th output as a snapshot file; 0 disables.
    pub snapshot_stride: usize,
    /// Run directory read by `analyze`.
    pub input: Option<PathBuf>,
}

/// Every accepted `section.key`.
const KEYS: &[&str] = &[
    "run.command",
    "run.coupling",
    "run.workers",
    "grid.n",
    "grid.L",
    "grid.n_theta",
    "evolution.dt",
    "evolution.t_end",
    "evolution.phi_tolerance",
    "evolution.phi_max_iterations",
    "evolution.potential_mode",
    "evolution.output_every",
    "evolution.checkpoint_every",
    "evolution.rho",
    "evolution.max_halvings",
    "sponge.enabled",
    "sponge.a",
    "sponge.b",
    "sponge.cap",
    "sponge.rate",
    "sponge.radius",
    "perturbation.epsilon",
    "perturbation.mode",
    "initial.source",
    "initial.state",
    "initial.sigma",
    "initial.a",
    "initial.v",
    "initial.x0",
    "initial.y0",
    "initial.vx",
    "initial.vy",
    "stationary.k",
    "stationary.l",
    "stationary.nodes",
    "stationary.tol",
    "stationary.max_outer",
    "stationary.relaxation",
    "stationary.omega",
    "stationary.delta_omega",
    "sweep.v_list",
    "sweep.a_list",
    "sweep.sigma_list",
    "output.dir",
    "output.snapshot_stride",
    "analyze.input",
];

struct Raw {
    entries: BTreeMap<String, (String, usize)>,
    base: PathBuf,
}

fn cfg_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line, key: key.to_string(), message: message.into() }
}

impl Raw {
    fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut section = String::from("run");
        let mut entries = BTreeMap::new();
        for (k, raw_line) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line_no, line, "unterminated section header"))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(line_no, line, "expected `key = value`"))?;
            let full = format!("{section}.{}", key.trim());
            if !KEYS.contains(&full.as_str()) {
                return Err(cfg_err(line_no, &full, "unknown key"));
            }
            if entries.insert(full.clone(), (value.trim().to_string(), line_no)).is_some() {
                return Err(cfg_err(line_no, &full, "duplicate key"));
            }
        }
        Ok(Self { entries, base: base.to_path_buf() })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    fn string(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.0.as_str())
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, what: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| cfg_err(*line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.typed(key, "a real number", default)?;
        if !v.is_finite() {
            return Err(cfg_err(self.line(key), key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if !(v > 0.0) {
            return Err(cfg_err(self.line(key), key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        self.typed(key, "a non-negative integer", default)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        self.typed(key, "true or false", default)
    }

    fn list(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        let Some((v, line)) = self.entries.get(key) else { return Ok(default) };
        let items: Vec<f64> = v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| cfg_err(*line, key, format!("expected a comma-separated list of reals, got `{v}`")))?;
        if items.is_empty() {
            return Err(cfg_err(*line, key, "list is empty"));
        }
        Ok(items)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(|s| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                self.base.join(p)
            }
        })
    }
}

impl RunConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw = Raw::parse(text, base)?;
        let command_text = raw
            .string("run.command")
            .ok_or_else(|| cfg_err(0, "run.command", "missing required key"))?;
        let command = Command::parse(command_text)
            .ok_or_else(|| cfg_err(raw.line("run.command"), "run.command", format!("unknown command `{command_text}`")))?;
        let geometry = command.geometry();

        let default_n = match geometry {
            Geometry::Radial => 256,
            Geometry::Axi => 64,
            Geometry::Planar => 40,
        };
        let default_len = if geometry == Geometry::Planar { 40.0 } else { 100.0 };
        let grid = GridConfig {
            n: raw.count("grid.n", default_n)?,
            length: raw.positive("grid.L", default_len)?,
            n_theta: raw.count("grid.n_theta", 16)?,
        };
        if grid.n < 8 {
            return Err(cfg_err(raw.line("grid.n"), "grid.n", "needs at least 8 points"));
        }
        if grid.n_theta < 8 {
            return Err(cfg_err(raw.line("grid.n_theta"), "grid.n_theta", "needs at least 8 points"));
        }

        let sponge = if raw.flag("sponge.enabled", true)? {
            let s = match geometry {
                Geometry::Planar => SpongeProfile::PlanarRadial {
                    cap: raw.positive("sponge.cap", 1.0)?,
                    rate: raw.positive("sponge.rate", 0.5)?,
                    radius: raw.real("sponge.radius", 0.5 * grid.length)?,
                },
                _ => SpongeProfile::Radial { a: raw.positive("sponge.a", 30.0)?, b: raw.positive("sponge.b", 0.19)? },
            };
            Some(s)
        } else {
            None
        };
        let epsilon = raw.real("perturbation.epsilon", 0.0)?;
        let perturbation = if epsilon != 0.0 {
            Some(Perturbation { epsilon, mode: raw.typed("perturbation.mode", "a non-negative integer", 1u32)? })
        } else {
            None
        };
        let mode_text = raw.string("evolution.potential_mode").unwrap_or("iterated");
        let potential_mode = PotentialMode::parse(mode_text)
            .map_err(|_| cfg_err(raw.line("evolution.potential_mode"), "evolution.potential_mode", format!("unknown mode `{mode_text}`")))?;
        let rho = if raw.has("evolution.rho") { Some(raw.positive("evolution.rho", 1.0)?) } else { None };
        let evolution = EvolutionConfig {
            dt: raw.positive("evolution.dt", 1e-2)?,
            t_end: raw.real("evolution.t_end", 1.0)?,
            phi_tolerance: raw.positive("evolution.phi_tolerance", 1e-10)?,
            phi_max_iterations: raw.count("evolution.phi_max_iterations", 50)?,
            sponge,
            output_every: raw.count("evolution.output_every", 10)?,
            checkpoint_every: raw.count("evolution.checkpoint_every", 0)?,
            perturbation,
            potential_mode,
            rho,
            max_halvings: raw.typed("evolution.max_halvings", "a non-negative integer", 4u32)?,
        };
        if evolution.t_end < 0.0 {
            return Err(cfg_err(raw.line("evolution.t_end"), "evolution.t_end", "must be non-negative"));
        }
        if evolution.t_end > 0.0 && evolution.dt >= evolution.t_end {
            return Err(cfg_err(raw.line("evolution.dt"), "evolution.dt", "must be below t_end"));
        }
        if evolution.output_every == 0 {
            return Err(cfg_err(raw.line("evolution.output_every"), "evolution.output_every", "must be at least 1"));
        }
        if evolution.phi_max_iterations == 0 {
            return Err(cfg_err(raw.line("evolution.phi_max_iterations"), "evolution.phi_max_iterations", "must be at least 1"));
        }
        evolution.validate().map_err(|e| cfg_err(0, "evolution", e.to_string()))?;

        let source = match raw.string("initial.source").unwrap_or(match command {
            Command::EvolveSpherical | Command::SweepGaussian => "gaussian",
            _ => "stationary",
        }) {
            "gaussian" => Source::Gaussian,
            "stationary" => Source::Stationary,
            "state" => {
                let p = raw
                    .path("initial.state")
                    .ok_or_else(|| cfg_err(raw.line("initial.source"), "initial.state", "required when source = state"))?;
                if !p.exists() {
                    return Err(cfg_err(raw.line("initial.state"), "initial.state", format!("{} does not exist", p.display())));
                }
                Source::State(p)
            }
            other => {
                return Err(cfg_err(raw.line("initial.source"), "initial.source", format!("unknown source `{other}`")));
            }
        };
        if source == Source::Gaussian && geometry == Geometry::Axi {
            return Err(cfg_err(raw.line("initial.source"), "initial.source", "axisymmetric runs start from a state"));
        }
        let initial = InitialConfig {
            source,
            sigma: raw.positive("initial.sigma", 6.0)?,
            a: raw.real("initial.a", 50.0)?,
            v: raw.real("initial.v", 0.0)?,
            x0: raw.real("initial.x0", 0.0)?,
            y0: raw.real("initial.y0", 0.0)?,
            vx: raw.real("initial.vx", 0.0)?,
            vy: raw.real("initial.vy", 0.0)?,
        };
        let stationary = StationaryConfig {
            k: raw.count("stationary.k", 0)?,
            l: raw.count("stationary.l", 0)?,
            nodes: raw.count("stationary.nodes", 0)?,
            tol: raw.positive("stationary.tol", 1e-10)?,
            max_outer: raw.count("stationary.max_outer", 300)?,
            relaxation: raw.positive("stationary.relaxation", 0.5)?,
            omega: raw.real("stationary.omega", 0.005)?,
            delta_omega: raw.positive("stationary.delta_omega", 0.001)?,
        };
        let sweep = SweepConfig {
            v_list: raw.list("sweep.v_list", vec![0.0])?,
            a_list: raw.list("sweep.a_list", vec![50.0])?,
            sigma_list: raw.list("sweep.sigma_list", vec![6.0])?,
        };
        let input = raw.path("analyze.input");
        if command == Command::Analyze {
            match &input {
                None => return Err(cfg_err(0, "analyze.input", "missing required key")),
                Some(p) if !p.is_dir() => {
                    return Err(cfg_err(raw.line("analyze.input"), "analyze.input", format!("{} is not a directory", p.display())));
                }
                _ => {}
            }
        }
        let workers = raw.count("run.workers", std::thread::available_parallelism().map_or(1, |n| n.get()))?;
        if workers == 0 {
            return Err(cfg_err(raw.line("run.workers"), "run.workers", "must be at least 1"));
        }
        Ok(Self {
            command,
            coupling: raw.positive("run.coupling", DEFAULT_COUPLING)?,
            workers,
            grid,
            evolution,
            initial,
            stationary,
            sweep,
            output_dir: raw.path("output.dir").unwrap_or_else(|| base.join(format!("runs/{}", command.name()))),
            snapshot_stride: raw.count("output.snapshot_stride", 10)?,
            input,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Fully resolved config in the same format; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.evolution;
        let _ = writeln!(s, "[run]\ncommand = {}\ncoupling = {:?}\nworkers = {}", self.command.name(), self.coupling, self.workers);
        let _ = writeln!(s, "\n[grid]\nn = {}\nL = {:?}\nn_theta = {}", self.grid.n, self.grid.length, self.grid.n_theta);
        let _ = writeln!(
            s,
            "\n[evolution]\ndt = {:?}\nt_end = {:?}\nphi_tolerance = {:?}\nphi_max_iterations = {}\npotential_mode = {}\noutput_every = {}\ncheckpoint_every = {}\nmax_halvings = {}",
            e.dt,
            e.t_end,
            e.phi_tolerance,
            e.phi_max_iterations,
            e.potential_mode.tag(),
            e.output_every,
            e.checkpoint_every,
            e.max_halvings
        );
        if let Some(r) = e.rho {
            let _ = writeln!(s, "rho = {r:?}");
        }
        match e.sponge {
            None => {
                let _ = writeln!(s, "\n[sponge]\nenabled = false");
            }
            Some(SpongeProfile::Radial { a, b }) => {
                let _ = writeln!(s, "\n[sponge]\nenabled = true\na = {a:?}\nb = {b:?}");
            }
            Some(SpongeProfile::PlanarRadial { cap, rate, radius }) => {
                let _ = writeln!(s, "\n[sponge]\nenabled = true\ncap = {cap:?}\nrate = {rate:?}\nradius = {radius:?}");
            }
        }
        if let Some(p) = e.perturbation {
            let _ = writeln!(s, "\n[perturbation]\nepsilon = {:?}\nmode = {}", p.epsilon, p.mode);
        }
        let i = &self.initial;
        let source = match &i.source {
            Source::Gaussian => "gaussian".to_string(),
            Source::Stationary => "stationary".to_string(),
            Source::State(p) => format!("state\nstate = {}", p.display()),
        };
        let _ = writeln!(
            s,
            "\n[initial]\nsource = {source}\nsigma = {:?}\na = {:?}\nv = {:?}\nx0 = {:?}\ny0 = {:?}\nvx = {:?}\nvy = {:?}",
            i.sigma, i.a, i.v, i.x0, i.y0, i.vx, i.vy
        );
        let st = &self.stationary;
        let _ = writeln!(
            s,
            "\n[stationary]\nk = {}\nl = {}\nnodes = {}\ntol = {:?}\nmax_outer = {}\nrelaxation = {:?}\nomega = {:?}\ndelta_omega = {:?}",
            st.k, st.l, st.nodes, st.tol, st.max_outer, st.relaxation, st.omega, st.delta_omega
        );
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(
            s,
            "\n[sweep]\nv_list = {}\na_list = {}\nsigma_list = {}",
            join(&self.sweep.v_list),
            join(&self.sweep.a_list),
            join(&self.sweep.sigma_list)
        );
        let _ = writeln!(s, "\n[output]\ndir = {}\nsnapshot_stride = {}", self.output_dir.display(), self.snapshot_stride);
        if let Some(p) = &self.input {
            let _ = writeln!(s, "\n[analyze]\ninput = {}", p.display());
        }
        s
    }
}
