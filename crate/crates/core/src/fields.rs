//! Wave and potential containers, sponge profiles, run configuration and the
//! plain-text snapshot format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::spectral::{ChebyshevGrid1D, TensorGrid2D, TensorRole};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Radial,
    Axi,
    Planar,
}

impl Geometry {
    pub fn tag(self) -> &'static str {
        match self {
            Geometry::Radial => "radial",
            Geometry::Axi => "axi",
            Geometry::Planar => "planar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "radial" => Ok(Geometry::Radial),
            "axi" => Ok(Geometry::Axi),
            "planar" => Ok(Geometry::Planar),
            other => Err(Error::Parse(format!("unknown geometry `{other}`"))),
        }
    }
}

/// `u = rψ` sampled on a radial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialWave {
    pub grid: ChebyshevGrid1D,
    pub values: Vec<C64>,
}

impl RadialWave {
    pub fn new(grid: ChebyshevGrid1D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(invalid("wave length does not match grid"));
        }
        let w = Self { grid, values };
        w.check_boundary()?;
        Ok(w)
    }

    /// Samples `f` at the nodes and pins both ends to zero.
    pub fn from_fn(grid: ChebyshevGrid1D, f: impl Fn(f64) -> C64) -> Self {
        let n = grid.n_points();
        let mut values: Vec<C64> = grid.nodes().iter().map(|&r| f(r)).collect();
        values[0] = ZERO;
        values[n - 1] = ZERO;
        Self { grid, values }
    }

    pub fn zeros(grid: ChebyshevGrid1D) -> Self {
        let n = grid.n_points();
        Self { grid, values: vec![ZERO; n] }
    }

    pub fn check_boundary(&self) -> Result<()> {
        let n = self.values.len();
        if self.values[0] != ZERO || self.values[n - 1] != ZERO {
            return Err(invalid("radial wave must vanish at r = 0 and r = L"));
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|z| *z *= s);
    }
}

/// `u = rψ` on an `r × θ` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AxiWave {
    pub grid: TensorGrid2D,
    pub values: Vec<C64>,
}

impl AxiWave {
    pub fn new(grid: TensorGrid2D, values: Vec<C64>) -> Result<Self> {
        if grid.role != TensorRole::AxisymmetricPolar {
            return Err(invalid("axisymmetric wave needs a polar grid"));
        }
        if values.len() != grid.len() {
            return Err(invalid("wave length does not match grid"));
        }
        let w = Self { grid, values };
        w.check_boundary()?;
        Ok(w)
    }

    pub fn from_fn(grid: TensorGrid2D, f: impl Fn(f64, f64) -> C64) -> Self {
        let (na, nb) = (grid.n_a(), grid.n_b());
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..na {
            for j in 0..nb {
                let (r, th) = grid.coords(i, j);
                values.push(if i == 0 || i == na - 1 { ZERO } else { f(r, th) });
            }
        }
        Self { grid, values }
    }

    pub fn check_boundary(&self) -> Result<()> {
        let (na, nb) = (self.grid.n_a(), self.grid.n_b());
        for j in 0..nb {
            if self.values[j] != ZERO || self.values[(na - 1) * nb + j] != ZERO {
                return Err(invalid("axisymmetric wave must vanish at r = 0 and r = L"));
            }
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|z| *z *= s);
    }
}

/// `ψ` on a square Cartesian grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarWave {
    pub grid: TensorGrid2D,
    pub values: Vec<C64>,
}

impl PlanarWave {
    pub fn new(grid: TensorGrid2D, values: Vec<C64>) -> Result<Self> {
        if grid.role != TensorRole::PlanarCartesian {
            return Err(invalid("planar wave needs a Cartesian grid"));
        }
        if values.len() != grid.len() {
            return Err(invalid("wave length does not match grid"));
        }
        let w = Self { grid, values };
        w.check_boundary()?;
        Ok(w)
    }

    pub fn from_fn(grid: TensorGrid2D, f: impl Fn(f64, f64) -> C64) -> Self {
        let (na, nb) = (grid.n_a(), grid.n_b());
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..na {
            for j in 0..nb {
                let edge = i == 0 || j == 0 || i == na - 1 || j == nb - 1;
                let (x, y) = grid.coords(i, j);
                values.push(if edge { ZERO } else { f(x, y) });
            }
        }
        Self { grid, values }
    }

    pub fn check_boundary(&self) -> Result<()> {
        let (na, nb) = (self.grid.n_a(), self.grid.n_b());
        for i in 0..na {
            for j in 0..nb {
                let edge = i == 0 || j == 0 || i == na - 1 || j == nb - 1;
                if edge && self.values[i * nb + j] != ZERO {
                    return Err(invalid("planar wave must vanish on the box edges"));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|z| *z *= s);
    }
}

/// Real potential samples on the grid of the paired wave.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Common behaviour of the three wave containers.
pub trait WaveField: Clone {
    const GEOMETRY: Geometry;
    fn values(&self) -> &[C64];
    fn values_mut(&mut self) -> &mut [C64];
    /// Quadrature weights including the geometric measure.
    fn measure_weights(&self) -> Vec<f64>;

    fn probability(&self) -> f64 {
        self.measure_weights().iter().zip(self.values()).map(|(w, z)| w * z.norm_sqr()).sum()
    }

    fn inner(&self, other: &Self) -> C64 {
        self.measure_weights()
            .iter()
            .zip(self.values().iter().zip(other.values()))
            .map(|(w, (a, b))| a.conj() * b * *w)
            .sum()
    }

    fn normalize_to(&mut self, p: f64) -> Result<()> {
        let cur = self.probability();
        if !(cur > 0.0) {
            return Err(invalid("cannot normalise a zero wave"));
        }
        let s = (p / cur).sqrt();
        self.values_mut().iter_mut().for_each(|z| *z *= s);
        Ok(())
    }
}

impl WaveField for RadialWave {
    const GEOMETRY: Geometry = Geometry::Radial;
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    fn measure_weights(&self) -> Vec<f64> {
        self.grid.quad_weights().to_vec()
    }
}

impl WaveField for AxiWave {
    const GEOMETRY: Geometry = Geometry::Axi;
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    /// Sphere-averaged: `½ ∫∫ |u|² sinθ dθ dr`, which reduces to `∫|u|² dr`
    /// for θ-independent `u`.
    fn measure_weights(&self) -> Vec<f64> {
        axi_weights(&self.grid)
    }
}

impl WaveField for PlanarWave {
    const GEOMETRY: Geometry = Geometry::Planar;
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    fn measure_weights(&self) -> Vec<f64> {
        self.grid.quad_weights()
    }
}

pub(crate) fn axi_weights(grid: &TensorGrid2D) -> Vec<f64> {
    let wr = grid.grid_a.quad_weights();
    let th = grid.grid_b.nodes();
    let wt = grid.grid_b.quad_weights();
    let mut w = Vec::with_capacity(grid.len());
    for &a in wr {
        for (t, b) in th.iter().zip(wt) {
            w.push(0.5 * a * b * t.sin());
        }
    }
    w
}

pub fn probability<W: WaveField>(wave: &W) -> f64 {
    wave.probability()
}

/// Absorbing layer profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpongeProfile {
    /// `a·e^{b(r−L)}`.
    Radial { a: f64, b: f64 },
    /// `min(cap, e^{rate(√(x²+y²) − radius)})`.
    PlanarRadial { cap: f64, rate: f64, radius: f64 },
}

impl SpongeProfile {
    pub const DEFAULT_RADIAL: SpongeProfile = SpongeProfile::Radial { a: 30.0, b: 0.19 };
    pub const DEFAULT_PLANAR: SpongeProfile =
        SpongeProfile::PlanarRadial { cap: 1.0, rate: 0.5, radius: 20.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpongeProfile::Radial { a, b } => a > 0.0 && b > 0.0,
            SpongeProfile::PlanarRadial { cap, rate, radius } => cap > 0.0 && rate > 0.0 && radius >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("sponge parameters must be positive: {self:?}")))
        }
    }

    /// Value at distance `rho` from the origin in a domain of outer radius `length`.
    pub fn at_radius(&self, rho: f64, length: f64) -> f64 {
        match *self {
            SpongeProfile::Radial { a, b } => a * (b * (rho - length)).exp(),
            SpongeProfile::PlanarRadial { cap, rate, radius } => cap.min((rate * (rho - radius)).exp()),
        }
    }

    pub fn sample_radial(&self, grid: &ChebyshevGrid1D) -> Vec<f64> {
        grid.nodes().iter().map(|&r| self.at_radius(r, grid.length())).collect()
    }

    /// Samples on a tensor grid: by `r` for polar grids, by distance from the
    /// centre for planar grids.
    pub fn sample_tensor(&self, grid: &TensorGrid2D) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        for i in 0..grid.n_a() {
            for j in 0..grid.n_b() {
                let (a, b) = grid.coords(i, j);
                let (rho, outer) = match grid.role {
                    TensorRole::AxisymmetricPolar => (a, grid.grid_a.length()),
                    TensorRole::PlanarCartesian => ((a * a + b * b).sqrt(), grid.grid_a.length() / 2.0),
                };
                out.push(self.at_radius(rho, outer));
            }
        }
        out
    }
}

pub fn sponge_value_radial(r: f64, profile: &SpongeProfile, length: f64) -> Result<f64> {
    if !(0.0..=length).contains(&r) {
        return Err(invalid(format!("r = {r} lies outside [0, {length}]")));
    }
    Ok(profile.at_radius(r, length))
}

pub fn sponge_value_planar(x: f64, y: f64) -> f64 {
    SpongeProfile::DEFAULT_PLANAR.at_radius((x * x + y * y).sqrt(), 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub epsilon: f64,
    pub mode: u32,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { epsilon: 1e-3, mode: 1 }
    }
}

impl Perturbation {
    /// `u ← u(1 + ε cos(mode·π r/L))`, then restore the original probability.
    pub fn apply_radial(&self, wave: &mut RadialWave) -> Result<()> {
        let p = wave.probability();
        let l = wave.grid.length();
        for (z, &r) in wave.values.iter_mut().zip(wave.grid.nodes()) {
            *z *= 1.0 + self.epsilon * (self.mode as f64 * PI * r / l).cos();
        }
        wave.normalize_to(p)
    }

    /// `u ← u(1 + ε cos(mode·θ))`, which breaks the reflection symmetry `θ → π − θ`.
    pub fn apply_axi(&self, wave: &mut AxiWave) -> Result<()> {
        let p = wave.probability();
        let nb = wave.grid.n_b();
        for (k, z) in wave.values.iter_mut().enumerate() {
            let th = wave.grid.grid_b.nodes()[k % nb];
            *z *= 1.0 + self.epsilon * (self.mode as f64 * th).cos();
        }
        wave.normalize_to(p)
    }

    /// `ψ ← ψ(1 + ε cos(mode·π(x + L/2)/L))`.
    pub fn apply_planar(&self, wave: &mut PlanarWave) -> Result<()> {
        let p = wave.probability();
        let nb = wave.grid.n_b();
        let l = wave.grid.grid_a.length();
        for (k, z) in wave.values.iter_mut().enumerate() {
            let x = wave.grid.grid_a.nodes()[k / nb];
            *z *= 1.0 + self.epsilon * (self.mode as f64 * PI * x / l).cos();
        }
        wave.normalize_to(p)
    }
}

/// How the potential is advanced inside a time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialMode {
    /// Iterate `φ^{n+1}` to self-consistency.
    Iterated,
    /// Use `φ^{n}` in place of `φ^{n+1}`.
    Lagged,
    /// `φ ≡ 0`: free Schrödinger evolution.
    Zero,
}

impl PotentialMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iterated" => Ok(Self::Iterated),
            "lagged" => Ok(Self::Lagged),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Parse(format!("unknown potential mode `{other}`"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Iterated => "iterated",
            Self::Lagged => "lagged",
            Self::Zero => "zero",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub phi_tolerance: f64,
    pub phi_max_iterations: usize,
    pub sponge: Option<SpongeProfile>,
    pub output_every: usize,
    /// Zero disables checkpoints.
    pub checkpoint_every: usize,
    pub perturbation: Option<Perturbation>,
    pub potential_mode: PotentialMode,
    /// Peaceman–Rachford parameter; `None` picks it from the operator spectra.
    pub rho: Option<f64>,
    pub max_halvings: u32,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            phi_tolerance: 1e-10,
            phi_max_iterations: 50,
            sponge: None,
            output_every: 100,
            checkpoint_every: 0,
            perturbation: None,
            potential_mode: PotentialMode::Iterated,
            rho: None,
            max_halvings: 4,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(invalid(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.dt >= self.t_end {
            return Err(invalid(format!("dt = {} must be below t_end = {}", self.dt, self.t_end)));
        }
        if !(self.phi_tolerance > 0.0) || self.phi_max_iterations == 0 {
            return Err(invalid("potential iteration tolerance and cap must be positive"));
        }
        if self.output_every == 0 {
            return Err(invalid("output_every must be at least 1"));
        }
        if let Some(s) = &self.sponge {
            s.validate()?;
        }
        if let Some(r) = self.rho {
            if !(r > 0.0) {
                return Err(invalid("rho must be positive"));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Plain-text field dump: a `#` header of `key=value` pairs, then one
/// comma-separated row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub geometry: Geometry,
    pub n: usize,
    pub m: Option<usize>,
    pub length: f64,
    pub t: f64,
    /// Additional header entries, e.g. `E`, `J2`, `omega`, `label`.
    pub extra: BTreeMap<String, String>,
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<C64>,
    pub phi: Vec<f64>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: `{s}`")))
}

impl Snapshot {
    pub fn radial(wave: &RadialWave, phi: &[f64], t: f64) -> Self {
        Self {
            geometry: Geometry::Radial,
            n: wave.grid.n_points(),
            m: None,
            length: wave.grid.length(),
            t,
            extra: BTreeMap::new(),
            coords: wave.grid.nodes().iter().map(|&r| vec![r]).collect(),
            values: wave.values.clone(),
            phi: phi.to_vec(),
        }
    }

    fn tensor(geometry: Geometry, grid: &TensorGrid2D, values: &[C64], phi: &[f64], t: f64) -> Self {
        let mut coords = Vec::with_capacity(grid.len());
        for i in 0..grid.n_a() {
            for j in 0..grid.n_b() {
                let (a, b) = grid.coords(i, j);
                coords.push(vec![a, b]);
            }
        }
        Self {
            geometry,
            n: grid.n_a(),
            m: Some(grid.n_b()),
            length: grid.grid_a.length(),
            t,
            extra: BTreeMap::new(),
            coords,
            values: values.to_vec(),
            phi: phi.to_vec(),
        }
    }

    pub fn axi(wave: &AxiWave, phi: &[f64], t: f64) -> Self {
        Self::tensor(Geometry::Axi, &wave.grid, &wave.values, phi, t)
    }

    pub fn planar(wave: &PlanarWave, phi: &[f64], t: f64) -> Self {
        Self::tensor(Geometry::Planar, &wave.grid, &wave.values, phi, t)
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn extra_f64(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(|v| v.parse().ok())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write!(s, "# kind={} n={}", self.geometry.tag(), self.n).unwrap();
        if let Some(m) = self.m {
            write!(s, " m={m}").unwrap();
        }
        write!(s, " L={} t={}", fmt_f(self.length), fmt_f(self.t)).unwrap();
        for (k, v) in &self.extra {
            write!(s, " {k}={v}").unwrap();
        }
        s.push('\n');
        for ((c, z), p) in self.coords.iter().zip(&self.values).zip(&self.phi) {
            for x in c {
                s.push_str(&fmt_f(*x));
                s.push(',');
            }
            writeln!(s, "{},{},{}", fmt_f(z.re), fmt_f(z.im), fmt_f(*p)).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                for tok in h.split_whitespace() {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| Error::Parse(format!("bad header token `{tok}`")))?;
                    header.insert(k.to_string(), v.to_string());
                }
            } else {
                rows.push(line.split(',').map(parse_f).collect::<Result<Vec<f64>>>()?);
            }
        }
        let take = |h: &mut BTreeMap<String, String>, k: &str| {
            h.remove(k).ok_or_else(|| Error::Parse(format!("snapshot header lacks `{k}`")))
        };
        let geometry = Geometry::parse(&take(&mut header, "kind")?)?;
        let n: usize = take(&mut header, "n")?
            .parse()
            .map_err(|_| Error::Parse("bad `n` in snapshot header".into()))?;
        let m = match header.remove("m") {
            Some(v) => Some(v.parse::<usize>().map_err(|_| Error::Parse("bad `m`".into()))?),
            None => None,
        };
        let length = parse_f(&take(&mut header, "L")?)?;
        let t = parse_f(&take(&mut header, "t")?)?;
        let ncoord = if geometry == Geometry::Radial { 1 } else { 2 };
        let expected = n * m.unwrap_or(1);
        if rows.len() != expected {
            return Err(Error::Parse(format!("expected {expected} rows, found {}", rows.len())));
        }
        let mut coords = Vec::with_capacity(expected);
        let mut values = Vec::with_capacity(expected);
        let mut phi = Vec::with_capacity(expected);
        for r in rows {
            if r.len() != ncoord + 3 {
                return Err(Error::Parse(format!("row has {} columns, expected {}", r.len(), ncoord + 3)));
            }
            coords.push(r[..ncoord].to_vec());
            values.push(C64::new(r[ncoord], r[ncoord + 1]));
            phi.push(r[ncoord + 2]);
        }
        Ok(Self { geometry, n, m, length, t, extra: header, coords, values, phi })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn expect(&self, g: Geometry) -> Result<()> {
        if self.geometry != g {
            return Err(Error::Parse(format!(
                "snapshot holds a {} field, expected {}",
                self.geometry.tag(),
                g.tag()
            )));
        }
        Ok(())
    }

    pub fn to_radial(&self) -> Result<(RadialWave, PotentialField)> {
        self.expect(Geometry::Radial)?;
        let grid = ChebyshevGrid1D::new(self.n, self.length)?;
        Ok((RadialWave::new(grid, self.values.clone())?, PotentialField { values: self.phi.clone() }))
    }

    pub fn to_axi(&self) -> Result<(AxiWave, PotentialField)> {
        self.expect(Geometry::Axi)?;
        let m = self.m.ok_or_else(|| Error::Parse("axisymmetric snapshot lacks `m`".into()))?;
        let grid = TensorGrid2D::axisymmetric(self.n, self.length, m)?;
        Ok((AxiWave::new(grid, self.values.clone())?, PotentialField { values: self.phi.clone() }))
    }

    pub fn to_planar(&self) -> Result<(PlanarWave, PotentialField)> {
        self.expect(Geometry::Planar)?;
        if self.m != Some(self.n) {
            return Err(Error::Parse("planar snapshot must be square".into()));
        }
        let grid = TensorGrid2D::planar(self.n, self.length)?;
        Ok((PlanarWave::new(grid, self.values.clone())?, PotentialField { values: self.phi.clone() }))
    }
}
