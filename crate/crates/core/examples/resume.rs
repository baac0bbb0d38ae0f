//! Stops a run half way, restarts it from the checkpoint text and checks the
//! tail of the diagnostics matches the uninterrupted run bit for bit.

use snlab::diagnostics::{DiagnosticsRecord, DiagnosticsSink};
use snlab::evolve::SphericalEvolver;
use snlab::fields::{EvolutionConfig, RadialWave, Snapshot};
use snlab::oracle::{free_gaussian, normalize_gaussian};
use snlab::poisson::DEFAULT_COUPLING;
use snlab::spectral::ChebyshevGrid1D;

#[derive(Default)]
struct Keep {
    records: Vec<DiagnosticsRecord>,
    checkpoints: Vec<String>,
}

impl DiagnosticsSink for Keep {
    fn record(&mut self, rec: &DiagnosticsRecord) -> snlab::Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn checkpoint(&mut self, s: &Snapshot) -> snlab::Result<()> {
        self.checkpoints.push(s.to_text());
        Ok(())
    }
}

fn main() -> snlab::Result<()> {
    let grid = ChebyshevGrid1D::new(128, 100.0)?;
    let c = normalize_gaussian(6.0, 30.0, 0.0, &grid)?;
    let start = RadialWave::from_fn(grid, |r| free_gaussian(r, 0.0, 6.0, 30.0, 0.0, c));
    let cfg = EvolutionConfig { dt: 0.2, t_end: 40.0, output_every: 10, checkpoint_every: 100, ..Default::default() };

    let mut full = Keep::default();
    SphericalEvolver::new(start, cfg.clone(), DEFAULT_COUPLING)?.evolve(&mut full)?;
    let snap = Snapshot::parse(&full.checkpoints[0])?;
    println!("restarting from t={}", snap.t);
    let mut tail = Keep::default();
    SphericalEvolver::resume(&snap, cfg, DEFAULT_COUPLING)?.evolve(&mut tail)?;

    let expected: Vec<_> = full.records.iter().filter(|r| r.t > snap.t + 1e-9).cloned().collect();
    println!("{} records after restart, identical: {}", tail.records.len(), expected == tail.records);
    Ok(())
}
