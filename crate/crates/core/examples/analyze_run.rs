//! Runs a short collapse from a config file and analyses the output directory.
//!
//! Usage: analyze_run [config]

use std::path::PathBuf;

use snlab::cli::{analyze_dir, run, RunConfig, RunOptions};

fn main() -> snlab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/evolve_spherical.cfg")));
    let mut cfg = RunConfig::from_file(&path)?;
    cfg.output_dir = std::env::temp_dir().join(format!("snlab-analyze-{}", std::process::id()));
    let dir = run(&cfg, &RunOptions::default())?;
    let a = analyze_dir(&dir, cfg.coupling)?;
    println!("output in {}", dir.display());
    println!("t={} P={:.6} calE {:.6} -> {:.6}", a.t_final, a.p_final, a.e_initial, a.e_final);
    println!("ground {:?} bound {:?} -> {:?} fit residual {:?}", a.e_ground, a.bound_initial, a.bound_final, a.residual_fit);
    for (w, m) in a.peaks.iter().take(5) {
        println!("peak omega={w:.5} |F|={m:.3e}");
    }
    Ok(())
}
