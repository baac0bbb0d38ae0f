//! Gaussian-shell parameter sweep through the command layer, run in parallel
//! and serially to show the summaries agree.
//!
//! Usage: sweep [config]

use std::path::PathBuf;

use snlab::cli::run::{read_summary, SUMMARY_FILE};
use snlab::cli::{run, RunConfig, RunOptions};

fn main() -> snlab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/sweep.cfg")));
    let mut cfg = RunConfig::from_file(&path)?;
    let tmp = std::env::temp_dir().join(format!("snlab-sweep-{}", std::process::id()));
    cfg.output_dir = tmp.join("parallel");
    let par = run(&cfg, &RunOptions::default())?;
    cfg.output_dir = tmp.join("serial");
    let ser = run(&cfg, &RunOptions { serial: true, ..Default::default() })?;

    for row in read_summary(&par.join(SUMMARY_FILE))? {
        println!("{row:?}");
    }
    let same = std::fs::read(par.join(SUMMARY_FILE))? == std::fs::read(ser.join(SUMMARY_FILE))?;
    println!("parallel and serial summaries identical: {same}");
    Ok(())
}
