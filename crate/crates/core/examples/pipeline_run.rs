//! Runs the whole pipeline on the bundled fixture config, then re-hashes
//! the artifact directory against its manifest.
//!
//! cargo run --release --example pipeline_run -- [output-dir]

use std::path::PathBuf;

use quake_restore::config::RunConfig;
use quake_restore::pipeline::{run_pipeline, verify_manifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic13-run.json"))?;
    if let Some(out) = std::env::args().nth(1) {
        cfg.output = out.into();
    }
    let run = run_pipeline(&cfg)?;
    println!("representatives {:?}", run.manifest.representatives);
    for (stage, secs) in &run.timing.stages {
        println!("  {stage:<9} {secs:.3} s");
    }
    print!("{}", run.comparison.to_text(false));
    let check = verify_manifest(&run.dir)?;
    println!(
        "{} files in {}, manifest {}",
        run.manifest.files.len(),
        run.dir.display(),
        if check.is_ok() { "verified" } else { "MISMATCH" }
    );
    Ok(())
}
