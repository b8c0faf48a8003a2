//! `losnet`: runs one experiment and writes its CSVs and manifest.
//!
//! Exit codes: 0 on success, 2 on a spec or config error, 3 when a numeric
//! precision target cannot be met, 1 on I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use losnet_core::harness::{run_experiment, ExperimentSpec};
use losnet_core::Error;

#[derive(Debug, Parser)]
#[command(name = "losnet", version, about = "Line-of-sight network capacity experiments")]
struct Args {
    /// dof-scan | s-estimate | lemma-verify | scheme-sim | regime-map | concentration | calibrate
    experiment: String,
    /// Flat `key = value` parameter file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for grid points.
    #[arg(long)]
    workers: Option<usize>,
    /// Frozen constants file; the bundled one is used otherwise.
    #[arg(long)]
    constants: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec = ExperimentSpec::new(&args.experiment, &text, args.seed, &args.out)?;
    if let Some(w) = args.workers {
        spec = spec.with_workers(w);
    }
    if let Some(c) = args.constants {
        spec = spec.with_constants(c);
    }
    let manifest = run_experiment(&spec)?;
    println!("experiment {} seed {} constants {}", manifest.experiment, manifest.seed, manifest.constants_version);
    for f in &manifest.files {
        println!("  {} {}", f.sha256, args.out.join(&f.file).display());
    }
    println!("digest {} ({:.2} s)", manifest.digest, manifest.wall_seconds);
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("losnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
