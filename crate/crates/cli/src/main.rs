use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use torus_torsor::verifier::{emit_report, run_suite, VerificationConfig};

/// Numerically verify the connection/flat-family torsor identities for a
/// line bundle on a complex torus.
#[derive(Parser, Debug)]
#[command(name = "verify", version)]
struct Args {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "demo", required_unless_present = "demo")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_parser = ["principal-g1", "principal-g2", "trivial"])]
    demo: Option<String>,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of checks to run.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Grid resolution per lattice direction.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance for checks mediated by finite differences.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match (&args.config, &args.demo) {
        (Some(path), _) => VerificationConfig::load(path),
        (None, Some(name)) => VerificationConfig::demo(name),
        (None, None) => unreachable!("clap enforces one of --config/--demo"),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(checks) = args.checks {
        cfg.checks = Some(checks);
    }
    if let Some(n) = args.grid {
        cfg.numeric.grid = n;
    }
    if let Some(s) = args.seed {
        cfg.numeric.seed = s;
    }
    if let Some(t) = args.tol {
        cfg.numeric.fd_tol = t;
    }
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cfg.resolve_output(args.out.as_deref());
    if let Err(e) = emit_report(&report, out.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
