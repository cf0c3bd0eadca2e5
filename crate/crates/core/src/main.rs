use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use logdecay::harness::{exit_code_for, parse_config, run_experiment, ExperimentKind, EXIT_CONFIG};
use logdecay::Error;

#[derive(Parser)]
#[command(name = "logdecay", version, about = "Cutoff resolvent and local energy decay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, env = "LOGDECAY_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true, env = "LOGDECAY_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "LOGDECAY_THREADS")]
    threads: Option<usize>,
    /// Seed for randomized norm estimates; overrides `seed` in the config.
    #[arg(long, global = true, env = "LOGDECAY_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Real-axis sweep of the cutoff resolvent norm.
    ScanNorm,
    /// Sweep of a strip in the lower half-plane.
    ScanStrip,
    /// Leapfrog run with energy trace and snapshots.
    Simulate,
    /// Stone reconstruction against the leapfrog run.
    StoneCompare,
    /// Decay-envelope fit of a local energy trace.
    FitDecay,
    /// Resolvent identities, Neumann regime and spectral ceiling.
    Verify,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::ScanNorm => ExperimentKind::ScanNorm,
            Command::ScanStrip => ExperimentKind::ScanStrip,
            Command::Simulate => ExperimentKind::Simulate,
            Command::StoneCompare => ExperimentKind::StoneCompare,
            Command::FitDecay => ExperimentKind::FitDecay,
            Command::Verify => ExperimentKind::Verify,
        }
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config PATH (or LOGDECAY_CONFIG) is required");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(&Error::Io {
            path: path.display().to_string(),
            source: e,
        }),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if cfg.kind != kind {
        return fail(&Error::Config(format!(
            "{} declares kind = {:?} but the subcommand is {}",
            path.display(),
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(out) = cli.out {
        cfg.output = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&Error::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Config(format!("thread pool: {e}")));
        }
    }

    let start = Instant::now();
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    for g in &outcome.gates {
        println!(
            "{} {}: {:e} (threshold {:e})",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.value,
            g.threshold
        );
    }
    println!("wrote {} files to {}", outcome.files.len(), cfg.output.display());
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(outcome.exit_code() as u8)
}
