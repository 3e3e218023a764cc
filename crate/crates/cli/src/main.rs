use clap::{Parser, Subcommand};
use pssmp_cli::config::ExperimentConfig;
use pssmp_cli::runner::{run, OpKind};
use pssmp_cli::verify::{verify_all, Profile, DEFAULT_SEED};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation and verification toolkit for positive self-similar Markov
/// processes.
#[derive(Parser)]
#[command(name = "pssmp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OpArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (does not affect any emitted number).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Lévy paths and their Lamperti images.
    Simulate(OpArgs),
    /// Ladder decomposition, renewal measures and the triple statistics.
    Decompose(OpArgs),
    /// Build (K, R, H) realizations and sample the joint law.
    Ladder(OpArgs),
    /// Occupation approximants of the supremum local time.
    Occupation(OpArgs),
    /// Exit-formula check for a catalogue functional.
    ExitCheck(OpArgs),
    /// Resolvent estimates through both routes.
    Resolvent(OpArgs),
    /// Entrance-law estimates and the entrance measure.
    Entrance(OpArgs),
    /// Null calibration of the two-sample tests.
    StatsCalibrate(OpArgs),
    /// Run the complete verification suite at a budget tier.
    VerifyAll {
        #[arg(long, default_value = "smoke")]
        profile: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "verify-out")]
        out: PathBuf,
        /// Internal: skip the determinism criterion (used by the runs it
        /// spawns).
        #[arg(long, hide = true)]
        inner: bool,
    },
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run_op(kind: OpKind, args: &OpArgs) -> Result<bool, pssmp_core::Error> {
    init_threads(args.threads);
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}-out", kind.id())));
    let outcome = run(kind, &cfg, &out)?;
    println!("{} → {}", kind.id(), out.display());
    Ok(outcome.gates_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, pssmp_core::Error> = match &cli.command {
        Command::Simulate(a) => run_op(OpKind::Simulate, a),
        Command::Decompose(a) => run_op(OpKind::Decompose, a),
        Command::Ladder(a) => run_op(OpKind::Ladder, a),
        Command::Occupation(a) => run_op(OpKind::Occupation, a),
        Command::ExitCheck(a) => run_op(OpKind::ExitCheck, a),
        Command::Resolvent(a) => run_op(OpKind::Resolvent, a),
        Command::Entrance(a) => run_op(OpKind::Entrance, a),
        Command::StatsCalibrate(a) => run_op(OpKind::StatsCalibrate, a),
        Command::VerifyAll { profile, seed, threads, out, inner } => (|| {
            init_threads(*threads);
            let p: Profile = profile.parse()?;
            let binary = if *inner { None } else { Some(std::env::current_exe()?) };
            let outcomes = verify_all(p, *seed, out, binary.as_deref())?;
            Ok(outcomes.iter().all(|o| o.pass))
        })(),
    };
    match result {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("gate failure");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pssmp_cli::exit_code_for(&e) as u8)
        }
    }
}
