use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smforge_cli::{emit_report, run, Engine, Overrides};

#[derive(Parser)]
#[command(name = "smforge", version, about = "Space-mapping surrogate optimization runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    out: PathBuf,
    /// Add the 2^n corner points to the base set.
    #[arg(long)]
    corners: bool,
    /// Seed for test-point generation, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Explicit input/output space mapping over a star base set.
    ExplicitSm(RunArgs),
    /// Implicit space mapping with response-residual correction.
    IsmRrsm(RunArgs),
    /// Optimize the coarse model only.
    CoarseOpt(RunArgs),
    /// Evaluate the fine model once at the start design.
    Eval(RunArgs),
    /// Print the iteration table and margins of a run directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (engine, args) = match cli.command {
        Command::ExplicitSm(a) => (Engine::ExplicitSm, a),
        Command::IsmRrsm(a) => (Engine::IsmRrsm, a),
        Command::CoarseOpt(a) => (Engine::CoarseOpt, a),
        Command::Eval(a) => (Engine::Eval, a),
        Command::Report { dir } => {
            return match emit_report(&dir) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("smforge: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
    };
    let overrides = Overrides {
        corners: args.corners,
        seed: args.seed,
    };
    match run(engine, &args.config, &args.out, overrides) {
        Ok(artifact) => {
            println!("{}", artifact.headline());
            if artifact.summary.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("smforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
