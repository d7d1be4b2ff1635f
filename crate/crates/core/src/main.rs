use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curved_flats::algebra::{SymmetricSpaceSpec, PRESET_NAMES};
use curved_flats::cli::{preset_rows, run_file, verify_command, Report};

#[derive(Parser)]
#[command(
    name = "curved-flats",
    version,
    about = "Curved flats from commuting Lax flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory for artifacts.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute the report of an existing run directory.
    Verify { dir: PathBuf },
    /// List the symmetric-space presets.
    Presets {
        #[arg(short, default_value_t = 2)]
        m: usize,
        #[arg(short, default_value_t = 3)]
        n: usize,
    },
}

fn finish(report: &Report) -> ExitCode {
    println!("{}", report.to_json());
    ExitCode::from(report.exit_code as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => finish(&run_file(&config, &out)),
        Command::Verify { dir } => finish(&verify_command(&dir)),
        Command::Presets { m, n } => {
            for ((name, desc), expected) in preset_rows().into_iter().zip(PRESET_NAMES) {
                debug_assert_eq!(name, expected);
                match SymmetricSpaceSpec::preset(name, m, n) {
                    Ok(s) => println!(
                        "{name:<20} signature {:?} split {:?} rank {}  {desc}",
                        s.space().signature(),
                        s.split(),
                        s.rank()
                    ),
                    Err(e) => println!("{name:<20} ({e})  {desc}"),
                }
            }
            ExitCode::SUCCESS
        }
    }
}
