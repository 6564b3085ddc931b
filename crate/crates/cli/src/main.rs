mod analyze;
mod config;
mod decode;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ppp-b2b", version, about = "BDS PPP-B2b software receiver")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a sample file and its truth record.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output prefix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the receiver on a sample file or a soft-symbol dump.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated PRNs, overriding the config.
        #[arg(long, value_delimiter = ',')]
        prn: Option<Vec<u8>>,
        /// Overrides `itr_max` from the config.
        #[arg(long)]
        itr_max: Option<usize>,
    },
    /// Schedule and integrity reports from a message dump or correction stream.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Distinguishes "ran but nothing decoded" from usage and config errors.
pub enum Outcome {
    Ok,
    NoSignal,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let res = match cli.cmd {
        Command::Simulate { scenario, config, seed, out } => simulate::run(&scenario, &config, seed, &out),
        Command::Decode { input, config, out, prn, itr_max } => decode::run(&input, &config, &out, prn, itr_max),
        Command::Analyze { input, out } => analyze::run(&input, &out),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NoSignal) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
