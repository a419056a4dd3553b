use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sbs_tfa_cli::{artifacts, compare, oracle, run_suite, simulate, CliError};

#[derive(Parser)]
#[command(name = "sbs-tfa", version, about = "Time-frequency analysis by SBS frequency-to-time mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every scenario file in a directory.
    Suite {
        /// Directory of .toml scenario files.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// STFT of a scenario's signal only.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Ridge statistics between two spectrogram CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Columns whose maximum is below this are ridge-free.
        #[arg(long, default_value_t = 0.02)]
        floor: f64,
        /// Also write compare.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let (result, written) = simulate(&config, seed, &out)?;
            for a in &result.metadata.assertions {
                println!("PASS {}", a.detail);
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Suite { config, seed, out } => {
            let report = run_suite(&config, seed, &out)?;
            for s in &report.scenarios {
                let status = match s.status {
                    sbs_tfa_cli::suite::Status::Pass => "PASS",
                    sbs_tfa_cli::suite::Status::AssertionFailed => "FAIL",
                    sbs_tfa_cli::suite::Status::Error => "ERROR",
                };
                match &s.message {
                    Some(m) => println!("{status} {}: {m}", s.name),
                    None => println!("{status} {}", s.name),
                }
            }
            println!("{}/{} passed; report in {}", report.n_passed, report.n_scenarios, out.join(sbs_tfa_cli::suite::REPORT_FILE).display());
            Ok(report.exit_code())
        }
        Command::Oracle { config, out } => {
            let (spec, written) = oracle(&config, &out)?;
            println!("{} x {} STFT", spec.n_freq(), spec.n_time());
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Compare { a, b, floor, out } => {
            let c = compare(&a, &b, floor)?;
            let json = artifacts::to_json(&c);
            print!("{json}");
            if let Some(dir) = out {
                artifacts::write_text(&dir.join("compare.json"), &json)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
