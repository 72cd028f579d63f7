use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdob_cli::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "pdob", version, about = "Periodic-disturbance observer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sensitivity and complementary gains of the periodic and conventional observers.
    FreqResponse {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run the configured experiment (sim1, sim2 or step-study).
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Keep every n-th sample in the trace files.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        decimate: u64,
    },
    /// Estimate the fundamental frequency of the `value` column of a CSV file.
    Estimate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<outdir>/estimate.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Delay design summary and optional small-gain margin.
    DesignCheck {
        #[command(flatten)]
        config: ConfigArg,
        /// CSV with columns omega_rad_s,weight_mag bounding the plant uncertainty.
        #[arg(long)]
        weight: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<bool, CliError> {
    match command {
        Command::FreqResponse { config } => {
            let cfg = RunConfig::load(config.config.as_deref())?;
            for path in commands::freq_response(&cfg)? {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Simulate { config, decimate } => {
            let cfg = RunConfig::load(config.config.as_deref())?;
            let outcome = commands::simulate(&cfg, decimate as usize)?;
            for path in &outcome.files {
                println!("wrote {}", path.display());
            }
            for check in &outcome.checks {
                let verdict = if check.pass { "PASS" } else { "FAIL" };
                println!("{verdict} {}: {}", check.name, check.detail);
            }
            Ok(outcome.passed())
        }
        Command::Estimate { config, input, output } => {
            let cfg = RunConfig::load(config.config.as_deref())?;
            let path = commands::estimate(&cfg, &input, output.as_deref())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::DesignCheck { config, weight } => {
            let cfg = RunConfig::load(config.config.as_deref())?;
            print!("{}", commands::design_check(&cfg, weight.as_deref())?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
