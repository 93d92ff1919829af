use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beaconsim::config::{Protocol, SimConfig};
use beaconsim::error::Error;
use beaconsim::metrics::{compare_runs, write_metrics_csv};

#[derive(Parser)]
#[command(name = "beaconsim", version, about = "VANET beacon power-control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write a per-epoch metrics CSV.
    Run {
        /// Power-control protocol arm.
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Flat `section.key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// RNG seed; fully determines the run.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds.
        #[arg(long = "duration-s")]
        duration_s: Option<u32>,
        /// Metrics CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-reception trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Optional per-vehicle channel-analysis CSV.
        #[arg(long = "debug-analysis")]
        debug_analysis: Option<PathBuf>,
    },
    /// Compare two metrics CSVs: per-metric means and b/a ratios.
    Compare { csv_a: PathBuf, csv_b: PathBuf },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Schema(_) | Error::DegenerateInput(_) | Error::NoNeighbors => 2,
        Error::Io(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BEACONSIM_LOG")).init();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run_command(cmd: Command) -> beaconsim::Result<()> {
    match cmd {
        Command::Run {
            protocol,
            config,
            seed,
            duration_s,
            out,
            trace,
            debug_analysis,
        } => {
            let mut cfg = SimConfig::default();
            if let Some(path) = config {
                let contents = std::fs::read_to_string(&path)?;
                cfg.apply_file_contents(&contents)?;
            }
            cfg.protocol = protocol;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = duration_s {
                cfg.duration_s = d;
            }
            cfg.trace_path = trace;
            cfg.analysis_debug_path = debug_analysis;
            cfg.validate()?;
            log::info!(
                "running {} for {} s, seed {}, {} vehicles",
                cfg.protocol.label(),
                cfg.duration_s,
                cfg.seed,
                cfg.mobility.n_vehicles
            );
            let rows = beaconsim::run(&cfg)?;
            write_metrics_csv(&rows, &out)?;
            log::info!("wrote {}", out.display());
            Ok(())
        }
        Command::Compare { csv_a, csv_b } => {
            let summary = compare_runs(&csv_a, &csv_b)?;
            print!("{summary}");
            Ok(())
        }
    }
}
