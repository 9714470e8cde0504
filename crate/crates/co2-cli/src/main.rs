use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use co2::Participant;
use co2_cli::{
    cmd_check, cmd_compliance, cmd_simulate, cmd_test_honesty, Bounds, Format, RunConfig, SimMode,
    EXIT_USAGE,
};

#[derive(Parser)]
#[command(name = "co2", version, about = "Contracts, CO2 systems and honesty checking")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// Largest number of reduction steps explored.
    #[arg(long, global = true, default_value_t = 64)]
    bound_steps: usize,
    /// Depth bound of weak ready-do exploration.
    #[arg(long, global = true, default_value_t = 32)]
    bound_wrd: usize,
    /// Largest place multiplicity in abstract markings.
    #[arg(long, global = true, default_value_t = 16)]
    bound_marking: usize,
    /// Write JSON lines instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decide compliance of two contracts.
    Compliance { c: PathBuf, d: PathBuf },
    /// Type a process and report honesty.
    Check {
        file: PathBuf,
        #[arg(short, long, default_value = "A")]
        participant: String,
    },
    /// Print runs of a system.
    Simulate {
        file: PathBuf,
        /// Largest run length; defaults to --bound-steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Every run (the default).
        #[arg(long, conflicts_with = "trace")]
        all: bool,
        /// Only the first run in label order.
        #[arg(long)]
        trace: bool,
    },
    /// Test readiness of a participant against contexts.
    TestHonesty {
        file: PathBuf,
        #[arg(short, long, default_value = "A")]
        participant: String,
        contexts: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let cfg = RunConfig {
        bounds: Bounds {
            steps: cli.opts.bound_steps,
            wrd: cli.opts.bound_wrd,
            marking: cli.opts.bound_marking,
        },
        format: if cli.opts.json { Format::Json } else { Format::Text },
    };
    let result = match &cli.command {
        Command::Compliance { c, d } => cmd_compliance(c, d, &cfg),
        Command::Check { file, participant } => cmd_check(file, &Participant::new(participant), &cfg),
        Command::Simulate {
            file, steps, trace, ..
        } => {
            let mode = if *trace { SimMode::Trace } else { SimMode::All };
            cmd_simulate(file, steps.unwrap_or(cfg.bounds.steps), mode, &cfg)
        }
        Command::TestHonesty {
            file,
            participant,
            contexts,
        } => cmd_test_honesty(file, &Participant::new(participant), contexts, &cfg),
    };
    match result {
        Ok(o) => {
            print!("{}", o.stdout);
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
