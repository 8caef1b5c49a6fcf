//! `rodwave <command> --config <path> [--out <dir>] [--jobs K]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rodwave_cli::{parse_config_with, run, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Simulate,
    VerifyNorms,
    BlowupScan,
    InflateSweep,
    FlowTrace,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::VerifyNorms => Command::VerifyNorms,
            Cmd::BlowupScan => Command::BlowupScan,
            Cmd::InflateSweep => Command::InflateSweep,
            Cmd::FlowTrace => Command::FlowTrace,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rodwave", version, about = "Pseudo-spectral rod equation experiments")]
struct Args {
    command: Cmd,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for inflate-sweep.
    #[arg(long, env = "RODWAVE_JOBS")]
    jobs: Option<usize>,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": msg.to_string() }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", args.config.display())),
    };
    let mut config = match parse_config_with(&text, Some(args.command.into())) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = args.jobs {
        if k == 0 {
            return fail("--jobs must be at least 1");
        }
        pool = pool.num_threads(k);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match pool.install(|| run(&config)) {
        Ok(outcome) => {
            for v in &outcome.verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            println!("run_id {} -> {}", outcome.run_id, outcome.output_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                let names: Vec<&str> = outcome.failures().iter().map(|v| v.name.as_str()).collect();
                eprintln!("{}", serde_json::json!({ "failures": names }));
                ExitCode::from(1)
            }
        }
        Err(e) => fail(e),
    }
}
