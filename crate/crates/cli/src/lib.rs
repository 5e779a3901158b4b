//! Command-line workflows around the fatigue damage simulator: config
//! parsing, orchestration and all file output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fatigue-damage", version, about = "Quasistatic gradient damage with fatigue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one evolution and write the step CSV, snapshots and balance.
    Simulate(RunArgs),
    /// Run the viscosity sweep and compare the rescaled evolutions.
    Sweep(RunArgs),
    /// Run the invariant and diagnostic gates; nonzero exit on failure.
    Verify(RunArgs),
    /// Compare the damage solver against exhaustive enumeration.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled config by name: elastic, fatigue, balance or jump.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated viscosities; the first one is used outside sweeps.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl RunArgs {
    fn resolve(&self, sweep: bool) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => config::bundled(name)?,
            (None, None) => return Err(CliError::Usage("either --config or --preset is required".into())),
        };
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if let Some(eps) = &self.eps {
            if sweep {
                cfg.sweep.eps = eps.clone();
            } else if let [e, ..] = eps.as_slice() {
                cfg.time.eps = *e;
            }
        }
        if let Some(k) = self.steps {
            cfg.time.steps = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.snapshot_every {
            cfg.output.snapshot_every = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let out = commands::simulate(&args.resolve(false)?)?;
            println!("{}", serde_json::to_string(&out.balance).expect("report serializes"));
            Ok(true)
        }
        Command::Sweep(args) => {
            let report = commands::sweep(&args.resolve(true)?)?;
            println!(
                "S ratio {}, instability nonincreasing: {:?}",
                report.s_ratio, report.instability_nonincreasing
            );
            Ok(true)
        }
        Command::Verify(args) => {
            let report = commands::verify(&args.resolve(false)?)?;
            for g in &report.gates {
                let mark = if g.passed { "PASS" } else { "FAIL" };
                println!("{mark} {} = {:e} (limit {:e})", g.name, g.value, g.threshold);
            }
            Ok(report.passed)
        }
        Command::OracleCheck(args) => {
            let report = commands::oracle_check(args.seed, args.count, &args.out_dir)?;
            println!(
                "seed {} count {} mismatches {} max deviation {:e}",
                report.seed, report.count, report.mismatches, report.max_deviation
            );
            Ok(report.mismatches == 0)
        }
    }
}

/// Parse `argv` and run; returns the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
