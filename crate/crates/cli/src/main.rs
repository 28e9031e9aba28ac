use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use boost_cli::commands::{cmd_compare, cmd_dispatch, cmd_size, cmd_synth, Outcome};
use boost_cli::config::{Overrides, Resolved, RunConfig};
use boost_cli::CliError;
use boost_core::{Design, Method};
use clap::{Parser, Subcommand};

/// Battery and PV sizing by ordinal optimisation over LP and MILP dispatch.
#[derive(Debug, Parser)]
#[command(name = "boost", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the synthetic trace and for design sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for design evaluation (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dispatch one design over the whole trace and write the hourly schedule.
    Dispatch {
        /// lp, milp, dp or greedy.
        #[arg(long)]
        method: Option<Method>,
        /// Battery kWh and PV kW, e.g. `2000,1500`.
        #[arg(long, value_parser = parse_design)]
        design: Option<Design>,
    },
    /// Two-phase sizing: rank sampled designs with the LP, re-rank the top
    /// ones with the MILP.
    Size,
    /// LCOE of one design under MILP, DP and greedy dispatch (default: the
    /// sizing winner).
    Compare {
        #[arg(long, value_parser = parse_design)]
        design: Option<Design>,
    },
    /// Write a synthetic trace.
    Synth {
        #[arg(long)]
        hours: Option<usize>,
    },
}

fn parse_design(s: &str) -> Result<Design, String> {
    let (e, p) = s.split_once(',').ok_or_else(|| format!("expected EB,PV but got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let d = Design::new(num(e)?, num(p)?);
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut overrides = Overrides { seed: cli.seed, out: cli.out, jobs: cli.jobs, ..Overrides::default() };
    match &cli.command {
        Command::Dispatch { method, design } => {
            overrides.method = *method;
            overrides.design = *design;
        }
        Command::Compare { design } => overrides.design = *design,
        Command::Synth { hours } => {
            if hours.is_some() {
                config.trace.hours = *hours;
            }
        }
        Command::Size => {}
    }
    config.apply(&overrides);

    if let Command::Synth { .. } = cli.command {
        return cmd_synth(&config);
    }
    let resolved = Resolved::new(config)?;
    match cli.command {
        Command::Dispatch { .. } => {
            let design = resolved.config.design().ok_or_else(|| CliError::Usage("dispatch needs --design EB,PV".into()))?;
            cmd_dispatch(&resolved, design, resolved.config.run.method)
        }
        Command::Size => cmd_size(&resolved).map(|(o, _)| o),
        Command::Compare { .. } => cmd_compare(&resolved, resolved.config.design()),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(outcome.text.as_bytes());
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::from(if outcome.all_optimal { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
