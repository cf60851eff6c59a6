use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use purcell_cli::config::ScenarioConfig;
use purcell_cli::report::compare_report;
use purcell_cli::{spectrum_at, sweep_to_dir, table, thread_count};

#[derive(Parser)]
#[command(name = "purcell-lab", version, about = "Relaxation-rate sweeps for a transmon coupled to a lossy cavity")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep and write <name>.csv plus <name>.summary.json
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.dir in the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; PURCELL_LAB_THREADS takes precedence
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Slope ratios and protocol discrepancies for a results CSV
    Compare {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the slowest generator eigenvalues at one grid point
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Schema check only
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Sweep { config, out, jobs } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            let res = sweep_to_dir(&cfg, &dir, thread_count(jobs))?;
            let s = &res.summary;
            println!(
                "{}: {} rows, {} errors, {} unconverged, {} flagged, {:.1} s -> {}",
                s.name,
                s.rows,
                s.errors,
                s.unconverged,
                s.flagged,
                s.wall_time_s,
                res.csv.display()
            );
            Ok(if s.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Compare { rows, out } => {
            let f = fs::File::open(&rows).with_context(|| format!("opening {}", rows.display()))?;
            let (variable, data) = table::read_rows(f).map_err(anyhow::Error::msg)?;
            let report = compare_report(&variable, &data)?;
            fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            println!("{}", serde_json::to_string_pretty(&report.first_slope)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Spectrum { config, count, point } => {
            let cfg = ScenarioConfig::load(&config)?;
            for l in spectrum_at(&cfg, point, count)? {
                println!("{:>+.6e} {:>+.6e}i  {}", l.re, l.im, l.label.as_deref().unwrap_or("mixed"));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            println!("{}: ok ({} points of {})", cfg.name, cfg.sweep.grid.len(), cfg.sweep.variable.name());
            Ok(ExitCode::SUCCESS)
        }
    }
}
