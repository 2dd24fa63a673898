use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use streamsim::experiment::{self, COMPARE_FILE};
use streamsim::{PolicyKind, ResolvedRun, Result, RunConfig, StreamLog};

#[derive(Parser)]
#[command(name = "streamsim", version, about = "Streaming perception simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration: TOML, or JSON (a config or a `report.json`).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out` or `streamsim-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated policies, overriding the config.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate each policy and write its log, report and delays.
    Simulate(RunArgs),
    /// Paired comparison of policies under identical delay draws.
    Compare(RunArgs),
    /// Total-delay histogram of a stream log.
    Histogram {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        /// CSV destination; the histogram is printed either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a shifted log-normal to summary statistics.
    FitLatency {
        #[arg(long)]
        mean: f64,
        #[arg(long)]
        std: f64,
        #[arg(long)]
        min: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn prepare(args: &RunArgs) -> Result<(ResolvedRun, Vec<PolicyKind>, PathBuf)> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(p) = &args.policies {
        config.policies = p.clone();
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("streamsim-out"));
    let run = config.resolve(base)?;
    let policies = run.config.policies.clone();
    Ok((run, policies, out))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (run, policies, out) = prepare(&args)?;
            for r in experiment::simulate_to_dir(&run, &policies, &out)? {
                println!("{}", r.summary_line());
            }
            println!("wrote {}", out.display());
        }
        Command::Compare(args) => {
            let (run, policies, out) = prepare(&args)?;
            let results = experiment::compare(&run, &policies)?;
            print!("{}", experiment::compare_table(&results));
            std::fs::create_dir_all(&out).map_err(|e| streamsim::Error::io(&out, e))?;
            let path = out.join(COMPARE_FILE);
            let file = std::fs::File::create(&path).map_err(|e| streamsim::Error::io(&path, e))?;
            experiment::write_compare_csv(&results, file)?;
            println!("wrote {}", path.display());
        }
        Command::Histogram {
            log,
            bin_width,
            out,
        } => {
            let log = StreamLog::load(&log)?;
            let h = experiment::delay_histogram(&log, bin_width)?;
            if h.is_empty() {
                eprintln!("warning: log holds no jobs, histogram is empty");
            }
            print!("{h}");
            if let Some(path) = out {
                let file =
                    std::fs::File::create(&path).map_err(|e| streamsim::Error::io(&path, e))?;
                h.write_csv(file)?;
            }
        }
        Command::FitLatency {
            mean,
            std,
            min,
            samples,
            seed,
        } => {
            println!(
                "{}",
                experiment::fit_latency(mean, std, min, samples, seed)?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
